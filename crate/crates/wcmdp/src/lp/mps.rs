//! Fixed-format MPS export for cross-validation against external solvers.
//!
//! Fixed MPS caps names at eight characters, so rows and columns get
//! positional names (`C0000001`, `E0000001`, ...) and the human-readable
//! variable map is emitted as leading comment lines.

use std::io::Write;

use crate::error::Result;
use crate::scalar::Scalar;

use super::LinearProgram;

/// Render a value into the 12-character numeric field of fixed MPS.
fn field<T: Scalar>(value: T) -> String {
    let v = value.to_f64_lossy();
    if v == 0.0 {
        return "0.0".into();
    }
    let s = if v < 0.0 {
        format!("{v:.5E}")
    } else {
        format!("{v:.6E}")
    };
    debug_assert!(s.len() <= 12, "MPS field overflow: {s}");
    s
}

fn line2(f1: &str, f2: &str) -> String {
    format!(" {f1:<2} {f2:<8}")
}

fn line4(f1: &str, f2: &str, f3: &str, f4: &str) -> String {
    format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}")
}

/// Write `lp` (a maximization; MPS consumers conventionally minimize, so the
/// objective row is negated) in fixed MPS format.
pub fn write_mps<T: Scalar, W: Write>(
    lp: &LinearProgram<T>,
    name: &str,
    out: &mut W,
) -> Result<()> {
    lp.check_shape()?;
    writeln!(out, "* Maximization exported as minimize -c'x")?;
    for (j, human) in lp.names.iter().enumerate() {
        writeln!(out, "* C{:07} = {human}", j + 1)?;
    }
    writeln!(out, "NAME          {name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, "{}", line2("N", "OBJ"))?;
    for i in 0..lp.le.len() {
        writeln!(out, "{}", line2("L", &format!("L{:07}", i + 1)))?;
    }
    for i in 0..lp.eq.len() {
        writeln!(out, "{}", line2("E", &format!("E{:07}", i + 1)))?;
    }

    writeln!(out, "COLUMNS")?;
    for j in 0..lp.num_vars {
        let col = format!("C{:07}", j + 1);
        if lp.objective[j] != T::zero() {
            writeln!(out, "{}", line4("", &col, "OBJ", &field(-lp.objective[j])))?;
        }
        for (i, row) in lp.le.iter().enumerate() {
            if row[j] != T::zero() {
                writeln!(
                    out,
                    "{}",
                    line4("", &col, &format!("L{:07}", i + 1), &field(row[j]))
                )?;
            }
        }
        for (i, row) in lp.eq.iter().enumerate() {
            if row[j] != T::zero() {
                writeln!(
                    out,
                    "{}",
                    line4("", &col, &format!("E{:07}", i + 1), &field(row[j]))
                )?;
            }
        }
    }

    writeln!(out, "RHS")?;
    for (i, &rhs) in lp.le_rhs.iter().enumerate() {
        if rhs != T::zero() {
            writeln!(
                out,
                "{}",
                line4("", "RHS", &format!("L{:07}", i + 1), &field(rhs))
            )?;
        }
    }
    for (i, &rhs) in lp.eq_rhs.iter().enumerate() {
        if rhs != T::zero() {
            writeln!(
                out,
                "{}",
                line4("", "RHS", &format!("E{:07}", i + 1), &field(rhs))
            )?;
        }
    }

    if lp.free.iter().any(|&f| f) {
        writeln!(out, "BOUNDS")?;
        for (j, &f) in lp.free.iter().enumerate() {
            if f {
                writeln!(out, "{}", line4("FR", "BND", &format!("C{:07}", j + 1), ""))?;
            }
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}
