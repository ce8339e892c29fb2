//! Permutations of sub-MDP indices, used by symmetry tests and the
//! permutation-averaging constructions.

use crate::error::{Error, Result};

/// A bijection on `[0, n)`. `apply` maps `output[i] = input[sigma[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n || seen[i] {
                return Err(Error::BadPermutation(n));
            }
            seen[i] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.map
    }

    /// `output[i] = input[sigma[i]]`.
    pub fn apply<E: Clone>(&self, input: &[E]) -> Result<Vec<E>> {
        if input.len() != self.map.len() {
            return Err(Error::LengthMismatch {
                expected: self.map.len(),
                got: input.len(),
            });
        }
        Ok(self.map.iter().map(|&i| input[i].clone()).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self { map: inv }
    }

    /// Composition `(self ∘ other)`: applying the result equals applying
    /// `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        let map = self.apply(&other.map)?;
        Ok(Self { map })
    }
}

/// All `n!` permutations of `[0, n)` in lexicographic order. Intended for the
/// exhaustive symmetry checks at small `n`; refuses to build beyond n = 8.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    assert!(n <= 8, "exhaustive permutation enumeration capped at n = 8");
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    enumerate(n, &mut current, &mut used, &mut out);
    out
}

fn enumerate(n: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
    if current.len() == n {
        out.push(Permutation {
            map: current.clone(),
        });
        return;
    }
    for i in 0..n {
        if !used[i] {
            used[i] = true;
            current.push(i);
            enumerate(n, current, used, out);
            current.pop();
            used[i] = false;
        }
    }
}
