//! Instance files: a self-describing JSON schema for symmetric weakly
//! coupled instances — one shared sub-MDP, sub-MDP independent consumption —
//! plus an optional metadata block echoing the generator configuration so
//! any instance can be regenerated bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::MachineReplacementConfig;
use crate::model::{is_symmetric, SubMdp, WcmdpSpec};

/// Probability rows may drift this far from one before the loader rejects
/// the file instead of renormalizing.
pub const ROW_DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub num_submdps: usize,
    pub states: usize,
    pub actions: usize,
    /// `transition[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    /// `consumption[k][a]`, shared by every sub-MDP.
    pub consumption: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
    pub discount: f64,
    /// `initial[s]`, shared by every sub-MDP.
    pub initial: Vec<f64>,
    pub symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MachineReplacementConfig>,
}

impl InstanceFile {
    pub fn from_spec(
        spec: &WcmdpSpec<f64>,
        metadata: Option<MachineReplacementConfig>,
    ) -> Result<Self> {
        if !is_symmetric(spec, 1e-9) {
            return Err(Error::NotSymmetric(
                "the instance file schema stores one shared sub-MDP".into(),
            ));
        }
        let sub = spec.sub_mdp(0);
        let s_count = sub.num_states();
        let a_count = sub.num_actions();
        let transition = (0..s_count)
            .map(|s| {
                (0..a_count)
                    .map(|a| sub.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect();
        let reward = (0..s_count)
            .map(|s| (0..a_count).map(|a| sub.r(s, a)).collect())
            .collect();
        let consumption = spec.shared_consumption();
        Ok(Self {
            num_submdps: spec.num_submdps(),
            states: s_count,
            actions: a_count,
            transition,
            reward,
            consumption,
            budgets: spec.budgets().to_vec(),
            discount: spec.discount(),
            initial: sub.initial().to_vec(),
            symmetric: true,
            metadata,
        })
    }

    /// Rebuild the instance, renormalizing probability rows whose drift stays
    /// under [`ROW_DRIFT_TOL`] and rejecting anything further off.
    pub fn to_spec(&self) -> Result<WcmdpSpec<f64>> {
        let s_count = self.states;
        let a_count = self.actions;
        if self.transition.len() != s_count
            || self.reward.len() != s_count
            || self.initial.len() != s_count
        {
            return Err(Error::BadInstanceFile(
                "table shapes disagree with the declared state count".into(),
            ));
        }
        let renormalize = |row: &[f64], what: &str| -> Result<Vec<f64>> {
            if row.iter().any(|p| !(0.0..=1.0 + ROW_DRIFT_TOL).contains(p)) {
                return Err(Error::BadInstanceFile(format!(
                    "{what} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() >= ROW_DRIFT_TOL {
                return Err(Error::BadInstanceFile(format!(
                    "{what} sums to {sum}, drift exceeds {ROW_DRIFT_TOL}"
                )));
            }
            Ok(row.iter().map(|p| p / sum).collect())
        };

        let mut transition = Vec::with_capacity(s_count * a_count * s_count);
        for s in 0..s_count {
            if self.transition[s].len() != a_count || self.reward[s].len() != a_count {
                return Err(Error::BadInstanceFile(
                    "table shapes disagree with the declared action count".into(),
                ));
            }
            for a in 0..a_count {
                if self.transition[s][a].len() != s_count {
                    return Err(Error::BadInstanceFile(
                        "transition row length mismatch".into(),
                    ));
                }
                transition.extend(renormalize(
                    &self.transition[s][a],
                    &format!("transition row ({s},{a})"),
                )?);
            }
        }
        let initial = renormalize(&self.initial, "initial distribution")?;
        let reward: Vec<f64> = self.reward.iter().flatten().copied().collect();
        let sub = SubMdp::new(s_count, a_count, transition, reward, initial)
            .map_err(|e| Error::BadInstanceFile(e.to_string()))?;

        for row in &self.consumption {
            if row.len() != a_count {
                return Err(Error::BadInstanceFile(
                    "consumption row length mismatch".into(),
                ));
            }
        }
        let n = self.num_submdps;
        WcmdpSpec::new(
            vec![sub; n],
            self.consumption
                .iter()
                .map(|row| vec![row.clone(); n])
                .collect(),
            self.budgets.clone(),
            self.discount,
        )
        .map_err(|e| Error::BadInstanceFile(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Convenience: write a symmetric spec with optional generator metadata.
pub fn save_instance(
    spec: &WcmdpSpec<f64>,
    metadata: Option<MachineReplacementConfig>,
    path: &Path,
) -> Result<()> {
    InstanceFile::from_spec(spec, metadata)?.save(path)
}

/// Convenience: load and rebuild a spec plus its metadata block.
pub fn load_instance(path: &Path) -> Result<(WcmdpSpec<f64>, Option<MachineReplacementConfig>)> {
    let file = InstanceFile::load(path)?;
    let spec = file.to_spec()?;
    Ok((spec, file.metadata))
}
