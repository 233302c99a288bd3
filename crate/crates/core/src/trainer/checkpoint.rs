use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{GROUNDING_FEATURES, JUDGMENT_FEATURES};
use super::policy::{ToyPolicy, N_PARAMS};
use super::TrainerError;

/// Policy weights as a flat array behind a small header. `dimension` is the
/// weight count, `k` the grid cells per canvas side, `g` the group size the
/// weights were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub dimension: usize,
    pub k: u32,
    pub g: usize,
    pub seed: u64,
    pub temperature: f64,
    pub weights: Vec<f64>,
}

impl Checkpoint {
    pub fn from_policy(policy: &ToyPolicy, group_size: usize, seed: u64) -> Self {
        Checkpoint {
            dimension: N_PARAMS,
            k: policy.grid_cells(),
            g: group_size,
            seed,
            temperature: policy.temperature(),
            weights: policy.params(),
        }
    }

    pub fn to_policy(&self) -> Result<ToyPolicy, TrainerError> {
        if self.dimension != N_PARAMS || self.weights.len() != N_PARAMS {
            return Err(TrainerError::Checkpoint(format!(
                "expected {N_PARAMS} weights, header says {} and array has {}",
                self.dimension,
                self.weights.len()
            )));
        }
        let (j, g) = self.weights.split_at(JUDGMENT_FEATURES);
        debug_assert_eq!(g.len(), GROUNDING_FEATURES);
        Ok(ToyPolicy::new(j.to_vec(), g.to_vec(), self.temperature)?.with_grid_cells(self.k))
    }

    pub fn load(path: &Path) -> Result<Self, TrainerError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainerError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TrainerError::Checkpoint(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }
}
