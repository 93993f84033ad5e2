//! Neighbour-domain memory traffic for the loaded scenario.

use serde::{Deserialize, Serialize};

use crate::system::{SimError, System};
use crate::HartId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    /// Global contention level in `[0, 1]`.
    pub intensity: f64,
    /// Cycles between memory bursts on each load hart.
    pub period: u64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            intensity: 1.0,
            period: 1_000,
        }
    }
}

/// Sets the contention level and starts periodic traffic on `harts`, which
/// must all belong to the root cell.
pub fn attach_load(sys: &mut System, harts: &[HartId], cfg: LoadConfig) -> Result<(), SimError> {
    let hv = sys
        .hv
        .as_ref()
        .ok_or_else(|| SimError::Setup("load generator needs a partitioned system".into()))?;
    if let Some(h) = harts.iter().find(|&&h| !hv.root().owns_hart(h)) {
        return Err(SimError::Setup(format!("load hart {h} is not in the root cell")));
    }
    if cfg.period == 0 {
        return Err(SimError::Setup("load period must be positive".into()));
    }
    sys.plat
        .kernel
        .set_level(cfg.intensity)
        .map_err(|e| SimError::Setup(e.to_string()))?;
    sys.load_harts = harts.to_vec();
    sys.load_period = cfg.period;
    Ok(())
}
