use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gmm::GmmEmission;
use crate::nmm::NmmEmission;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionKind {
    Gmm,
    Nmm,
}

impl std::str::FromStr for EmissionKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(EmissionKind::Gmm),
            "nmm" => Ok(EmissionKind::Nmm),
            other => Err(crate::Error::Config(format!("unknown emission kind '{other}' (gmm|nmm)"))),
        }
    }
}

impl std::fmt::Display for EmissionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmissionKind::Gmm => "gmm",
            EmissionKind::Nmm => "nmm",
        })
    }
}

/// Per-state observation densities, each a `K`-component mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissionModel {
    Gmm(GmmEmission),
    Nmm(NmmEmission),
}

impl EmissionModel {
    pub fn kind(&self) -> EmissionKind {
        match self {
            EmissionModel::Gmm(_) => EmissionKind::Gmm,
            EmissionModel::Nmm(_) => EmissionKind::Nmm,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            EmissionModel::Gmm(g) => g.num_states(),
            EmissionModel::Nmm(n) => n.num_states(),
        }
    }

    pub fn num_components(&self) -> usize {
        match self {
            EmissionModel::Gmm(g) => g.num_components,
            EmissionModel::Nmm(n) => n.num_components,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmissionModel::Gmm(g) => g.dim,
            EmissionModel::Nmm(n) => n.dim,
        }
    }

    /// Fills `per_component[k] = log π_{s,k} + log p(x | s, k)` and returns
    /// `log p(x | s)`.
    pub fn log_density_into(&self, s: usize, x: &[f64], per_component: &mut [f64]) -> Result<f64> {
        match self {
            EmissionModel::Gmm(g) => g.log_density_into(s, x, per_component),
            EmissionModel::Nmm(n) => n.log_density_into(s, x, per_component),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<(usize, Vec<f64>)> {
        match self {
            EmissionModel::Gmm(g) => Ok(g.sample(s, rng)),
            EmissionModel::Nmm(n) => n.sample(s, rng),
        }
    }

    pub fn log_weights(&self, s: usize) -> &[f64] {
        match self {
            EmissionModel::Gmm(g) => &g.states[s].log_weights,
            EmissionModel::Nmm(n) => &n.states[s].log_weights,
        }
    }
}
