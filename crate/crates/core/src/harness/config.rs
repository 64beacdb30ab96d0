use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base::{FunctionClassSpec, Vector};
use crate::error::{Error, Result};
use crate::functions::{DirDiffFunction, FunctionDescriptor};

fn default_trials() -> u64 {
    1
}

fn default_gamma() -> f64 {
    0.1
}

fn default_certify_samples() -> usize {
    1000
}

/// One experiment: an objective, a starting point, a solver, an oracle
/// regime and a number of seeded trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: FunctionDescriptor,
    pub x0: Vector,
    /// Lipschitz constant handed to the solver; defaults to the objective's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Initial suboptimality bound `Δ`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Ball samples used to certify points that come without a certificate.
    #[serde(default = "default_certify_samples")]
    pub certify_samples: usize,
    /// Optional cap on oracle calls per trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_calls: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Ingd {
        delta: f64,
        epsilon: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner_k: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outer_t: Option<u64>,
    },
    Singd {
        delta: f64,
        epsilon: f64,
        /// Overrides the number of steps `T`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<u64>,
    },
    Subg {
        delta: f64,
        epsilon: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ingd { .. } => "ingd",
            Self::Singd { .. } => "singd",
            Self::Subg { .. } => "subg",
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Self::Ingd { delta, .. } | Self::Singd { delta, .. } | Self::Subg { delta, .. } => delta,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            Self::Ingd { epsilon, .. }
            | Self::Singd { epsilon, .. }
            | Self::Subg { epsilon, .. } => epsilon,
        }
    }

    /// Copy with `δ` and `ε` replaced.
    pub fn with_tolerances(&self, delta: f64, epsilon: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            Self::Ingd {
                delta: d,
                epsilon: e,
                ..
            }
            | Self::Singd {
                delta: d,
                epsilon: e,
                ..
            }
            | Self::Subg {
                delta: d,
                epsilon: e,
                ..
            } => {
                *d = delta;
                *e = epsilon;
            }
        }
        c
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    #[default]
    Deterministic,
    /// Gradient noise of total variance `sigma2`.
    Stochastic { sigma2: f64 },
    /// Value noise `sigma_f`, gradient noise of total variance `sigma_g²`.
    Subgaussian { sigma_f: f64, sigma_g: f64 },
}

impl OracleConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Deterministic => "deterministic",
            Self::Stochastic { .. } => "stochastic",
            Self::Subgaussian { .. } => "subgaussian",
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be nonnegative and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        super::canonical_json(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.certify_samples == 0 {
            return Err(Error::config("certify_samples", "must be at least 1"));
        }
        if let Some(l) = self.lipschitz {
            positive("lipschitz", l)?;
        }
        if let Some(g) = self.gap {
            positive("gap", g)?;
        }
        positive("solver.delta", self.solver.delta())?;
        positive("solver.epsilon", self.solver.epsilon())?;
        match &self.solver {
            SolverConfig::Ingd { gamma, .. } | SolverConfig::Subg { gamma, .. } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(Error::config("solver.gamma", "must lie in (0, 1)"));
                }
            }
            SolverConfig::Singd { .. } => {}
        }
        match &self.oracle {
            OracleConfig::Deterministic => {}
            OracleConfig::Stochastic { sigma2 } => nonnegative("oracle.sigma2", *sigma2)?,
            OracleConfig::Subgaussian { sigma_f, sigma_g } => {
                nonnegative("oracle.sigma_f", *sigma_f)?;
                nonnegative("oracle.sigma_g", *sigma_g)?;
            }
        }
        let compatible = matches!(
            (&self.solver, &self.oracle),
            (_, OracleConfig::Deterministic)
                | (SolverConfig::Singd { .. }, OracleConfig::Stochastic { .. })
                | (SolverConfig::Subg { .. }, OracleConfig::Subgaussian { .. })
        );
        if !compatible {
            return Err(Error::config(
                "oracle.regime",
                format!(
                    "solver {} cannot run against the {} oracle",
                    self.solver.name(),
                    self.oracle.name()
                ),
            ));
        }
        let f = self
            .objective
            .build()
            .map_err(|e| Error::config("objective", e.to_string()))?;
        if f.dim() != self.x0.dim() {
            return Err(Error::config(
                "x0",
                format!("objective has dimension {}, x0 has {}", f.dim(), self.x0.dim()),
            ));
        }
        Ok(())
    }

    /// The objective with the configured class constants and noise levels.
    pub fn function(&self) -> Result<DirDiffFunction> {
        let f = self.objective.build()?;
        let mut class = FunctionClassSpec::new(
            self.lipschitz.unwrap_or_else(|| f.lipschitz()),
            self.gap.unwrap_or(1.0),
        )?;
        match self.oracle {
            OracleConfig::Deterministic => {}
            OracleConfig::Stochastic { sigma2 } => class = class.with_variance(sigma2),
            OracleConfig::Subgaussian { sigma_f, sigma_g } => {
                class = class.with_subgaussian(sigma_f, sigma_g)
            }
        }
        f.with_class(class)
    }
}
