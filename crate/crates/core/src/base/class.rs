use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants describing the function class `F(Δ, L)` and the oracle noise
/// levels a problem instance is run under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSpec {
    /// Lipschitz constant `L` of the objective.
    pub lipschitz: f64,
    /// Initial suboptimality bound `Δ ≥ f(x₀) − inf f`.
    pub gap: f64,
    /// Total variance `σ²` of the stochastic gradient oracle.
    #[serde(default)]
    pub variance_sigma2: f64,
    /// Standard deviation of the sub-Gaussian value noise.
    #[serde(default)]
    pub subg_sigma_f: f64,
    /// Sub-Gaussian parameter of the gradient noise.
    #[serde(default)]
    pub subg_sigma_g: f64,
}

impl FunctionClassSpec {
    pub fn new(lipschitz: f64, gap: f64) -> Result<Self> {
        let spec = Self {
            lipschitz,
            gap,
            variance_sigma2: 0.0,
            subg_sigma_f: 0.0,
            subg_sigma_g: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_variance(mut self, sigma2: f64) -> Self {
        self.variance_sigma2 = sigma2;
        self
    }

    pub fn with_subgaussian(mut self, sigma_f: f64, sigma_g: f64) -> Self {
        self.subg_sigma_f = sigma_f;
        self.subg_sigma_g = sigma_g;
        self
    }

    /// Standard deviation `σ` of the stochastic gradient noise.
    pub fn sigma(&self) -> f64 {
        self.variance_sigma2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.lipschitz) {
            return Err(Error::contract(format!(
                "lipschitz constant must be positive, got {}",
                self.lipschitz
            )));
        }
        if !positive(self.gap) {
            return Err(Error::contract(format!("gap must be positive, got {}", self.gap)));
        }
        for (name, v) in [
            ("variance_sigma2", self.variance_sigma2),
            ("subg_sigma_f", self.subg_sigma_f),
            ("subg_sigma_g", self.subg_sigma_g),
        ] {
            if !nonneg(v) {
                return Err(Error::contract(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_constants() {
        assert!(FunctionClassSpec::new(0.0, 1.0).is_err());
        assert!(FunctionClassSpec::new(1.0, -1.0).is_err());
        assert!(FunctionClassSpec::new(1.0, 1.0)
            .unwrap()
            .with_variance(-0.1)
            .validate()
            .is_err());
    }

    #[test]
    fn deterministic_regime_has_zero_variance() {
        let spec = FunctionClassSpec::new(2.0, 3.0).unwrap();
        assert_eq!(spec.variance_sigma2, 0.0);
        assert_eq!(spec.with_variance(0.25).sigma(), 0.5);
    }
}
