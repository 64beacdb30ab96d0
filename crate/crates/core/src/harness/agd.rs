use serde::{Deserialize, Serialize};

use crate::base::{RngStream, Vector};
use crate::error::{Error, Result};
use crate::functions::make_quadratic;
use crate::oracles::InexactGradOracle;
use crate::solvers::{agd_error_bound, inexact_agd};

/// Inexact AGD on `½xᵀQx + bᵀx` over seeded trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgdExperiment {
    pub q: Vec<Vector>,
    pub b: Vector,
    pub x0: Vector,
    /// Gradient noise variance `C`.
    pub noise: f64,
    /// Defaults to `√(μ/L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    pub steps: usize,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
}

impl AgdExperiment {
    /// The testbed `Q = diag(0.25, 1)`, `b = 0`, `x₀ = (2, −1)`.
    pub fn testbed(noise: f64, steps: usize, trials: u64) -> Self {
        Self {
            q: vec![Vector::from_slice(&[0.25, 0.0]), Vector::from_slice(&[0.0, 1.0])],
            b: Vector::zeros(2),
            x0: Vector::from_slice(&[2.0, -1.0]),
            noise,
            alpha0: None,
            steps,
            trials,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgdSummary {
    pub mu: f64,
    pub l: f64,
    pub phi0: f64,
    /// Mean and standard error of `Φ_k` across trials, `k = 0..=steps`.
    pub mean_phi: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `Π_{j<k}(1 − α_j)·Φ₀ + E_{k−1}`, the bound obtained by unrolling the
    /// one-step inequality `Φ_{k+1} ≤ (1 − α_k)Φ_k + C/L`.
    pub bound: Vec<f64>,
    /// Largest `Φ_{k+1} / ((1 − α_k)Φ_k) − 1` over all trials and steps.
    pub worst_contraction: f64,
    /// `mean_phi ≤ bound + 3·std_err` at every step.
    pub within_bound: bool,
}

pub fn run_agd_experiment(e: &AgdExperiment) -> Result<AgdSummary> {
    if e.trials == 0 {
        return Err(Error::contract("need at least one trial"));
    }
    let f = make_quadratic(&e.q, &e.b)?;
    let (mu, l) = (f.strong_convexity(), f.grad_lipschitz());
    let alpha0 = e.alpha0.unwrap_or((mu / l).sqrt());
    let oracle = InexactGradOracle::new(f, e.noise)?;

    let n = e.steps + 1;
    let (mut sum, mut sum_sq) = (vec![0.0; n], vec![0.0; n]);
    let mut worst = f64::NEG_INFINITY;
    let mut alphas = Vec::new();
    for trial in 0..e.trials {
        let mut rng = RngStream::new(e.base_seed, trial);
        let run = inexact_agd(&oracle, &e.x0, mu, l, alpha0, e.steps, &mut rng)?;
        for (k, &phi) in run.lyapunov.iter().enumerate() {
            sum[k] += phi;
            sum_sq[k] += phi * phi;
        }
        alphas = run.alphas();
        for (k, w) in run.lyapunov.windows(2).enumerate() {
            let rate = 1.0 - alphas[k];
            if w[0] > 0.0 {
                worst = worst.max(w[1] / (rate * w[0]) - 1.0);
            }
        }
    }

    let t = e.trials as f64;
    let mean_phi: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let std_err: Vec<f64> = if e.trials > 1 {
        sum_sq
            .iter()
            .zip(&mean_phi)
            .map(|(sq, m)| ((sq - t * m * m).max(0.0) / (t - 1.0) / t).sqrt())
            .collect()
    } else {
        vec![0.0; n]
    };
    let phi0 = mean_phi[0];
    let mut bound = Vec::with_capacity(n);
    let mut contraction = 1.0;
    for k in 0..n {
        let err = if k == 0 {
            0.0
        } else {
            agd_error_bound(&alphas[..k], e.noise, l)?
        };
        bound.push(contraction * phi0 + err);
        if k < e.steps {
            contraction *= 1.0 - alphas[k];
        }
    }
    let within_bound = mean_phi
        .iter()
        .zip(&std_err)
        .zip(&bound)
        .all(|((m, s), b)| *m <= b + 3.0 * s);
    Ok(AgdSummary {
        mu,
        l,
        phi0,
        mean_phi,
        std_err,
        bound,
        worst_contraction: worst,
        within_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_testbed_contracts() {
        let s = run_agd_experiment(&AgdExperiment::testbed(0.0, 100, 1)).unwrap();
        assert_eq!(s.mu, 0.25);
        assert_eq!(s.l, 1.0);
        assert!(s.worst_contraction <= 1e-10);
        assert!(s.within_bound);
    }

    #[test]
    fn noisy_testbed_stays_within_bound() {
        let s = run_agd_experiment(&AgdExperiment::testbed(1e-3, 50, 100)).unwrap();
        assert!(s.within_bound);
        assert!(s.mean_phi[50] > 0.0);
    }
}
