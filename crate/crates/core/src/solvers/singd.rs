use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ceil_count, SeedInfo, SolverReport, Termination, TraceEntry};
use crate::base::{segment_sample, RngStream, Vector};
use crate::certify::{Atom, GoldsteinCertificate};
use crate::error::{Error, Result};
use crate::oracles::{CountingOracle, GradientOracle};

/// Parameters of stochastic INGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingdParams {
    /// Bound `G = √(L² + σ²)` on the expected gradient norm.
    pub g: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    /// Number of momentum steps.
    pub t: u64,
    /// Look-back of the returned iterate.
    pub k: u64,
    /// `ε > G`: every point is trivially (δ, ε)-stationary.
    #[serde(default)]
    pub trivial: bool,
}

/// Step and window constants for the stochastic method:
/// `β = 1 − ε²/(64G²)`, `p = 64G² ln(16G/ε)/(δε²)`, `q = 4Gp`, `K = ⌈pδ⌉` and
/// `T = ⌈2¹⁶G³Δ ln(16G/ε)/(ε⁴δ) · max(1, Gδ/(8Δ))⌉`.
pub fn singd_params(
    lipschitz: f64,
    sigma: f64,
    epsilon: f64,
    delta: f64,
    gap: f64,
) -> Result<SingdParams> {
    for (name, v) in [
        ("lipschitz", lipschitz),
        ("epsilon", epsilon),
        ("delta", delta),
        ("gap", gap),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::contract(format!("{name} must be positive, got {v}")));
        }
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::contract("sigma must be nonnegative"));
    }
    let g = lipschitz.hypot(sigma);
    let log = (16.0 * g / epsilon).ln();
    let p = 64.0 * g * g * log / (delta * epsilon * epsilon);
    let t = 65536.0 * g.powi(3) * gap * log / (epsilon.powi(4) * delta)
        * (g * delta / (8.0 * gap)).max(1.0);
    Ok(SingdParams {
        g,
        beta: 1.0 - epsilon * epsilon / (64.0 * g * g),
        p,
        q: 4.0 * g * p,
        t: ceil_count(t),
        k: ceil_count(p * delta),
        trivial: epsilon > g,
    })
}

impl SingdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::contract("p and q must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::contract(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if self.t == 0 || self.k == 0 {
            return Err(Error::contract("T and K must be positive"));
        }
        Ok(())
    }

    /// The step-size analysis needs `pG/q ≤ β/2`.
    pub fn step_condition_holds(&self) -> bool {
        2.0 * self.p * self.g <= self.beta * self.q
    }
}

/// Stochastic INGD from `x1`; uses gradients only.
///
/// The returned point is `x_{max(i−K, 1)}` for `i` uniform on `{1..T}`,
/// drawn up front so that no iterate history has to be kept.
pub fn singd<O: GradientOracle>(
    oracle: &mut CountingOracle<O>,
    x1: &Vector,
    params: &SingdParams,
    rng: &mut RngStream,
) -> Result<SolverReport> {
    params.validate()?;
    if x1.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x1.dim(),
        });
    }
    let calls0 = oracle.calls();
    let (t_max, k) = (params.t, params.k);
    let i = rng.index(t_max as usize) as u64 + 1;
    let r = i.saturating_sub(k).max(1);
    let every = (t_max / 100).max(1);

    let mut x = x1.clone();
    let mut m = oracle.gradient(x1, &Vector::zeros(x1.dim()));
    let mut returned = x1.clone();
    let mut window = VecDeque::with_capacity(k.min(1 << 20) as usize);
    let mut sum_norm = 0.0;
    let mut trace = Vec::new();

    for t in 1..=t_max {
        let nm = m.norm();
        sum_norm += nm;
        if t % every == 0 || t == 1 {
            trace.push(TraceEntry {
                iteration: t,
                value: None,
                m_norm: nm,
            });
        }
        let eta = 1.0 / (params.p * nm + params.q);
        let next = &x - &m.scaled(eta);
        debug_assert!(next.distance(&x) < 1.0 / params.p);
        let y = segment_sample(&x, &next, rng).expect("same dimension");
        let g = oracle.gradient(&y, &-&m);
        m = &m.scaled(params.beta) + &g.scaled(1.0 - params.beta);
        x = next;
        // x now holds x_{t+1}; y is y_{t+1}
        if t + 1 == r {
            returned = x.clone();
        }
        if t >= r && t < r + k {
            window.push_back((y, g));
        }
    }

    let window_certificate = (!window.is_empty()).then(|| {
        let n = window.len() as i32;
        let norm = 1.0 - params.beta.powi(n);
        let atoms = window
            .into_iter()
            .enumerate()
            .map(|(j, (y, g))| {
                let w = if norm > 0.0 {
                    (1.0 - params.beta) * params.beta.powi(n - 1 - j as i32) / norm
                } else {
                    // β = 0: only the newest gradient survives
                    if j as i32 == n - 1 {
                        1.0
                    } else {
                        0.0
                    }
                };
                Atom {
                    point: y,
                    gradient: g,
                    weight: w,
                }
            })
            .filter(|a| a.weight > 0.0)
            .collect();
        // every step is shorter than 1/p
        GoldsteinCertificate::new(returned.clone(), k as f64 / params.p, atoms)
    });

    Ok(SolverReport {
        solver: "singd".into(),
        final_point: returned,
        certificate: None,
        window_certificate,
        oracle_calls: oracle.calls() - calls0,
        outer_iters: t_max,
        descents: 0,
        termination: Termination::BudgetExhausted,
        seed: SeedInfo {
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        },
        mean_m_norm: Some(sum_norm / t_max as f64),
        trajectory_summary: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::FunctionClassSpec;
    use crate::certify::validate_certificate;
    use crate::functions::{make_abs, DirDiffFunction};
    use crate::oracles::StochasticOracle;

    #[test]
    fn default_constants() {
        let s = singd_params(1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.g, 1.0);
        assert_eq!(s.beta, 63.0 / 64.0);
        assert!((s.p - 64.0 * 16f64.ln()).abs() < 1e-9);
        assert!((s.p - 177.445).abs() < 1e-3);
        assert!((s.q - 709.78).abs() < 1e-2);
        assert_eq!(s.k, 178);
        assert!(s.step_condition_holds());
        assert!(!s.trivial);
        assert!(singd_params(1.0, 0.0, 2.0, 1.0, 1.0).unwrap().trivial);
    }

    fn noisy_abs(sigma: f64) -> DirDiffFunction {
        make_abs()
            .with_class(FunctionClassSpec::new(1.0, 1.0).unwrap().with_variance(sigma * sigma))
            .unwrap()
    }

    #[test]
    fn steps_are_shorter_than_one_over_p() {
        let params = SingdParams {
            g: 1.0,
            beta: 0.9,
            p: 10.0,
            q: 40.0,
            t: 2000,
            k: 10,
            trivial: false,
        };
        let mut o = CountingOracle::new(StochasticOracle::new(noisy_abs(0.1), RngStream::new(1, 1)));
        let mut rng = RngStream::new(1, 0);
        let r = singd(&mut o, &Vector::scalar(1.0), &params, &mut rng).unwrap();
        assert_eq!(r.oracle_calls, 2001);
        let w = r.window_certificate.unwrap();
        assert!(w.atoms.len() <= 10);
        // the window lies inside the K/p ball; the norm clause may fail
        assert!(validate_certificate(&w, 10.0).valid);
    }

    #[test]
    fn zero_beta_uses_latest_gradient() {
        let params = SingdParams {
            g: 1.0,
            beta: 0.0,
            p: 10.0,
            q: 40.0,
            t: 50,
            k: 5,
            trivial: false,
        };
        let mut o = CountingOracle::new(StochasticOracle::new(noisy_abs(0.0), RngStream::new(2, 1)));
        let r = singd(&mut o, &Vector::scalar(1.0), &params, &mut RngStream::new(2, 0)).unwrap();
        let w = r.window_certificate.unwrap();
        assert_eq!(w.atoms.len(), 1);
        assert_eq!(w.atoms[0].weight, 1.0);
    }
}
