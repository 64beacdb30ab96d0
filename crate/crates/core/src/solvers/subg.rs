use serde::{Deserialize, Serialize};

use super::{ceil_count, SeedInfo, SolverReport, Termination, TraceEntry};
use crate::base::{segment_sample, FunctionClassSpec, RngStream, Vector};
use crate::error::{Error, Result};
use crate::oracles::{CountingOracle, GradientOracle, ValueOracle};

/// Parameters of sub-Gaussian INGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgParams {
    pub delta: f64,
    pub epsilon: f64,
    pub lipschitz: f64,
    /// Batch size of the initial direction estimate.
    pub s1: u64,
    /// Batch size of the interpolated-gradient estimate.
    pub s2: u64,
    /// Batch size of each function-value estimate.
    pub s3: u64,
    /// Inner iterations.
    pub j: u64,
    /// Outer iterations.
    pub k_outer: u64,
}

impl SubgParams {
    /// Batch sizes that make the noisy estimates concentrate, with `λ = ln(LΔ/(δεγ))`:
    /// `S₁ = ⌈12σ_g²λ/ε²⌉`, `S₂ = ⌈12σ_f²λ/(ε²δ²)⌉`, `S₃ = ⌈12(σ_g²+L²)λ/ε²⌉`,
    /// `J = ⌈4L²/ε²⌉` and `K = ⌈4Δ/(δε)⌉`.
    pub fn new(class: &FunctionClassSpec, delta: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        class.validate()?;
        if !(delta > 0.0 && epsilon > 0.0 && delta.is_finite() && epsilon.is_finite()) {
            return Err(Error::contract("delta and epsilon must be positive"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::contract("gamma must lie in (0, 1)"));
        }
        let (l, gap) = (class.lipschitz, class.gap);
        let (sf2, sg2) = (class.subg_sigma_f.powi(2), class.subg_sigma_g.powi(2));
        let log = (l * gap / (delta * epsilon * gamma)).ln();
        let e2 = epsilon * epsilon;
        Ok(Self {
            delta,
            epsilon,
            lipschitz: l,
            s1: ceil_count(12.0 * sg2 / e2 * log),
            s2: ceil_count(12.0 * sf2 / (e2 * delta * delta) * log),
            s3: ceil_count(12.0 * (sg2 + l * l) / e2 * log),
            j: ceil_count(4.0 * l * l / e2),
            k_outer: ceil_count(4.0 * gap / (delta * epsilon)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.epsilon > 0.0 && self.lipschitz > 0.0) {
            return Err(Error::contract("delta, epsilon and lipschitz must be positive"));
        }
        if [self.s1, self.s2, self.s3, self.j, self.k_outer].contains(&0) {
            return Err(Error::contract("sample sizes and iteration counts must be positive"));
        }
        Ok(())
    }

    /// `(2L² − ‖m‖ε/2) / (2(‖m‖² + L² − ‖m‖ε/2))`, clipped to `[0, 1]`.
    pub fn beta(&self, m_norm: f64) -> f64 {
        let l2 = self.lipschitz * self.lipschitz;
        let c = m_norm * self.epsilon / 2.0;
        let b = (2.0 * l2 - c) / (2.0 * (m_norm * m_norm + l2 - c));
        if b.is_finite() {
            b.clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

fn mean_gradient<O: ValueOracle>(
    o: &mut CountingOracle<O>,
    n: u64,
    mut point: impl FnMut() -> Vector,
    d: &Vector,
) -> Vector {
    let mut acc = Vector::zeros(d.dim());
    for _ in 0..n {
        acc.axpy(1.0, &o.gradient(&point(), d));
    }
    acc.scaled(1.0 / n as f64)
}

fn mean_value<O: ValueOracle>(o: &mut CountingOracle<O>, n: u64, x: &Vector) -> f64 {
    let zero = Vector::zeros(x.dim());
    (0..n).map(|_| o.query(x, &zero).0).sum::<f64>() / n as f64
}

/// INGD with batch-averaged noisy values and gradients.
///
/// Follows the published pseudocode, with two readings made explicit: the
/// sufficient-decrease test compares against the batch value at the
/// current outer iterate, and after an inner loop ends (by descent or by
/// running out of iterations) the next outer iterate is the last trial
/// point. Returns `x_k` when `‖m‖ ≤ ε/2` or the batch gradient has norm
/// at most `ε/2` (reported as [`Termination::CertifiedStationary`], without
/// an attached certificate).
pub fn subgaussian_ingd<O: ValueOracle>(
    oracle: &mut CountingOracle<O>,
    x1: &Vector,
    params: &SubgParams,
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
    let (delta, eps) = (params.delta, params.epsilon);
    let zero = Vector::zeros(x1.dim());
    let mut x = x1.clone();
    let mut trace = Vec::new();
    let mut descents = 0;
    let mut termination = Termination::BudgetExhausted;
    let mut outer = 0;

    'outer: for k in 1..=params.k_outer {
        if oracle.would_exceed(params.s1 + params.s3) {
            break;
        }
        outer = k;
        let mut m = mean_gradient(oracle, params.s1, || x.clone(), &zero);
        let f1 = mean_value(oracle, params.s3, &x);
        trace.push(TraceEntry {
            iteration: k,
            value: Some(f1),
            m_norm: m.norm(),
        });
        let mut next = x.clone();
        for _ in 0..params.j {
            let nm = m.norm();
            if nm == 0.0 {
                termination = Termination::CertifiedStationary;
                break 'outer;
            }
            if oracle.would_exceed(params.s2 + params.s3) {
                break 'outer;
            }
            next = &x - &m.scaled(delta / nm);
            let g = mean_gradient(
                oracle,
                params.s2,
                || segment_sample(&x, &next, rng).expect("same dimension"),
                &-&m,
            );
            if nm <= eps / 2.0 || g.norm() <= eps / 2.0 {
                termination = Termination::CertifiedStationary;
                break 'outer;
            }
            let f_next = mean_value(oracle, params.s3, &next);
            if f_next - f1 >= -delta * eps / 2.0 {
                let beta = params.beta(nm);
                m = &m.scaled(beta) + &g.scaled(1.0 - beta);
            } else {
                descents += 1;
                break;
            }
        }
        x = next;
    }

    Ok(SolverReport {
        solver: "subg".into(),
        final_point: x,
        certificate: None,
        window_certificate: None,
        oracle_calls: oracle.calls() - calls0,
        outer_iters: outer,
        descents,
        termination,
        seed: SeedInfo {
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        },
        mean_m_norm: None,
        trajectory_summary: trace,
    })
}
