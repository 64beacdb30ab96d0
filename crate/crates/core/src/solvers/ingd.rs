use serde::{Deserialize, Serialize};

use super::{ceil_count, LazyWeights, SeedInfo, SolverReport, Termination, TraceEntry};
use crate::base::{segment_sample, RngStream, Vector};
use crate::certify::{Atom, GoldsteinCertificate};
use crate::error::{Error, Result};
use crate::oracles::{CountingOracle, GradientOracle, ValueOracle};

/// Parameters of deterministic INGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngdParams {
    pub delta: f64,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub gap: f64,
    pub gamma: f64,
    /// Inner iterations per pass, `K`.
    pub inner_k: u64,
    /// Outer iterations, `T`.
    pub outer_t: u64,
}

impl IngdParams {
    /// Defaults `K = ⌈48L²/ε²⌉` and `T = ⌈4Δ/(εδ)⌉`.
    pub fn new(delta: f64, epsilon: f64, lipschitz: f64, gap: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            delta,
            epsilon,
            lipschitz,
            gap,
            gamma,
            inner_k: ceil_count(48.0 * lipschitz * lipschitz / (epsilon * epsilon)),
            outer_t: ceil_count(4.0 * gap / (epsilon * delta)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("lipschitz", self.lipschitz),
            ("gap", self.gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::contract(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.inner_k == 0 || self.outer_t == 0 {
            return Err(Error::contract("inner_k and outer_t must be positive"));
        }
        Ok(())
    }

    /// Inner passes allowed per outer iteration: `⌈ln(4Δ/(γδε))⌉`.
    pub fn max_passes(&self) -> u64 {
        ceil_count((4.0 * self.gap / (self.gamma * self.delta * self.epsilon)).ln())
    }

    /// The momentum weight `(4L² − ‖m‖²)/(4L² + 2‖m‖²)`.
    pub fn beta(&self, m_norm: f64) -> f64 {
        let l2 = 4.0 * self.lipschitz * self.lipschitz;
        let m2 = m_norm * m_norm;
        (l2 - m2) / (l2 + 2.0 * m2)
    }

    /// `f(x_{t,k}) − f(x_t) < −δ‖m‖/4`.
    pub fn is_descent(&self, decrease: f64, m_norm: f64) -> bool {
        decrease < -self.delta * m_norm / 4.0
    }

    /// Total oracle calls allowed by the complexity bound
    /// `192ΔL²/(ε³δ)·ln(4Δ/(γδε))`.
    pub fn call_budget(&self) -> f64 {
        192.0 * self.gap * self.lipschitz.powi(2) / (self.epsilon.powi(3) * self.delta)
            * (4.0 * self.gap / (self.gamma * self.delta * self.epsilon)).ln()
    }
}

enum Pass {
    Stationary(GoldsteinCertificate),
    Descent(Vector),
    Exhausted,
    OutOfCalls,
}

/// How a pass ended, with `f(x_t)` and the last `‖m‖`.
struct PassEnd {
    pass: Pass,
    value: f64,
    m_norm: f64,
}

/// State of one inner search around `x_t`.
struct Search {
    m: Vector,
    points: Vec<Vector>,
    grads: Vec<Vector>,
    weights: LazyWeights,
}

impl Search {
    fn start(x: &Vector, g: Vector) -> Self {
        let mut weights = LazyWeights::default();
        weights.reset();
        weights.mix(0.0);
        Self {
            m: g.clone(),
            points: vec![x.clone()],
            grads: vec![g],
            weights,
        }
    }

    fn mix(&mut self, beta: f64, y: Vector, g: Vector) {
        self.m = &self.m.scaled(beta) + &g.scaled(1.0 - beta);
        self.weights.mix(beta);
        self.points.push(y);
        self.grads.push(g);
    }

    fn certificate(&self, center: &Vector, delta: f64) -> GoldsteinCertificate {
        let atoms = self
            .points
            .iter()
            .zip(&self.grads)
            .zip(self.weights.weights())
            .filter(|(_, w)| *w > 0.0)
            .map(|((p, g), w)| Atom {
                point: p.clone(),
                gradient: g.clone(),
                weight: w,
            })
            .collect();
        GoldsteinCertificate::new(center.clone(), delta, atoms)
    }
}

fn inner_pass<O: ValueOracle>(
    oracle: &mut CountingOracle<O>,
    x: &Vector,
    p: &IngdParams,
    rng: &mut RngStream,
) -> PassEnd {
    let zero = Vector::zeros(x.dim());
    let (fx, g) = oracle.query(x, &zero);
    let mut s = Search::start(x, g);
    let end = |pass, m_norm| PassEnd {
        pass,
        value: fx,
        m_norm,
    };
    for _ in 0..p.inner_k {
        let nm = s.m.norm();
        if nm <= p.epsilon {
            return end(Pass::Stationary(s.certificate(x, p.delta)), nm);
        }
        if oracle.exhausted() {
            return end(Pass::OutOfCalls, nm);
        }
        let xk = x - &s.m.scaled(p.delta / nm);
        let (fk, _) = oracle.query(&xk, &zero);
        if p.is_descent(fk - fx, nm) {
            return end(Pass::Descent(xk), nm);
        }
        if oracle.exhausted() {
            return end(Pass::OutOfCalls, nm);
        }
        let y = segment_sample(x, &xk, rng).expect("same dimension");
        let g = oracle.gradient(&y, &-&s.m);
        s.mix(p.beta(nm), y, g);
    }
    let nm = s.m.norm();
    end(Pass::Exhausted, nm)
}

/// Deterministic INGD from `x1`.
///
/// Each outer iteration runs up to [`IngdParams::max_passes`] inner searches
/// of `K` steps. A search stops early when `‖m‖ ≤ ε` (stationary, with a
/// certificate whose atoms are `x_t` and the interpolation points) or when
/// the sufficient-decrease test accepts the trial point `x_t − δ m/‖m‖`.
/// A call limit on `oracle` ends the run early at the current `x_t`.
pub fn ingd_deterministic<O: ValueOracle>(
    oracle: &mut CountingOracle<O>,
    x1: &Vector,
    params: &IngdParams,
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
    let mut x = x1.clone();
    let mut trace = Vec::new();
    let mut descents = 0;
    let mut t = 1;

    let (termination, certificate) = 'outer: loop {
        for _ in 0..params.max_passes() {
            if oracle.exhausted() {
                break 'outer (Termination::BudgetExhausted, None);
            }
            let end = inner_pass(oracle, &x, params, rng);
            let mut record = || {
                trace.push(TraceEntry {
                    iteration: t,
                    value: Some(end.value),
                    m_norm: end.m_norm,
                })
            };
            match end.pass {
                Pass::Stationary(cert) => {
                    record();
                    break 'outer (Termination::CertifiedStationary, Some(cert));
                }
                Pass::Descent(to) => {
                    record();
                    x = to;
                    descents += 1;
                    t += 1;
                    if t > params.outer_t {
                        break 'outer (Termination::DescentBudgetExceeded, None);
                    }
                    continue 'outer;
                }
                Pass::Exhausted => record(),
                Pass::OutOfCalls => {
                    record();
                    break 'outer (Termination::BudgetExhausted, None);
                }
            }
        }
        break (Termination::BudgetExhausted, None);
    };

    Ok(SolverReport {
        solver: "ingd".into(),
        final_point: x,
        certificate,
        window_certificate: None,
        oracle_calls: oracle.calls() - calls0,
        outer_iters: t.min(params.outer_t),
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

/// `‖m_{t,k}‖²` for `k = 1..=k_max` of a single inner search at `x_t` with
/// the stationarity exit and the descent test disabled.
///
/// Once `m` vanishes the remaining entries are zero. Used to check the
/// expected decrease of the inner loop empirically.
pub fn ingd_inner_norms<O: ValueOracle>(
    oracle: &mut CountingOracle<O>,
    x: &Vector,
    params: &IngdParams,
    k_max: usize,
    rng: &mut RngStream,
) -> Vec<f64> {
    let zero = Vector::zeros(x.dim());
    let (_, mut m) = oracle.query(x, &zero);
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let nm = m.norm();
        out.push(nm * nm);
        if nm == 0.0 {
            continue;
        }
        let xk = x - &m.scaled(params.delta / nm);
        let y = segment_sample(x, &xk, rng).expect("same dimension");
        let g = oracle.gradient(&y, &-&m);
        let beta = params.beta(nm);
        m = &m.scaled(beta) + &g.scaled(1.0 - beta);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::validate_certificate;
    use crate::functions::make_abs;
    use crate::oracles::DeterministicOracle;

    #[test]
    fn beta_at_full_norm_is_half() {
        let p = IngdParams::new(0.1, 0.1, 2.0, 1.0, 0.1).unwrap();
        assert_eq!(p.beta(2.0), 0.5);
        assert_eq!(p.beta(0.0), 1.0);
    }

    #[test]
    fn descent_test_example() {
        let p = IngdParams::new(0.1, 0.1, 1.0, 1.0, 0.1).unwrap();
        assert!(p.is_descent(-0.10, 2.0));
        assert!(!p.is_descent(-0.05, 2.0));
    }

    #[test]
    fn default_counts() {
        let p = IngdParams::new(0.1, 0.1, 1.0, 1.0, 0.1).unwrap();
        assert_eq!(p.inner_k, 4800);
        assert_eq!(p.outer_t, 400);
        assert_eq!(p.max_passes(), 9);
        assert!((p.call_budget() - 1.5925e7).abs() < 1e4);
        assert!(IngdParams::new(0.1, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn certifies_abs_near_kink() {
        let p = IngdParams::new(0.3, 0.1, 1.0, 1.0, 0.1).unwrap();
        for seed in 0..20 {
            let mut o = CountingOracle::new(DeterministicOracle::new(make_abs()));
            let mut rng = RngStream::new(seed, 0);
            let r = ingd_deterministic(&mut o, &Vector::scalar(1.0), &p, &mut rng).unwrap();
            assert_eq!(r.termination, Termination::CertifiedStationary);
            assert!(r.final_point[0].abs() <= 0.3);
            let cert = r.certificate.unwrap();
            assert!(validate_certificate(&cert, 0.1).valid);
            assert!(cert.atoms.iter().any(|a| a.gradient[0] > 0.0));
            assert!(cert.atoms.iter().any(|a| a.gradient[0] < 0.0));
            assert_eq!(r.oracle_calls, o.calls());
        }
    }

    #[test]
    fn call_limit_stops_at_current_iterate() {
        let p = IngdParams::new(0.3, 0.1, 1.0, 1.0, 0.1).unwrap();
        for limit in [0, 1, 2, 7] {
            let mut o = CountingOracle::with_limit(DeterministicOracle::new(make_abs()), limit);
            let mut rng = RngStream::new(3, 0);
            let r = ingd_deterministic(&mut o, &Vector::scalar(1.0), &p, &mut rng).unwrap();
            assert!(r.oracle_calls <= limit);
            assert_eq!(r.termination, Termination::BudgetExhausted);
        }
    }
}
