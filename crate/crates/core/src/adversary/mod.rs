//! Resisting oracles and the witness functions behind the lower bounds.
//!
//! A resisting oracle answers every query with the same reply (value 0 and
//! slope `L`, or slope 1 alone). After a run, two one-dimensional
//! piecewise-linear functions are built that both reproduce every reply yet
//! have disjoint stationary regions, so no output of the solver can be
//! stationary for both.
//!
//! Two constructions are provided:
//!
//! * [`build_ftheta_pair`]: zigzags `f_θ` for two values of `θ`. They match
//!   values as well as gradients, and their ε-stationary sets (ε < L) are
//!   the zigzag kinks, which differ between the two.
//! * [`build_lower_bound_pair`]: matches gradients only (slope 1 on a
//!   neighbourhood of every query) and keeps the kinks of the two functions
//!   more than `2δ` apart, so their (δ, ε)-stationary regions are disjoint.
//!   The pair fits in `F(Δ, 1)` as long as at most `⌊Δ/(8δ)⌋` queries were
//!   answered.

mod witness;

use serde::{Deserialize, Serialize};

pub use witness::{
    build_ftheta_pair, build_lower_bound_pair, goldstein_distance_1d, min_kink_separation,
    query_budget, stationary_kinks,
};

use crate::base::{RngStream, Vector};
use crate::error::{Error, Result};
use crate::functions::{DirDiffFunction, FunctionDescriptor};
use crate::oracles::{CountingOracle, GradientOracle, OracleReply, ValueOracle};
use crate::solvers::{ingd_deterministic, singd, singd_params, IngdParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Replies `f(x) = 0`, `f'(x) = L`.
    WithValues,
    /// Replies `f'(x) = 1` and no value.
    GradientsOnly,
}

/// Everything a resisting oracle has been asked, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistingTranscript {
    queried_points: Vec<f64>,
    regime: Regime,
    lipschitz: f64,
}

impl ResistingTranscript {
    pub fn with_values(lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::contract("lipschitz constant must be positive"));
        }
        Ok(Self {
            queried_points: Vec::new(),
            regime: Regime::WithValues,
            lipschitz,
        })
    }

    pub fn gradients_only() -> Self {
        Self {
            queried_points: Vec::new(),
            regime: Regime::GradientsOnly,
            lipschitz: 1.0,
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn queried_points(&self) -> &[f64] {
        &self.queried_points
    }

    pub fn len(&self) -> usize {
        self.queried_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queried_points.is_empty()
    }

    /// The reply every query receives.
    pub fn reply(&self) -> OracleReply {
        OracleReply {
            value: (self.regime == Regime::WithValues).then_some(0.0),
            gradient: Vector::scalar(self.lipschitz),
        }
    }
}

/// Records `x` and answers it.
///
/// # Panics
///
/// If `x` is not finite.
pub fn resisting_reply(transcript: &mut ResistingTranscript, x: f64) -> OracleReply {
    assert!(x.is_finite(), "resisting oracle queried at {x}");
    transcript.queried_points.push(x);
    transcript.reply()
}

/// One-dimensional oracle that answers with [`resisting_reply`].
///
/// Implements [`ValueOracle`] so value-based solvers can run against it,
/// but a value query in the gradients-only regime panics.
#[derive(Clone, Debug)]
pub struct ResistingOracle {
    pub transcript: ResistingTranscript,
}

impl ResistingOracle {
    pub fn new(transcript: ResistingTranscript) -> Self {
        Self { transcript }
    }
}

impl GradientOracle for ResistingOracle {
    fn dim(&self) -> usize {
        1
    }

    fn gradient(&mut self, x: &Vector, _d: &Vector) -> Vector {
        resisting_reply(&mut self.transcript, x[0]).gradient
    }
}

impl ValueOracle for ResistingOracle {
    fn query(&mut self, x: &Vector, _d: &Vector) -> (f64, Vector) {
        let r = resisting_reply(&mut self.transcript, x[0]);
        let v = r
            .value
            .expect("value query against a gradients-only resisting oracle");
        (v, r.gradient)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistingSolver {
    /// Deterministic INGD against the value-returning oracle.
    Ingd,
    /// Stochastic INGD against the gradients-only oracle.
    Singd,
}

impl std::str::FromStr for ResistingSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ingd" => Ok(Self::Ingd),
            "singd" => Ok(Self::Singd),
            _ => Err(Error::contract(format!("unknown solver {s:?}; expected ingd or singd"))),
        }
    }
}

/// Stationarity tolerance used by the experiment; any `ε < 1` gives the
/// same verdicts since every witness has slopes `±L`.
pub const RESISTING_EPSILON: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub label: String,
    pub descriptor: FunctionDescriptor,
    /// Radius of the Goldstein ball used for the check (0 for plain
    /// ε-stationarity).
    pub radius: f64,
    /// Exact `d(0, ∂f(x + radius·B))` at the solver's output.
    pub distance: f64,
    pub stationary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistingReport {
    pub solver: ResistingSolver,
    pub regime: Regime,
    pub budget: u64,
    pub delta: f64,
    pub gap: f64,
    pub epsilon: f64,
    pub oracle_calls: u64,
    pub final_point: f64,
    pub transcript: Vec<f64>,
    /// Both witnesses reproduce every reply of the transcript.
    pub consistent: bool,
    /// Smallest distance between stationary kinks of the two witnesses.
    pub kink_separation: f64,
    pub witnesses: Vec<WitnessCheck>,
    /// The output is non-stationary for at least one witness.
    pub defeated: bool,
}

/// Does `f` reproduce `reply` at `x` (gradient along both directions, and
/// the value when the reply has one)?
pub fn matches_reply(f: &DirDiffFunction, x: f64, reply: &OracleReply) -> bool {
    let p = Vector::scalar(x);
    let slope = reply.gradient[0];
    let grads_ok = [1.0, -1.0].iter().all(|&d| {
        let d = Vector::scalar(d);
        f.grad_select(&p, &d)[0] == slope
    });
    let value_ok = match reply.value {
        Some(v) => (f.eval(&p) - v).abs() <= 1e-12 * (1.0 + v.abs()),
        None => true,
    };
    grads_ok && value_ok
}

/// Runs `solver` from `x = 0` against a resisting oracle for at most
/// `budget` calls, then builds witnesses from the transcript and checks
/// the output against them.
///
/// INGD sees values, so it is checked against the `f_θ` pair (θ = 0.2 and
/// 0.4) for plain ε-stationarity. SINGD sees gradients only and is checked
/// against [`build_lower_bound_pair`] for (δ, ε)-stationarity. With an
/// empty transcript the output point itself anchors the construction.
pub fn run_resisting_experiment(
    solver: ResistingSolver,
    budget: u64,
    delta: f64,
    gap: f64,
    rng: &mut RngStream,
) -> Result<ResistingReport> {
    if !(delta.is_finite() && delta > 0.0 && gap.is_finite() && gap > 0.0) {
        return Err(Error::contract("delta and gap must be positive"));
    }
    if budget > query_budget(delta, gap) {
        return Err(Error::contract(format!(
            "budget {budget} exceeds floor(Delta/(8 delta)) = {}",
            query_budget(delta, gap)
        )));
    }
    let eps = RESISTING_EPSILON;
    let x1 = Vector::scalar(0.0);
    let (regime, transcript, final_point, calls) = match solver {
        ResistingSolver::Ingd => {
            let t = ResistingTranscript::with_values(1.0)?;
            let mut o = CountingOracle::with_limit(ResistingOracle::new(t), budget);
            let params = IngdParams::new(delta, eps, 1.0, gap, 0.1)?;
            let r = ingd_deterministic(&mut o, &x1, &params, rng)?;
            let calls = o.calls();
            (Regime::WithValues, o.into_inner().transcript, r.final_point[0], calls)
        }
        ResistingSolver::Singd => {
            let t = ResistingTranscript::gradients_only();
            let mut o = CountingOracle::new(ResistingOracle::new(t));
            let x = if budget >= 2 {
                let mut params = singd_params(1.0, 0.0, eps, delta, gap)?;
                // one initial gradient plus one per step
                params.t = budget - 1;
                singd(&mut o, &x1, &params, rng)?.final_point[0]
            } else {
                if budget == 1 {
                    o.gradient(&x1, &Vector::scalar(0.0));
                }
                x1[0]
            };
            let calls = o.calls();
            (Regime::GradientsOnly, o.into_inner().transcript, x, calls)
        }
    };

    let anchor;
    let source = if transcript.is_empty() {
        let mut t = transcript.clone();
        resisting_reply(&mut t, final_point);
        anchor = t;
        &anchor
    } else {
        &transcript
    };

    let reply = transcript.reply();
    let (pairs, radius): (Vec<(String, DirDiffFunction)>, f64) = match regime {
        Regime::WithValues => {
            let (a, b) = build_ftheta_pair(source, 0.2, 0.4, 1.0, gap)?;
            (vec![("f_theta=0.2".into(), a), ("f_theta=0.4".into(), b)], 0.0)
        }
        Regime::GradientsOnly => {
            let (a, b) = build_lower_bound_pair(source, delta, gap)?;
            (vec![("lower_bound_f".into(), a), ("lower_bound_g".into(), b)], delta)
        }
    };
    let consistent = pairs.iter().all(|(_, f)| {
        transcript
            .queried_points()
            .iter()
            .all(|&x| matches_reply(f, x, &reply))
    });
    let kink_separation = min_kink_separation(&pairs[0].1, &pairs[1].1)?;
    let witnesses = pairs
        .into_iter()
        .map(|(label, f)| {
            let distance = goldstein_distance_1d(&f, final_point, radius)?;
            Ok(WitnessCheck {
                label,
                descriptor: f.descriptor().cloned().expect("witnesses carry descriptors"),
                radius,
                distance,
                stationary: distance <= eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let defeated = witnesses.iter().any(|w| !w.stationary);
    Ok(ResistingReport {
        solver,
        regime,
        budget,
        delta,
        gap,
        epsilon: eps,
        oracle_calls: calls,
        final_point,
        transcript: transcript.queried_points,
        consistent,
        kink_separation,
        witnesses,
        defeated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_examples() {
        let mut t = ResistingTranscript::with_values(1.0).unwrap();
        let r = resisting_reply(&mut t, 0.3);
        assert_eq!(r.value, Some(0.0));
        assert_eq!(r.gradient, Vector::scalar(1.0));

        let mut t = ResistingTranscript::gradients_only();
        let r = resisting_reply(&mut t, -2.0);
        assert_eq!(r.value, None);
        assert_eq!(r.gradient, Vector::scalar(1.0));
        resisting_reply(&mut t, 1.0);
        resisting_reply(&mut t, 5.0);
        assert_eq!(t.len(), 3);
    }

    #[test]
    #[should_panic(expected = "gradients-only")]
    fn value_query_in_gradient_regime_panics() {
        let mut o = ResistingOracle::new(ResistingTranscript::gradients_only());
        o.query(&Vector::scalar(0.0), &Vector::scalar(1.0));
    }

    #[test]
    fn ingd_is_defeated() {
        for seed in 0..5 {
            let mut rng = RngStream::new(seed, 0);
            let r = run_resisting_experiment(ResistingSolver::Ingd, 10, 0.1, 16.0, &mut rng)
                .unwrap();
            assert_eq!(r.oracle_calls, 10);
            assert_eq!(r.transcript.len(), 10);
            assert!(r.consistent);
            assert!(r.kink_separation > 0.0);
            assert!(r.defeated);
        }
    }

    #[test]
    fn singd_is_defeated() {
        for budget in [0, 1, 2, 10, 20] {
            let mut rng = RngStream::new(budget, 0);
            let r = run_resisting_experiment(ResistingSolver::Singd, budget, 0.1, 16.0, &mut rng)
                .unwrap();
            assert_eq!(r.oracle_calls, budget);
            assert!(r.consistent);
            assert!(r.kink_separation > 0.2);
            assert!(r.defeated, "budget {budget}: {r:?}");
        }
    }

    #[test]
    fn budget_above_law_is_rejected() {
        let mut rng = RngStream::new(0, 0);
        assert!(run_resisting_experiment(ResistingSolver::Singd, 21, 0.1, 16.0, &mut rng).is_err());
    }
}
