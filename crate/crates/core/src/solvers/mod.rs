//! Interpolated Normalized Gradient Descent and its stochastic variants,
//! plus Nesterov's method with inexact gradients.
//!
//! Every nonsmooth solver returns a [`SolverReport`]; oracle calls are read
//! off the [`CountingOracle`](crate::oracles::CountingOracle) the solver ran
//! against.

mod agd;
mod ingd;
mod singd;
mod subg;

use serde::{Deserialize, Serialize};

pub use agd::{
    agd_error_bound, alpha_next, inexact_agd, initial_lyapunov_weight, AgdRun, AgdState,
};
pub use ingd::{ingd_deterministic, ingd_inner_norms, IngdParams};
pub use singd::{singd, singd_params, SingdParams};
pub use subg::{subgaussian_ingd, SubgParams};

use crate::base::Vector;
use crate::certify::GoldsteinCertificate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The solver's own stationarity test fired at `final_point`.
    CertifiedStationary,
    /// The iteration or restart budget ran out.
    BudgetExhausted,
    /// More sufficient-decrease steps were taken than the gap allows, which
    /// means the objective is not in the assumed class (e.g. unbounded below).
    DescentBudgetExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub value: Option<f64>,
    pub m_norm: f64,
}

/// Audited record of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solver: String,
    pub final_point: Vector,
    /// Exact certificate of (δ, ε)-stationarity of `final_point`, when the
    /// solver produces one.
    pub certificate: Option<GoldsteinCertificate>,
    /// Stochastic INGD only: the noisy gradients that entered the momentum
    /// during the `K` steps after the returned iterate, with their
    /// normalized geometric weights.
    pub window_certificate: Option<GoldsteinCertificate>,
    pub oracle_calls: u64,
    pub outer_iters: u64,
    pub descents: u64,
    pub termination: Termination,
    pub seed: SeedInfo,
    /// Stochastic INGD only: `(1/T) Σ ‖m_t‖`.
    pub mean_m_norm: Option<f64>,
    pub trajectory_summary: Vec<TraceEntry>,
}

/// Convex weights kept as `scale · raw[i]` so that shrinking all of them by
/// `β` is O(1).
#[derive(Clone, Debug, Default)]
pub(crate) struct LazyWeights {
    raw: Vec<f64>,
    scale: f64,
}

impl LazyWeights {
    pub fn reset(&mut self) {
        self.raw.clear();
        self.scale = 1.0;
    }

    /// Multiplies every weight by `beta` and appends `1 − beta`.
    pub fn mix(&mut self, beta: f64) {
        if self.raw.is_empty() {
            self.raw.push(1.0);
            self.scale = 1.0;
            return;
        }
        self.scale *= beta;
        if self.scale < 1e-200 {
            for w in &mut self.raw {
                *w *= self.scale;
            }
            self.scale = 1.0;
        }
        self.raw.push((1.0 - beta) / self.scale);
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.raw.iter().map(move |w| w * self.scale)
    }
}

pub(crate) fn ceil_count(x: f64) -> u64 {
    if x.is_finite() && x >= 1.0 {
        x.ceil() as u64
    } else {
        1
    }
}
