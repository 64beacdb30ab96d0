use serde::{Deserialize, Serialize};

use crate::base::{RngStream, Vector};
use crate::error::{Error, Result};
use crate::oracles::{query_inexact, InexactGradOracle};

/// Positive root of `α² + (α_prev² − q)α − α_prev² = 0`, i.e. the `α_k`
/// solving `α_k² = (1 − α_k)α_{k−1}² + qα_k`.
pub fn alpha_next(alpha_prev: f64, q_ratio: f64) -> f64 {
    let a2 = alpha_prev * alpha_prev;
    let b = a2 - q_ratio;
    // (−b + √(b² + 4a²))/2, written to avoid cancellation when b > 0
    let disc = (b * b + 4.0 * a2).sqrt();
    if b > 0.0 {
        2.0 * a2 / (b + disc)
    } else {
        (disc - b) / 2.0
    }
}

/// The weight `α_{−1}² = α₀(α₀ − q)/(1 − α₀)` that makes the `k = 0` bound
/// take the same form as later steps. Undefined (infinite) for `α₀ = 1`.
pub fn initial_lyapunov_weight(alpha0: f64, q_ratio: f64) -> f64 {
    alpha0 * (alpha0 - q_ratio) / (1.0 - alpha0)
}

/// `E_k = (C/L)(1 + (1−α_k) + (1−α_k)(1−α_{k−1}) + … + Π_{j=1}^k (1−α_j))`
/// for `alphas = [α₀, …, α_k]`.
pub fn agd_error_bound(alphas: &[f64], c: f64, l: f64) -> Result<f64> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::contract("alphas must be nonempty and lie in (0, 1]"));
    }
    let mut sum = 1.0;
    let mut prod = 1.0;
    for a in alphas[1..].iter().rev() {
        prod *= 1.0 - a;
        sum += prod;
    }
    Ok(c / l * sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgdState {
    pub x: Vector,
    pub v: Vector,
    pub y: Vector,
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub q_ratio: f64,
}

/// States `0..=steps` and the Lyapunov values
/// `Φ_k = f(x_k) − f* + (Lα_{k−1}²/2)‖v_k − x*‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgdRun {
    pub states: Vec<AgdState>,
    pub lyapunov: Vec<f64>,
}

impl AgdRun {
    pub fn alphas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.alpha).collect()
    }
}

/// Nesterov's method with inexact gradients:
/// `x_{k+1} = y_k − g_k/L`,
/// `v_{k+1} = x_{k+1} + ((1−α_k)/α_k)(x_{k+1} − x_k)`,
/// `y_{k+1} = η_{k+1}v_{k+1} + (1−η_{k+1})x_{k+1}` with
/// `η = (α − q)/(1 − q)`, started from `v₀ = y₀ = x₀`.
///
/// `mu` and `l` are the strong convexity and smoothness constants the
/// method is tuned with; the Lyapunov series uses the oracle's function to
/// get `x*` and `f*`.
pub fn inexact_agd(
    oracle: &InexactGradOracle,
    x0: &Vector,
    mu: f64,
    l: f64,
    alpha0: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<AgdRun> {
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::contract(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    let q = mu / l;
    if q >= 1.0 {
        return Err(Error::contract("mu/L = 1 makes the momentum weight undefined"));
    }
    if !(alpha0 > q && alpha0 <= 1.0) {
        return Err(Error::contract(format!("alpha0 must lie in (mu/L, 1], got {alpha0}")));
    }
    let f = &oracle.function;
    if x0.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.dim(),
        });
    }
    let x_star = f.minimizer();
    // f(x) − f* = ½⟨∇f(x), x − x*⟩ on a quadratic; avoids cancellation near x*
    let phi = |x: &Vector, v: &Vector, a2: f64| {
        0.5 * f.true_gradient(x).dot(&(x - &x_star)) + 0.5 * l * a2 * v.distance(&x_star).powi(2)
    };

    let mut s = AgdState {
        x: x0.clone(),
        v: x0.clone(),
        y: x0.clone(),
        alpha: alpha0,
        mu,
        l,
        q_ratio: q,
    };
    let mut lyapunov = vec![phi(&s.x, &s.v, initial_lyapunov_weight(alpha0, q))];
    let mut states = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let g = query_inexact(oracle, &s.y, rng);
        let x = &s.y - &g.scaled(1.0 / l);
        let a = s.alpha;
        let v = &x + &(&x - &s.x).scaled((1.0 - a) / a);
        let a_next = alpha_next(a, q);
        let eta = (a_next - q) / (1.0 - q);
        let y = v.lerp(&x, 1.0 - eta);
        lyapunov.push(phi(&x, &v, a * a));
        states.push(std::mem::replace(
            &mut s,
            AgdState {
                x,
                v,
                y,
                alpha: a_next,
                mu,
                l,
                q_ratio: q,
            },
        ));
    }
    states.push(s);
    Ok(AgdRun { states, lyapunov })
}
