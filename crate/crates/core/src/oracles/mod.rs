//! First-order oracles in the deterministic, stochastic (finite variance),
//! sub-Gaussian and inexact-gradient regimes.
//!
//! Solvers talk to oracles through two traits. [`GradientOracle`] only
//! hands out gradients, so a solver written against it cannot observe
//! function values; [`ValueOracle`] adds the value. The stochastic oracle
//! implements only the former. [`CountingOracle`] counts one call per
//! answered query (one per sample in batched estimates).
//!
//! All noise is Gaussian, drawn from the oracle's own [`RngStream`].

use crate::base::{RngStream, Vector};
use crate::functions::{DirDiffFunction, SmoothFunction};

/// What an oracle returns for a query `O(x, d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReply {
    pub value: Option<f64>,
    pub gradient: Vector,
}

/// Exact value and a gradient `g ∈ ∂f(x)` with `⟨g, d⟩ = f'(x; d)`.
pub fn query_det(f: &DirDiffFunction, x: &Vector, d: &Vector) -> OracleReply {
    let gradient = f.grad_select(x, d);
    debug_assert!(
        gradient.norm() <= f.lipschitz() * (1.0 + 1e-12) + 1e-12,
        "selected gradient exceeds the Lipschitz constant"
    );
    OracleReply {
        value: Some(f.eval(x)),
        gradient,
    }
}

/// Unbiased gradient with total noise variance `σ²` from the class spec;
/// no value.
pub fn query_sto(f: &DirDiffFunction, x: &Vector, d: &Vector, rng: &mut RngStream) -> OracleReply {
    let mut gradient = f.grad_select(x, d);
    add_isotropic(&mut gradient, f.class_spec().variance_sigma2, rng);
    OracleReply {
        value: None,
        gradient,
    }
}

/// Value with noise of standard deviation `σ_f` and gradient with isotropic
/// noise of total variance `σ_g²`.
pub fn query_subg(f: &DirDiffFunction, x: &Vector, d: &Vector, rng: &mut RngStream) -> OracleReply {
    let spec = f.class_spec();
    let mut gradient = f.grad_select(x, d);
    let value = f.eval(x) + spec.subg_sigma_f * rng.standard_normal();
    add_isotropic(&mut gradient, spec.subg_sigma_g * spec.subg_sigma_g, rng);
    OracleReply {
        value: Some(value),
        gradient,
    }
}

/// Adds zero-mean Gaussian noise with total variance `var` (per-coordinate
/// variance `var / n`). Draws nothing when `var = 0`.
fn add_isotropic(g: &mut Vector, var: f64, rng: &mut RngStream) {
    if var > 0.0 {
        let std = (var / g.dim() as f64).sqrt();
        g.axpy(1.0, &rng.gaussian_vector(g.dim(), std));
    }
}

/// Gradient oracle for a smooth function whose replies have mean `∇f(y)`
/// and mean squared error `C`.
#[derive(Clone, Debug)]
pub struct InexactGradOracle {
    pub function: SmoothFunction,
    pub noise_variance: f64,
}

impl InexactGradOracle {
    pub fn new(function: SmoothFunction, noise_variance: f64) -> crate::Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(crate::Error::contract("noise variance C must be nonnegative"));
        }
        Ok(Self {
            function,
            noise_variance,
        })
    }
}

pub fn query_inexact(o: &InexactGradOracle, y: &Vector, rng: &mut RngStream) -> Vector {
    let mut g = o.function.true_gradient(y);
    add_isotropic(&mut g, o.noise_variance, rng);
    g
}

/// Oracle handing out (possibly noisy) gradients only.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn gradient(&mut self, x: &Vector, d: &Vector) -> Vector;
}

/// Oracle handing out values alongside gradients.
pub trait ValueOracle: GradientOracle {
    fn query(&mut self, x: &Vector, d: &Vector) -> (f64, Vector);
}

/// Exact oracle.
#[derive(Clone, Debug)]
pub struct DeterministicOracle {
    f: DirDiffFunction,
}

impl DeterministicOracle {
    pub fn new(f: DirDiffFunction) -> Self {
        Self { f }
    }

    pub fn function(&self) -> &DirDiffFunction {
        &self.f
    }
}

impl GradientOracle for DeterministicOracle {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn gradient(&mut self, x: &Vector, d: &Vector) -> Vector {
        query_det(&self.f, x, d).gradient
    }
}

impl ValueOracle for DeterministicOracle {
    fn query(&mut self, x: &Vector, d: &Vector) -> (f64, Vector) {
        let r = query_det(&self.f, x, d);
        (r.value.expect("deterministic replies carry values"), r.gradient)
    }
}

/// Finite-variance stochastic gradient oracle. Deliberately not a
/// [`ValueOracle`].
#[derive(Clone, Debug)]
pub struct StochasticOracle {
    f: DirDiffFunction,
    rng: RngStream,
}

impl StochasticOracle {
    pub fn new(f: DirDiffFunction, rng: RngStream) -> Self {
        Self { f, rng }
    }

    pub fn function(&self) -> &DirDiffFunction {
        &self.f
    }
}

impl GradientOracle for StochasticOracle {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn gradient(&mut self, x: &Vector, d: &Vector) -> Vector {
        query_sto(&self.f, x, d, &mut self.rng).gradient
    }
}

/// Oracle with sub-Gaussian noise on both values and gradients.
#[derive(Clone, Debug)]
pub struct SubGaussianOracle {
    f: DirDiffFunction,
    rng: RngStream,
}

impl SubGaussianOracle {
    pub fn new(f: DirDiffFunction, rng: RngStream) -> Self {
        Self { f, rng }
    }

    pub fn function(&self) -> &DirDiffFunction {
        &self.f
    }

    /// Noisy value alone (still one oracle call when counted).
    pub fn value(&mut self, x: &Vector) -> f64 {
        let spec = self.f.class_spec();
        self.f.eval(x) + spec.subg_sigma_f * self.rng.standard_normal()
    }
}

impl GradientOracle for SubGaussianOracle {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn gradient(&mut self, x: &Vector, d: &Vector) -> Vector {
        let spec = *self.f.class_spec();
        let mut g = self.f.grad_select(x, d);
        add_isotropic(&mut g, spec.subg_sigma_g * spec.subg_sigma_g, &mut self.rng);
        g
    }
}

impl ValueOracle for SubGaussianOracle {
    fn query(&mut self, x: &Vector, d: &Vector) -> (f64, Vector) {
        let r = query_subg(&self.f, x, d, &mut self.rng);
        (r.value.expect("sub-Gaussian replies carry values"), r.gradient)
    }
}

/// Counts answered queries of the wrapped oracle.
///
/// An optional call limit is advisory: queries past it are still answered,
/// but solvers check [`CountingOracle::exhausted`] before each query and
/// stop with [`Termination::BudgetExhausted`](crate::solvers::Termination).
#[derive(Clone, Debug)]
pub struct CountingOracle<O> {
    inner: O,
    calls: u64,
    limit: Option<u64>,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: 0,
            limit: None,
        }
    }

    pub fn with_limit(inner: O, limit: u64) -> Self {
        Self {
            inner,
            calls: 0,
            limit: Some(limit),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn limit(&self) -> Option<u64> {
        self.limit
    }

    /// Whether `n` more calls would exceed the limit.
    pub fn would_exceed(&self, n: u64) -> bool {
        self.limit.is_some_and(|l| self.calls + n > l)
    }

    pub fn exhausted(&self) -> bool {
        self.would_exceed(1)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut O {
        &mut self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: GradientOracle> GradientOracle for CountingOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn gradient(&mut self, x: &Vector, d: &Vector) -> Vector {
        self.calls += 1;
        self.inner.gradient(x, d)
    }
}

impl<O: ValueOracle> ValueOracle for CountingOracle<O> {
    fn query(&mut self, x: &Vector, d: &Vector) -> (f64, Vector) {
        self.calls += 1;
        self.inner.query(x, d)
    }
}

impl CountingOracle<SubGaussianOracle> {
    /// Noisy value alone; counts one call.
    pub fn value(&mut self, x: &Vector) -> f64 {
        self.calls += 1;
        self.inner.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::FunctionClassSpec;
    use crate::functions::{make_abs, make_neg_abs, make_quadratic};

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    #[test]
    fn deterministic_examples() {
        let f = make_abs();
        let r = query_det(&f, &s(0.5), &s(-1.0));
        assert_eq!((r.value, r.gradient), (Some(0.5), s(1.0)));
        assert_eq!(query_det(&f, &s(0.0), &s(-1.0)).gradient, s(-1.0));
        assert_eq!(query_det(&make_neg_abs(), &s(0.0), &s(1.0)).gradient, s(-1.0));
    }

    #[test]
    fn zero_noise_reduces_to_deterministic() {
        let f = make_abs();
        let mut rng = RngStream::new(1, 1);
        let r = query_sto(&f, &s(0.3), &s(1.0), &mut rng);
        assert_eq!((r.value, r.gradient), (None, s(1.0)));
        let r = query_subg(&f, &s(0.3), &s(1.0), &mut rng);
        assert_eq!((r.value, r.gradient), (Some(0.3), s(1.0)));
        let q = make_quadratic(
            &[Vector::from_slice(&[1.0, 0.0]), Vector::from_slice(&[0.0, 1.0])],
            &Vector::zeros(2),
        )
        .unwrap();
        let o = InexactGradOracle::new(q, 0.0).unwrap();
        let y = Vector::from_slice(&[1.0, 0.0]);
        assert_eq!(query_inexact(&o, &y, &mut rng), y);
    }

    #[test]
    fn counting_is_exact() {
        let f = make_abs()
            .with_class(FunctionClassSpec::new(1.0, 1.0).unwrap().with_subgaussian(0.1, 0.1))
            .unwrap();
        let mut o = CountingOracle::new(SubGaussianOracle::new(f, RngStream::new(0, 0)));
        o.query(&s(1.0), &s(1.0));
        o.gradient(&s(1.0), &s(1.0));
        o.value(&s(1.0));
        assert_eq!(o.calls(), 3);
    }
}
