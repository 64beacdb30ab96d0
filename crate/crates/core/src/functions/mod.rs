//! Directionally differentiable test objectives.
//!
//! Every objective exposes its value, its Hadamard directional derivative
//! `f'(x; d)` and a generalized gradient `g ∈ ∂f(x)` chosen so that
//! `⟨g, d⟩ = f'(x; d)`. Objectives are built from a serializable
//! [`FunctionDescriptor`], which is also how configs name them.

mod compose;
mod max_affine;
mod mlp;
mod piecewise;
mod quadratic;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use compose::{AbsMap, AffineMap, Composition, ReluMap, ScalarMap, VectorMap};
pub use max_affine::{MaxAffine, ACTIVE_TOL};
pub use mlp::{ReluMlp, Sample};
pub use piecewise::{Piece, PiecewiseLinear, Zigzag};
pub use quadratic::{Quadratic, SmoothFunction};

use crate::base::{FunctionClassSpec, RngStream, Vector};
use crate::error::{Error, Result};

/// The raw interface an objective implements.
///
/// Implementations may assume their inputs have dimension [`DirDiff::dim`];
/// [`DirDiffFunction`] checks that before delegating.
pub trait DirDiff: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> f64;
    /// `f'(x; d)`, positively homogeneous in `d`.
    fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64;
    /// Some `g ∈ ∂f(x)` with `⟨g, d⟩ = f'(x; d)`.
    fn grad_select(&self, x: &Vector, d: &Vector) -> Vector;
    /// Lipschitz constant `L`, so that every selected gradient has `‖g‖ ≤ L`.
    fn lipschitz(&self) -> f64;
}

/// A shareable objective together with its function-class constants.
#[derive(Clone)]
pub struct DirDiffFunction {
    inner: Arc<dyn DirDiff>,
    class: FunctionClassSpec,
    descriptor: Option<FunctionDescriptor>,
}

impl fmt::Debug for DirDiffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirDiffFunction")
            .field("inner", &self.inner)
            .field("class", &self.class)
            .finish()
    }
}

impl DirDiffFunction {
    /// Wraps a custom objective; the gap `Δ` defaults to 1.
    pub fn new(inner: Arc<dyn DirDiff>) -> Result<Self> {
        let class = FunctionClassSpec::new(inner.lipschitz(), 1.0)?;
        Ok(Self {
            inner,
            class,
            descriptor: None,
        })
    }

    fn from_parts(inner: Arc<dyn DirDiff>, descriptor: FunctionDescriptor) -> Result<Self> {
        let mut f = Self::new(inner)?;
        f.descriptor = Some(descriptor);
        Ok(f)
    }

    /// Replaces the gap `Δ` in the class spec.
    pub fn with_gap(mut self, gap: f64) -> Result<Self> {
        self.class.gap = gap;
        self.class.validate()?;
        Ok(self)
    }

    /// Replaces the whole class spec (noise levels included).
    pub fn with_class(mut self, class: FunctionClassSpec) -> Result<Self> {
        class.validate()?;
        self.class = class;
        Ok(self)
    }

    pub fn inner(&self) -> &Arc<dyn DirDiff> {
        &self.inner
    }

    pub fn class_spec(&self) -> &FunctionClassSpec {
        &self.class
    }

    pub fn descriptor(&self) -> Option<&FunctionDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.class.lipschitz
    }

    /// # Panics
    /// If `x` has the wrong dimension.
    pub fn eval(&self, x: &Vector) -> f64 {
        self.check(x);
        self.inner.eval(x)
    }

    pub fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64 {
        self.check(x);
        self.check(d);
        self.inner.dir_deriv(x, d)
    }

    /// A gradient consistent with direction `d`. For `d = 0` every element
    /// of `∂f(x)` qualifies; the selection then probes along `e₁`.
    pub fn grad_select(&self, x: &Vector, d: &Vector) -> Vector {
        self.check(x);
        self.check(d);
        if d.is_zero() {
            self.inner.grad_select(x, &Vector::basis(d.dim(), 0))
        } else {
            self.inner.grad_select(x, d)
        }
    }

    fn check(&self, v: &Vector) {
        assert_eq!(v.dim(), self.dim(), "dimension mismatch");
    }
}

/// JSON-serializable description of a built-in objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionDescriptor {
    Abs,
    NegAbs,
    Relu,
    MaxAffine {
        slopes: Vec<Vector>,
        offsets: Vec<f64>,
    },
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    },
    Zigzag {
        knots: Vec<f64>,
        theta: f64,
        #[serde(default = "one")]
        lipschitz: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_sep: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gap: Option<f64>,
    },
    Quadratic {
        q: Vec<Vector>,
        b: Vector,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    ReluMlp {
        layer_dims: Vec<usize>,
        data: Vec<Sample>,
        weight_radius: f64,
    },
    Compose {
        outer: Box<FunctionDescriptor>,
        inner: Vec<MapDescriptor>,
    },
}

/// JSON-serializable description of an inner map of a composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDescriptor {
    Affine { matrix: Vec<Vector>, bias: Vector },
    Relu { dim: usize },
    Abs { dim: usize },
    Scalar { function: Box<FunctionDescriptor> },
}

fn one() -> f64 {
    1.0
}

fn default_radius() -> f64 {
    10.0
}

impl FunctionDescriptor {
    pub fn build(&self) -> Result<DirDiffFunction> {
        let inner: Arc<dyn DirDiff> = match self {
            Self::Abs => Arc::new(piecewise::abs_pieces()),
            Self::NegAbs => {
                let p = |slope| Piece {
                    slope,
                    anchor: 0.0,
                    value: 0.0,
                };
                Arc::new(PiecewiseLinear::new(vec![0.0], vec![p(1.0), p(-1.0)])?)
            }
            Self::Relu => Arc::new(MaxAffine::new(
                vec![Vector::scalar(0.0), Vector::scalar(1.0)],
                vec![0.0, 0.0],
            )?),
            Self::MaxAffine { slopes, offsets } => {
                Arc::new(MaxAffine::new(slopes.clone(), offsets.clone())?)
            }
            Self::PiecewiseLinear {
                breakpoints,
                pieces,
            } => Arc::new(PiecewiseLinear::new(breakpoints.clone(), pieces.clone())?),
            Self::Zigzag {
                knots,
                theta,
                lipschitz,
                delta_sep,
                gap,
            } => {
                let z = Zigzag::new(knots, *theta, *lipschitz, *delta_sep, *gap)?;
                let f = Self::from_parts(Arc::new(z.function.clone()), self)?;
                // f_θ(x_k) − inf f_θ = Lθδ
                let gap = gap.unwrap_or(-z.min_value());
                return f.with_gap(gap);
            }
            Self::Quadratic { q, b, radius } => Arc::new(Quadratic::new(q, b, *radius)?),
            Self::ReluMlp {
                layer_dims,
                data,
                weight_radius,
            } => Arc::new(ReluMlp::new(layer_dims.clone(), data.clone(), *weight_radius)?),
            Self::Compose { outer, inner } => {
                let outer = outer.build()?;
                let maps = inner
                    .iter()
                    .map(MapDescriptor::build)
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(Composition::new(outer, maps)?)
            }
        };
        Self::from_parts(inner, self)
    }

    fn from_parts(inner: Arc<dyn DirDiff>, desc: &Self) -> Result<DirDiffFunction> {
        DirDiffFunction::from_parts(inner, desc.clone())
    }

    /// Builds a [`SmoothFunction`]; only the `quadratic` kind qualifies.
    pub fn build_smooth(&self) -> Result<SmoothFunction> {
        match self {
            Self::Quadratic { q, b, radius } => {
                SmoothFunction::from_quadratic(Quadratic::new(q, b, *radius)?, self.clone())
            }
            _ => Err(Error::contract("only quadratic objectives are smooth")),
        }
    }
}

impl MapDescriptor {
    pub fn build(&self) -> Result<Arc<dyn VectorMap>> {
        Ok(match self {
            Self::Affine { matrix, bias } => Arc::new(AffineMap::new(matrix.clone(), bias.clone())?),
            Self::Relu { dim } => Arc::new(ReluMap { dim: positive(*dim)? }),
            Self::Abs { dim } => Arc::new(AbsMap { dim: positive(*dim)? }),
            Self::Scalar { function } => Arc::new(ScalarMap(function.build()?)),
        })
    }
}

fn positive(dim: usize) -> Result<usize> {
    if dim == 0 {
        Err(Error::contract("map dimension must be positive"))
    } else {
        Ok(dim)
    }
}

/// `|x|` on the real line, `L = 1`.
pub fn make_abs() -> DirDiffFunction {
    FunctionDescriptor::Abs.build().expect("valid")
}

/// `−|x|` on the real line, `L = 1`.
pub fn make_neg_abs() -> DirDiffFunction {
    FunctionDescriptor::NegAbs.build().expect("valid")
}

/// `max(x, 0)` on the real line.
pub fn make_relu() -> DirDiffFunction {
    FunctionDescriptor::Relu.build().expect("valid")
}

pub fn make_max_affine(slopes: Vec<Vector>, offsets: Vec<f64>) -> Result<DirDiffFunction> {
    FunctionDescriptor::MaxAffine { slopes, offsets }.build()
}

pub fn make_piecewise_linear(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<DirDiffFunction> {
    FunctionDescriptor::PiecewiseLinear {
        breakpoints,
        pieces,
    }
    .build()
}

/// The zigzag `f_θ`; see [`Zigzag`]. `delta_sep = None` picks the default.
pub fn make_zigzag(
    knots: &[f64],
    theta: f64,
    lipschitz: f64,
    delta_sep: Option<f64>,
) -> Result<DirDiffFunction> {
    FunctionDescriptor::Zigzag {
        knots: knots.to_vec(),
        theta,
        lipschitz,
        delta_sep,
        gap: None,
    }
    .build()
}

pub fn make_quadratic(q: &[Vector], b: &Vector) -> Result<SmoothFunction> {
    FunctionDescriptor::Quadratic {
        q: q.to_vec(),
        b: b.clone(),
        radius: default_radius(),
    }
    .build_smooth()
}

/// ReLU network loss as a function of its weights.
///
/// `weights` fixes the architecture check and the region of validity of
/// the Lipschitz bound: weight vectors of norm up to `2‖weights‖ + 1`.
pub fn make_relu_mlp(
    layer_dims: &[usize],
    weights: &Vector,
    data: Vec<Sample>,
) -> Result<DirDiffFunction> {
    let f = FunctionDescriptor::ReluMlp {
        layer_dims: layer_dims.to_vec(),
        data,
        weight_radius: 2.0 * weights.norm() + 1.0,
    }
    .build()?;
    if f.dim() != weights.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: weights.dim(),
        });
    }
    Ok(f)
}

/// `outer ∘ inner[k-1] ∘ … ∘ inner[0]`.
pub fn compose(outer: FunctionDescriptor, inner: Vec<MapDescriptor>) -> Result<DirDiffFunction> {
    FunctionDescriptor::Compose {
        outer: Box::new(outer),
        inner,
    }
    .build()
}

/// `x ↦ f(x − shift)` for a one-dimensional descriptor `f`.
pub fn shifted(f: FunctionDescriptor, shift: f64) -> Result<DirDiffFunction> {
    compose(
        f,
        vec![MapDescriptor::Affine {
            matrix: vec![Vector::scalar(1.0)],
            bias: Vector::scalar(-shift),
        }],
    )
}

/// Monte Carlo estimate of `∫₀¹ f′(x + t(y − x); y − x) dt` from `n`
/// uniform draws of `t`; for directionally differentiable Lipschitz `f` this
/// equals `f(y) − f(x)`.
pub fn path_integral_estimate(
    f: &DirDiffFunction,
    x: &Vector,
    y: &Vector,
    n: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if x.dim() != f.dim() || y.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: if x.dim() != f.dim() { x.dim() } else { y.dim() },
        });
    }
    if n == 0 {
        return Err(Error::contract("need at least one sample"));
    }
    let d = y - x;
    let sum: f64 = (0..n)
        .map(|_| f.dir_deriv(&(x + &d.scaled(rng.uniform(0.0, 1.0))), &d))
        .sum();
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    #[test]
    fn abs_examples() {
        let f = make_abs();
        assert_eq!(f.eval(&s(0.5)), 0.5);
        assert_eq!(f.dir_deriv(&s(0.0), &s(-1.0)), 1.0);
        assert_eq!(f.grad_select(&s(0.0), &s(1.0)), s(1.0));
        assert_eq!(f.lipschitz(), 1.0);
    }

    #[test]
    fn neg_abs_examples() {
        let f = make_neg_abs();
        assert_eq!(f.dir_deriv(&s(0.0), &s(1.0)), -1.0);
        assert_eq!(f.dir_deriv(&s(0.0), &s(-2.0)), -2.0);
        assert_eq!(f.grad_select(&s(0.0), &s(1.0)), s(-1.0));
    }

    #[test]
    fn zero_direction_probes_e1() {
        assert_eq!(make_abs().grad_select(&s(0.0), &s(0.0)), s(1.0));
        assert_eq!(make_neg_abs().grad_select(&s(0.0), &s(0.0)), s(-1.0));
    }

    #[test]
    fn zigzag_gap_defaults_to_depth() {
        let f = make_zigzag(&[0.0], 0.25, 1.0, Some(1.0)).unwrap();
        assert_eq!(f.class_spec().gap, 0.25);
    }

    #[test]
    fn descriptor_round_trip() {
        let descs = vec![
            FunctionDescriptor::Abs,
            FunctionDescriptor::Zigzag {
                knots: vec![0.0, 2.0],
                theta: 0.25,
                lipschitz: 1.0,
                delta_sep: None,
                gap: Some(4.0),
            },
            FunctionDescriptor::Compose {
                outer: Box::new(FunctionDescriptor::Relu),
                inner: vec![MapDescriptor::Affine {
                    matrix: vec![s(2.0)],
                    bias: s(0.0),
                }],
            },
        ];
        for d in descs {
            let json = serde_json::to_string(&d).unwrap();
            let back: FunctionDescriptor = serde_json::from_str(&json).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.build().unwrap().descriptor(), Some(&d));
        }
        let parsed: FunctionDescriptor =
            serde_json::from_str(r#"{"kind":"zigzag","knots":[0],"theta":0.25}"#).unwrap();
        assert!(parsed.build().is_ok());
        assert!(serde_json::from_str::<FunctionDescriptor>(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn shifted_neg_abs() {
        let f = shifted(FunctionDescriptor::NegAbs, 2.0).unwrap();
        assert_eq!(f.eval(&s(2.0)), 0.0);
        assert_eq!(f.eval(&s(0.0)), -2.0);
        assert_eq!(f.dir_deriv(&s(2.0), &s(1.0)), -1.0);
    }

    #[test]
    fn mlp_rejects_wrong_weight_count() {
        let data = vec![Sample {
            input: vec![1.0],
            target: vec![1.0],
        }];
        assert!(make_relu_mlp(&[1, 1], &Vector::from_slice(&[1.0]), data.clone()).is_err());
        let f = make_relu_mlp(&[1, 1], &Vector::from_slice(&[1.0, 0.0]), data).unwrap();
        assert_eq!(f.eval(&Vector::from_slice(&[1.0, 0.0])), 0.0);
    }
}
