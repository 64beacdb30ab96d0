//! Certificates of (δ, ε)-stationarity.
//!
//! A point `x` is (δ, ε)-stationary when the Goldstein subdifferential
//! `∂f(x + δB) = conv(∪_{‖y−x‖≤δ} ∂f(y))` contains a vector of norm at most
//! `ε`. A [`GoldsteinCertificate`] exhibits such a vector explicitly as a
//! convex combination of gradients taken at points in the ball.

mod hull;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use hull::{min_norm_in_hull, MinNorm, DEFAULT_TOL};

use crate::base::{RngStream, Vector};
use crate::error::{Error, Result};
use crate::functions::{DirDiffFunction, SmoothFunction};

/// Absolute slack used by every certificate check.
pub const CERT_TOL: f64 = 1e-9;

pub const CERT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vector,
    pub gradient: Vector,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldsteinCertificate {
    pub schema_version: u32,
    pub center: Vector,
    pub delta: f64,
    pub atoms: Vec<Atom>,
}

impl GoldsteinCertificate {
    pub fn new(center: Vector, delta: f64, atoms: Vec<Atom>) -> Self {
        Self {
            schema_version: CERT_SCHEMA_VERSION,
            center,
            delta,
            atoms,
        }
    }

    /// `Σ wᵢ gᵢ`.
    pub fn combined(&self) -> Vector {
        let mut acc = Vector::zeros(self.center.dim());
        for a in &self.atoms {
            if a.gradient.dim() == acc.dim() {
                acc.axpy(a.weight, &a.gradient);
            }
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cert: Self = serde_json::from_str(s)?;
        if cert.schema_version != CERT_SCHEMA_VERSION {
            return Err(Error::contract(format!(
                "unsupported certificate schema version {}",
                cert.schema_version
            )));
        }
        Ok(cert)
    }
}

/// First clause a certificate violates.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoAtoms,
    Dimension { atom: usize },
    NegativeWeight { atom: usize, weight: f64 },
    WeightSum { sum: f64 },
    Radius { atom: usize, distance: f64 },
    Norm { norm: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoAtoms => write!(f, "weights: certificate has no atoms"),
            Self::Dimension { atom } => write!(f, "dimension: atom {atom} has the wrong dimension"),
            Self::NegativeWeight { atom, weight } => {
                write!(f, "weights: atom {atom} has negative weight {weight}")
            }
            Self::WeightSum { sum } => write!(f, "weights: weights sum to {sum}, not 1"),
            Self::Radius { atom, distance } => {
                write!(f, "radius: atom {atom} lies at distance {distance} from the center")
            }
            Self::Norm { norm } => write!(f, "norm: combined gradient has norm {norm}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateCheck {
    pub valid: bool,
    pub combined_norm: f64,
    pub violation: Option<Violation>,
}

/// Checks that weights form a simplex, atoms lie in the δ-ball and the
/// combined gradient has norm at most `ε`, each up to [`CERT_TOL`].
pub fn validate_certificate(cert: &GoldsteinCertificate, epsilon: f64) -> CertificateCheck {
    let combined_norm = cert.combined().norm();
    let violation = first_violation(cert, epsilon, combined_norm);
    CertificateCheck {
        valid: violation.is_none(),
        combined_norm,
        violation,
    }
}

fn first_violation(cert: &GoldsteinCertificate, epsilon: f64, norm: f64) -> Option<Violation> {
    if cert.atoms.is_empty() {
        return Some(Violation::NoAtoms);
    }
    let n = cert.center.dim();
    if let Some(i) = cert
        .atoms
        .iter()
        .position(|a| a.point.dim() != n || a.gradient.dim() != n)
    {
        return Some(Violation::Dimension { atom: i });
    }
    if let Some((i, a)) = cert
        .atoms
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.weight >= -CERT_TOL))
    {
        return Some(Violation::NegativeWeight {
            atom: i,
            weight: a.weight,
        });
    }
    let sum: f64 = cert.atoms.iter().map(|a| a.weight).sum();
    if !((sum - 1.0).abs() <= CERT_TOL) {
        return Some(Violation::WeightSum { sum });
    }
    for (i, a) in cert.atoms.iter().enumerate() {
        let distance = a.point.distance(&cert.center);
        if !(distance <= cert.delta + CERT_TOL) {
            return Some(Violation::Radius { atom: i, distance });
        }
    }
    if !(norm <= epsilon + CERT_TOL) {
        return Some(Violation::Norm { norm });
    }
    None
}

/// Incremental sampler of `∂f(x + δB)`.
///
/// Each sample is a uniform point of the closed δ-ball together with the
/// gradient selected along an independent uniform probe direction. The
/// estimate is the distance from the origin to the hull of everything
/// sampled so far, so it never increases as samples are added and always
/// upper-bounds `d(0, ∂f(x + δB))` up to the hull tolerance.
#[derive(Clone, Debug)]
pub struct GoldsteinSampler<'a> {
    f: &'a DirDiffFunction,
    center: Vector,
    delta: f64,
    points: Vec<Vector>,
    gradients: Vec<Vector>,
}

impl<'a> GoldsteinSampler<'a> {
    pub fn new(f: &'a DirDiffFunction, center: &Vector, delta: f64) -> Result<Self> {
        if center.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: center.dim(),
            });
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::contract("delta must be nonnegative"));
        }
        Ok(Self {
            f,
            center: center.clone(),
            delta,
            points: Vec::new(),
            gradients: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn add_samples(&mut self, n: usize, rng: &mut RngStream) {
        let dim = self.center.dim();
        for _ in 0..n {
            let mut p = &self.center + &rng.ball(dim, self.delta);
            // keep roundoff from pushing the point outside the ball
            let dist = p.distance(&self.center);
            if dist > self.delta {
                p = self.center.lerp(&p, self.delta / dist);
            }
            let probe = rng.unit_sphere(dim);
            self.gradients.push(self.f.grad_select(&p, &probe));
            self.points.push(p);
        }
    }

    /// Adds an explicit point (e.g. the center) with the gradient selected
    /// along `probe`.
    pub fn add_point(&mut self, p: Vector, probe: &Vector) -> Result<()> {
        if p.distance(&self.center) > self.delta + CERT_TOL {
            return Err(Error::contract("point outside the delta-ball"));
        }
        self.gradients.push(self.f.grad_select(&p, probe));
        self.points.push(p);
        Ok(())
    }

    /// Current estimate and the certificate realizing it.
    pub fn estimate(&self) -> Result<(f64, GoldsteinCertificate)> {
        let hull = min_norm_in_hull(&self.gradients, DEFAULT_TOL)?;
        let atoms = self
            .points
            .iter()
            .zip(&self.gradients)
            .zip(&hull.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|((p, g), &w)| Atom {
                point: p.clone(),
                gradient: g.clone(),
                weight: w,
            })
            .collect();
        Ok((
            hull.norm,
            GoldsteinCertificate::new(self.center.clone(), self.delta, atoms),
        ))
    }
}

/// Estimates `d(0, ∂f(x + δB))` from `n_samples` ball samples.
pub fn approx_goldstein_distance(
    f: &DirDiffFunction,
    x: &Vector,
    delta: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<(f64, GoldsteinCertificate)> {
    if n_samples == 0 {
        return Err(Error::contract("need at least one sample"));
    }
    let mut s = GoldsteinSampler::new(f, x, delta)?;
    s.add_samples(n_samples, rng);
    s.estimate()
}

pub const SMOOTH_CHECK_SAMPLES: usize = 256;

/// Verifies the implication "(ε/(3L), ε/3)-stationary ⇒ ‖∇f(x)‖ ≤ ε" at `x`.
///
/// Returns `true` when the sampled premise fails (the implication holds
/// vacuously).
pub fn check_smooth_equivalence(
    f: &SmoothFunction,
    x: &Vector,
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<bool> {
    check_smooth_equivalence_with(f, x, epsilon, SMOOTH_CHECK_SAMPLES, rng)
}

pub fn check_smooth_equivalence_with(
    f: &SmoothFunction,
    x: &Vector,
    epsilon: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<bool> {
    let delta = epsilon / (3.0 * f.grad_lipschitz());
    let (estimate, _) = approx_goldstein_distance(f.as_dir_diff(), x, delta, n_samples, rng)?;
    if estimate <= epsilon / 3.0 {
        Ok(f.true_gradient(x).norm() <= epsilon)
    } else {
        Ok(true)
    }
}

/// Goldstein distance estimates for strictly decreasing radii.
pub fn goldstein_shrinkage_profile(
    f: &DirDiffFunction,
    x: &Vector,
    deltas: &[f64],
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::contract("deltas must be positive and nonempty"));
    }
    if deltas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::contract("deltas must be strictly decreasing"));
    }
    deltas
        .iter()
        .map(|&d| approx_goldstein_distance(f, x, d, n_samples, rng).map(|r| r.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_abs, make_neg_abs, make_quadratic};

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    fn atom(p: f64, g: f64, w: f64) -> Atom {
        Atom {
            point: s(p),
            gradient: s(g),
            weight: w,
        }
    }

    #[test]
    fn validation_examples() {
        let mut c = GoldsteinCertificate::new(
            s(0.0),
            0.1,
            vec![atom(0.05, 1.0, 0.5), atom(-0.05, -1.0, 0.5)],
        );
        assert!(validate_certificate(&c, 0.01).valid);
        c.atoms[0].weight = 0.9;
        c.atoms[1].weight = 0.1;
        let r = validate_certificate(&c, 0.5);
        assert!(!r.valid);
        assert!((r.combined_norm - 0.8).abs() < 1e-12);
        assert!(matches!(r.violation, Some(Violation::Norm { .. })));
        c.atoms[0].point = s(0.2);
        let r = validate_certificate(&c, 1.0);
        assert!(matches!(r.violation, Some(Violation::Radius { atom: 0, .. })));
        assert!(r.violation.unwrap().to_string().starts_with("radius"));
    }

    #[test]
    fn json_round_trip() {
        let c = GoldsteinCertificate::new(s(0.0), 0.1, vec![atom(0.05, 1.0, 1.0)]);
        let back = GoldsteinCertificate::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let bad = c.to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(GoldsteinCertificate::from_json(&bad).is_err());
    }

    #[test]
    fn goldstein_estimates_on_kinks() {
        let mut rng = RngStream::new(3, 0);
        let (e, c) = approx_goldstein_distance(&make_abs(), &s(0.0), 0.1, 200, &mut rng).unwrap();
        assert!(e <= 1e-9);
        assert!(validate_certificate(&c, e + 1e-8).valid);
        let (e, _) = approx_goldstein_distance(&make_abs(), &s(1.0), 0.1, 200, &mut rng).unwrap();
        assert_eq!(e, 1.0);
        let (e, _) =
            approx_goldstein_distance(&make_neg_abs(), &s(0.0), 0.1, 200, &mut rng).unwrap();
        assert!(e <= 1e-9);
    }

    #[test]
    fn profile_on_abs() {
        let mut rng = RngStream::new(4, 0);
        let p = goldstein_shrinkage_profile(&make_abs(), &s(0.05), &[0.1, 0.01], 500, &mut rng)
            .unwrap();
        assert!(p[0] <= 1e-9);
        assert_eq!(p[1], 1.0);
        assert!(goldstein_shrinkage_profile(&make_abs(), &s(0.0), &[0.1, 0.1], 5, &mut rng).is_err());
    }

    #[test]
    fn smooth_equivalence_examples() {
        let q = make_quadratic(
            &[Vector::from_slice(&[1.0, 0.0]), Vector::from_slice(&[0.0, 1.0])],
            &Vector::zeros(2),
        )
        .unwrap();
        let eps = 0.3;
        let mut rng = RngStream::new(5, 0);
        let near = Vector::from_slice(&[eps / 10.0, 0.0]);
        assert!(check_smooth_equivalence(&q, &near, eps, &mut rng).unwrap());
        let far = Vector::from_slice(&[0.0, 10.0 * eps]);
        assert!(check_smooth_equivalence(&q, &far, eps, &mut rng).unwrap());
    }
}
