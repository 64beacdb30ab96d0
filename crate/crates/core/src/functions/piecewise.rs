use serde::{Deserialize, Serialize};

use super::DirDiff;
use crate::base::Vector;
use crate::error::{Error, Result};

/// One linear piece `x ↦ value + slope·(x − anchor)`.
///
/// Anchoring each piece at a chosen point (rather than storing an
/// intercept) keeps values exact at the anchors, which the lower-bound
/// constructions rely on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub slope: f64,
    pub anchor: f64,
    pub value: f64,
}

impl Piece {
    fn at(&self, x: f64) -> f64 {
        self.value + self.slope * (x - self.anchor)
    }
}

/// Continuous piecewise-linear function on the real line.
///
/// `pieces[i]` is active on `[breakpoints[i-1], breakpoints[i]]`, with the
/// first and last pieces extending to infinity.
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::contract(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || pieces
                .iter()
                .any(|p| !(p.slope.is_finite() && p.anchor.is_finite() && p.value.is_finite()))
        {
            return Err(Error::contract("piecewise-linear data must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("breakpoints must be strictly increasing"));
        }
        for (i, &b) in breakpoints.iter().enumerate() {
            let (l, r) = (pieces[i].at(b), pieces[i + 1].at(b));
            let scale = 1.0 + l.abs().max(r.abs());
            if (l - r).abs() > 1e-9 * scale {
                return Err(Error::contract(format!(
                    "discontinuity at breakpoint {b}: {l} vs {r}"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Index of the piece whose closed interval contains `x`, preferring the
    /// right one at a breakpoint.
    fn right_piece(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    /// Slope used along direction sign `d` at `x` (right slope for `d ≥ 0`).
    pub fn one_sided_slope(&self, x: f64, d: f64) -> f64 {
        let i = self.right_piece(x);
        if d < 0.0 && i > 0 && self.breakpoints[i - 1] == x {
            self.pieces[i - 1].slope
        } else {
            self.pieces[i].slope
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.pieces[self.right_piece(x)].at(x)
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.pieces.iter().map(|p| p.slope.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        let first = self.pieces[0].slope;
        let last = self.pieces[self.pieces.len() - 1].slope;
        if first > 0.0 || last < 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lo = f64::INFINITY;
        for &b in &self.breakpoints {
            lo = lo.min(self.value(b));
        }
        if self.breakpoints.is_empty() {
            // a single horizontal piece
            lo = self.pieces[0].value;
        }
        lo
    }

    /// Breakpoints where the slope changes sign, i.e. the local extrema.
    pub fn sign_changes(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .enumerate()
            .filter(|&(i, _)| {
                let (l, r) = (self.pieces[i].slope, self.pieces[i + 1].slope);
                l * r <= 0.0 && (l != 0.0 || r != 0.0)
            })
            .map(|(_, &b)| b)
            .collect()
    }
}

impl DirDiff for PiecewiseLinear {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.value(x[0])
    }

    fn dir_deriv(&self, x: &Vector, d: &Vector) -> f64 {
        self.one_sided_slope(x[0], d[0]) * d[0]
    }

    fn grad_select(&self, x: &Vector, d: &Vector) -> Vector {
        Vector::scalar(self.one_sided_slope(x[0], d[0]))
    }

    fn lipschitz(&self) -> f64 {
        self.max_abs_slope()
    }
}

/// `|x|`
pub fn abs_pieces() -> PiecewiseLinear {
    let p = |slope| Piece {
        slope,
        anchor: 0.0,
        value: 0.0,
    };
    PiecewiseLinear::new(vec![0.0], vec![p(-1.0), p(1.0)]).unwrap()
}

/// The zigzag function `f_θ` consistent with the replies `f(x_k) = 0`,
/// `f'(x_k) = L` at every knot.
///
/// Between consecutive knots the slope is `+L` on `[x_k − θδ, m_k − θδ]` and
/// `−L` on `[m_k − θδ, x_{k+1} − θδ]`, where `m_k` is the midpoint; the left
/// tail descends into `x_1 − θδ` and the right tail rises from `x_K − θδ`.
#[derive(Clone, Debug)]
pub struct Zigzag {
    pub knots: Vec<f64>,
    pub theta: f64,
    pub lipschitz: f64,
    pub delta_sep: f64,
    pub function: PiecewiseLinear,
}

impl Zigzag {
    /// `delta_sep` defaults to `min(min knot gap, gap/L)`; with a single
    /// knot and no gap given it defaults to 1.
    pub fn new(
        knots: &[f64],
        theta: f64,
        lipschitz: f64,
        delta_sep: Option<f64>,
        gap: Option<f64>,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta < 0.5) {
            return Err(Error::contract(format!("theta must lie in (0, 1/2), got {theta}")));
        }
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::contract("zigzag lipschitz constant must be positive"));
        }
        let knots = sorted_unique(knots)?;
        let min_gap = knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let delta = match delta_sep {
            Some(d) => d,
            None => {
                let by_gap = gap.map_or(f64::INFINITY, |g| g / lipschitz);
                let d = min_gap.min(by_gap);
                if d.is_finite() {
                    d
                } else {
                    1.0
                }
            }
        };
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::contract(format!("delta_sep must be positive, got {delta}")));
        }
        let shift = theta * delta;
        if knots.len() > 1 && shift >= 0.5 * min_gap {
            return Err(Error::contract(format!(
                "theta·delta_sep = {shift} collides with half the minimum knot gap {}",
                0.5 * min_gap
            )));
        }

        let l = lipschitz;
        let up = |k: f64| Piece {
            slope: l,
            anchor: k,
            value: 0.0,
        };
        // descending leg that bottoms out at (k − θδ, −Lθδ)
        let down = |k: f64| Piece {
            slope: -l,
            anchor: k - 2.0 * shift,
            value: 0.0,
        };
        let mut breakpoints = Vec::with_capacity(2 * knots.len());
        let mut pieces = Vec::with_capacity(2 * knots.len());
        pieces.push(down(knots[0]));
        for (i, &k) in knots.iter().enumerate() {
            breakpoints.push(k - shift);
            pieces.push(up(k));
            if let Some(&next) = knots.get(i + 1) {
                breakpoints.push(0.5 * (k + next) - shift);
                pieces.push(down(next));
            }
        }
        Ok(Self {
            knots,
            theta,
            lipschitz,
            delta_sep: delta,
            function: PiecewiseLinear::new(breakpoints, pieces)?,
        })
    }

    /// The exact `ε`-stationary set for `ε < L`: every kink of the zigzag.
    pub fn stationary_points(&self) -> Vec<f64> {
        self.function.breakpoints().to_vec()
    }

    pub fn min_value(&self) -> f64 {
        -self.lipschitz * self.theta * self.delta_sep
    }
}

pub(crate) fn sorted_unique(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::contract("need at least one knot"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("knots must be finite"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    #[test]
    fn rejects_bad_pieces() {
        let p = |slope, value| Piece {
            slope,
            anchor: 0.0,
            value,
        };
        assert!(PiecewiseLinear::new(vec![0.0], vec![p(1.0, 0.0)]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![p(1.0, 0.0), p(1.0, 1.0)]).is_err());
        assert!(PiecewiseLinear::new(
            vec![1.0, 0.0],
            vec![p(1.0, 0.0), p(1.0, 0.0), p(1.0, 0.0)]
        )
        .is_err());
    }

    #[test]
    fn one_sided_slopes_at_kink() {
        let f = abs_pieces();
        assert_eq!(f.dir_deriv(&s(0.0), &s(-1.0)), 1.0);
        assert_eq!(f.dir_deriv(&s(0.0), &s(2.0)), 2.0);
        assert_eq!(f.grad_select(&s(0.0), &s(-1.0)), s(-1.0));
        assert_eq!(f.grad_select(&s(0.0), &s(0.0)), s(1.0));
        assert_eq!(f.min_value(), 0.0);
    }

    #[test]
    fn zigzag_single_knot() {
        let z = Zigzag::new(&[0.0], 0.25, 1.0, Some(1.0), None).unwrap();
        let f = &z.function;
        assert_eq!(f.eval(&s(0.0)), 0.0);
        assert_eq!(f.dir_deriv(&s(0.0), &s(1.0)), 1.0);
        assert_eq!(f.min_value(), -0.25);
        assert_eq!(z.min_value(), -0.25);
        assert_eq!(z.stationary_points(), vec![-0.25]);
        assert_eq!(f.sign_changes(), vec![-0.25]);
    }

    #[test]
    fn zigzag_interpolates_replies() {
        let knots = [3.0, -1.0, 0.5, 3.0, 7.25];
        let z = Zigzag::new(&knots, 0.3, 2.0, None, Some(10.0)).unwrap();
        assert_eq!(z.knots, vec![-1.0, 0.5, 3.0, 7.25]);
        assert_eq!(z.delta_sep, 1.5);
        for &k in &z.knots {
            assert_eq!(z.function.value(k), 0.0);
            assert_eq!(z.function.one_sided_slope(k, 1.0), 2.0);
            assert_eq!(z.function.one_sided_slope(k, -1.0), 2.0);
        }
        assert_eq!(z.stationary_points(), z.function.sign_changes());
        assert!((z.function.min_value() - z.min_value()).abs() < 1e-12);
    }

    #[test]
    fn zigzag_rejects_bad_theta_and_collisions() {
        assert!(Zigzag::new(&[0.0], 0.5, 1.0, None, None).is_err());
        assert!(Zigzag::new(&[0.0], 0.0, 1.0, None, None).is_err());
        assert!(Zigzag::new(&[0.0, 1.0], 0.4, 1.0, Some(2.0), None).is_err());
        assert!(Zigzag::new(&[], 0.4, 1.0, None, None).is_err());
    }
}
