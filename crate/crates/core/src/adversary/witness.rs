use super::ResistingTranscript;
use crate::error::{Error, Result};
use crate::functions::{DirDiffFunction, FunctionDescriptor, Piece, PiecewiseLinear, Zigzag};

/// Half-width (in units of δ) of the slope-1 neighbourhood kept around
/// each query.
const PROTECT: f64 = 2.0;
/// Minimum distance between a kink of one witness and a kink of the other.
const SEP: f64 = 2.25;
/// Gaps at least this wide (in units of δ) get a sawtooth.
const SAWTOOTH_MIN: f64 = 9.0;

/// Largest transcript length the gradient-only pair accommodates:
/// `⌊Δ/(8δ)⌋`, with a relative slack of 1e-12 so that exact ratios such
/// as `16/(8·0.1)` are not rounded down.
pub fn query_budget(delta: f64, gap: f64) -> u64 {
    (gap / (8.0 * delta) * (1.0 + 1e-12)).floor() as u64
}

fn sorted_points(t: &ResistingTranscript) -> Result<Vec<f64>> {
    if t.is_empty() {
        return Err(Error::contract("transcript is empty"));
    }
    let mut xs = t.queried_points().to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(xs)
}

fn as_descriptor(p: &PiecewiseLinear) -> FunctionDescriptor {
    FunctionDescriptor::PiecewiseLinear {
        breakpoints: p.breakpoints().to_vec(),
        pieces: p.pieces().to_vec(),
    }
}

fn pieces_of(f: &DirDiffFunction) -> Result<PiecewiseLinear> {
    match f.descriptor() {
        Some(FunctionDescriptor::PiecewiseLinear {
            breakpoints,
            pieces,
        }) => PiecewiseLinear::new(breakpoints.clone(), pieces.clone()),
        _ => Err(Error::contract("expected a piecewise-linear function")),
    }
}

/// The pair `(f_θ₁, f_θ₂)` of zigzags with knots at the queried points,
/// both with kink spacing `δ = min(min knot gap, Δ/L)`.
///
/// Each is zero with slope `L` at every query, has `f(x_k) − inf f = Lθδ
/// ≤ Δ`, and the two kink sets are disjoint because `|θ₁ − θ₂|δ` is
/// smaller than half of any knot gap.
pub fn build_ftheta_pair(
    transcript: &ResistingTranscript,
    theta1: f64,
    theta2: f64,
    lipschitz: f64,
    gap: f64,
) -> Result<(DirDiffFunction, DirDiffFunction)> {
    if theta1 == theta2 {
        return Err(Error::contract("theta1 and theta2 must differ"));
    }
    if !(gap.is_finite() && gap > 0.0) {
        return Err(Error::contract("gap must be positive"));
    }
    let knots = sorted_points(transcript)?;
    let min_gap = knots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let spacing = min_gap.min(gap / lipschitz);
    let build = |theta| -> Result<DirDiffFunction> {
        let z = Zigzag::new(&knots, theta, lipschitz, Some(spacing), None)?;
        as_descriptor(&z.function).build()?.with_gap(gap)
    };
    Ok((build(theta1)?, build(theta2)?))
}

/// Slopes of a witness, as `(start, slope)` segments after an initial
/// slope on `(−∞, first start)`.
struct Profile {
    first: f64,
    segments: Vec<(f64, f64)>,
}

impl Profile {
    fn new(first: f64) -> Self {
        Self {
            first,
            segments: Vec::new(),
        }
    }

    fn push(&mut self, start: f64, slope: f64) {
        let current = self.segments.last().map_or(self.first, |s| s.1);
        if let Some(last) = self.segments.last_mut() {
            if last.0 == start {
                last.1 = slope;
                return;
            }
        }
        if current != slope {
            self.segments.push((start, slope));
        }
    }

    /// Integrates the slopes, then shifts values so that `f(origin) = 0`.
    fn build(&self, origin: f64) -> Result<PiecewiseLinear> {
        let assemble = |offset: f64| {
            let mut pieces = Vec::with_capacity(self.segments.len() + 1);
            let mut breakpoints = Vec::with_capacity(self.segments.len());
            let mut value = offset;
            let first_anchor = self.segments.first().map_or(origin, |s| s.0);
            pieces.push(Piece {
                slope: self.first,
                anchor: first_anchor,
                value,
            });
            for (i, &(start, slope)) in self.segments.iter().enumerate() {
                if i > 0 {
                    let (prev_start, prev_slope) = self.segments[i - 1];
                    value += prev_slope * (start - prev_start);
                }
                breakpoints.push(start);
                pieces.push(Piece {
                    slope,
                    anchor: start,
                    value,
                });
            }
            PiecewiseLinear::new(breakpoints, pieces)
        };
        let raw = assemble(0.0)?;
        assemble(-raw.value(origin))
    }
}

/// The gradient-only witness pair for `transcript`, in `F(Δ, 1)`.
///
/// Both functions have slope 1 within `2δ` of every query. Between the
/// slope-1 blocks, in a gap `[a, b]` of width `w`:
///
/// * `w ≥ 9δ`: both carry a sawtooth of `n = ⌊w/(9δ)⌋` teeth with legs of
///   length `s = w/(2n)`; `f` starts descending at `a`, `g` is offset by
///   `s/2`, so kinks of the two are at least `s/2 ≥ 2.25δ` apart;
/// * `2.25δ < w < 9δ`: `f` descends right after `a` and `g` right before
///   `b`, each over `(w − 2.25δ)/2`;
/// * narrower gaps keep slope 1.
///
/// On the left `f` turns down at the first block and `g` `2.25δ` further
/// left; both rise with slope 1 to the right of the last block. Kinks of
/// the two functions are thus at least `2.25δ > 2δ` apart, which makes
/// their (δ, ε)-stationary regions (ε < 1) disjoint.
///
/// Each query adds at most `4δ + 2.25δ` to the values seen and a sawtooth
/// dips at most `9δ`, so `sup_k f(x_k) − inf f ≤ 8δK ≤ Δ`; the spread is
/// also checked numerically.
///
/// Errors when the transcript is longer than [`query_budget`].
pub fn build_lower_bound_pair(
    transcript: &ResistingTranscript,
    delta: f64,
    gap: f64,
) -> Result<(DirDiffFunction, DirDiffFunction)> {
    if !(delta.is_finite() && delta > 0.0 && gap.is_finite() && gap > 0.0) {
        return Err(Error::contract("delta and gap must be positive"));
    }
    let budget = query_budget(delta, gap);
    if transcript.len() as u64 > budget {
        return Err(Error::contract(format!(
            "{} queries exceed the budget floor(Delta/(8 delta)) = {budget}",
            transcript.len()
        )));
    }
    let points = sorted_points(transcript)?;
    let rho = PROTECT * delta;

    // merged slope-1 blocks
    let mut blocks: Vec<(f64, f64)> = Vec::new();
    for &q in &points {
        match blocks.last_mut() {
            Some(last) if q - rho <= last.1 => last.1 = q + rho,
            _ => blocks.push((q - rho, q + rho)),
        }
    }

    let mut f = Profile::new(-1.0);
    let mut g = Profile::new(-1.0);
    g.push(blocks[0].0 - SEP * delta, 1.0);
    for (i, &(lo, hi)) in blocks.iter().enumerate() {
        f.push(lo, 1.0);
        g.push(lo, 1.0);
        let Some(&(b, _)) = blocks.get(i + 1) else {
            break;
        };
        let (a, w) = (hi, b - hi);
        if w >= SAWTOOTH_MIN * delta {
            let n = (w / (SAWTOOTH_MIN * delta)).floor() as usize;
            let s = w / (2 * n) as f64;
            for k in 0..2 * n {
                let slope = if k % 2 == 0 { -1.0 } else { 1.0 };
                f.push(a + k as f64 * s, slope);
                g.push(a + (k as f64 + 0.5) * s, slope);
            }
        } else if w > SEP * delta {
            let d = 0.5 * (w - SEP * delta);
            f.push(a, -1.0);
            f.push(a + d, 1.0);
            g.push(b - d, -1.0);
        }
    }

    let origin = points[0];
    let fs = f.build(origin)?;
    let gs = g.build(origin)?;
    let top = points.iter().map(|&x| fs.value(x).max(gs.value(x))).fold(f64::MIN, f64::max);
    let spread = top - fs.min_value().min(gs.min_value());
    if spread > gap * (1.0 + 1e-12) {
        return Err(Error::contract(format!(
            "witness spread {spread} exceeds the gap {gap}"
        )));
    }
    Ok((
        as_descriptor(&fs).build()?.with_gap(gap)?,
        as_descriptor(&gs).build()?.with_gap(gap)?,
    ))
}

/// Kinks of a piecewise-linear `f` where the slope changes sign: the
/// points whose Clarke subdifferential contains 0.
pub fn stationary_kinks(f: &DirDiffFunction) -> Result<Vec<f64>> {
    Ok(pieces_of(f)?.sign_changes())
}

/// Smallest `|c − c'|` over stationary kinks `c` of `f` and `c'` of `g`
/// (infinite if either has none). Goldstein δ-stationary regions are the
/// `δ`-neighbourhoods of these kinks, so they are disjoint iff this exceeds
/// `2δ`.
pub fn min_kink_separation(f: &DirDiffFunction, g: &DirDiffFunction) -> Result<f64> {
    let a = stationary_kinks(f)?;
    let b = stationary_kinks(g)?;
    let mut best = f64::INFINITY;
    for &x in &a {
        let i = b.partition_point(|&y| y < x);
        for j in [i.wrapping_sub(1), i] {
            if let Some(&y) = b.get(j) {
                best = best.min((x - y).abs());
            }
        }
    }
    Ok(best)
}

/// Exact `d(0, ∂_δ f(x))` for a one-dimensional piecewise-linear `f`: the
/// distance from 0 to the interval spanned by the slopes of the pieces
/// meeting `[x − δ, x + δ]`. `δ = 0` gives the Clarke subdifferential.
pub fn goldstein_distance_1d(f: &DirDiffFunction, x: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && x.is_finite()) {
        return Err(Error::contract("need finite x and delta >= 0"));
    }
    let p = pieces_of(f)?;
    let bps = p.breakpoints();
    let (lo_x, hi_x) = (x - delta, x + delta);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, piece) in p.pieces().iter().enumerate() {
        let left = if i == 0 { f64::NEG_INFINITY } else { bps[i - 1] };
        let right = bps.get(i).copied().unwrap_or(f64::INFINITY);
        if left <= hi_x && right >= lo_x {
            lo = lo.min(piece.slope);
            hi = hi.max(piece.slope);
        }
    }
    Ok(if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    })
}
