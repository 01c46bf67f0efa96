//! B-spline basis functions, curve evaluation and interpolating fits.
//!
//! Curves are generic over their ambient dimension; [`SpatialCurve`] is the
//! 3D reconstruction output and [`PlanarCurve`] wraps a 2D annotation with
//! its arclength parameterization.

use nalgebra::{DMatrix, SVector, Vector2};
use thiserror::Error;

/// Consecutive polyline vertices closer than this are merged.
pub const DUPLICATE_TOL: f64 = 1e-9;
/// Polylines shorter than this have no usable arclength parameterization.
const MIN_LENGTH: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BSplineError {
    #[error("basis index {index} out of range for {count} basis functions")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("parameter {0} is outside the evaluation domain")]
    OutOfDomain(f64),
    #[error("invalid knot vector: {0}")]
    InvalidKnots(&'static str),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("curve has (near) zero length")]
    DegenerateCurve,
    #[error("interpolation system is singular")]
    SolveFailure,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("control point count {got} does not match knot vector ({expected})")]
    CountMismatch { expected: usize, got: usize },
    #[error("sample count must be at least 2")]
    InvalidSampleCount,
}

/// Nondecreasing knots `t_0..=t_m` with a degree `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, BSplineError> {
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(BSplineError::NonFinite);
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(BSplineError::InvalidKnots("too few knots for degree"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(BSplineError::InvalidKnots("knots must be nondecreasing"));
        }
        let kv = Self { knots, degree };
        let (lo, hi) = kv.domain();
        if hi <= lo {
            return Err(BSplineError::InvalidKnots("empty evaluation domain"));
        }
        Ok(kv)
    }

    /// Clamped knots on `[0, 1]` with uniformly spaced interior knots.
    pub fn clamped_uniform(n_ctrl: usize, degree: usize) -> Result<Self, BSplineError> {
        if n_ctrl < degree + 1 {
            return Err(BSplineError::TooFewPoints {
                needed: degree + 1,
                got: n_ctrl,
            });
        }
        let spans = n_ctrl - degree;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..spans).map(|j| j as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(knots, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `m - p`.
    pub fn basis_count(&self) -> usize {
        self.knots.len() - 1 - self.degree
    }

    /// `[t_p, t_{m-p}]`.
    pub fn domain(&self) -> (f64, f64) {
        let m = self.knots.len() - 1;
        (self.knots[self.degree], self.knots[m - self.degree])
    }

    /// Knot span `k` with `t_k <= t < t_{k+1}`, closed on the right at the
    /// end of the domain.
    fn span(&self, t: f64) -> usize {
        let p = self.degree;
        let last = self.basis_count() - 1;
        let (_, hi) = self.domain();
        if t >= hi {
            // Last nonempty span ending at the domain end.
            let mut k = last;
            while k > p && self.knots[k] >= hi {
                k -= 1;
            }
            return k;
        }
        // partition_point gives the first knot > t; the span starts before it.
        let k = self.knots.partition_point(|&x| x <= t) - 1;
        k.clamp(p, last)
    }

    /// Nonzero basis values `B_{k-p..=k, p}(t)` on span `k` (the triangular
    /// Cox–de Boor scheme).
    fn nonzero_basis(&self, k: usize, t: f64) -> Vec<f64> {
        let p = self.degree;
        let u = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[k + 1 - j];
            right[j] = u[k + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }
}

/// Cox–de Boor basis function `B_{i,p}(t)` over raw knots.
///
/// `0/0` terms are taken as zero. The degree-0 indicator is closed on the
/// right at the final knot, so the last basis function equals one there.
pub fn basis(i: usize, p: usize, t: f64, knots: &[f64]) -> Result<f64, BSplineError> {
    if knots.len() < p + 2 {
        return Err(BSplineError::InvalidKnots("too few knots for degree"));
    }
    let count = knots.len() - 1 - p;
    if i >= count {
        return Err(BSplineError::IndexOutOfRange { index: i, count });
    }
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    if !(lo..=hi).contains(&t) {
        return Err(BSplineError::OutOfDomain(t));
    }
    Ok(cox_de_boor(i, p, t, knots))
}

fn cox_de_boor(i: usize, p: usize, t: f64, knots: &[f64]) -> f64 {
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        let last = knots[knots.len() - 1];
        return if (a <= t && t < b) || (t == last && a < b && b == last) {
            1.0
        } else {
            0.0
        };
    }
    let mut value = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 != 0.0 {
        value += (t - knots[i]) / d1 * cox_de_boor(i, p - 1, t, knots);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 != 0.0 {
        value += (knots[i + p + 1] - t) / d2 * cox_de_boor(i + 1, p - 1, t, knots);
    }
    value
}

/// `C(t) = Σ P_i B_{i,p}(t)` in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline<const D: usize> {
    control_points: Vec<SVector<f64, D>>,
    knots: KnotVector,
}

/// A 3D curve in millimetres.
pub type SpatialCurve = BSpline<3>;

impl<const D: usize> BSpline<D> {
    pub fn new(
        control_points: Vec<SVector<f64, D>>,
        knots: KnotVector,
    ) -> Result<Self, BSplineError> {
        let expected = knots.basis_count();
        if control_points.len() != expected {
            return Err(BSplineError::CountMismatch {
                expected,
                got: control_points.len(),
            });
        }
        if control_points.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(BSplineError::NonFinite);
        }
        Ok(Self {
            control_points,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn control_points(&self) -> &[SVector<f64, D>] {
        &self.control_points
    }

    pub fn domain(&self) -> (f64, f64) {
        self.knots.domain()
    }

    /// Evaluates the curve; errors outside `[t_p, t_{m-p}]`.
    pub fn eval(&self, t: f64) -> Result<SVector<f64, D>, BSplineError> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return Err(BSplineError::OutOfDomain(t));
        }
        Ok(self.eval_clamped(t))
    }

    /// Evaluates at `t` clamped into the domain.
    pub fn eval_clamped(&self, t: f64) -> SVector<f64, D> {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let p = self.degree();
        let knots = self.knots.as_slice();
        // Clamped ends interpolate the end control points exactly.
        if t == lo && knots[..=p].iter().all(|&u| u == lo) {
            return self.control_points[0];
        }
        if t == hi && knots[knots.len() - p - 1..].iter().all(|&u| u == hi) {
            return self.control_points[self.control_points.len() - 1];
        }
        let k = self.knots.span(t);
        self.knots
            .nonzero_basis(k, t)
            .iter()
            .enumerate()
            .fold(SVector::zeros(), |acc, (j, b)| {
                acc + self.control_points[k - p + j] * *b
            })
    }

    /// `n` points at `t_k = t_p + k/(n-1) (t_{m-p} - t_p)`, endpoints included.
    pub fn sample_uniform(&self, n: usize) -> Result<Vec<(f64, SVector<f64, D>)>, BSplineError> {
        if n < 2 {
            return Err(BSplineError::InvalidSampleCount);
        }
        Ok(uniform_parameters(self.domain(), n)
            .into_iter()
            .map(|t| (t, self.eval_clamped(t)))
            .collect())
    }

    /// Applies `f` to every control point. Affine maps commute with
    /// evaluation.
    pub fn map_points(&self, f: impl Fn(&SVector<f64, D>) -> SVector<f64, D>) -> Self {
        Self {
            control_points: self.control_points.iter().map(f).collect(),
            knots: self.knots.clone(),
        }
    }
}

/// Parameters `t_p + k/(n-1) (t_{m-p} - t_p)`; the last one is exactly `t_{m-p}`.
pub fn uniform_parameters((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (k as f64 / (n - 1) as f64) * (hi - lo)
            }
        })
        .collect()
}

/// Drops consecutive vertices within [`DUPLICATE_TOL`] of their predecessor.
pub fn dedup_polyline<const D: usize>(points: &[SVector<f64, D>]) -> Vec<SVector<f64, D>> {
    let mut out: Vec<SVector<f64, D>> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|q| (p - q).norm() > DUPLICATE_TOL) {
            out.push(*p);
        }
    }
    out
}

/// Normalized cumulative chord length of a polyline.
///
/// Consecutive duplicates are removed first; the returned vertices are the
/// ones the parameters refer to.
pub fn parameterize_arclength<const D: usize>(
    points: &[SVector<f64, D>],
) -> Result<(Vec<SVector<f64, D>>, Vec<f64>), BSplineError> {
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(BSplineError::NonFinite);
    }
    let pts = dedup_polyline(points);
    if pts.len() < 2 {
        return Err(BSplineError::DegenerateCurve);
    }
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }
    if acc <= MIN_LENGTH {
        return Err(BSplineError::DegenerateCurve);
    }
    let last = cumulative.len() - 1;
    let u = cumulative
        .iter()
        .enumerate()
        .map(|(k, s)| if k == last { 1.0 } else { s / acc })
        .collect();
    Ok((pts, u))
}

/// Clamped knots for interpolation at `params` by averaging `p`
/// consecutive parameters.
pub fn averaged_knots(params: &[f64], degree: usize) -> Result<KnotVector, BSplineError> {
    let n = params.len();
    if n < degree + 1 {
        return Err(BSplineError::TooFewPoints {
            needed: degree + 1,
            got: n,
        });
    }
    let (first, last) = (params[0], params[n - 1]);
    let mut knots = vec![first; degree + 1];
    if degree > 0 {
        for j in 1..n - degree {
            let avg = params[j..j + degree].iter().sum::<f64>() / degree as f64;
            knots.push(avg);
        }
    } else {
        // Degree 0 has one span per point; split halfway between parameters.
        knots.extend(params.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    }
    knots.extend(std::iter::repeat_n(last, degree + 1));
    KnotVector::new(knots, degree)
}

/// Interpolating B-spline through `points` at the given increasing
/// parameters, using averaged clamped knots.
pub fn interpolate<const D: usize>(
    points: &[SVector<f64, D>],
    params: &[f64],
    degree: usize,
) -> Result<BSpline<D>, BSplineError> {
    let n = points.len();
    if params.len() != n {
        return Err(BSplineError::CountMismatch {
            expected: n,
            got: params.len(),
        });
    }
    let knots = averaged_knots(params, degree)?;
    let mut system = DMatrix::zeros(n, n);
    for (row, &t) in params.iter().enumerate() {
        let k = knots.span(t);
        for (j, b) in knots.nonzero_basis(k, t).into_iter().enumerate() {
            system[(row, k - degree + j)] = b;
        }
    }
    let rhs = DMatrix::from_fn(n, D, |r, c| points[r][c]);
    let solution = system.lu().solve(&rhs).ok_or(BSplineError::SolveFailure)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(BSplineError::SolveFailure);
    }
    let ctrl = (0..n)
        .map(|r| SVector::<f64, D>::from_fn(|c, _| solution[(r, c)]))
        .collect();
    BSpline::new(ctrl, knots)
}

/// Interpolating spline through a polyline at its arclength parameters.
pub fn fit_curve<const D: usize>(
    polyline: &[SVector<f64, D>],
    degree: usize,
) -> Result<BSpline<D>, BSplineError> {
    let distinct = dedup_polyline(polyline).len();
    if distinct < degree + 1 {
        return Err(BSplineError::TooFewPoints {
            needed: degree + 1,
            got: distinct,
        });
    }
    let (pts, u) = parameterize_arclength(polyline)?;
    interpolate(&pts, &u, degree)
}

/// A 2D annotation polyline with its arclength spline.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    points: Vec<Vector2<f64>>,
    u: Vec<f64>,
    spline: BSpline<2>,
}

impl PlanarCurve {
    /// Fits a cubic (or lower degree for fewer than four distinct vertices).
    pub fn new(points: &[Vector2<f64>]) -> Result<Self, BSplineError> {
        let (pts, u) = parameterize_arclength(points)?;
        let degree = 3.min(pts.len() - 1);
        let spline = interpolate(&pts, &u, degree)?;
        Ok(Self {
            points: pts,
            u,
            spline,
        })
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.u
    }

    pub fn spline(&self) -> &BSpline<2> {
        &self.spline
    }

    pub fn eval(&self, u: f64) -> Vector2<f64> {
        self.spline.eval_clamped(u)
    }
}
