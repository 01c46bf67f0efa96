//! Epipolar curve matching and two-view triangulation.
//!
//! The pipeline samples the view-A annotation uniformly in arclength,
//! intersects each sample's epiline with the view-B annotation, fits a
//! monotone map `u_A -> u_B` through the accepted intersections and
//! triangulates the matched pairs into a 3D spline.

use nalgebra::{Matrix4, Vector2, Vector3};
use thiserror::Error;

use crate::bspline::{fit_curve, uniform_parameters, BSplineError, PlanarCurve, SpatialCurve};
use crate::cameras::{epiline, fundamental_matrix, CameraError, FundamentalMatrix, Line2, ProjectiveCamera};
use crate::pchip::{Pchip, PchipError};

/// Dense samples used to bracket epiline intersections.
pub const DEFAULT_DENSE_SAMPLES: usize = 2048;
/// Bisection stops once the point is this close to the line.
pub const ROOT_TOL_PX: f64 = 1e-6;
/// Reconstructions whose pooled mean reprojection error exceeds this are rejected.
pub const REPROJECTION_GATE_PX: f64 = 25.0;
/// Default number of `u_A` samples.
pub const DEFAULT_SAMPLES: usize = 64;
/// Resolution of the arclength table used by [`arclength_refit`].
pub const ARCLENGTH_TABLE_SAMPLES: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StereoError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    BSpline(#[from] BSplineError),
    #[error(transparent)]
    Pchip(#[from] PchipError),
    #[error("fewer than two epipolar matches between the curves")]
    NoMatches,
    #[error("need at least 4 samples, got {0}")]
    InvalidSampleCount(usize),
    #[error("viewing rays are degenerate (point on the baseline)")]
    DegenerateRays,
    #[error("triangulated point is at infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("only {0} points could be triangulated")]
    TooFewTriangulated(usize),
}

/// A planar spline tabulated at evenly spaced parameters.
#[derive(Debug, Clone)]
pub struct DenseCurve<'a> {
    curve: &'a PlanarCurve,
    params: Vec<f64>,
    points: Vec<Vector2<f64>>,
}

impl<'a> DenseCurve<'a> {
    pub fn new(curve: &'a PlanarCurve, n: usize) -> Self {
        let params = uniform_parameters((0.0, 1.0), n.max(2));
        let points = params.iter().map(|&u| curve.eval(u)).collect();
        Self {
            curve,
            params,
            points,
        }
    }

    /// All parameters where the curve crosses `line`, increasing.
    pub fn intersect(&self, line: &Line2) -> Vec<f64> {
        let d: Vec<f64> = self.points.iter().map(|p| line.signed_distance(p)).collect();
        let last = d.len() - 1;
        let mut roots = Vec::new();
        if d[0].abs() <= ROOT_TOL_PX {
            roots.push(self.params[0]);
        }
        for k in 0..last {
            if k > 0 && d[k] == 0.0 {
                roots.push(self.params[k]);
            } else if d[k] * d[k + 1] < 0.0 {
                roots.push(self.bisect(line, self.params[k], self.params[k + 1], d[k]));
            }
        }
        if d[last].abs() <= ROOT_TOL_PX {
            roots.push(self.params[last]);
        }
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-7);
        roots
    }

    fn bisect(&self, line: &Line2, mut lo: f64, mut hi: f64, d_lo: f64) -> f64 {
        let lo_sign = d_lo.signum();
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let d = line.signed_distance(&self.curve.eval(mid));
            if d.abs() < ROOT_TOL_PX || hi - lo <= f64::EPSILON {
                break;
            }
            if d.signum() == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mid
    }

    /// Parameter and distance of the point on the curve nearest to `x`.
    pub fn nearest(&self, x: &Vector2<f64>) -> (f64, f64) {
        let k = self
            .points
            .iter()
            .map(|p| (p - x).norm_squared())
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let lo = self.params[k.saturating_sub(1)];
        let hi = self.params[(k + 1).min(self.params.len() - 1)];
        let dist = |u: f64| (self.curve.eval(u) - x).norm();
        let u = golden_section(lo, hi, dist);
        [(u, dist(u)), (self.params[k], (self.points[k] - x).norm())]
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if b - a <= 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Intersections of `line` with the spline of `curve_b`, as increasing `u_B`.
pub fn intersect_epiline(curve_b: &PlanarCurve, line: &Line2) -> Vec<f64> {
    DenseCurve::new(curve_b, DEFAULT_DENSE_SAMPLES).intersect(line)
}

/// Sampled correspondences and the monotone map fitted through them.
#[derive(Debug, Clone)]
pub struct ParamMatch {
    /// `(u_A, u_B)` per sample; `None` where no admissible intersection exists.
    pub samples: Vec<(f64, Option<f64>)>,
    interpolant: Pchip,
}

impl ParamMatch {
    /// `f_A(u_A)`, clamped to `[0, 1]`.
    pub fn map(&self, u_a: f64) -> f64 {
        self.interpolant.eval(u_a).clamp(0.0, 1.0)
    }

    pub fn interpolant(&self) -> &Pchip {
        &self.interpolant
    }

    pub fn present(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .filter_map(|(a, b)| b.map(|b| (*a, b)))
    }
}

fn predict(accepted: &[(f64, f64)], u_a: f64) -> f64 {
    match accepted {
        [] => u_a,
        [(a, b)] => b + (u_a - a),
        [.., (a0, b0), (a1, b1)] => {
            let slope = (b1 - b0) / (a1 - a0);
            b1 + slope * (u_a - a1)
        }
    }
}

/// Matches two annotations along epilines.
///
/// Among intersections at or beyond the last accepted `u_B`, the one
/// closest to the extrapolated prediction wins. Endpoints with no
/// admissible intersection are anchored tip-to-tip and end-to-end.
pub fn match_curves(
    curve_a: &PlanarCurve,
    curve_b: &PlanarCurve,
    f: &FundamentalMatrix,
    n_samples: usize,
) -> Result<ParamMatch, StereoError> {
    if n_samples < 4 {
        return Err(StereoError::InvalidSampleCount(n_samples));
    }
    let dense_b = DenseCurve::new(curve_b, DEFAULT_DENSE_SAMPLES);
    let mut accepted: Vec<(f64, f64)> = Vec::with_capacity(n_samples);
    let mut samples = Vec::with_capacity(n_samples);

    for u_a in uniform_parameters((0.0, 1.0), n_samples) {
        let chosen = epiline(f, &curve_a.eval(u_a)).ok().and_then(|line| {
            let floor = accepted.last().map_or(0.0, |&(_, b)| b);
            let target = predict(&accepted, u_a);
            dense_b
                .intersect(&line)
                .into_iter()
                .filter(|&u| u >= floor)
                .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
        });
        if let Some(u_b) = chosen {
            accepted.push((u_a, u_b));
        }
        samples.push((u_a, chosen));
    }

    if accepted.len() < 2 {
        return Err(StereoError::NoMatches);
    }
    let mut pairs = accepted;
    if pairs[0].0 > 0.0 {
        pairs.insert(0, (0.0, 0.0));
    }
    if pairs[pairs.len() - 1].0 < 1.0 {
        pairs.push((1.0, 1.0));
    }
    let interpolant = Pchip::new(&pairs)?;
    Ok(ParamMatch {
        samples,
        interpolant,
    })
}

/// Row-normalized 4×4 system from `x × (P X) = 0`, two rows per view.
pub fn triangulation_system(
    cam_a: &ProjectiveCamera,
    cam_b: &ProjectiveCamera,
    x_a: &Vector2<f64>,
    x_b: &Vector2<f64>,
) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    for (view, (cam, x)) in [(cam_a, x_a), (cam_b, x_b)].into_iter().enumerate() {
        let p = cam.matrix();
        let rows = [
            p.row(2) * x.x - p.row(0),
            p.row(2) * x.y - p.row(1),
        ];
        for (r, row) in rows.iter().enumerate() {
            let n = row.norm();
            let row = if n > 0.0 { row / n } else { *row };
            a.set_row(2 * view + r, &row);
        }
    }
    a
}

/// Linear triangulation: the right singular vector of the smallest
/// singular value, dehomogenized.
pub fn triangulate_point(
    cam_a: &ProjectiveCamera,
    cam_b: &ProjectiveCamera,
    x_a: &Vector2<f64>,
    x_b: &Vector2<f64>,
) -> Result<Vector3<f64>, StereoError> {
    if !x_a.iter().chain(x_b.iter()).all(|v| v.is_finite()) {
        return Err(CameraError::NonFinite("image point").into());
    }
    let a = triangulation_system(cam_a, cam_b, x_a, x_b);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if sv[order[2]] <= 1e-10 * sv[order[0]] {
        return Err(StereoError::DegenerateRays);
    }
    let x = v_t.row(order[3]).transpose();
    if x.w.abs() <= 1e-10 {
        return Err(StereoError::PointAtInfinity(x.w));
    }
    Ok(x.xyz() / x.w)
}

/// Refits `curve` through `m` points equally spaced in arclength, so the
/// spline parameter tracks normalized arclength rather than the chord
/// lengths of unevenly spaced samples.
pub fn arclength_refit(curve: &SpatialCurve, m: usize) -> Result<SpatialCurve, StereoError> {
    let dense: Vec<(f64, Vector3<f64>)> = curve.sample_uniform(ARCLENGTH_TABLE_SAMPLES)?;
    let mut s = Vec::with_capacity(dense.len());
    s.push(0.0);
    for w in dense.windows(2) {
        s.push(s[s.len() - 1] + (w[1].1 - w[0].1).norm());
    }
    let total = s[s.len() - 1];
    let mut points = Vec::with_capacity(m);
    let mut k = 0;
    for target in uniform_parameters((0.0, total), m) {
        while k + 2 < s.len() && s[k + 1] < target {
            k += 1;
        }
        let span = s[k + 1] - s[k];
        let frac = if span > 0.0 { ((target - s[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let t = dense[k].0 + frac * (dense[k + 1].0 - dense[k].0);
        points.push(curve.eval_clamped(t));
    }
    Ok(fit_curve(&points, 3)?)
}

/// Output of [`reconstruct_curve`].
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub curve: SpatialCurve,
    /// Triangulated samples, tip first.
    pub points: Vec<Vector3<f64>>,
    /// Point-to-annotation distance of each reprojected sample in views A and B.
    pub per_point_reproj_px: Vec<(f64, f64)>,
    pub mean_reproj_px: f64,
    pub accepted: bool,
}

/// Full two-view reconstruction of one frame.
///
/// Rejection by the reprojection gate is reported through `accepted`, not
/// as an error.
pub fn reconstruct_curve(
    cam_a: &ProjectiveCamera,
    cam_b: &ProjectiveCamera,
    curve_a: &PlanarCurve,
    curve_b: &PlanarCurve,
    n_samples: usize,
) -> Result<ReconstructionReport, StereoError> {
    let f = fundamental_matrix(cam_a, cam_b)?;
    let matching = match_curves(curve_a, curve_b, &f, n_samples)?;

    let mut points = Vec::with_capacity(n_samples);
    for u_a in uniform_parameters((0.0, 1.0), n_samples) {
        let x_a = curve_a.eval(u_a);
        let x_b = curve_b.eval(matching.map(u_a));
        match triangulate_point(cam_a, cam_b, &x_a, &x_b) {
            Ok(x) => points.push(x),
            Err(StereoError::DegenerateRays | StereoError::PointAtInfinity(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if points.len() < 4 {
        return Err(StereoError::TooFewTriangulated(points.len()));
    }
    let curve = arclength_refit(&fit_curve(&points, 3)?, points.len())?;

    let dense_a = DenseCurve::new(curve_a, DEFAULT_DENSE_SAMPLES);
    let dense_b = DenseCurve::new(curve_b, DEFAULT_DENSE_SAMPLES);
    let mut per_point = Vec::with_capacity(points.len());
    for x in &points {
        let err = |cam: &ProjectiveCamera, dense: &DenseCurve<'_>| {
            cam.project(x).map(|px| dense.nearest(&px).1).unwrap_or(f64::INFINITY)
        };
        per_point.push((err(cam_a, &dense_a), err(cam_b, &dense_b)));
    }
    let mean = per_point.iter().map(|(a, b)| a + b).sum::<f64>() / (2 * per_point.len()) as f64;
    Ok(ReconstructionReport {
        curve,
        points,
        per_point_reproj_px: per_point,
        mean_reproj_px: mean,
        accepted: mean <= REPROJECTION_GATE_PX,
    })
}
