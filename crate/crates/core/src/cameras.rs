//! Projective cameras, two-view epipolar geometry and DLT calibration.
//!
//! World coordinates are in millimetres, image coordinates in pixels with a
//! top-left origin. Homogeneous vectors returned from this module are
//! canonicalized: unit norm, last component nonnegative when it is nonzero.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector2, Vector3, Vector4};
use thiserror::Error;

/// Depth below which a projection is treated as lying on the principal plane.
const MIN_PROJECTIVE_DEPTH: f64 = 1e-12;
/// Relative singular-value cutoff for rank decisions and the pseudoinverse.
const RANK_TOL: f64 = 1e-12;
/// Minimum world distance between two camera centres.
const MIN_BASELINE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("point projects onto the principal plane (depth {0:e})")]
    DegenerateProjection(f64),
    #[error("projection matrix has rank < 3")]
    RankDeficient,
    #[error("camera centres coincide; epipolar geometry is undefined")]
    CoincidentCenters,
    #[error("point maps to a null epipolar line (it is the epipole)")]
    ZeroLine,
    #[error("DLT needs at least 6 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate calibration configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A pinhole camera described by its 3×4 projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveCamera {
    p: Matrix3x4<f64>,
    image_size: (u32, u32),
}

impl ProjectiveCamera {
    /// Wraps a projection matrix, rejecting non-finite entries and rank < 3.
    pub fn new(p: Matrix3x4<f64>, image_size: (u32, u32)) -> Result<Self, CameraError> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CameraError::NonFinite("projection matrix"));
        }
        let cam = Self { p, image_size };
        cam.center()?;
        Ok(cam)
    }

    /// Builds `K [R | t]` for a camera with square pixels and no skew.
    ///
    /// `rotation` maps world directions into the camera frame (x right,
    /// y down, z forward) and `translation` is `-R C` for centre `C`.
    pub fn from_pinhole(
        focal_px: f64,
        principal_point: Vector2<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        image_size: (u32, u32),
    ) -> Result<Self, CameraError> {
        let k = Matrix3::new(
            focal_px,
            0.0,
            principal_point.x,
            0.0,
            focal_px,
            principal_point.y,
            0.0,
            0.0,
            1.0,
        );
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        rt.set_column(3, &translation);
        Self::new(k * rt, image_size)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.p
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    /// Projects a world point to pixel coordinates.
    pub fn project(&self, x: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CameraError::NonFinite("world point"));
        }
        let h = self.p * x.push(1.0);
        if h.z.abs() <= MIN_PROJECTIVE_DEPTH {
            return Err(CameraError::DegenerateProjection(h.z));
        }
        Ok(Vector2::new(h.x / h.z, h.y / h.z))
    }

    /// Right null vector of `P`, canonicalized.
    pub fn center(&self) -> Result<Vector4<f64>, CameraError> {
        // Pad to 4×4 so the SVD carries the full right singular basis.
        let mut padded = Matrix4::zeros();
        padded.fixed_view_mut::<3, 4>(0, 0).copy_from(&self.p);
        let svd = padded.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sv = &svd.singular_values;
        let (mut order, max) = ([0usize, 1, 2, 3], sv.max());
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        if max <= 0.0 || sv[order[2]] <= RANK_TOL * max {
            return Err(CameraError::RankDeficient);
        }
        let c = v_t.row(order[3]).transpose();
        Ok(canonicalize4(c))
    }

    /// Moore–Penrose pseudoinverse of `P` with a relative singular cutoff.
    pub fn pseudo_inverse(&self) -> Matrix4x3<f64> {
        let svd = self.p.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let max = svd.singular_values.max();
        let mut pinv = Matrix4x3::zeros();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > RANK_TOL * max {
                pinv += v_t.row(k).transpose() * u.column(k).transpose() / s;
            }
        }
        pinv
    }
}

/// Projects through `cam`; free-function form of [`ProjectiveCamera::project`].
pub fn project(cam: &ProjectiveCamera, x: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
    cam.project(x)
}

pub fn camera_center(cam: &ProjectiveCamera) -> Result<Vector4<f64>, CameraError> {
    cam.center()
}

/// Cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn canonicalize4(v: Vector4<f64>) -> Vector4<f64> {
    let v = v.normalize();
    if v.w < 0.0 {
        -v
    } else {
        v
    }
}

/// Fundamental matrix mapping view-A points to view-B epilines.
///
/// Stored with unit Frobenius norm; the first entry (row-major) whose
/// magnitude exceeds `1e-12` of the largest entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    f: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Normalizes an arbitrary nonzero 3×3 matrix into canonical form.
    pub fn from_matrix(m: Matrix3<f64>) -> Option<Self> {
        let norm = m.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        let mut f = m / norm;
        let max = f.amax();
        // nalgebra is column-major; walk rows explicitly.
        let lead = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| f[(r, c)])
            .find(|v| v.abs() > 1e-12 * max)?;
        if lead < 0.0 {
            f = -f;
        }
        Some(Self { f })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.f
    }

    /// `x_Bᵀ F x_A` for pixel points.
    pub fn residual(&self, x_a: &Vector2<f64>, x_b: &Vector2<f64>) -> f64 {
        x_b.push(1.0).dot(&(self.f * x_a.push(1.0)))
    }

    /// Epipole in view A (right null vector), canonicalized.
    pub fn epipole_a(&self) -> Vector3<f64> {
        null_vector3(&self.f)
    }

    /// Epipole in view B (left null vector), canonicalized.
    pub fn epipole_b(&self) -> Vector3<f64> {
        null_vector3(&self.f.transpose())
    }
}

/// Right null vector of a rank-2 matrix: the longest cross product of two
/// rows, which stays accurate when the second singular value is tiny.
fn null_vector3(m: &Matrix3<f64>) -> Vector3<f64> {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let best = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| rows[i].cross(&rows[j]))
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .expect("three pairs");
    let v = if best.norm() > 1e-300 {
        best.normalize()
    } else {
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        v_t.row(svd.singular_values.imin()).transpose().normalize()
    };
    if v.z < 0.0 {
        -v
    } else {
        v
    }
}

/// `F = [e_B]× P_B P_A⁺` with `e_B = P_B C_A`.
pub fn fundamental_matrix(
    cam_a: &ProjectiveCamera,
    cam_b: &ProjectiveCamera,
) -> Result<FundamentalMatrix, CameraError> {
    let c_a = cam_a.center()?;
    let c_b = cam_b.center()?;
    if centers_coincide(&c_a, &c_b) {
        return Err(CameraError::CoincidentCenters);
    }
    let e_b = cam_b.matrix() * c_a;
    let f = skew(&e_b) * cam_b.matrix() * cam_a.pseudo_inverse();
    FundamentalMatrix::from_matrix(f).ok_or(CameraError::CoincidentCenters)
}

fn centers_coincide(a: &Vector4<f64>, b: &Vector4<f64>) -> bool {
    let finite = |c: &Vector4<f64>| c.w.abs() > 1e-12;
    match (finite(a), finite(b)) {
        (true, true) => (a.xyz() / a.w - b.xyz() / b.w).norm() <= MIN_BASELINE,
        (false, false) => (a - b).norm() <= 1e-12 || (a + b).norm() <= 1e-12,
        _ => false,
    }
}

/// An image line `a u + b v + c = 0` with `(a, b)` of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line2 {
    /// Normalizes homogeneous line coordinates; `None` for the null line or
    /// the line at infinity.
    pub fn from_homogeneous(l: &Vector3<f64>) -> Option<Self> {
        let n = l.x.hypot(l.y);
        if !n.is_finite() || n <= 1e-12 * l.norm().max(f64::MIN_POSITIVE) || n == 0.0 {
            return None;
        }
        Some(Self {
            a: l.x / n,
            b: l.y / n,
            c: l.z / n,
        })
    }

    /// Signed pixel distance of `x` from the line.
    pub fn signed_distance(&self, x: &Vector2<f64>) -> f64 {
        self.a * x.x + self.b * x.y + self.c
    }
}

/// Epiline in view B for pixel `x_a` in view A.
pub fn epiline(f: &FundamentalMatrix, x_a: &Vector2<f64>) -> Result<Line2, CameraError> {
    if !x_a.iter().all(|v| v.is_finite()) {
        return Err(CameraError::NonFinite("image point"));
    }
    let xh = x_a.push(1.0);
    let l = f.matrix() * xh;
    if l.xy().norm() <= 1e-12 * xh.norm() {
        return Err(CameraError::ZeroLine);
    }
    Line2::from_homogeneous(&l).ok_or(CameraError::ZeroLine)
}

/// A world point paired with its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Vector3<f64>,
    pub pixel: Vector2<f64>,
}

/// Result of [`calibrate_dlt`].
#[derive(Debug, Clone)]
pub struct Calibration {
    pub camera: ProjectiveCamera,
    /// Mean pixel distance between observations and reprojections.
    pub mean_reprojection_px: f64,
}

/// Similarity transform moving the centroid to the origin with RMS
/// distance `target_rms`. Returns `(scale, centroid)`.
fn isotropic_normalization<const D: usize>(
    pts: impl Iterator<Item = nalgebra::SVector<f64, D>> + Clone,
    target_rms: f64,
) -> Option<(f64, nalgebra::SVector<f64, D>)> {
    let n = pts.clone().count() as f64;
    let centroid = pts.clone().fold(nalgebra::SVector::<f64, D>::zeros(), |a, p| a + p) / n;
    let ms = pts.map(|p| (p - centroid).norm_squared()).sum::<f64>() / n;
    let rms = ms.sqrt();
    if !(rms > 0.0 && rms.is_finite()) {
        return None;
    }
    Some((target_rms / rms, centroid))
}

/// Normalized direct linear transform from ≥ 6 correspondences.
///
/// Both point sets are moved to zero centroid and scaled to RMS distance √2
/// (pixels) and √3 (world) before the 2n×12 system is solved by SVD.
pub fn calibrate_dlt(
    correspondences: &[Correspondence],
    image_size: (u32, u32),
) -> Result<Calibration, CameraError> {
    let n = correspondences.len();
    if n < 6 {
        return Err(CameraError::InsufficientPoints(n));
    }
    if correspondences
        .iter()
        .any(|c| c.world.iter().chain(c.pixel.iter()).any(|v| !v.is_finite()))
    {
        return Err(CameraError::NonFinite("correspondence"));
    }

    let (s_img, c_img) =
        isotropic_normalization(correspondences.iter().map(|c| c.pixel), 2f64.sqrt())
            .ok_or(CameraError::DegenerateConfiguration("all pixels coincide"))?;
    let (s_world, c_world) =
        isotropic_normalization(correspondences.iter().map(|c| c.world), 3f64.sqrt())
            .ok_or(CameraError::DegenerateConfiguration("all world points coincide"))?;

    // Coplanar world points leave the DLT system without a unique solution.
    let mut spread = DMatrix::zeros(n, 3);
    for (i, c) in correspondences.iter().enumerate() {
        let w = (c.world - c_world) * s_world;
        spread.set_row(i, &w.transpose());
    }
    let sv = spread.singular_values();
    if sv.min() <= 1e-9 * sv.max() {
        return Err(CameraError::DegenerateConfiguration("world points are coplanar"));
    }

    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, c) in correspondences.iter().enumerate() {
        let w = ((c.world - c_world) * s_world).push(1.0);
        let x = (c.pixel - c_img) * s_img;
        for j in 0..4 {
            a[(2 * i, j)] = w[j];
            a[(2 * i, 8 + j)] = -x.x * w[j];
            a[(2 * i + 1, 4 + j)] = w[j];
            a[(2 * i + 1, 8 + j)] = -x.y * w[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if sv.len() < 12 || sv[order[10]] <= 1e-10 * sv[order[0]] {
        return Err(CameraError::DegenerateConfiguration("rank-deficient DLT system"));
    }
    let h = v_t.row(order[11]);
    let p_norm = Matrix3x4::from_fn(|r, c| h[4 * r + c]);

    let t_img = Matrix3::new(
        s_img,
        0.0,
        -s_img * c_img.x,
        0.0,
        s_img,
        -s_img * c_img.y,
        0.0,
        0.0,
        1.0,
    );
    let t_img_inv = t_img
        .try_inverse()
        .ok_or(CameraError::DegenerateConfiguration("image normalization"))?;
    let mut t_world = Matrix4::identity() * s_world;
    t_world[(3, 3)] = 1.0;
    t_world
        .fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(-s_world * c_world));

    let mut p = t_img_inv * p_norm * t_world;
    p /= p.norm();
    let camera = ProjectiveCamera::new(p, image_size)?;

    let mut total = 0.0;
    for c in correspondences {
        let x = camera.project(&c.world)?;
        total += (x - c.pixel).norm();
    }
    Ok(Calibration {
        camera,
        mean_reprojection_px: total / n as f64,
    })
}
