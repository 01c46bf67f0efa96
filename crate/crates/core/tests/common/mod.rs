#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wirestereo::cameras::ProjectiveCamera;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A pinhole camera placed roughly `distance` from the origin and looking at it.
pub fn random_camera(rng: &mut ChaCha8Rng, distance: f64) -> ProjectiveCamera {
    let dir = random_unit(rng);
    let center = dir * distance * rng.random_range(0.8..1.2);
    let forward = -center.normalize();
    let up_hint = if forward.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
    let right = up_hint.cross(&forward).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), rng.random_range(-0.3..0.3));
    let r = roll.matrix() * r;
    let focal = rng.random_range(800.0..2000.0);
    let pp = Vector2::new(rng.random_range(400.0..600.0), rng.random_range(400.0..600.0));
    ProjectiveCamera::from_pinhole(focal, pp, r, -(r * center), (1024, 1024)).unwrap()
}

/// Random full-rank 3×4 matrix.
pub fn random_projection(rng: &mut ChaCha8Rng) -> Matrix3x4<f64> {
    Matrix3x4::from_fn(|_, _| rng.random_range(-1.0..1.0))
}

pub fn random_point(rng: &mut ChaCha8Rng, half_extent: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent),
    )
}

/// Homogeneous 2D point.
pub fn h2(x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 1.0)
}
