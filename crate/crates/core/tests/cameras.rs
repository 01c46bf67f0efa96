mod common;

use common::{h2, random_camera, random_point, random_projection, rng};
use nalgebra::{Matrix3x4, Vector3};
use rand_distr::{Distribution, Normal};
use wirestereo::cameras::{
    calibrate_dlt, camera_center, epiline, fundamental_matrix, project, skew, CameraError, Correspondence,
    ProjectiveCamera,
};

#[test]
fn projection_matches_homogeneous_multiply() {
    let mut r = rng(1);
    for _ in 0..50 {
        let p = random_projection(&mut r);
        let cam = ProjectiveCamera::new(p, (100, 100)).unwrap();
        let x = random_point(&mut r, 10.0);
        let mut h = [0.0; 3];
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = p[(i, 0)] * x.x + p[(i, 1)] * x.y + p[(i, 2)] * x.z + p[(i, 3)];
        }
        if h[2].abs() <= 1e-12 {
            continue;
        }
        let got = project(&cam, &x).unwrap();
        assert!((got.x - h[0] / h[2]).abs() <= 1e-12 * (1.0 + got.x.abs()));
        assert!((got.y - h[1] / h[2]).abs() <= 1e-12 * (1.0 + got.y.abs()));
    }
}

#[test]
fn principal_plane_point_is_degenerate() {
    let cam = ProjectiveCamera::new(Matrix3x4::identity(), (10, 10)).unwrap();
    assert!(matches!(
        cam.project(&Vector3::new(1.0, 1.0, 0.0)),
        Err(CameraError::DegenerateProjection(_))
    ));
}

#[test]
fn random_centers_are_null_vectors() {
    let mut r = rng(2);
    for _ in 0..50 {
        let cam = ProjectiveCamera::new(random_projection(&mut r), (10, 10)).unwrap();
        let c = camera_center(&cam).unwrap();
        assert!((cam.matrix() * c).norm() < 1e-10);
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!(c.w >= 0.0);
    }
}

#[test]
fn skew_matches_cross_product() {
    let mut r = rng(3);
    for _ in 0..100 {
        let v = random_point(&mut r, 5.0);
        let w = random_point(&mut r, 5.0);
        let c = Vector3::new(v.y * w.z - v.z * w.y, v.z * w.x - v.x * w.z, v.x * w.y - v.y * w.x);
        assert!((skew(&v) * w - c).norm() < 1e-12);
        assert_eq!(skew(&v) * v, Vector3::zeros());
        assert_eq!(skew(&v).transpose(), -skew(&v));
    }
}

#[test]
fn random_rigs_satisfy_epipolar_constraint() {
    let mut r = rng(4);
    for _ in 0..100 {
        let a = random_camera(&mut r, 300.0);
        let b = random_camera(&mut r, 300.0);
        let f = fundamental_matrix(&a, &b).unwrap();
        assert!((f.matrix().norm() - 1.0).abs() < 1e-12);
        let sv = f.matrix().singular_values();
        assert!(sv.min() / sv.max() < 1e-9);
        for _ in 0..20 {
            let x = random_point(&mut r, 50.0);
            let xa = a.project(&x).unwrap();
            let xb = b.project(&x).unwrap();
            assert!(f.residual(&xa, &xb).abs() < 1e-9);
            let line = epiline(&f, &xa).unwrap();
            assert!(line.signed_distance(&xb).abs() < 1e-6);
        }
        assert!((f.matrix() * f.epipole_a()).norm() < 1e-9);
        assert!((f.matrix().transpose() * f.epipole_b()).norm() < 1e-9);
    }
}

#[test]
fn epipole_matches_projected_center() {
    let mut r = rng(5);
    let a = random_camera(&mut r, 300.0);
    let b = random_camera(&mut r, 300.0);
    let f = fundamental_matrix(&a, &b).unwrap();
    let e_b = b.matrix() * a.center().unwrap();
    let e = f.epipole_b();
    let dev = e.normalize().cross(&e_b.normalize()).norm();
    assert!(dev < 1e-9, "{dev}");
    let x = h2(&a.project(&Vector3::new(1.0, 2.0, 3.0)).unwrap());
    assert!((f.matrix() * x).dot(&e).abs() < 1e-9);
}

fn correspondences(cam: &ProjectiveCamera, n: usize, seed: u64) -> Vec<Correspondence> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let world = random_point(&mut r, 50.0);
            Correspondence {
                world,
                pixel: cam.project(&world).unwrap(),
            }
        })
        .collect()
}

fn normalized(p: &Matrix3x4<f64>) -> Matrix3x4<f64> {
    let mut p = p / p.norm();
    let pivot = p.iter().copied().find(|v| v.abs() > 1e-6).unwrap();
    if pivot < 0.0 {
        p = -p;
    }
    p
}

#[test]
fn dlt_recovers_exact_projection() {
    let mut r = rng(6);
    for seed in 0..10 {
        let cam = random_camera(&mut r, 300.0);
        for n in [6, 12, 40] {
            let cal = calibrate_dlt(&correspondences(&cam, n, seed), (1024, 1024)).unwrap();
            let d = normalized(cal.camera.matrix()) - normalized(cam.matrix());
            assert!(d.amax() < 1e-8, "n={n} deviation {}", d.amax());
            assert!(cal.mean_reprojection_px < 1e-6);
        }
    }
}

#[test]
fn dlt_with_pixel_noise() {
    let mut r = rng(7);
    let cam = random_camera(&mut r, 300.0);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let noisy: Vec<Correspondence> = correspondences(&cam, 50, 8)
        .into_iter()
        .map(|c| Correspondence {
            world: c.world,
            pixel: c.pixel + nalgebra::Vector2::new(noise.sample(&mut r), noise.sample(&mut r)),
        })
        .collect();
    let cal = calibrate_dlt(&noisy, (1024, 1024)).unwrap();
    let oracle = noisy
        .iter()
        .map(|c| (cal.camera.project(&c.world).unwrap() - c.pixel).norm())
        .sum::<f64>()
        / noisy.len() as f64;
    assert!((oracle - cal.mean_reprojection_px).abs() < 1e-9);
    assert!(cal.mean_reprojection_px <= 1.5, "{}", cal.mean_reprojection_px);
}

#[test]
fn dlt_rejects_too_few_points() {
    let mut r = rng(9);
    let cam = random_camera(&mut r, 300.0);
    assert!(matches!(
        calibrate_dlt(&correspondences(&cam, 5, 1), (1024, 1024)),
        Err(CameraError::InsufficientPoints(5))
    ));
}
