//! Tip-anchored spherical-coordinate encoding of equally spaced 3D chains.
//!
//! A chain stores its first point, a fixed step length and one absolute
//! `(theta, phi)` direction per step in the global frame.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

/// Relative spacing deviation tolerated by [`encode_chain`].
pub const SPACING_TOL: f64 = 0.01;
/// Default resampling step in millimetres.
pub const DEFAULT_STEP_MM: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphericalError {
    #[error("chain needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("step {index} has length {length}, more than 1% off the mean {mean}")]
    NonUniformSpacing { index: usize, length: f64, mean: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(&'static str),
}

/// `(r sinθ cosφ, r sinθ sinφ, r cosθ)`.
pub fn sph_to_cart(r: f64, theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(r * st * cp, r * st * sp, r * ct)
}

/// Inverse of [`sph_to_cart`] with `theta ∈ [0, π]`, `phi ∈ (-π, π]`; the
/// zero vector maps to `(0, 0, 0)`.
pub fn cart_to_sph(v: &Vector3<f64>) -> (f64, f64, f64) {
    let r = v.norm();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    // atan2 of (ρ, z) keeps precision near the poles where acos(z/r) does not.
    let theta = v.xy().norm().atan2(v.z);
    (r, theta, wrap_phi(v.y.atan2(v.x)))
}

fn wrap_phi(phi: f64) -> f64 {
    if phi <= -PI {
        phi + 2.0 * PI
    } else if phi > PI {
        phi - 2.0 * PI
    } else {
        phi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalChain {
    pub tip: Vector3<f64>,
    pub r: f64,
    /// Absolute `(theta, phi)` of every step, radians.
    pub offsets: Vec<(f64, f64)>,
}

impl SphericalChain {
    pub fn new(tip: Vector3<f64>, r: f64, offsets: Vec<(f64, f64)>) -> Result<Self, SphericalError> {
        if !tip.iter().all(|v| v.is_finite()) {
            return Err(SphericalError::InvalidChain("tip must be finite"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(SphericalError::InvalidChain("r must be positive"));
        }
        for &(theta, phi) in &offsets {
            if !(0.0..=PI).contains(&theta) {
                return Err(SphericalError::InvalidChain("theta outside [0, pi]"));
            }
            if !(phi > -PI && phi <= PI) {
                return Err(SphericalError::InvalidChain("phi outside (-pi, pi]"));
            }
        }
        Ok(Self { tip, r, offsets })
    }
}

/// Encodes a chain whose steps are all within 1% of their mean length.
pub fn encode_chain(points: &[Vector3<f64>]) -> Result<SphericalChain, SphericalError> {
    if points.len() < 2 {
        return Err(SphericalError::TooFewPoints(points.len()));
    }
    let steps: Vec<Vector3<f64>> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = steps.iter().map(|s| s.norm()).sum::<f64>() / steps.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(SphericalError::InvalidChain("zero or non-finite spacing"));
    }
    for (index, s) in steps.iter().enumerate() {
        let length = s.norm();
        if (length - mean).abs() > SPACING_TOL * mean {
            return Err(SphericalError::NonUniformSpacing {
                index,
                length,
                mean,
            });
        }
    }
    let offsets = steps
        .iter()
        .map(|s| {
            let (_, theta, phi) = cart_to_sph(s);
            (theta, phi)
        })
        .collect();
    SphericalChain::new(points[0], mean, offsets)
}

/// Integrates the steps from the tip; returns `offsets.len() + 1` points.
pub fn decode_chain(chain: &SphericalChain) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(chain.offsets.len() + 1);
    let mut p = chain.tip;
    out.push(p);
    for &(theta, phi) in &chain.offsets {
        p += sph_to_cart(chain.r, theta, phi);
        out.push(p);
    }
    out
}

/// Walks a polyline emitting points whose consecutive Euclidean distance is
/// exactly `step`, starting at the first vertex. The remainder shorter than
/// one step is dropped.
pub fn resample_chord(points: &[Vector3<f64>], step: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    let Some(&first) = points.first() else {
        return out;
    };
    if step.is_nan() || step <= 0.0 {
        return vec![first];
    }
    out.push(first);
    let mut current = first;
    let mut seg = 0;
    let mut seg_start = first;
    while seg + 1 < points.len() {
        let end = points[seg + 1];
        // Smallest s in [0, 1] with |seg_start + s (end - seg_start) - current| = step
        // beyond the current position.
        let d = end - seg_start;
        let f = seg_start - current;
        let a = d.norm_squared();
        if a == 0.0 {
            seg += 1;
            seg_start = points.get(seg).copied().unwrap_or(end);
            continue;
        }
        let b = 2.0 * f.dot(&d);
        let c = f.norm_squared() - step * step;
        let disc = b * b - 4.0 * a * c;
        let s = if disc >= 0.0 {
            let root = (-b + disc.sqrt()) / (2.0 * a);
            (0.0..=1.0 + 1e-9).contains(&root).then_some(root)
        } else {
            None
        };
        match s {
            Some(s) => {
                let next = seg_start + d * s;
                // Snap onto the sphere to keep the spacing exact.
                let next = current + (next - current).normalize() * step;
                out.push(next);
                current = next;
                seg_start = next;
            }
            None => {
                seg += 1;
                seg_start = points[seg];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn cartesian_of_equator_and_pole() {
        assert!((sph_to_cart(1.0, FRAC_PI_2, 0.0) - Vector3::x()).norm() < 1e-16);
        assert_eq!(sph_to_cart(1.0, 0.0, 1.234), Vector3::z());
    }

    #[test]
    fn formula_oracle() {
        let (r, t, p) = (2.0_f64, PI / 3.0, PI / 4.0);
        let v = sph_to_cart(r, t, p);
        let expect = [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()];
        for i in 0..3 {
            assert!((v[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn spherical_of_axes() {
        assert_eq!(cart_to_sph(&Vector3::z()), (1.0, 0.0, 0.0));
        let (r, t, p) = cart_to_sph(&Vector3::new(1.0, 1.0, 0.0));
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!((t - FRAC_PI_2).abs() < 1e-15);
        assert!((p - PI / 4.0).abs() < 1e-15);
        assert_eq!(cart_to_sph(&Vector3::zeros()), (0.0, 0.0, 0.0));
        assert_eq!(cart_to_sph(&Vector3::new(-1.0, -0.0, 0.0)).2, PI);
    }

    #[test]
    fn straight_chain_along_z() {
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(0.0, 0.0, 2.0 * i as f64)).collect();
        let chain = encode_chain(&pts).unwrap();
        assert_eq!(chain.r, 2.0);
        assert!(chain.offsets.iter().all(|&o| o == (0.0, 0.0)));
    }

    #[test]
    fn two_point_chain() {
        let a = Vector3::new(1.0, 2.0, 3.0);
        let b = Vector3::new(2.0, 0.0, 5.0);
        let chain = encode_chain(&[a, b]).unwrap();
        let (r, t, p) = cart_to_sph(&(b - a));
        assert_eq!(chain.r, r);
        assert_eq!(chain.offsets, vec![(t, p)]);
    }

    #[test]
    fn rejects_uneven_spacing() {
        let pts = [Vector3::zeros(), Vector3::z(), Vector3::z() * 2.5];
        assert!(matches!(
            encode_chain(&pts),
            Err(SphericalError::NonUniformSpacing { .. })
        ));
        assert_eq!(encode_chain(&pts[..1]).unwrap_err(), SphericalError::TooFewPoints(1));
    }

    #[test]
    fn decode_edge_cases() {
        let tip = Vector3::new(1.0, 1.0, 1.0);
        let chain = SphericalChain::new(tip, 1.0, vec![]).unwrap();
        assert_eq!(decode_chain(&chain), vec![tip]);
        let chain = SphericalChain::new(Vector3::zeros(), 1.0, vec![(FRAC_PI_2, 0.0)]).unwrap();
        let pts = decode_chain(&chain);
        assert_eq!(pts.len(), 2);
        assert!((pts[1] - Vector3::x()).norm() < 1e-16);
    }

    #[test]
    fn invalid_chains_rejected() {
        assert!(SphericalChain::new(Vector3::zeros(), 0.0, vec![]).is_err());
        assert!(SphericalChain::new(Vector3::zeros(), 1.0, vec![(4.0, 0.0)]).is_err());
        assert!(SphericalChain::new(Vector3::zeros(), 1.0, vec![(1.0, -PI)]).is_err());
    }

    #[test]
    fn resampled_polyline_has_exact_spacing() {
        let pts: Vec<_> = (0..200)
            .map(|i| {
                let s = i as f64 * 0.05;
                Vector3::new(10.0 * s.cos(), 10.0 * s.sin(), 3.0 * s)
            })
            .collect();
        let out = resample_chord(&pts, 2.0);
        assert!(out.len() > 10);
        for w in out.windows(2) {
            assert!(((w[1] - w[0]).norm() - 2.0).abs() < 1e-12);
        }
    }
}
