//! Rigid-segment rod with quaternion curvature and bending energy.
//!
//! Segment `k` runs from centerline point `k` to `k + 1` along its local
//! `+z` axis. Joint `i` sits between segments `i` and `i + 1`; its
//! curvature is the rotation vector of `q_i⁻¹ q_{i+1}`, expressed in the
//! frame of segment `i`.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cameras::skew;

pub const DEFAULT_STIFFNESS: f64 = 1.0;
pub const DEFAULT_SEGMENT_LENGTH_MM: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RodError {
    #[error("invalid rod: {0}")]
    InvalidRod(&'static str),
    #[error("tip target is {distance} mm from the first joint but only {reach} mm is reachable")]
    UnreachableConstraint { distance: f64, reach: f64 },
    #[error("relaxation stopped with gradient {grad_inf:e} after {iterations} iterations")]
    NonConvergence {
        best: Box<RodState>,
        grad_inf: f64,
        iterations: usize,
    },
}

/// Rotation vector (axis × angle, angle in `[0, π]`) of a unit quaternion.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    v * (2.0 * s.atan2(w) / s)
}

/// Exponential map from a rotation vector to a unit quaternion.
pub fn exp_map(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

/// `rotation_vector(q_i⁻¹ q_{i+1})`.
pub fn relative_curvature(q_i: &UnitQuaternion<f64>, q_next: &UnitQuaternion<f64>) -> Vector3<f64> {
    rotation_vector(&(q_i.inverse() * q_next))
}

/// `[φ]×²` coefficient shared by the inverse Jacobians, stable near zero.
fn inverse_jacobian_coeff(angle: f64) -> f64 {
    if angle < 1e-4 {
        1.0 / 12.0 + angle * angle / 720.0
    } else {
        1.0 / (angle * angle) - (1.0 + angle.cos()) / (2.0 * angle * angle.sin())
    }
}

/// Inverse left Jacobian of SO(3): `d Log(exp(δ) R) = J_l⁻¹(φ) δ`.
pub fn left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let k = skew(phi);
    Matrix3::identity() - 0.5 * k + inverse_jacobian_coeff(phi.norm()) * k * k
}

/// Inverse right Jacobian of SO(3): `d Log(R exp(δ)) = J_r⁻¹(φ) δ`.
pub fn right_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian_inverse(&-phi)
}

/// Right Jacobian of SO(3): `exp(φ + δ) ≈ exp(φ) exp(J_r(φ) δ)`.
pub fn right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let angle = phi.norm();
    let k = skew(phi);
    let (a, b) = if angle < 1e-4 {
        (0.5 - angle * angle / 24.0, 1.0 / 6.0 - angle * angle / 120.0)
    } else {
        let a2 = angle * angle;
        ((1.0 - angle.cos()) / a2, (angle - angle.sin()) / (a2 * angle))
    };
    Matrix3::identity() - a * k + b * k * k
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodState {
    segment_length: f64,
    orientations: Vec<UnitQuaternion<f64>>,
    base: Vector3<f64>,
    stiffness: f64,
    rest_curvature: Vec<Vector3<f64>>,
}

impl RodState {
    /// Builds a rod. `rest_curvature` has one entry per joint (`N - 1`);
    /// its twist component (local `z`) is discarded.
    pub fn new(
        segment_length: f64,
        orientations: Vec<UnitQuaternion<f64>>,
        base: Vector3<f64>,
        stiffness: f64,
        rest_curvature: Vec<Vector3<f64>>,
    ) -> Result<Self, RodError> {
        if !(segment_length > 0.0 && segment_length.is_finite()) {
            return Err(RodError::InvalidRod("segment length must be positive"));
        }
        if !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(RodError::InvalidRod("stiffness must be positive"));
        }
        if orientations.is_empty() {
            return Err(RodError::InvalidRod("rod needs at least one segment"));
        }
        if rest_curvature.len() + 1 != orientations.len() {
            return Err(RodError::InvalidRod("need one rest curvature per joint"));
        }
        if !base.iter().all(|v| v.is_finite())
            || rest_curvature.iter().any(|w| !w.iter().all(|v| v.is_finite()))
            || orientations.iter().any(|q| !q.coords.iter().all(|v| v.is_finite()))
        {
            return Err(RodError::InvalidRod("non-finite value"));
        }
        let orientations = orientations
            .into_iter()
            .map(|q| UnitQuaternion::new_normalize(q.into_inner()))
            .collect();
        let rest_curvature = rest_curvature
            .into_iter()
            .map(|w| Vector3::new(w.x, w.y, 0.0))
            .collect();
        Ok(Self {
            segment_length,
            orientations,
            base,
            stiffness,
            rest_curvature,
        })
    }

    /// A straight rod along the base orientation's `+z`.
    pub fn straight(
        n_segments: usize,
        segment_length: f64,
        base: Vector3<f64>,
        base_orientation: UnitQuaternion<f64>,
        stiffness: f64,
        rest_curvature: Vec<Vector3<f64>>,
    ) -> Result<Self, RodError> {
        Self::new(
            segment_length,
            vec![base_orientation; n_segments],
            base,
            stiffness,
            rest_curvature,
        )
    }

    pub fn segment_length(&self) -> f64 {
        self.segment_length
    }

    pub fn orientations(&self) -> &[UnitQuaternion<f64>] {
        &self.orientations
    }

    pub fn base(&self) -> Vector3<f64> {
        self.base
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn rest_curvature(&self) -> &[Vector3<f64>] {
        &self.rest_curvature
    }

    pub fn segments(&self) -> usize {
        self.orientations.len()
    }

    /// Replaces orientations, keeping every other parameter.
    pub fn with_orientations(&self, orientations: Vec<UnitQuaternion<f64>>) -> Result<Self, RodError> {
        Self::new(
            self.segment_length,
            orientations,
            self.base,
            self.stiffness,
            self.rest_curvature.clone(),
        )
    }

    /// `N + 1` points from the base to the distal tip.
    pub fn centerline(&self) -> Vec<Vector3<f64>> {
        let mut pts = Vec::with_capacity(self.orientations.len() + 1);
        let mut p = self.base;
        pts.push(p);
        for q in &self.orientations {
            p += q * Vector3::z() * self.segment_length;
            pts.push(p);
        }
        pts
    }

    pub fn tip(&self) -> Vector3<f64> {
        *self.centerline().last().expect("rod has segments")
    }

    /// Curvature of every joint.
    pub fn curvatures(&self) -> Vec<Vector3<f64>> {
        self.orientations
            .windows(2)
            .map(|w| relative_curvature(&w[0], &w[1]))
            .collect()
    }
}

/// `Σ ½ E ‖κ_i − ω₀_i‖²` over all joints.
pub fn bending_energy(rod: &RodState) -> f64 {
    rod.curvatures()
        .iter()
        .zip(&rod.rest_curvature)
        .map(|(k, w)| 0.5 * rod.stiffness * (k - w).norm_squared())
        .sum()
}

/// Gradient of [`bending_energy`] with respect to a body-frame rotation
/// `q_i ← q_i exp(δ_i)` of each segment.
pub fn bending_energy_gradient(rod: &RodState) -> Vec<Vector3<f64>> {
    let mut grad = vec![Vector3::zeros(); rod.segments()];
    for (i, (k, w)) in rod.curvatures().iter().zip(&rod.rest_curvature).enumerate() {
        let r = (k - w) * rod.stiffness;
        grad[i] -= left_jacobian_inverse(k).transpose() * r;
        grad[i + 1] += right_jacobian_inverse(k).transpose() * r;
    }
    grad
}

/// Pinned tip for [`relax`]. Base position and orientation are always fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constraints {
    pub tip: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOptions {
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub outer_iterations: usize,
    pub penalty_growth: f64,
    /// Initial tip penalty weight; defaults to `E / segment_length²`.
    pub initial_penalty: Option<f64>,
    pub armijo: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iterations: 10_000,
            outer_iterations: 5,
            penalty_growth: 10.0,
            initial_penalty: None,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxReport {
    pub rod: RodState,
    /// Objective after every accepted step, per outer iteration.
    pub objective_history: Vec<Vec<f64>>,
    pub grad_inf: f64,
    pub iterations: usize,
    pub final_penalty: f64,
}

/// Objective over joint rotation vectors `θ_j` with `q_{j+1} = q_j exp(θ_j)`
/// and `q_0` fixed.
pub struct JointObjective<'a> {
    template: &'a RodState,
    tip: Option<Vector3<f64>>,
    weight: f64,
}

impl<'a> JointObjective<'a> {
    pub fn new(template: &'a RodState, tip: Option<Vector3<f64>>, weight: f64) -> Self {
        Self {
            template,
            tip,
            weight,
        }
    }

    pub fn rod(&self, theta: &[Vector3<f64>]) -> RodState {
        let mut q = self.template.orientations[0];
        let mut orientations = Vec::with_capacity(theta.len() + 1);
        orientations.push(q);
        for t in theta {
            q *= exp_map(t);
            orientations.push(q);
        }
        RodState {
            orientations,
            ..self.template.clone()
        }
    }

    fn penalty(&self, rod: &RodState) -> f64 {
        self.tip
            .map_or(0.0, |target| self.weight * (rod.tip() - target).norm_squared())
    }

    pub fn value(&self, theta: &[Vector3<f64>]) -> f64 {
        let rod = self.rod(theta);
        bending_energy(&rod) + self.penalty(&rod)
    }

    /// Value and gradient with respect to every `θ_j`.
    pub fn value_and_gradient(&self, theta: &[Vector3<f64>]) -> (f64, Vec<Vector3<f64>>) {
        let rod = self.rod(theta);
        let mut body = bending_energy_gradient(&rod);
        let mut value = bending_energy(&rod);
        if let Some(target) = self.tip {
            let residual = rod.tip() - target;
            value += self.weight * residual.norm_squared();
            let l = rod.segment_length;
            for (g, q) in body.iter_mut().zip(&rod.orientations) {
                // d tip / d δ_k = -L R_k [e_z]×
                let local = q.inverse() * residual;
                *g += 2.0 * self.weight * l * skew(&Vector3::z()) * local;
            }
        }
        // Rotating θ_j moves every segment after joint j rigidly:
        // ∂/∂θ_j = J_r(θ_j)ᵀ R_{j+1}ᵀ Σ_{k>j} R_k g_k.
        let n = rod.segments();
        let mut suffix = Vector3::zeros();
        let mut grad = vec![Vector3::zeros(); theta.len()];
        for k in (1..n).rev() {
            suffix += rod.orientations[k] * body[k];
            let j = k - 1;
            grad[j] = right_jacobian(&theta[j]).transpose() * (rod.orientations[k].inverse() * suffix);
        }
        (value, grad)
    }
}

impl JointObjective<'_> {
    /// Descent direction `-H⁻¹ g` for the Gauss-Newton matrix
    /// `H = E I + 2w JᵀJ`, with `J` the tip Jacobian over the joints.
    pub fn preconditioned(&self, theta: &[Vector3<f64>], g: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let e = self.template.stiffness;
        let Some(_) = self.tip else {
            return g.iter().map(|v| -v / e).collect();
        };
        let rod = self.rod(theta);
        let pts = rod.centerline();
        let tip = pts[pts.len() - 1];
        let jac: Vec<Matrix3<f64>> = theta
            .iter()
            .enumerate()
            .map(|(j, t)| -skew(&(tip - pts[j + 1])) * rod.orientations[j + 1].to_rotation_matrix().matrix() * right_jacobian(t))
            .collect();
        // Woodbury: H⁻¹ = (I - Jᵀ (E/(2w) I + J Jᵀ)⁻¹ J) / E
        let mut inner = Matrix3::identity() * (e / (2.0 * self.weight));
        let mut jg = Vector3::zeros();
        for (jj, gj) in jac.iter().zip(g) {
            inner += jj * jj.transpose();
            jg += jj * gj;
        }
        let Some(inv) = inner.try_inverse() else {
            return g.iter().map(|v| -v / e).collect();
        };
        let y = inv * jg;
        jac.iter().zip(g).map(|(jj, gj)| -(gj - jj.transpose() * y) / e).collect()
    }
}

fn inf_norm(g: &[Vector3<f64>]) -> f64 {
    g.iter().map(|v| v.amax()).fold(0.0, f64::max)
}

/// Relaxes with the default options.
pub fn relax(rod: &RodState, constraints: &Constraints) -> Result<RodState, RodError> {
    relax_with(rod, constraints, &RelaxOptions::default()).map(|r| r.rod)
}

/// Descent with Armijo backtracking over the joint rotation vectors, along
/// the gradient scaled by the Gauss-Newton matrix of [`JointObjective::preconditioned`]. A pinned tip is enforced by a quadratic penalty whose weight
/// grows by `penalty_growth` on each outer iteration.
pub fn relax_with(
    rod: &RodState,
    constraints: &Constraints,
    options: &RelaxOptions,
) -> Result<RelaxReport, RodError> {
    let l = rod.segment_length;
    if let Some(target) = constraints.tip {
        if !target.iter().all(|v| v.is_finite()) {
            return Err(RodError::InvalidRod("tip target must be finite"));
        }
        let first_joint = rod.base + rod.orientations[0] * Vector3::z() * l;
        let distance = (target - first_joint).norm();
        let reach = (rod.segments() - 1) as f64 * l;
        if distance > reach {
            return Err(RodError::UnreachableConstraint { distance, reach });
        }
    }

    let mut theta = rod.curvatures();
    let outer = if constraints.tip.is_some() {
        options.outer_iterations.max(1)
    } else {
        1
    };
    let mut weight = options
        .initial_penalty
        .unwrap_or(rod.stiffness / (l * l));
    let mut history = Vec::with_capacity(outer);
    let mut total_iterations = 0;
    let mut grad_inf = 0.0;

    for round in 0..outer {
        if round > 0 {
            weight *= options.penalty_growth;
        }
        let objective = JointObjective::new(rod, constraints.tip, weight);
        let (mut f, mut g) = objective.value_and_gradient(&theta);
        let mut trace = vec![f];
        grad_inf = inf_norm(&g);
        let mut iterations = 0;
        while grad_inf >= options.grad_tol && iterations < options.max_iterations {
            iterations += 1;
            let d = objective.preconditioned(&theta, &g);
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a.dot(b)).sum();
            let resolution = 4.0 * f64::EPSILON * f.abs().max(1.0);
            let mut alpha = 1.0;
            let accepted = loop {
                let trial: Vec<Vector3<f64>> = theta.iter().zip(&d).map(|(t, dj)| t + dj * alpha).collect();
                let ft = objective.value(&trial);
                let armijo = ft <= f + options.armijo * alpha * slope;
                // Decrease below the rounding of f: take the step if it does not increase f.
                let unresolved = -alpha * slope < resolution && ft <= f;
                if armijo || unresolved {
                    break Some((trial, ft));
                }
                alpha *= 0.5;
                if -alpha * slope < f64::EPSILON * resolution {
                    break None;
                }
            };
            let Some((trial, ft)) = accepted else {
                break;
            };
            theta = trial;
            let (fv, gv) = objective.value_and_gradient(&theta);
            debug_assert!((fv - ft).abs() <= 1e-12 * (1.0 + ft.abs()));
            f = fv;
            g = gv;
            grad_inf = inf_norm(&g);
            trace.push(f);
        }
        total_iterations += iterations;
        history.push(trace);
        if round + 1 == outer && grad_inf >= options.grad_tol {
            let best = JointObjective::new(rod, constraints.tip, weight).rod(&theta);
            return Err(RodError::NonConvergence {
                best: Box::new(best),
                grad_inf,
                iterations: total_iterations,
            });
        }
    }

    let relaxed = JointObjective::new(rod, constraints.tip, weight).rod(&theta);
    Ok(RelaxReport {
        rod: relaxed,
        objective_history: history,
        grad_inf,
        iterations: total_iterations,
        final_penalty: weight,
    })
}

/// Smooth random rest-curvature field bounded by `tip_angle / joints` per joint.
fn rest_curvature_field(joints: usize, tip_angle: f64, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let plane0: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let plane_rate: f64 = rng.random_range(1.0..3.0) * std::f64::consts::PI;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let depth: f64 = rng.random_range(0.0..0.5);
    let per_joint = tip_angle / joints.max(1) as f64;
    (0..joints)
        .map(|j| {
            let s = if joints > 1 {
                j as f64 / (joints - 1) as f64
            } else {
                0.0
            };
            let magnitude = per_joint * (1.0 - depth * (0.5 + 0.5 * (std::f64::consts::TAU * s + phase).cos()));
            let plane = plane0 + plane_rate * s;
            Vector3::new(magnitude * plane.cos(), magnitude * plane.sin(), 0.0)
        })
        .collect()
}

/// Rod-model guidewire centerline, base first, deterministic in `seed`.
pub fn synth_guidewire(
    n_segments: usize,
    segment_length: f64,
    tip_angle: f64,
    stiffness: f64,
    seed: u64,
) -> Result<Vec<Vector3<f64>>, RodError> {
    let rod = seeded_rod(n_segments, segment_length, tip_angle, stiffness, seed)?;
    Ok(relax(&rod, &Constraints::default())?.centerline())
}

/// Straight rod at the origin along `+z` carrying a seeded rest-curvature field.
pub fn seeded_rod(
    n_segments: usize,
    segment_length: f64,
    tip_angle: f64,
    stiffness: f64,
    seed: u64,
) -> Result<RodState, RodError> {
    if n_segments < 2 {
        return Err(RodError::InvalidRod("need at least 2 segments"));
    }
    if !tip_angle.is_finite() {
        return Err(RodError::InvalidRod("tip angle must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = rest_curvature_field(n_segments - 1, tip_angle, &mut rng);
    RodState::straight(
        n_segments,
        segment_length,
        Vector3::zeros(),
        UnitQuaternion::identity(),
        stiffness,
        omega,
    )
}
