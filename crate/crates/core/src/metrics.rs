//! Curve comparison and navigation-episode metrics.
//!
//! Curve metrics compare two splines sampled on the same uniform parameter
//! grid. Index 0 of that grid is the tip:
//!
//! - `max_ed`: largest pointwise distance.
//! - `mete`: distance between the two tip samples.
//! - `mers`: mean pointwise distance.
//! - `frechet`: discrete Fréchet distance between the sample sequences.

use nalgebra::Vector3;
use thiserror::Error;

use crate::bspline::{BSplineError, SpatialCurve};

/// Terminal reward granted inside the goal ball.
pub const GOAL_REWARD: f64 = 10.0;
/// Goal ball radius in millimetres.
pub const GOAL_RADIUS_MM: f64 = 8.0;
/// Force magnitude (newtons) counted as unsafe.
pub const SAFETY_FORCE_N: f64 = 2.0;
pub const DEFAULT_CURVE_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    BSpline(#[from] BSplineError),
    #[error("no episodes given")]
    NoEpisodes,
    #[error("invalid episode {index}: {reason}")]
    InvalidEpisode { index: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveMetrics {
    pub max_ed: f64,
    pub mete: f64,
    pub mers: f64,
    pub frechet: f64,
}

/// Discrete Fréchet distance between two point sequences.
///
/// Empty input yields `0` when both are empty and `∞` otherwise.
pub fn discrete_frechet(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let m = b.len();
    let mut prev = vec![0.0_f64; m];
    let mut row = vec![0.0_f64; m];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p - q).norm();
            row[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => row[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(row[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[m - 1]
}

/// Metrics between point sequences of equal length (tip first).
pub fn sequence_metrics(pred: &[Vector3<f64>], truth: &[Vector3<f64>]) -> CurveMetrics {
    let d: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).norm()).collect();
    let n = d.len().max(1) as f64;
    CurveMetrics {
        max_ed: d.iter().copied().fold(0.0, f64::max),
        mete: d.first().copied().unwrap_or(0.0),
        mers: d.iter().sum::<f64>() / n,
        frechet: discrete_frechet(pred, truth),
    }
}

/// Samples both curves at `n` uniform parameters and compares them.
pub fn curve_metrics(
    pred: &SpatialCurve,
    truth: &SpatialCurve,
    n: usize,
) -> Result<CurveMetrics, MetricsError> {
    let p: Vec<_> = pred.sample_uniform(n)?.into_iter().map(|(_, x)| x).collect();
    let t: Vec<_> = truth.sample_uniform(n)?.into_iter().map(|(_, x)| x).collect();
    Ok(sequence_metrics(&p, &t))
}

/// `10` inside the goal ball (boundary included), else `-‖h − g‖`.
pub fn reward(h: &Vector3<f64>, g: &Vector3<f64>, delta: f64) -> f64 {
    let d = (h - g).norm();
    if d <= delta {
        GOAL_REWARD
    } else {
        -d
    }
}

pub fn force_magnitude(f: &Vector3<f64>) -> f64 {
    (f.x * f.x + f.y * f.y + f.z * f.z).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub tip_positions: Vec<Vector3<f64>>,
    /// Per-step contact force; may be empty.
    pub forces: Vec<Vector3<f64>>,
    pub goal: Vector3<f64>,
    pub success: bool,
}

impl Episode {
    pub fn validate(&self, index: usize) -> Result<(), MetricsError> {
        let bad = |reason| Err(MetricsError::InvalidEpisode { index, reason });
        if self.tip_positions.is_empty() {
            return bad("episode needs at least one time step");
        }
        if !self.forces.is_empty() && self.forces.len() != self.tip_positions.len() {
            return bad("forces must be empty or match the tip positions");
        }
        let finite = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite());
        if !self.tip_positions.iter().chain(&self.forces).all(finite) || !finite(&self.goal) {
            return bad("non-finite value");
        }
        Ok(())
    }

    pub fn path_length(&self) -> f64 {
        self.tip_positions
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }

    /// Fraction of steps with force magnitude below the safety threshold.
    pub fn safety(&self) -> f64 {
        if self.forces.is_empty() {
            return 1.0;
        }
        let unsafe_steps = self
            .forces
            .iter()
            .filter(|f| force_magnitude(f) >= SAFETY_FORCE_N)
            .count();
        1.0 - unsafe_steps as f64 / self.forces.len() as f64
    }

    /// `(f_max, f_mean)`; both zero when no forces were recorded.
    pub fn force_stats(&self) -> (f64, f64) {
        if self.forces.is_empty() {
            return (0.0, 0.0);
        }
        let mags: Vec<f64> = self.forces.iter().map(force_magnitude).collect();
        let max = mags.iter().copied().fold(0.0, f64::max);
        (max, mags.iter().sum::<f64>() / mags.len() as f64)
    }

    pub fn final_distance(&self) -> f64 {
        self.tip_positions
            .last()
            .map_or(f64::INFINITY, |h| (h - self.goal).norm())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub success: bool,
    pub path_length: f64,
    /// `S_i l / max(p_i, l)`; the batch SPL is the mean of this column.
    pub spl_term: f64,
    pub safety: f64,
    pub f_max: f64,
    pub f_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub rows: Vec<EpisodeRow>,
    pub spl: f64,
    /// Shortest successful path; `None` when nothing succeeded, in which
    /// case `spl` is reported as 0.
    pub shortest_success: Option<f64>,
}

/// Path length, SPL, safety and force statistics for a batch.
pub fn episode_metrics(episodes: &[Episode]) -> Result<EpisodeMetrics, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::NoEpisodes);
    }
    for (i, e) in episodes.iter().enumerate() {
        e.validate(i)?;
    }
    let lengths: Vec<f64> = episodes.iter().map(Episode::path_length).collect();
    let shortest = episodes
        .iter()
        .zip(&lengths)
        .filter(|(e, _)| e.success)
        .map(|(_, &p)| p)
        .reduce(f64::min);

    let rows: Vec<EpisodeRow> = episodes
        .iter()
        .zip(&lengths)
        .map(|(e, &p)| {
            let spl_term = match (e.success, shortest) {
                (true, Some(l)) => {
                    let denom = p.max(l);
                    if denom > 0.0 {
                        l / denom
                    } else {
                        1.0
                    }
                }
                _ => 0.0,
            };
            let (f_max, f_mean) = e.force_stats();
            EpisodeRow {
                success: e.success,
                path_length: p,
                spl_term,
                safety: e.safety(),
                f_max,
                f_mean,
            }
        })
        .collect();
    let spl = rows.iter().map(|r| r.spl_term).sum::<f64>() / rows.len() as f64;
    Ok(EpisodeMetrics {
        rows,
        spl,
        shortest_success: shortest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::fit_curve;

    fn straight_episode(len: f64, success: bool) -> Episode {
        Episode {
            tip_positions: vec![Vector3::zeros(), Vector3::new(len, 0.0, 0.0)],
            forces: vec![],
            goal: Vector3::new(len, 0.0, 0.0),
            success,
        }
    }

    #[test]
    fn reward_cases() {
        let g = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(reward(&g, &g, GOAL_RADIUS_MM), 10.0);
        assert_eq!(reward(&(g + Vector3::new(8.0, 0.0, 0.0)), &g, GOAL_RADIUS_MM), 10.0);
        assert_eq!(reward(&(g + Vector3::new(0.0, 20.0, 0.0)), &g, GOAL_RADIUS_MM), -20.0);
    }

    #[test]
    fn force_magnitude_cases() {
        assert_eq!(force_magnitude(&Vector3::zeros()), 0.0);
        assert_eq!(force_magnitude(&Vector3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn identical_curves_have_zero_metrics() {
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.1, 0.0)).collect();
        let c = fit_curve(&pts, 3).unwrap();
        let m = curve_metrics(&c, &c, 64).unwrap();
        assert_eq!(m, CurveMetrics { max_ed: 0.0, mete: 0.0, mers: 0.0, frechet: 0.0 });
    }

    #[test]
    fn rigid_offset() {
        let pts: Vec<_> = (0..6).map(|i| Vector3::new(0.0, 0.0, i as f64 * 5.0)).collect();
        let truth = fit_curve(&pts, 3).unwrap();
        let pred = truth.map_points(|p| p + Vector3::new(3.0, 0.0, 0.0));
        let m = curve_metrics(&pred, &truth, 64).unwrap();
        for v in [m.max_ed, m.mete, m.mers, m.frechet] {
            assert!((v - 3.0).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn spl_cases() {
        let m = episode_metrics(&[straight_episode(5.0, true)]).unwrap();
        assert_eq!(m.spl, 1.0);
        let m = episode_metrics(&[straight_episode(10.0, true), straight_episode(5.0, true)]).unwrap();
        assert_eq!(m.spl, 0.75);
        let m = episode_metrics(&[straight_episode(10.0, false)]).unwrap();
        assert_eq!(m.spl, 0.0);
        assert_eq!(m.shortest_success, None);
    }

    #[test]
    fn safety_extremes() {
        let mut e = straight_episode(1.0, true);
        e.forces = vec![Vector3::new(0.5, 0.0, 0.0), Vector3::new(0.0, 1.9, 0.0)];
        assert_eq!(e.safety(), 1.0);
        e.forces = vec![Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 3.0, 0.0)];
        assert_eq!(e.safety(), 0.0);
        assert_eq!(e.force_stats(), (3.0, 2.5));
    }

    #[test]
    fn single_step_episode() {
        let e = Episode {
            tip_positions: vec![Vector3::zeros()],
            forces: vec![],
            goal: Vector3::zeros(),
            success: false,
        };
        let m = episode_metrics(&[e]).unwrap();
        assert_eq!(m.rows[0].path_length, 0.0);
        assert_eq!(m.rows[0].safety, 1.0);
    }

    #[test]
    fn invalid_episodes() {
        assert_eq!(episode_metrics(&[]).unwrap_err(), MetricsError::NoEpisodes);
        let mut e = straight_episode(1.0, true);
        e.forces = vec![Vector3::zeros()];
        assert!(matches!(
            episode_metrics(&[e]),
            Err(MetricsError::InvalidEpisode { index: 0, .. })
        ));
    }

    #[test]
    fn frechet_handles_empty() {
        assert_eq!(discrete_frechet(&[], &[]), 0.0);
        assert_eq!(discrete_frechet(&[Vector3::zeros()], &[]), f64::INFINITY);
    }
}
