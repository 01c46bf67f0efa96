//! Two-view reconstruction of guidewire-like curves.
//!
//! Two calibrated projective views of a thin curvilinear tool are fitted
//! with arclength B-splines, matched along epipolar lines and triangulated
//! into a 3D cubic B-spline. Synthetic wires come from a discrete rigid
//! segment rod relaxed to minimum bending energy, and reconstructions are
//! scored with pointwise and Fréchet curve errors. Navigation episodes are
//! scored with path length, SPL and force safety.
//!
//! Lengths are in millimetres, angles in radians and image coordinates in
//! pixels.

pub mod bspline;
pub mod cameras;
pub mod metrics;
pub mod pchip;
pub mod pipeline;
pub mod rod;
pub mod schema;
pub mod spherical;
pub mod stereo;

pub use bspline::{fit_curve, BSpline, KnotVector, PlanarCurve, SpatialCurve};
pub use cameras::{fundamental_matrix, FundamentalMatrix, ProjectiveCamera};
pub use metrics::{curve_metrics, discrete_frechet, episode_metrics, CurveMetrics, Episode};
pub use pchip::Pchip;
pub use rod::{relax, synth_guidewire, RodState};
pub use spherical::{decode_chain, encode_chain, SphericalChain};
pub use stereo::{match_curves, reconstruct_curve, triangulate_point, ReconstructionReport};
