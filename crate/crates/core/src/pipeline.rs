//! File-level commands: synthesis, reconstruction, evaluation and relaxation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::bspline::{fit_curve, BSplineError, PlanarCurve};
use crate::cameras::{CameraError, ProjectiveCamera};
use crate::metrics::{curve_metrics, episode_metrics, CurveMetrics, MetricsError, DEFAULT_CURVE_SAMPLES};
use crate::rod::{
    bending_energy, relax_with, seeded_rod, synth_guidewire, Constraints, RelaxOptions, RodError,
    DEFAULT_SEGMENT_LENGTH_MM, DEFAULT_STIFFNESS,
};
use crate::schema::{
    format_g9, parse_annotations, parse_camera, parse_curves_or_reports, parse_episodes, to_json,
    Annotation, AnnotationFile, CameraFile, CameraId, ChainFile, CurveFile, ReportFile, SchemaError,
};
use crate::spherical::{encode_chain, resample_chord, SphericalError};
use crate::stereo::{reconstruct_curve, StereoError};

pub const DEFAULT_SEGMENTS: usize = 50;
pub const DEFAULT_TIP_ANGLE_RAD: f64 = 2.5;

pub const CAMERA_A_FILE: &str = "camera_a.json";
pub const CAMERA_B_FILE: &str = "camera_b.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const ANNOTATIONS_A_FILE: &str = "annotations_a.json";
pub const ANNOTATIONS_B_FILE: &str = "annotations_b.json";
pub const CHAIN_FILE: &str = "chain.json";

pub const CURVE_CSV_HEADER: &str = "item,max_ed,mete,mers,frechet";
pub const EPISODE_CSV_HEADER: &str = "episode,success,path_length,spl,safety,f_max,f_mean";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Schema {
        path: PathBuf,
        source: SchemaError,
    },
    #[error(transparent)]
    Serialize(#[from] SchemaError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    BSpline(#[from] BSplineError),
    #[error(transparent)]
    Stereo(#[from] StereoError),
    #[error(transparent)]
    Rod(#[from] RodError),
    #[error(transparent)]
    Spherical(#[from] SphericalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_file<T>(path: &Path, parse: impl FnOnce(&str) -> Result<T, SchemaError>) -> Result<T, PipelineError> {
    parse(&read(path)?).map_err(|source| PipelineError::Schema {
        path: path.to_owned(),
        source,
    })
}

/// Two vergent pinhole cameras looking at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoRig {
    pub focal_px: f64,
    pub image_size: (u32, u32),
    /// Rotation of each camera about the vertical (y) axis, radians.
    pub half_vergence: f64,
    /// Distance of each camera centre from the origin, mm.
    pub distance_mm: f64,
}

impl Default for StereoRig {
    fn default() -> Self {
        Self {
            focal_px: 1500.0,
            image_size: (1024, 1024),
            half_vergence: 30f64.to_radians(),
            distance_mm: 300.0,
        }
    }
}

impl StereoRig {
    fn camera(&self, angle: f64) -> Result<ProjectiveCamera, CameraError> {
        let (w, h) = self.image_size;
        let pp = Vector2::new(f64::from(w) / 2.0, f64::from(h) / 2.0);
        let r: Matrix3<f64> = Rotation3::from_axis_angle(&Vector3::y_axis(), angle)
            .matrix()
            .transpose();
        ProjectiveCamera::from_pinhole(self.focal_px, pp, r, Vector3::new(0.0, 0.0, self.distance_mm), self.image_size)
    }

    /// Cameras A (rotated by `-half_vergence`) and B (`+half_vergence`).
    pub fn cameras(&self) -> Result<(ProjectiveCamera, ProjectiveCamera), CameraError> {
        Ok((self.camera(-self.half_vergence)?, self.camera(self.half_vergence)?))
    }

    pub fn baseline_mm(&self) -> f64 {
        2.0 * self.distance_mm * self.half_vergence.sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub noise_px: f64,
    pub segments: usize,
    pub segment_length: f64,
    pub stiffness: f64,
    pub tip_angle: f64,
    pub rig: StereoRig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            seed: 0,
            noise_px: 0.0,
            segments: DEFAULT_SEGMENTS,
            segment_length: DEFAULT_SEGMENT_LENGTH_MM,
            stiffness: DEFAULT_STIFFNESS,
            tip_angle: DEFAULT_TIP_ANGLE_RAD,
            rig: StereoRig::default(),
        }
    }
}

/// Everything [`cmd_synth`] writes, in memory.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub camera_a: ProjectiveCamera,
    pub camera_b: ProjectiveCamera,
    /// Ground-truth samples, tip first, equally spaced.
    pub points: Vec<Vector3<f64>>,
    pub annotation_a: Annotation,
    pub annotation_b: Annotation,
}

/// Rod-model wire placed in the rig's field of view: tip first, centred on
/// the origin, with its tip-to-base chord along world `y`.
pub fn synth_wire(config: &SynthConfig) -> Result<Vec<Vector3<f64>>, PipelineError> {
    let centerline = synth_guidewire(
        config.segments,
        config.segment_length,
        config.tip_angle,
        config.stiffness,
        config.seed,
    )?;
    let mut points = resample_chord(&centerline, config.segment_length);
    points.reverse();
    let chord = points[points.len() - 1] - points[0];
    let align = UnitQuaternion::rotation_between(&chord, &Vector3::y())
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    Ok(points.iter().map(|p| align * (p - centroid)).collect())
}

/// Synthesizes a scene without touching the filesystem.
pub fn synth_scene(config: &SynthConfig) -> Result<SynthScene, PipelineError> {
    if !(config.noise_px >= 0.0 && config.noise_px.is_finite()) {
        return Err(PipelineError::Config(format!(
            "noise must be a finite non-negative number, got {}",
            config.noise_px
        )));
    }
    let points = synth_wire(config)?;
    let (camera_a, camera_b) = config.rig.cameras()?;
    let noise = Normal::new(0.0, config.noise_px).map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut view = |cam: &ProjectiveCamera, camera: CameraId| -> Result<Annotation, PipelineError> {
        let mut px = Vec::with_capacity(points.len());
        for p in &points {
            let x = cam.project(p)?;
            px.push(if config.noise_px > 0.0 {
                x + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                x
            });
        }
        Ok(Annotation {
            frame: 0,
            camera,
            points: px,
        })
    };
    let annotation_a = view(&camera_a, CameraId::A)?;
    let annotation_b = view(&camera_b, CameraId::B)?;
    Ok(SynthScene {
        camera_a,
        camera_b,
        points,
        annotation_a,
        annotation_b,
    })
}

/// Writes cameras, ground truth, both annotations and the spherical chain
/// into `config.out_dir`. Returns the written paths.
pub fn cmd_synth(config: &SynthConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let scene = synth_scene(config)?;
    let truth = fit_curve(&scene.points, 3)?;
    let chain = encode_chain(&scene.points)?;
    fs::create_dir_all(&config.out_dir).map_err(|source| PipelineError::Io {
        path: config.out_dir.clone(),
        source,
    })?;
    let files = [
        (CAMERA_A_FILE, to_json(&CameraFile::from_camera(&scene.camera_a))?),
        (CAMERA_B_FILE, to_json(&CameraFile::from_camera(&scene.camera_b))?),
        (TRUTH_FILE, to_json(&CurveFile::from_curve(&truth))?),
        (ANNOTATIONS_A_FILE, to_json(&AnnotationFile::from(&scene.annotation_a))?),
        (ANNOTATIONS_B_FILE, to_json(&AnnotationFile::from(&scene.annotation_b))?),
        (CHAIN_FILE, to_json(&ChainFile::from(&chain))?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = config.out_dir.join(name);
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructConfig {
    pub camera_a: PathBuf,
    pub camera_b: PathBuf,
    pub annotations: Vec<PathBuf>,
    pub out: PathBuf,
    pub samples: usize,
}

/// Reconstructs every frame found in the annotations, in frame order.
pub fn reconstruct_frames(
    camera_a: &ProjectiveCamera,
    camera_b: &ProjectiveCamera,
    annotations: &[Annotation],
    samples: usize,
) -> Result<Vec<ReportFile>, PipelineError> {
    if samples < 4 {
        return Err(PipelineError::Config(format!("samples must be at least 4, got {samples}")));
    }
    let mut frames: BTreeMap<u32, [Option<&Annotation>; 2]> = BTreeMap::new();
    for a in annotations {
        let slot = &mut frames.entry(a.frame).or_default()[a.camera as usize];
        if slot.is_some() {
            return Err(PipelineError::Config(format!(
                "frame {} has more than one annotation for camera {:?}",
                a.frame, a.camera
            )));
        }
        *slot = Some(a);
    }
    let mut reports = Vec::with_capacity(frames.len());
    for (frame, views) in frames {
        let [Some(a), Some(b)] = views else {
            return Err(PipelineError::Config(format!(
                "frame {frame} needs one annotation from each camera"
            )));
        };
        let curve_a = PlanarCurve::new(&a.points)?;
        let curve_b = PlanarCurve::new(&b.points)?;
        let report = reconstruct_curve(camera_a, camera_b, &curve_a, &curve_b, samples)?;
        reports.push(ReportFile {
            frame,
            accepted: report.accepted,
            mean_reproj_px: report.mean_reproj_px,
            curve: CurveFile::from_curve(&report.curve),
        });
    }
    Ok(reports)
}

/// Writes one report object, or an array when there are several frames.
pub fn cmd_reconstruct(config: &ReconstructConfig) -> Result<Vec<ReportFile>, PipelineError> {
    if config.annotations.is_empty() {
        return Err(PipelineError::Config("no annotation files given".into()));
    }
    let camera_a = parse_file(&config.camera_a, parse_camera)?;
    let camera_b = parse_file(&config.camera_b, parse_camera)?;
    let mut annotations = Vec::new();
    for path in &config.annotations {
        annotations.extend(parse_file(path, parse_annotations)?);
    }
    let reports = reconstruct_frames(&camera_a, &camera_b, &annotations, config.samples)?;
    let text = match reports.as_slice() {
        [single] => to_json(single)?,
        many => to_json(&many)?,
    };
    write(&config.out, &text)?;
    Ok(reports)
}

/// Curve-metric CSV for paired prediction and truth files. Each file holds
/// a curve, a report or an array of either; items pair up by position. With
/// more than one pair a final `mean` row averages the columns.
pub fn cmd_evaluate_curves(pred: &Path, truth: &Path) -> Result<String, PipelineError> {
    let pred = parse_file(pred, parse_curves_or_reports)?;
    let truth = parse_file(truth, parse_curves_or_reports)?;
    if pred.len() != truth.len() {
        return Err(PipelineError::Config(format!(
            "prediction has {} curves but truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let rows = pred
        .iter()
        .zip(&truth)
        .map(|(p, t)| curve_metrics(p, t, DEFAULT_CURVE_SAMPLES))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::new();
    writeln!(out, "{CURVE_CSV_HEADER}").unwrap();
    let line = |out: &mut String, label: &str, m: &CurveMetrics| {
        writeln!(
            out,
            "{label},{},{},{},{}",
            format_g9(m.max_ed),
            format_g9(m.mete),
            format_g9(m.mers),
            format_g9(m.frechet)
        )
        .unwrap();
    };
    for (i, m) in rows.iter().enumerate() {
        line(&mut out, &i.to_string(), m);
    }
    if rows.len() > 1 {
        let n = rows.len() as f64;
        let mean = CurveMetrics {
            max_ed: rows.iter().map(|m| m.max_ed).sum::<f64>() / n,
            mete: rows.iter().map(|m| m.mete).sum::<f64>() / n,
            mers: rows.iter().map(|m| m.mers).sum::<f64>() / n,
            frechet: rows.iter().map(|m| m.frechet).sum::<f64>() / n,
        };
        line(&mut out, "mean", &mean);
    }
    Ok(out)
}

/// Episode-metric CSV: one row per episode, then an `all` row holding the
/// success rate, mean path length, batch SPL, mean safety, overall peak
/// force and mean of the per-episode mean forces.
pub fn cmd_evaluate_episodes(episodes: &Path) -> Result<String, PipelineError> {
    let episodes = parse_file(episodes, parse_episodes)?;
    let m = episode_metrics(&episodes)?;
    let mut out = String::new();
    writeln!(out, "{EPISODE_CSV_HEADER}").unwrap();
    for (i, r) in m.rows.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            u8::from(r.success),
            format_g9(r.path_length),
            format_g9(r.spl_term),
            format_g9(r.safety),
            format_g9(r.f_max),
            format_g9(r.f_mean)
        )
        .unwrap();
    }
    let n = m.rows.len() as f64;
    let mean = |f: fn(&crate::metrics::EpisodeRow) -> f64| m.rows.iter().map(f).sum::<f64>() / n;
    writeln!(
        out,
        "all,{},{},{},{},{},{}",
        format_g9(mean(|r| f64::from(u8::from(r.success)))),
        format_g9(mean(|r| r.path_length)),
        format_g9(m.spl),
        format_g9(mean(|r| r.safety)),
        format_g9(m.rows.iter().map(|r| r.f_max).fold(0.0, f64::max)),
        format_g9(mean(|r| r.f_mean))
    )
    .unwrap();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub segments: usize,
    pub segment_length: f64,
    pub stiffness: f64,
    pub tip_angle: f64,
    /// Pinned tip position, mm.
    pub tip: Option<[f64; 3]>,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("relaxed.json"),
            seed: 0,
            segments: DEFAULT_SEGMENTS,
            segment_length: DEFAULT_SEGMENT_LENGTH_MM,
            stiffness: DEFAULT_STIFFNESS,
            tip_angle: DEFAULT_TIP_ANGLE_RAD,
            tip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxSummary {
    pub energy: f64,
    pub iterations: usize,
    pub tip: [f64; 3],
}

/// Relaxes a seeded rod (base at the origin along `+z`), optionally with a
/// pinned tip, and writes its centerline as a cubic curve.
pub fn cmd_relax(config: &RelaxConfig) -> Result<RelaxSummary, PipelineError> {
    let rod = seeded_rod(
        config.segments,
        config.segment_length,
        config.tip_angle,
        config.stiffness,
        config.seed,
    )?;
    let constraints = Constraints {
        tip: config.tip.map(Vector3::from),
    };
    let report = relax_with(&rod, &constraints, &RelaxOptions::default())?;
    let curve = fit_curve(&report.rod.centerline(), 3)?;
    write(&config.out, &to_json(&CurveFile::from_curve(&curve))?)?;
    Ok(RelaxSummary {
        energy: bending_energy(&report.rod),
        iterations: report.iterations,
        tip: report.rod.tip().into(),
    })
}
