//! JSON file formats and number formatting shared by every command.
//!
//! All objects reject unknown keys. Floats are written with at most nine
//! significant digits and a `.` decimal separator.

use nalgebra::{Matrix3x4, SVector, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bspline::{BSpline, KnotVector, SpatialCurve};
use crate::cameras::ProjectiveCamera;
use crate::metrics::Episode;
use crate::spherical::SphericalChain;

/// Degree ceiling accepted from files; keeps evaluation cost bounded.
pub const MAX_DEGREE: usize = 16;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch {
        expected: &'static str,
        found: &'static str,
    },
}

fn invalid(what: &'static str, reason: impl ToString) -> SchemaError {
    SchemaError::Invalid {
        what,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    #[serde(rename = "P")]
    pub p: [[f64; 4]; 3],
    pub image_size: [u32; 2],
}

impl CameraFile {
    pub fn from_camera(cam: &ProjectiveCamera) -> Self {
        let m = cam.matrix();
        let (w, h) = cam.image_size();
        Self {
            p: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            image_size: [w, h],
        }
    }

    pub fn to_camera(&self) -> Result<ProjectiveCamera, SchemaError> {
        let m = Matrix3x4::from_fn(|r, c| self.p[r][c]);
        ProjectiveCamera::new(m, (self.image_size[0], self.image_size[1]))
            .map_err(|e| invalid("camera", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control_points: Vec<Vec<f64>>,
}

impl CurveFile {
    pub fn from_curve<const D: usize>(curve: &BSpline<D>) -> Self {
        Self {
            degree: curve.degree(),
            knots: curve.knots().as_slice().to_vec(),
            control_points: curve
                .control_points()
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect(),
        }
    }

    pub fn to_curve<const D: usize>(&self) -> Result<BSpline<D>, SchemaError> {
        if self.degree > MAX_DEGREE {
            return Err(invalid("curve", format!("degree {} exceeds {MAX_DEGREE}", self.degree)));
        }
        let mut pts = Vec::with_capacity(self.control_points.len());
        for p in &self.control_points {
            if p.len() != D {
                return Err(invalid(
                    "curve",
                    format!("control point has {} coordinates, expected {D}", p.len()),
                ));
            }
            pts.push(SVector::<f64, D>::from_column_slice(p));
        }
        let knots = KnotVector::new(self.knots.clone(), self.degree).map_err(|e| invalid("curve", e))?;
        BSpline::new(pts, knots).map_err(|e| invalid("curve", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CameraId {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub frame: u32,
    pub camera: CameraId,
    pub points: Vec<[f64; 2]>,
}

/// A validated annotation polyline in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub frame: u32,
    pub camera: CameraId,
    pub points: Vec<Vector2<f64>>,
}

impl AnnotationFile {
    pub fn validate(&self) -> Result<Annotation, SchemaError> {
        if self.points.len() < 2 {
            return Err(invalid(
                "annotation",
                format!("polyline needs at least 2 points, got {}", self.points.len()),
            ));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("annotation", "non-finite coordinate"));
        }
        Ok(Annotation {
            frame: self.frame,
            camera: self.camera,
            points: self.points.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
        })
    }
}

impl From<&Annotation> for AnnotationFile {
    fn from(a: &Annotation) -> Self {
        Self {
            frame: a.frame,
            camera: a.camera,
            points: a.points.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub tip: [f64; 3],
    pub r: f64,
    pub offsets: Vec<[f64; 2]>,
}

impl From<&SphericalChain> for ChainFile {
    fn from(c: &SphericalChain) -> Self {
        Self {
            tip: [c.tip.x, c.tip.y, c.tip.z],
            r: c.r,
            offsets: c.offsets.iter().map(|&(t, p)| [t, p]).collect(),
        }
    }
}

impl ChainFile {
    pub fn to_chain(&self) -> Result<SphericalChain, SchemaError> {
        SphericalChain::new(
            Vector3::from(self.tip),
            self.r,
            self.offsets.iter().map(|o| (o[0], o[1])).collect(),
        )
        .map_err(|e| invalid("chain", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeFile {
    pub tip: Vec<[f64; 3]>,
    #[serde(default)]
    pub forces: Vec<[f64; 3]>,
    pub goal: [f64; 3],
    pub success: bool,
}

impl EpisodeFile {
    pub fn to_episode(&self, index: usize) -> Result<Episode, SchemaError> {
        let v = |a: &[f64; 3]| Vector3::from(*a);
        let e = Episode {
            tip_positions: self.tip.iter().map(v).collect(),
            forces: self.forces.iter().map(v).collect(),
            goal: v(&self.goal),
            success: self.success,
        };
        e.validate(index).map_err(|err| invalid("episode", err))?;
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub frame: u32,
    pub accepted: bool,
    pub mean_reproj_px: f64,
    pub curve: CurveFile,
}

/// What a JSON document looks like, judged by its keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Camera,
    Curve,
    Annotation,
    Chain,
    Episode,
    Report,
    Unknown,
}

impl DocumentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Camera => "camera",
            Self::Curve => "curve",
            Self::Annotation => "annotation",
            Self::Chain => "spherical chain",
            Self::Episode => "episode",
            Self::Report => "reconstruction report",
            Self::Unknown => "unrecognized document",
        }
    }

    fn of_object(v: &Value) -> Self {
        let Some(obj) = v.as_object() else {
            return Self::Unknown;
        };
        let has = |k: &str| obj.contains_key(k);
        if has("P") {
            Self::Camera
        } else if has("accepted") || has("mean_reproj_px") {
            Self::Report
        } else if has("knots") || has("control_points") {
            Self::Curve
        } else if has("camera") && has("points") {
            Self::Annotation
        } else if has("offsets") {
            Self::Chain
        } else if has("goal") || has("success") {
            Self::Episode
        } else {
            Self::Unknown
        }
    }

    /// Kind of a document or of the first element of a document array.
    pub fn detect(text: &str) -> Result<Self, SchemaError> {
        let v: Value = serde_json::from_str(text)?;
        Ok(match &v {
            Value::Array(items) => items.first().map_or(Self::Unknown, Self::of_object),
            other => Self::of_object(other),
        })
    }
}

/// Parses either a single object or an array of objects.
fn one_or_many<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, SchemaError> {
    match serde_json::from_str::<Value>(text)? {
        Value::Array(items) => items
            .into_iter()
            .map(|v| serde_json::from_value(v).map_err(SchemaError::from))
            .collect(),
        v => Ok(vec![serde_json::from_value(v)?]),
    }
}

fn expect_kind(text: &str, expected: DocumentKind) -> Result<(), SchemaError> {
    let found = DocumentKind::detect(text)?;
    if found != expected && found != DocumentKind::Unknown {
        return Err(SchemaError::SchemaMismatch {
            expected: expected.name(),
            found: found.name(),
        });
    }
    Ok(())
}

pub fn parse_camera(text: &str) -> Result<ProjectiveCamera, SchemaError> {
    expect_kind(text, DocumentKind::Camera)?;
    serde_json::from_str::<CameraFile>(text)?.to_camera()
}

pub fn parse_curve<const D: usize>(text: &str) -> Result<BSpline<D>, SchemaError> {
    expect_kind(text, DocumentKind::Curve)?;
    serde_json::from_str::<CurveFile>(text)?.to_curve()
}

/// One or many annotations; each polyline needs at least two points.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>, SchemaError> {
    expect_kind(text, DocumentKind::Annotation)?;
    let files: Vec<AnnotationFile> = one_or_many(text)?;
    if files.is_empty() {
        return Err(invalid("annotation", "empty annotation list"));
    }
    files.iter().map(AnnotationFile::validate).collect()
}

pub fn parse_chain(text: &str) -> Result<SphericalChain, SchemaError> {
    expect_kind(text, DocumentKind::Chain)?;
    serde_json::from_str::<ChainFile>(text)?.to_chain()
}

/// One or many episodes.
pub fn parse_episodes(text: &str) -> Result<Vec<Episode>, SchemaError> {
    expect_kind(text, DocumentKind::Episode)?;
    let files: Vec<EpisodeFile> = one_or_many(text)?;
    if files.is_empty() {
        return Err(invalid("episode", "empty episode list"));
    }
    files
        .iter()
        .enumerate()
        .map(|(i, f)| f.to_episode(i))
        .collect()
}

/// One or many reconstruction reports, with their curves decoded.
pub fn parse_reports(text: &str) -> Result<Vec<(ReportFile, SpatialCurve)>, SchemaError> {
    expect_kind(text, DocumentKind::Report)?;
    let files: Vec<ReportFile> = one_or_many(text)?;
    files
        .into_iter()
        .map(|f| {
            if !f.mean_reproj_px.is_finite() {
                return Err(invalid("report", "non-finite reprojection error"));
            }
            let c = f.curve.to_curve()?;
            Ok((f, c))
        })
        .collect()
}

/// Spatial curves from a curve document or a report document (one or many).
pub fn parse_curves_or_reports(text: &str) -> Result<Vec<SpatialCurve>, SchemaError> {
    match DocumentKind::detect(text)? {
        DocumentKind::Report => Ok(parse_reports(text)?.into_iter().map(|(_, c)| c).collect()),
        DocumentKind::Curve => {
            let files: Vec<CurveFile> = one_or_many(text)?;
            files.iter().map(CurveFile::to_curve).collect()
        }
        found => Err(SchemaError::SchemaMismatch {
            expected: "curve or reconstruction report",
            found: found.name(),
        }),
    }
}

/// Rounds to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig9).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to nine significant digits, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, SchemaError> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// `%.9g`-style formatting for CSV cells.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
