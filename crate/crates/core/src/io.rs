//! Manifest, detection-file and report serialization.
//!
//! Manifest schema:
//!
//! ```json
//! {"images": [{"id": "img0", "width": 640, "height": 480}],
//!  "classes": ["specularity", "..."],
//!  "annotations": [{"image_id": "img0", "class": "blur", "bbox": [x, y, w, h]}]}
//! ```
//!
//! Detection schema:
//!
//! ```json
//! {"model_id": "yolov4",
//!  "detections": [{"image_id": "img0", "class": "blur", "bbox": [x, y, w, h], "score": 0.9}]}
//! ```
//!
//! `classes` may be omitted from a manifest, in which case the eight EAD
//! classes apply. A detection file may carry its own `classes` list; it must
//! then equal the manifest's.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::geometry::BoundingBox;
use crate::model::{
    check_score, ClassRegistry, DatasetManifest, Detection, GroundTruthAnnotation, ImageInfo,
};
use crate::report::{render, Report, ReportFormat};

/// Boxes may overrun the image by this many pixels and get clamped; larger
/// overruns are rejected.
pub const CLAMP_TOLERANCE_PX: f64 = 2.0;

/// How `bbox` arrays are encoded in an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxEncoding {
    /// `[x, y, w, h]`
    #[default]
    Xywh,
    /// `[x1, y1, x2, y2]`
    Corners,
}

/// All predictions of one detector, validated against a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub model_id: String,
    pub detections: Vec<Detection>,
    pub registry: ClassRegistry,
}

impl DetectionFile {
    /// Assembles a file, relabeling every detection with `model_id`.
    pub fn new(
        model_id: impl Into<String>,
        mut detections: Vec<Detection>,
        registry: ClassRegistry,
    ) -> Self {
        let model_id = model_id.into();
        for d in &mut detections {
            d.model_id.clone_from(&model_id);
        }
        Self {
            model_id,
            detections,
            registry,
        }
    }

    /// Checks the file's detections against `manifest`.
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        if &self.registry != manifest.registry() {
            return Err(Error::Config(format!(
                "detections `{}` use a class registry different from the manifest's",
                self.model_id
            )));
        }
        for (i, d) in self.detections.iter().enumerate() {
            let Some(img) = manifest.image(&d.image_id) else {
                return Err(Error::UnknownImage {
                    image_id: d.image_id.clone(),
                    context: format!("detection {i} of `{}`", self.model_id),
                });
            };
            if !self.registry.contains(d.class_id) {
                return Err(Error::Validation(format!(
                    "detection {i} of `{}` has class id {} outside the registry",
                    self.model_id, d.class_id
                )));
            }
            check_score(d.score)
                .map_err(|e| Error::Validation(format!("detection {i} of `{}`: {e}", self.model_id)))?;
            if !d.bbox.within(img.width as f64, img.height as f64) {
                return Err(Error::Validation(format!(
                    "detection {i} of `{}` extends outside image `{}`",
                    self.model_id, d.image_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    images: Vec<RawImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImage {
    id: String,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    image_id: String,
    class: String,
    bbox: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetectionFile {
    model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    detections: Vec<RawDetection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    image_id: String,
    class: String,
    bbox: [f64; 4],
    score: f64,
}

fn read_to_string(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.strip_prefix('\u{feff}').map(str::to_owned).unwrap_or(text))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Converts a raw `bbox` to a box inside a `width x height` image,
/// clamping overruns of at most [`CLAMP_TOLERANCE_PX`].
pub fn resolve_box(
    raw: [f64; 4],
    encoding: BoxEncoding,
    width: u32,
    height: u32,
    context: &str,
) -> Result<BoundingBox> {
    let [a, b, c, d] = raw;
    if !raw.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("{context}: non-finite box coordinates")));
    }
    let (x1, y1, x2, y2) = match encoding {
        BoxEncoding::Xywh => (a, b, a + c, b + d),
        BoxEncoding::Corners => (a, b, c, d),
    };
    if x2 <= x1 || y2 <= y1 {
        return Err(Error::Validation(format!(
            "{context}: degenerate box with width {} and height {}",
            x2 - x1,
            y2 - y1
        )));
    }
    let (w, h) = (width as f64, height as f64);
    let overrun = [-x1, -y1, x2 - w, y2 - h]
        .into_iter()
        .fold(0.0f64, f64::max);
    if overrun > CLAMP_TOLERANCE_PX {
        return Err(Error::Validation(format!(
            "{context}: box extends {overrun} px outside the {width}x{height} image"
        )));
    }
    let (cx1, cy1, cx2, cy2) = (x1.max(0.0), y1.max(0.0), x2.min(w), y2.min(h));
    if overrun > 0.0 {
        log::warn!("{context}: box overruns the image by {overrun} px, clamped");
    }
    let bbox = if overrun > 0.0 {
        BoundingBox::from_corners(cx1, cy1, cx2, cy2)
    } else {
        // Keep the original numbers so files round-trip exactly.
        match encoding {
            BoxEncoding::Xywh => BoundingBox::new(a, b, c, d),
            BoxEncoding::Corners => BoundingBox::from_corners(a, b, c, d),
        }
    };
    bbox.map_err(|e| Error::Validation(format!("{context}: {e}")))
}

fn registry_from(classes: Option<Vec<String>>) -> Result<ClassRegistry> {
    match classes {
        Some(names) => ClassRegistry::new(names),
        None => Ok(ClassRegistry::ead()),
    }
}

pub fn parse_manifest(text: &str, path: &Path, encoding: BoxEncoding) -> Result<DatasetManifest> {
    let raw: RawManifest = parse_json(path, text)?;
    let registry = registry_from(raw.classes)?;
    let images: Vec<ImageInfo> = raw
        .images
        .into_iter()
        .map(|r| ImageInfo {
            id: r.id,
            width: r.width,
            height: r.height,
        })
        .collect();
    let dims: std::collections::HashMap<&str, (u32, u32)> = images
        .iter()
        .map(|i| (i.id.as_str(), (i.width, i.height)))
        .collect();

    let mut annotations = Vec::with_capacity(raw.annotations.len());
    for (i, a) in raw.annotations.into_iter().enumerate() {
        let context = format!("annotation {i} on image `{}`", a.image_id);
        let Some(&(w, h)) = dims.get(a.image_id.as_str()) else {
            return Err(Error::UnknownImage {
                image_id: a.image_id,
                context: format!("annotation {i}"),
            });
        };
        let class_id = registry
            .id(&a.class)
            .ok_or_else(|| Error::Validation(format!("{context}: unknown class `{}`", a.class)))?;
        let bbox = resolve_box(a.bbox, encoding, w, h, &context)?;
        annotations.push(GroundTruthAnnotation {
            image_id: a.image_id,
            class_id,
            bbox,
        });
    }
    DatasetManifest::new(images, annotations, registry)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    load_manifest_with(path, BoxEncoding::Xywh)
}

pub fn load_manifest_with(path: impl AsRef<Path>, encoding: BoxEncoding) -> Result<DatasetManifest> {
    let path = path.as_ref();
    parse_manifest(&read_to_string(path)?, path, encoding)
}

pub fn parse_detections(
    text: &str,
    path: &Path,
    manifest: &DatasetManifest,
    encoding: BoxEncoding,
) -> Result<DetectionFile> {
    let raw: RawDetectionFile = parse_json(path, text)?;
    let registry = manifest.registry();
    if let Some(classes) = raw.classes {
        if &ClassRegistry::new(classes)? != registry {
            return Err(Error::Config(format!(
                "detections `{}` declare classes different from the manifest's",
                raw.model_id
            )));
        }
    }
    let mut detections = Vec::with_capacity(raw.detections.len());
    for (i, d) in raw.detections.into_iter().enumerate() {
        let context = format!("detection {i} on image `{}`", d.image_id);
        let Some(img) = manifest.image(&d.image_id) else {
            return Err(Error::UnknownImage {
                image_id: d.image_id,
                context: format!("detection {i} of `{}`", raw.model_id),
            });
        };
        let class_id = registry
            .id(&d.class)
            .ok_or_else(|| Error::Validation(format!("{context}: unknown class `{}`", d.class)))?;
        let bbox = resolve_box(d.bbox, encoding, img.width, img.height, &context)?;
        check_score(d.score).map_err(|e| Error::Validation(format!("{context}: {e}")))?;
        detections.push(Detection {
            image_id: d.image_id,
            class_id,
            bbox,
            score: d.score,
            model_id: raw.model_id.clone(),
        });
    }
    Ok(DetectionFile {
        model_id: raw.model_id,
        detections,
        registry: registry.clone(),
    })
}

pub fn load_detections(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<DetectionFile> {
    load_detections_with(path, manifest, BoxEncoding::Xywh)
}

pub fn load_detections_with(
    path: impl AsRef<Path>,
    manifest: &DatasetManifest,
    encoding: BoxEncoding,
) -> Result<DetectionFile> {
    let path = path.as_ref();
    parse_detections(&read_to_string(path)?, path, manifest, encoding)
}

fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn class_label(registry: &ClassRegistry, id: crate::model::ClassId) -> String {
    registry
        .name(id)
        .map(str::to_owned)
        .unwrap_or_else(|| id.to_string())
}

/// Canonical JSON text of a manifest; classes are always written.
pub fn manifest_to_json(manifest: &DatasetManifest) -> String {
    let registry = manifest.registry();
    let raw = RawManifest {
        images: manifest
            .images()
            .iter()
            .map(|i| RawImage {
                id: i.id.clone(),
                width: i.width,
                height: i.height,
            })
            .collect(),
        classes: Some(registry.names().to_vec()),
        annotations: manifest
            .annotations()
            .iter()
            .map(|a| RawAnnotation {
                image_id: a.image_id.clone(),
                class: class_label(registry, a.class_id),
                bbox: a.bbox.to_array(),
            })
            .collect(),
    };
    to_json_string(&raw)
}

pub fn detections_to_json(file: &DetectionFile) -> String {
    let raw = RawDetectionFile {
        model_id: file.model_id.clone(),
        classes: None,
        detections: file
            .detections
            .iter()
            .map(|d| RawDetection {
                image_id: d.image_id.clone(),
                class: class_label(&file.registry, d.class_id),
                bbox: d.bbox.to_array(),
                score: d.score,
            })
            .collect(),
    };
    to_json_string(&raw)
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &manifest_to_json(manifest))
}

pub fn write_detections(file: &DetectionFile, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &detections_to_json(file))
}

pub fn write_report(report: Report<'_>, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    write_string(path.as_ref(), &render(report, format))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let report: EvalReport = parse_json(path, &read_to_string(path)?)?;
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.json")
    }

    const ONE_IMAGE: &str = r#"{"images":[{"id":"a","width":100,"height":50}],"annotations":[]}"#;

    fn one_image() -> DatasetManifest {
        parse_manifest(ONE_IMAGE, p(), BoxEncoding::Xywh).unwrap()
    }

    #[test]
    fn minimal_manifest() {
        let m = one_image();
        assert_eq!(m.images().len(), 1);
        assert_eq!(crate::model::class_distribution(&m).total, 0);
        assert_eq!(m.registry(), &ClassRegistry::ead());
    }

    #[test]
    fn zero_width_names_image() {
        let text = r#"{"images":[{"id":"frame_17","width":100,"height":50}],
            "annotations":[{"image_id":"frame_17","class":"blur","bbox":[1,1,0,5]}]}"#;
        let err = parse_manifest(text, p(), BoxEncoding::Xywh).unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("frame_17")), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_manifest("{\n  \"images\": [\n    {\"id\": 3}", p(), BoxEncoding::Xywh)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert!(line >= 3),
            other => panic!("unexpected {other}"),
        }
        let err = parse_manifest(r#"{"images":[{"id":"a","width":1}]}"#, p(), BoxEncoding::Xywh)
            .unwrap_err();
        assert!(matches!(&err, Error::Parse { message, .. } if message.contains("height")));
    }

    #[test]
    fn unknown_class_and_duplicate_image() {
        let text = r#"{"images":[{"id":"a","width":10,"height":10}],
            "annotations":[{"image_id":"a","class":"polyp","bbox":[1,1,2,2]}]}"#;
        assert!(matches!(
            parse_manifest(text, p(), BoxEncoding::Xywh),
            Err(Error::Validation(_))
        ));
        let text = r#"{"images":[{"id":"a","width":10,"height":10},{"id":"a","width":5,"height":5}]}"#;
        assert!(matches!(
            parse_manifest(text, p(), BoxEncoding::Xywh),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn clamp_policy() {
        let within_tolerance = resolve_box([-1.5, 0.0, 10.0, 5.0], BoxEncoding::Xywh, 100, 50, "t")
            .unwrap();
        assert_eq!(within_tolerance.to_array(), [0.0, 0.0, 8.5, 5.0]);
        let bottom = resolve_box([0.0, 45.0, 10.0, 7.0], BoxEncoding::Xywh, 100, 50, "t").unwrap();
        assert_eq!(bottom.to_array(), [0.0, 45.0, 10.0, 5.0]);
        assert!(resolve_box([0.0, 45.0, 10.0, 7.5], BoxEncoding::Xywh, 100, 50, "t").is_err());
        assert!(resolve_box([-3.0, 0.0, 10.0, 5.0], BoxEncoding::Xywh, 100, 50, "t").is_err());
        // Entirely in the tolerance band: nothing left after clamping.
        assert!(resolve_box([100.5, 0.0, 1.0, 5.0], BoxEncoding::Xywh, 100, 50, "t").is_err());
    }

    #[test]
    fn corner_encoding() {
        let b = resolve_box([10.0, 5.0, 30.0, 25.0], BoxEncoding::Corners, 100, 50, "t").unwrap();
        assert_eq!(b.to_array(), [10.0, 5.0, 20.0, 20.0]);
        assert!(resolve_box([10.0, 5.0, 10.0, 25.0], BoxEncoding::Corners, 100, 50, "t").is_err());
    }

    #[test]
    fn detection_file_errors() {
        let m = one_image();
        let empty = parse_detections(r#"{"model_id":"x","detections":[]}"#, p(), &m, BoxEncoding::Xywh)
            .unwrap();
        assert!(empty.detections.is_empty());

        let high = r#"{"model_id":"x","detections":[
            {"image_id":"a","class":"blur","bbox":[1,1,2,2],"score":1.5}]}"#;
        assert!(matches!(
            parse_detections(high, p(), &m, BoxEncoding::Xywh),
            Err(Error::Validation(_))
        ));

        let orphan = r#"{"model_id":"x","detections":[
            {"image_id":"zz","class":"blur","bbox":[1,1,2,2],"score":0.5}]}"#;
        assert!(matches!(
            parse_detections(orphan, p(), &m, BoxEncoding::Xywh),
            Err(Error::UnknownImage { .. })
        ));

        let other_classes = r#"{"model_id":"x","classes":["a","b"],"detections":[]}"#;
        assert!(matches!(
            parse_detections(other_classes, p(), &m, BoxEncoding::Xywh),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_manifest("/nonexistent/manifest.json").unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn bom_is_accepted() {
        let text = format!("\u{feff}{ONE_IMAGE}");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, text).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), one_image());
    }
}
