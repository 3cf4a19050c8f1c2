//! Annotation ingestion and dataset statistics: the mean absolute target
//! size S (square root of the mean box area over all boxes), the derived
//! NWD constant C, and a size histogram for choosing a Shape-IoU scale.
//!
//! Two input formats are supported and anything else is rejected loudly:
//! - coco-json: standard detection JSON with `images` / `annotations`
//!   arrays, `bbox` as `[x, y, width, height]` in pixels.
//! - yolo-txt: a directory of per-image `.txt` files with normalized
//!   `class cx cy w h` lines, plus a sidecar `manifest.json` mapping image
//!   file names to pixel dimensions (images are never decoded here).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxcore::CornerBox;

/// Version of the canonical internal dump schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {locator}: {message}")]
    Parse { locator: String, message: String },
    #[error("invalid annotation in {locator}: width and height must be positive (got w={w}, h={h})")]
    Validation { locator: String, w: f64, h: f64 },
    #[error("dataset contains no boxes")]
    EmptyDataset,
    #[error("unsupported annotation format `{0}` (expected coco-json or yolo-txt)")]
    UnknownFormat(String),
    #[error("canonical dump has schema_version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    CocoJson,
    YoloTxt,
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::CocoJson => "coco-json",
            SourceFormat::YoloTxt => "yolo-txt",
        })
    }
}

impl FromStr for SourceFormat {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s {
            "coco-json" => Ok(SourceFormat::CocoJson),
            "yolo-txt" => Ok(SourceFormat::YoloTxt),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAnnotations {
    pub image_id: String,
    pub boxes: Vec<CornerBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub images: Vec<ImageAnnotations>,
    pub source_format: SourceFormat,
}

impl AnnotationSet {
    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    pub fn n_boxes(&self) -> usize {
        self.images.iter().map(|i| i.boxes.len()).sum()
    }

    pub fn all_boxes(&self) -> impl Iterator<Item = &CornerBox> {
        self.images.iter().flat_map(|i| i.boxes.iter())
    }
}

/// How the NWD constant in [`DatasetStats`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NwdCSource {
    /// Defaulted to the mean size S.
    MeanSize,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    /// Bucket covers sizes in `[2^exponent, 2^(exponent+1))` pixels.
    pub exponent: i32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_size_s: f64,
    pub nwd_c: f64,
    pub nwd_c_source: NwdCSource,
    pub n_images: u64,
    pub n_boxes: u64,
    /// Counts of per-box size `sqrt(w*h)` bucketed by powers of 2.
    pub size_histogram: Vec<HistogramBucket>,
}

/// Mean absolute size: square root of the mean box area over all boxes in
/// all images (a flat mean; image grouping does not matter).
pub fn dataset_mean_size(ann: &AnnotationSet) -> Result<f64, DatasetError> {
    let mut sum = 0.0;
    let mut count = 0u64;
    for b in ann.all_boxes() {
        sum += b.area();
        count += 1;
    }
    if count == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    Ok((sum / count as f64).sqrt())
}

pub fn compute_stats(ann: &AnnotationSet) -> Result<DatasetStats, DatasetError> {
    compute_stats_with_nwd_c(ann, None)
}

pub fn compute_stats_with_nwd_c(
    ann: &AnnotationSet,
    nwd_c_override: Option<f64>,
) -> Result<DatasetStats, DatasetError> {
    let mean_size_s = dataset_mean_size(ann)?;
    let mut histogram: BTreeMap<i32, u64> = BTreeMap::new();
    for b in ann.all_boxes() {
        let size = b.area().sqrt();
        *histogram.entry(size.log2().floor() as i32).or_insert(0) += 1;
    }
    let (nwd_c, nwd_c_source) = match nwd_c_override {
        Some(c) => (c, NwdCSource::Override),
        None => (mean_size_s, NwdCSource::MeanSize),
    };
    Ok(DatasetStats {
        mean_size_s,
        nwd_c,
        nwd_c_source,
        n_images: ann.n_images() as u64,
        n_boxes: ann.n_boxes() as u64,
        size_histogram: histogram
            .into_iter()
            .map(|(exponent, count)| HistogramBucket { exponent, count })
            .collect(),
    })
}

pub fn load_annotations(path: &Path, format: SourceFormat) -> Result<AnnotationSet, DatasetError> {
    match format {
        SourceFormat::CocoJson => load_coco(path),
        SourceFormat::YoloTxt => load_yolo(path),
    }
}

fn read_file(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Deserialize)]
struct CocoRoot {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: serde_json::Value,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: Option<serde_json::Value>,
    image_id: serde_json::Value,
    bbox: Vec<f64>,
}

fn load_coco(path: &Path) -> Result<AnnotationSet, DatasetError> {
    let text = read_file(path)?;
    let root: CocoRoot = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        locator: path.display().to_string(),
        message: e.to_string(),
    })?;

    let mut images: Vec<ImageAnnotations> = root
        .images
        .iter()
        .map(|im| ImageAnnotations {
            image_id: im.id.to_string(),
            boxes: Vec::new(),
        })
        .collect();
    let mut index: BTreeMap<String, usize> = images
        .iter()
        .enumerate()
        .map(|(i, im)| (im.image_id.clone(), i))
        .collect();

    for (record, ann) in root.annotations.iter().enumerate() {
        let locator = match &ann.id {
            Some(id) => format!("{}: annotation id {id}", path.display()),
            None => format!("{}: annotation #{record}", path.display()),
        };
        if ann.bbox.len() != 4 {
            return Err(DatasetError::Parse {
                locator,
                message: format!("bbox must have 4 elements, got {}", ann.bbox.len()),
            });
        }
        let [x, y, w, h] = [ann.bbox[0], ann.bbox[1], ann.bbox[2], ann.bbox[3]];
        if w <= 0.0 || h <= 0.0 {
            return Err(DatasetError::Validation { locator, w, h });
        }
        let cb = CornerBox::new(x, y, x + w, y + h).map_err(|e| DatasetError::Parse {
            locator,
            message: e.to_string(),
        })?;
        let image_id = ann.image_id.to_string();
        let idx = *index.entry(image_id.clone()).or_insert_with(|| {
            images.push(ImageAnnotations {
                image_id,
                boxes: Vec::new(),
            });
            images.len() - 1
        });
        images[idx].boxes.push(cb);
    }

    Ok(AnnotationSet {
        images,
        source_format: SourceFormat::CocoJson,
    })
}

#[derive(Deserialize)]
struct ManifestEntry {
    width: f64,
    height: f64,
}

fn load_yolo(dir: &Path) -> Result<AnnotationSet, DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let manifest: BTreeMap<String, ManifestEntry> = serde_json::from_str(&read_file(
        &manifest_path,
    )?)
    .map_err(|e| DatasetError::Parse {
        locator: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;

    // stem -> (file name, dims); label files are matched by stem
    let by_stem: BTreeMap<String, (&String, &ManifestEntry)> = manifest
        .iter()
        .map(|(name, entry)| {
            let stem = Path::new(name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| name.clone());
            (stem, (name, entry))
        })
        .collect();

    let mut images = Vec::new();
    for (stem, (name, dims)) in &by_stem {
        let txt_path = dir.join(format!("{stem}.txt"));
        if !txt_path.exists() {
            continue;
        }
        let text = read_file(&txt_path)?;
        let mut boxes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let locator = format!("{}:{}", txt_path.display(), lineno + 1);
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(DatasetError::Parse {
                    locator,
                    message: format!("expected 5 fields `class cx cy w h`, got {}", fields.len()),
                });
            }
            let nums: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| DatasetError::Parse {
                    locator: locator.clone(),
                    message: e.to_string(),
                })?;
            let (cx, cy, w, h) = (
                nums[0] * dims.width,
                nums[1] * dims.height,
                nums[2] * dims.width,
                nums[3] * dims.height,
            );
            if w <= 0.0 || h <= 0.0 {
                return Err(DatasetError::Validation { locator, w, h });
            }
            boxes.push(
                CornerBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0).map_err(
                    |e| DatasetError::Parse {
                        locator,
                        message: e.to_string(),
                    },
                )?,
            );
        }
        images.push(ImageAnnotations {
            image_id: (*name).clone(),
            boxes,
        });
    }

    Ok(AnnotationSet {
        images,
        source_format: SourceFormat::YoloTxt,
    })
}

#[derive(Serialize, Deserialize)]
struct CanonicalDump {
    schema_version: u32,
    source_format: SourceFormat,
    images: Vec<ImageAnnotations>,
}

/// Serialize to the canonical internal JSON dump (versioned with
/// `schema_version`).
pub fn to_canonical_json(ann: &AnnotationSet) -> String {
    serde_json::to_string_pretty(&CanonicalDump {
        schema_version: SCHEMA_VERSION,
        source_format: ann.source_format,
        images: ann.images.clone(),
    })
    .expect("annotation set serializes")
}

pub fn from_canonical_json(text: &str) -> Result<AnnotationSet, DatasetError> {
    let dump: CanonicalDump = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        locator: "canonical dump".to_string(),
        message: e.to_string(),
    })?;
    if dump.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::SchemaVersion {
            found: dump.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(AnnotationSet {
        images: dump.images,
        source_format: dump.source_format,
    })
}
