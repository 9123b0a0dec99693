//! COCO-style annotation JSON: `images[{id,width,height}]`,
//! `annotations[{image_id,bbox:[x,y,w,h],category_id}]`, `categories[{id,name}]`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{write_file, Dataset, ExperimentSpec, Provenance};
use crate::densify::ImageAnnotations;
use crate::error::{Error, Result};
use crate::geometry::{BBox, MIN_BOX_AREA};
use crate::matching::Target;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Annotations with zero area (or none left after clipping to the image).
    pub dropped_boxes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    image_id: u64,
    bbox: [f64; 4],
    category_id: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCategory {
    id: usize,
    #[serde(default)]
    name: String,
}

#[derive(Serialize)]
struct RawFile {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
    info: Value,
}

fn records<'a>(root: &'a Value, key: &str, fail: &dyn Fn(String) -> Error) -> Result<&'a Vec<Value>> {
    root.get(key)
        .ok_or_else(|| fail(format!("missing top-level key `{key}`")))?
        .as_array()
        .ok_or_else(|| fail(format!("`{key}` is not an array")))
}

fn parse<T: for<'de> Deserialize<'de>>(v: &Value, what: &str, k: usize, fail: &dyn Fn(String) -> Error) -> Result<T> {
    T::deserialize(v).map_err(|e| fail(format!("{what}[{k}]: {e}")))
}

/// Loads a COCO-style file and normalizes boxes by image size.
///
/// Zero-area boxes are dropped and counted; negative sizes, unknown images or
/// categories, and missing keys are errors naming the record.
pub fn load_coco(path: &Path) -> Result<(Dataset, LoadReport)> {
    let fail = |reason: String| Error::Load {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| fail(format!("malformed JSON: {e}")))?;

    let mut categories = BTreeMap::new();
    for (k, v) in records(&root, "categories", &fail)?.iter().enumerate() {
        let c: RawCategory = parse(v, "categories", k, &fail)?;
        categories.insert(c.id, c.name);
    }

    let mut images = Vec::new();
    let mut index = HashMap::new();
    for (k, v) in records(&root, "images", &fail)?.iter().enumerate() {
        let im: RawImage = parse(v, "images", k, &fail)?;
        if im.width == 0 || im.height == 0 {
            return Err(fail(format!("images[{k}] (id {}): zero width or height", im.id)));
        }
        if index.insert(im.id, images.len()).is_some() {
            return Err(fail(format!("images[{k}]: duplicate image id {}", im.id)));
        }
        images.push(ImageAnnotations::new(im.id, im.width, im.height, Vec::new()));
    }

    let mut report = LoadReport::default();
    for (k, v) in records(&root, "annotations", &fail)?.iter().enumerate() {
        let a: RawAnnotation = parse(v, "annotations", k, &fail)?;
        let [x, y, w, h] = a.bbox;
        if a.bbox.iter().any(|c| !c.is_finite()) {
            return Err(fail(format!("annotations[{k}]: non-finite bbox {:?}", a.bbox)));
        }
        if w < 0.0 || h < 0.0 {
            return Err(fail(format!("annotations[{k}]: negative bbox size {:?}", a.bbox)));
        }
        let &slot = index
            .get(&a.image_id)
            .ok_or_else(|| fail(format!("annotations[{k}]: unknown image_id {}", a.image_id)))?;
        if !categories.contains_key(&a.category_id) {
            return Err(fail(format!("annotations[{k}]: unknown category_id {}", a.category_id)));
        }
        let img = &mut images[slot];
        let (iw, ih) = (img.width as f64, img.height as f64);
        let bbox = BBox::from_xyxy(x / iw, y / ih, (x + w) / iw, (y + h) / ih);
        match bbox.clip_to_canvas() {
            Some(b) if w > 0.0 && h > 0.0 && b.area() >= MIN_BOX_AREA => {
                img.targets.push(Target::new(b, a.category_id))
            }
            _ => report.dropped_boxes += 1,
        }
    }
    if report.dropped_boxes > 0 {
        log::warn!("{}: dropped {} degenerate boxes", path.display(), report.dropped_boxes);
    }

    let dataset = Dataset {
        images,
        categories,
        provenance: Provenance::CocoJson {
            path: path.display().to_string(),
        },
    };
    Ok((dataset, report))
}

/// Writes `dataset` with pixel boxes; annotation ids are assigned in order.
pub fn save_coco(dataset: &Dataset, path: &Path) -> Result<()> {
    write_coco(dataset, path, serde_json::json!({ "provenance": dataset.provenance }))
}

/// As [`save_coco`], with the producing spec recorded under `info.spec`.
pub fn save_coco_with_spec(dataset: &Dataset, path: &Path, spec: &ExperimentSpec) -> Result<()> {
    write_coco(
        dataset,
        path,
        serde_json::json!({ "provenance": dataset.provenance, "spec": spec }),
    )
}

fn write_coco(dataset: &Dataset, path: &Path, info: Value) -> Result<()> {
    let mut annotations = Vec::with_capacity(dataset.num_targets());
    for img in &dataset.images {
        let (iw, ih) = (img.width as f64, img.height as f64);
        for t in &img.targets {
            let c = t.bbox.to_corners();
            annotations.push(RawAnnotation {
                id: Some(annotations.len() as u64 + 1),
                image_id: img.id,
                bbox: [c.x0 * iw, c.y0 * ih, (c.x1 - c.x0) * iw, (c.y1 - c.y0) * ih],
                category_id: t.label,
            });
        }
    }
    let file = RawFile {
        images: dataset
            .images
            .iter()
            .map(|i| RawImage {
                id: i.id,
                width: i.width,
                height: i.height,
            })
            .collect(),
        annotations,
        categories: dataset
            .categories
            .iter()
            .map(|(&id, name)| RawCategory { id, name: name.clone() })
            .collect(),
        info,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
