//! Dense O2O target densification: mosaic and mixup at the annotation level.
//!
//! Both operations only add targets to an image; the one-to-one matcher is left
//! untouched. Optional raster composition lives in [`raster`].

pub mod raster;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MIN_BOX_AREA;
use crate::matching::Target;
use crate::schedule::AugState;

/// Targets of one image with normalized boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAnnotations {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub targets: Vec<Target<f64>>,
}

impl ImageAnnotations {
    pub fn new(id: u64, width: u32, height: u32, targets: Vec<Target<f64>>) -> Self {
        Self {
            id,
            width,
            height,
            targets,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::input(format!("image {} has an empty canvas", self.id)));
        }
        for (k, t) in self.targets.iter().enumerate() {
            let c = t.bbox.to_corners();
            let inside = c.x0 >= -1e-12 && c.y0 >= -1e-12 && c.x1 <= 1.0 + 1e-12 && c.y1 <= 1.0 + 1e-12;
            if !t.bbox.is_valid() || !inside || t.bbox.area() < MIN_BOX_AREA {
                return Err(Error::input(format!(
                    "image {} target {k} is outside the canvas or degenerate: {:?}",
                    self.id, t.bbox
                )));
            }
        }
        Ok(())
    }

    fn same_canvas(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Top-left corner offsets of the four mosaic quadrants, in input order.
pub const QUADRANT_OFFSETS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];

/// Four-image mosaic on the canvas of `a`.
///
/// Inputs land top-left, top-right, bottom-left, bottom-right; every box is
/// halved and moved into its quadrant. Boxes that clip away are dropped.
pub fn mosaic4(
    a: &ImageAnnotations,
    b: &ImageAnnotations,
    c: &ImageAnnotations,
    d: &ImageAnnotations,
) -> Result<ImageAnnotations> {
    let mut targets = Vec::new();
    for (img, (dx, dy)) in [a, b, c, d].into_iter().zip(QUADRANT_OFFSETS) {
        img.validate()?;
        for t in &img.targets {
            if let Some(bbox) = t.bbox.transform(0.5, dx, dy)? {
                targets.push(Target::new(bbox, t.label));
            }
        }
    }
    Ok(ImageAnnotations::new(a.id, a.width, a.height, targets))
}

/// Annotation side of mixup: the union of both target lists.
///
/// `ratio` only matters for raster blending and is validated here so the two
/// paths accept the same inputs.
pub fn mixup(a: &ImageAnnotations, b: &ImageAnnotations, ratio: f64) -> Result<ImageAnnotations> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::input(format!("mixup ratio must lie in (0, 1), got {ratio}")));
    }
    if !a.same_canvas(b) {
        return Err(Error::input(format!(
            "mixup canvases differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut targets = a.targets.clone();
    targets.extend_from_slice(&b.targets);
    Ok(ImageAnnotations::new(a.id, a.width, a.height, targets))
}

/// Per-minibatch application probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugPolicy {
    pub mosaic_prob: f64,
    pub mixup_prob: f64,
    pub seed: u64,
}

impl Default for AugPolicy {
    fn default() -> Self {
        Self {
            mosaic_prob: 0.5,
            mixup_prob: 0.5,
            seed: 0,
        }
    }
}

/// Rough targets-per-image levels. The multipliers are approximate; the
/// expected growth factor is `(1 + 3 * mosaic_prob) * (1 + mixup_prob)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityPreset {
    /// About 2x the source density.
    Light,
    /// About 3.75x (the 0.5 / 0.5 default).
    Medium,
    /// About 8x.
    Heavy,
}

impl AugPolicy {
    pub fn new(mosaic_prob: f64, mixup_prob: f64, seed: u64) -> Result<Self> {
        let p = Self {
            mosaic_prob,
            mixup_prob,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn disabled(seed: u64) -> Self {
        Self {
            mosaic_prob: 0.0,
            mixup_prob: 0.0,
            seed,
        }
    }

    pub fn preset(preset: DensityPreset, seed: u64) -> Self {
        let (mosaic_prob, mixup_prob) = match preset {
            DensityPreset::Light => (0.25, 0.15),
            DensityPreset::Medium => (0.5, 0.5),
            DensityPreset::Heavy => (1.0, 1.0),
        };
        Self {
            mosaic_prob,
            mixup_prob,
            seed,
        }
    }

    /// Expected multiplier on targets per image when Dense O2O is active.
    pub fn expected_growth(&self) -> f64 {
        (1.0 + 3.0 * self.mosaic_prob) * (1.0 + self.mixup_prob)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("mosaic_prob", self.mosaic_prob), ("mixup_prob", self.mixup_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::input(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Independent RNG stream for one minibatch.
    pub fn rng_for_batch(&self, batch_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch_index);
        rng
    }
}

/// How one output image was composed from the input batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    /// Source indices placed top-left, top-right, bottom-left, bottom-right.
    pub mosaic: Option<[usize; 4]>,
    /// Index (into the post-mosaic batch) blended in, and the blend ratio of the base image.
    pub mixup: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Densified {
    pub images: Vec<ImageAnnotations>,
    pub mosaic_applied: bool,
    pub mixup_applied: bool,
    pub compositions: Vec<Composition>,
}

/// Uniform mixup ratio range.
pub const MIXUP_RATIO_RANGE: (f64, f64) = (0.3, 0.7);

/// Applies mosaic then mixup to a minibatch, each with its policy probability.
///
/// When `state.dense_o2o_on` is false the batch passes through unchanged.
/// Mosaic partners (three per image) and mixup partners (one per image) are
/// drawn with replacement from the batch itself. The RNG stream is fixed by
/// `(policy.seed, batch_index)`.
pub fn apply_policy(
    batch: &[ImageAnnotations],
    policy: &AugPolicy,
    state: AugState,
    batch_index: u64,
) -> Result<Densified> {
    policy.validate()?;
    let passthrough = || Densified {
        images: batch.to_vec(),
        mosaic_applied: false,
        mixup_applied: false,
        compositions: vec![
            Composition {
                mosaic: None,
                mixup: None
            };
            batch.len()
        ],
    };
    if !state.dense_o2o_on || batch.is_empty() {
        return Ok(passthrough());
    }
    let mut rng = policy.rng_for_batch(batch_index);
    let do_mosaic = rng.gen::<f64>() < policy.mosaic_prob;
    let do_mixup = rng.gen::<f64>() < policy.mixup_prob;
    let n = batch.len();

    let mut out = passthrough();
    if do_mosaic {
        let mut images = Vec::with_capacity(n);
        for (i, img) in batch.iter().enumerate() {
            let q = [i, rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)];
            images.push(mosaic4(img, &batch[q[1]], &batch[q[2]], &batch[q[3]])?);
            out.compositions[i].mosaic = Some(q);
        }
        out.images = images;
        out.mosaic_applied = true;
    }
    if do_mixup {
        let current = out.images.clone();
        for i in 0..n {
            let partner = rng.gen_range(0..n);
            let ratio = rng.gen_range(MIXUP_RATIO_RANGE.0..MIXUP_RATIO_RANGE.1);
            out.images[i] = mixup(&current[i], &current[partner], ratio)?;
            out.compositions[i].mixup = Some((partner, ratio));
        }
        out.mixup_applied = true;
    }
    Ok(out)
}

pub fn mean_targets(images: &[ImageAnnotations]) -> f64 {
    if images.is_empty() {
        return 0.0;
    }
    images.iter().map(|i| i.targets.len()).sum::<usize>() as f64 / images.len() as f64
}
