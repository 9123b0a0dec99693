//! Synthetic scenes standing in for trained-model predictions.
//!
//! Predictions are jittered copies of targets plus uniform distractors. A
//! copy's confidence tracks how well it still overlaps its source, so the
//! noise level controls match quality.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{derive_seed, Dataset, Provenance};
use crate::densify::ImageAnnotations;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::matching::{Prediction, Target};

/// Side lengths of synthetic targets, as canvas fractions.
pub const TARGET_SIZE_RANGE: (f64, f64) = (0.05, 0.3);
/// Share of predictions that are copies of targets (the rest are distractors).
pub const COPY_FRACTION: f64 = 0.5;
const DISTRACTOR_SCORE: (f64, f64) = (0.01, 0.3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub images: usize,
    pub preds_per_image: usize,
    pub min_targets: usize,
    pub max_targets: usize,
    /// Jitter scale relative to box size.
    pub noise: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            images: 500,
            preds_per_image: 100,
            min_targets: 1,
            max_targets: 20,
            noise: 0.1,
            width: 640,
            height: 640,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.preds_per_image == 0 {
            return Err(Error::config("preds_per_image must be >= 1"));
        }
        if self.min_targets > self.max_targets {
            return Err(Error::config("min_targets must not exceed max_targets"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("canvas must be non-empty"));
        }
        Ok(())
    }
}

fn random_box<R: Rng>(rng: &mut R) -> BBox<f64> {
    let (lo, hi) = TARGET_SIZE_RANGE;
    let w = rng.gen_range(lo..hi);
    let h = rng.gen_range(lo..hi);
    let cx = rng.gen_range(w / 2.0..1.0 - w / 2.0);
    let cy = rng.gen_range(h / 2.0..1.0 - h / 2.0);
    BBox::new(cx, cy, w, h)
}

fn jitter<R: Rng>(b: &BBox<f64>, sigma: f64, rng: &mut R) -> BBox<f64> {
    if sigma == 0.0 {
        return *b;
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let moved = BBox::new(
        b.cx + n.sample(rng) * b.w,
        b.cy + n.sample(rng) * b.h,
        b.w * n.sample(rng).exp(),
        b.h * n.sample(rng).exp(),
    );
    moved.clip_to_canvas().unwrap_or(*b)
}

/// Jittered copies of `targets` plus distractors, `n_preds` in total.
///
/// Every target gets at least one copy while copies last; with
/// `n_preds == targets.len()` all predictions are copies. Scores are laid out
/// per class up to `num_classes`.
pub fn synth_predictions<R: Rng>(
    targets: &[Target<f64>],
    n_preds: usize,
    noise: f64,
    num_classes: usize,
    rng: &mut R,
) -> Vec<Prediction<f64>> {
    let n_copies = if targets.is_empty() {
        0
    } else {
        let share = (COPY_FRACTION * n_preds as f64).ceil() as usize;
        share.max(targets.len()).min(n_preds)
    };
    let num_classes = num_classes.max(1);
    let mut preds = Vec::with_capacity(n_preds);
    for i in 0..n_preds {
        let mut scores = vec![DISTRACTOR_SCORE.0; num_classes];
        if i < n_copies {
            let src = if i < targets.len() {
                &targets[i]
            } else {
                &targets[rng.gen_range(0..targets.len())]
            };
            // per-copy quality varies from exact to twice the nominal noise
            let sigma = noise * rng.gen_range(0.0..2.0);
            let bbox = jitter(&src.bbox, sigma, rng);
            let quality = iou(&bbox, &src.bbox);
            scores[src.label.min(num_classes - 1)] = (quality * rng.gen_range(0.8..1.0)).clamp(0.01, 0.99);
            preds.push(Prediction { bbox, scores });
        } else {
            let label = if targets.is_empty() {
                rng.gen_range(0..num_classes)
            } else {
                targets[rng.gen_range(0..targets.len())].label.min(num_classes - 1)
            };
            scores[label] = rng.gen_range(DISTRACTOR_SCORE.0..DISTRACTOR_SCORE.1);
            preds.push(Prediction {
                bbox: random_box(rng),
                scores,
            });
        }
    }
    preds
}

/// Predictions and targets of one image.
pub type Scene = (Vec<Prediction<f64>>, Vec<Target<f64>>);

/// One single-class scene of `n_targets` uniform targets and `n_preds` predictions.
pub fn synth_scene(n_targets: usize, n_preds: usize, noise: f64, seed: u64) -> Result<Scene> {
    if n_preds == 0 {
        return Err(Error::input("synth_scene needs n_preds >= 1"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::input(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<Target<f64>> = (0..n_targets).map(|_| Target::new(random_box(&mut rng), 0)).collect();
    let preds = synth_predictions(&targets, n_preds, noise, 1, &mut rng);
    Ok((preds, targets))
}

/// A seeded single-class dataset with per-image predictions.
pub fn synth_dataset(cfg: &SynthConfig, seed: u64) -> Result<(Dataset, Vec<Vec<Prediction<f64>>>)> {
    cfg.validate()?;
    let mut images = Vec::with_capacity(cfg.images);
    let mut preds = Vec::with_capacity(cfg.images);
    for i in 0..cfg.images {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let n = rng.gen_range(cfg.min_targets..=cfg.max_targets);
        let (p, t) = synth_scene(n, cfg.preds_per_image, cfg.noise, rng.gen())?;
        images.push(ImageAnnotations::new(i as u64 + 1, cfg.width, cfg.height, t));
        preds.push(p);
    }
    let dataset = Dataset {
        images,
        categories: BTreeMap::from([(0, "object".to_string())]),
        provenance: Provenance::Synthetic { seed },
    };
    Ok((dataset, preds))
}

/// Synthetic predictions around the targets of an existing dataset, one RNG stream per image.
pub fn predictions_for(dataset: &Dataset, cfg: &SynthConfig, seed: u64) -> Result<Vec<Vec<Prediction<f64>>>> {
    cfg.validate()?;
    let classes = dataset.num_classes();
    Ok(dataset
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            synth_predictions(&img.targets, cfg.preds_per_image, cfg.noise, classes, &mut rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_best_iou(preds: &[Prediction<f64>], targets: &[Target<f64>]) -> f64 {
        targets
            .iter()
            .map(|t| preds.iter().map(|p| iou(&p.bbox, &t.bbox)).fold(0.0, f64::max))
            .sum::<f64>()
            / targets.len() as f64
    }

    #[test]
    fn zero_noise_copies_overlay_targets() {
        let (preds, targets) = synth_scene(7, 7, 0.0, 11).unwrap();
        assert_eq!(preds.len(), 7);
        for (p, t) in preds.iter().zip(&targets) {
            assert_eq!(iou(&p.bbox, &t.bbox), 1.0);
        }
    }

    #[test]
    fn no_targets() {
        let (preds, targets) = synth_scene(0, 5, 0.1, 1).unwrap();
        assert!(targets.is_empty());
        assert_eq!(preds.len(), 5);
        assert!(synth_scene(3, 0, 0.1, 1).is_err());
    }

    #[test]
    fn seeded_scene_is_stable() {
        let a = synth_scene(12, 60, 0.2, 5).unwrap();
        let b = synth_scene(12, 60, 0.2, 5).unwrap();
        assert_eq!(a, b);
        let (ma, mb) = (mean_best_iou(&a.0, &a.1), mean_best_iou(&b.0, &b.1));
        assert!((ma - mb).abs() <= 1e-12);
        assert!(ma > 0.5 && ma < 1.0, "{ma}");
    }

    #[test]
    fn confidence_follows_quality() {
        let (preds, targets) = synth_scene(10, 200, 0.3, 2).unwrap();
        let best: Vec<f64> = preds
            .iter()
            .map(|p| targets.iter().map(|t| iou(&p.bbox, &t.bbox)).fold(0.0, f64::max))
            .collect();
        let hi: Vec<f64> = preds
            .iter()
            .zip(&best)
            .filter(|(_, &b)| b > 0.7)
            .map(|(p, _)| p.scores[0])
            .collect();
        let lo: Vec<f64> = preds
            .iter()
            .zip(&best)
            .filter(|(_, &b)| b < 0.3)
            .map(|(p, _)| p.scores[0])
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&hi) > mean(&lo) + 0.3);
    }

    #[test]
    fn dataset_shape() {
        let cfg = SynthConfig {
            images: 20,
            ..SynthConfig::default()
        };
        let (d, p) = synth_dataset(&cfg, 3).unwrap();
        d.validate().unwrap();
        assert_eq!(p.len(), 20);
        assert!(d.images.iter().all(|i| (1..=20).contains(&i.targets.len())));
        assert!(p.iter().all(|v| v.len() == 100));
        assert_eq!(synth_dataset(&cfg, 3).unwrap().0, d);
    }
}
