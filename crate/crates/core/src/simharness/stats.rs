//! Per-image match-count statistics and densification statistics.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_csv, Dataset, ExperimentSpec, MatcherSpec};
use crate::densify::{apply_policy, AugPolicy};
use crate::error::{Error, Result};
use crate::matching::{cost_matrix, count_positives, hungarian, o2m_assign, Prediction};
use crate::schedule::{aug_at, ScheduleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMatchCount {
    pub image_id: u64,
    pub targets: usize,
    pub o2o: usize,
    pub o2m: usize,
    /// `o2m / o2o`; empty when the image has no O2O positives.
    pub ratio: Option<f64>,
}

/// Bin `k` counts images with exactly `k` positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub positives: usize,
    pub o2o_images: usize,
    pub o2m_images: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub images: usize,
    pub synthetic_predictions: bool,
    pub mean_o2o: f64,
    pub mean_o2m: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// Share of images where O2M positives >= O2O positives.
    pub dominance_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub per_image: Vec<ImageMatchCount>,
    pub histogram: Vec<HistogramRow>,
    pub summary: MatchSummary,
}

/// Counts O2O (Hungarian) and O2M (dynamic-k) positives for every image.
///
/// `predictions[i]` belongs to `dataset.images[i]`.
pub fn run_match_stats(
    dataset: &Dataset,
    predictions: &[Vec<Prediction<f64>>],
    matcher: &MatcherSpec,
) -> Result<MatchStats> {
    if predictions.len() != dataset.images.len() {
        return Err(Error::input(format!(
            "{} prediction sets for {} images",
            predictions.len(),
            dataset.images.len()
        )));
    }
    let per_image = dataset
        .images
        .par_iter()
        .zip(predictions.par_iter())
        .map(|(img, preds)| {
            let o2o = count_positives(&hungarian(&cost_matrix(preds, &img.targets, &matcher.weights)?)?);
            let o2m = count_positives(&o2m_assign(preds, &img.targets, &matcher.weights, &matcher.o2m)?);
            Ok(ImageMatchCount {
                image_id: img.id,
                targets: img.targets.len(),
                o2o,
                o2m,
                ratio: (o2o > 0).then(|| o2m as f64 / o2o as f64),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let top = per_image.iter().map(|c| c.o2o.max(c.o2m)).max().unwrap_or(0);
    let mut histogram: Vec<HistogramRow> = (0..=top)
        .map(|positives| HistogramRow {
            positives,
            o2o_images: 0,
            o2m_images: 0,
        })
        .collect();
    for c in &per_image {
        histogram[c.o2o].o2o_images += 1;
        histogram[c.o2m].o2m_images += 1;
    }

    let n = per_image.len().max(1) as f64;
    let ratios: Vec<f64> = per_image.iter().filter_map(|c| c.ratio).collect();
    let summary = MatchSummary {
        images: per_image.len(),
        synthetic_predictions: true,
        mean_o2o: per_image.iter().map(|c| c.o2o).sum::<usize>() as f64 / n,
        mean_o2m: per_image.iter().map(|c| c.o2m).sum::<usize>() as f64 / n,
        mean_ratio: if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        },
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        dominance_fraction: per_image.iter().filter(|c| c.o2m >= c.o2o).count() as f64 / n,
    };
    Ok(MatchStats {
        per_image,
        histogram,
        summary,
    })
}

impl MatchStats {
    /// Writes `match_counts.csv` and `match_histogram.csv` into `dir`.
    pub fn write(&self, dir: &Path, spec: &ExperimentSpec) -> Result<()> {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        write_csv(
            &dir.join("match_counts.csv"),
            spec,
            &names(&["image_id", "targets", "o2o", "o2m", "ratio"]),
            &self.per_image,
        )?;
        write_csv(
            &dir.join("match_histogram.csv"),
            spec,
            &names(&["positives", "o2o_images", "o2m_images"]),
            &self.histogram,
        )
    }
}

/// One image slot of one minibatch in a simulated epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyRow {
    pub epoch: usize,
    pub batch: usize,
    pub slot: usize,
    pub image_id: u64,
    pub dense_o2o_on: bool,
    pub mosaic: bool,
    pub mixup: bool,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochDensity {
    pub epoch: usize,
    pub dense_o2o_on: bool,
    pub mean_before: f64,
    pub mean_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensifyStats {
    pub rows: Vec<DensifyRow>,
    pub epochs: Vec<EpochDensity>,
}

/// Replays the dataset once per scheduled epoch in fixed minibatches, applying
/// the policy whenever the schedule has Dense O2O on.
///
/// Batch `b` of epoch `e` uses RNG stream `e * batches_per_epoch + b`.
pub fn run_densify_stats(
    dataset: &Dataset,
    policy: &AugPolicy,
    schedule: &ScheduleConfig<f64>,
    batch_size: usize,
) -> Result<DensifyStats> {
    policy.validate()?;
    schedule.validate()?;
    if batch_size == 0 {
        return Err(Error::config("batch_size must be >= 1"));
    }
    let batches: Vec<_> = dataset.images.chunks(batch_size).collect();
    let mut rows = Vec::with_capacity(dataset.images.len() * schedule.total_epochs);
    let mut epochs = Vec::with_capacity(schedule.total_epochs);
    for epoch in 0..schedule.total_epochs {
        let state = aug_at(epoch, schedule)?;
        let (mut before_sum, mut after_sum) = (0usize, 0usize);
        for (b, batch) in batches.iter().enumerate() {
            let index = (epoch * batches.len() + b) as u64;
            let out = apply_policy(batch, policy, state, index)?;
            for (slot, (src, dst)) in batch.iter().zip(&out.images).enumerate() {
                before_sum += src.targets.len();
                after_sum += dst.targets.len();
                rows.push(DensifyRow {
                    epoch,
                    batch: b,
                    slot,
                    image_id: src.id,
                    dense_o2o_on: state.dense_o2o_on,
                    mosaic: out.mosaic_applied,
                    mixup: out.mixup_applied,
                    before: src.targets.len(),
                    after: dst.targets.len(),
                });
            }
        }
        let n = dataset.images.len().max(1) as f64;
        epochs.push(EpochDensity {
            epoch,
            dense_o2o_on: state.dense_o2o_on,
            mean_before: before_sum as f64 / n,
            mean_after: after_sum as f64 / n,
        });
    }
    Ok(DensifyStats { rows, epochs })
}

impl DensifyStats {
    /// Writes `densify_counts.csv` and `densify_epochs.csv` into `dir`.
    pub fn write(&self, dir: &Path, spec: &ExperimentSpec) -> Result<()> {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        write_csv(
            &dir.join("densify_counts.csv"),
            spec,
            &names(&[
                "epoch",
                "batch",
                "slot",
                "image_id",
                "dense_o2o_on",
                "mosaic",
                "mixup",
                "before",
                "after",
            ]),
            &self.rows,
        )?;
        write_csv(
            &dir.join("densify_epochs.csv"),
            spec,
            &names(&["epoch", "dense_o2o_on", "mean_before", "mean_after"]),
            &self.epochs,
        )
    }
}
