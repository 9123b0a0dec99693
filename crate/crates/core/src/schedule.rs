//! FlatCosine learning-rate schedule and the three-phase augmentation schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig<T> {
    pub total_epochs: usize,
    /// Length of the linear LR warmup, in epochs (may be fractional through `epoch_progress`).
    pub warmup_epochs_lr: usize,
    /// Fraction of the post-warmup budget held at `base_lr` before cosine decay.
    pub flat_fraction: T,
    pub base_lr: T,
    pub min_lr: T,
    pub aug_warmup_epochs: usize,
    pub dense_o2o_off_fraction: T,
    pub no_aug_tail_epochs: usize,
}

impl<T: Real> Default for ScheduleConfig<T> {
    fn default() -> Self {
        Self {
            total_epochs: 24,
            warmup_epochs_lr: 1,
            flat_fraction: T::lit(0.5),
            base_lr: T::lit(5e-4),
            min_lr: T::lit(2.5e-4),
            aug_warmup_epochs: 4,
            dense_o2o_off_fraction: T::lit(0.5),
            no_aug_tail_epochs: 2,
        }
    }
}

/// Augmentation flags for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugState {
    pub advanced_aug_on: bool,
    pub dense_o2o_on: bool,
}

impl AugState {
    pub const OFF: AugState = AugState {
        advanced_aug_on: false,
        dense_o2o_on: false,
    };
    pub const DENSE: AugState = AugState {
        advanced_aug_on: true,
        dense_o2o_on: true,
    };
    pub const STANDARD: AugState = AugState {
        advanced_aug_on: true,
        dense_o2o_on: false,
    };
}

impl<T: Real> ScheduleConfig<T> {
    pub fn with_epochs(total_epochs: usize) -> Self {
        Self {
            total_epochs,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::config("total_epochs must be positive"));
        }
        if self.aug_warmup_epochs + self.no_aug_tail_epochs >= self.total_epochs {
            return Err(Error::config(format!(
                "aug warmup ({}) + no-aug tail ({}) must be < total epochs ({})",
                self.aug_warmup_epochs, self.no_aug_tail_epochs, self.total_epochs
            )));
        }
        if self.warmup_epochs_lr >= self.total_epochs {
            return Err(Error::config("LR warmup must be shorter than the run"));
        }
        if !(self.flat_fraction >= T::zero() && self.flat_fraction < T::one()) {
            return Err(Error::config(format!(
                "flat_fraction must lie in [0, 1), got {}",
                self.flat_fraction
            )));
        }
        if !(self.base_lr >= T::zero()) || !(self.min_lr >= T::zero()) || self.min_lr > self.base_lr {
            return Err(Error::config(format!(
                "need 0 <= min_lr <= base_lr, got min {} base {}",
                self.min_lr, self.base_lr
            )));
        }
        if !(self.dense_o2o_off_fraction >= T::zero() && self.dense_o2o_off_fraction <= T::one()) {
            return Err(Error::config("dense_o2o_off_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Progress fraction of the warmup span.
    fn warmup_end(&self) -> T {
        T::lit(self.warmup_epochs_lr as f64) / T::lit(self.total_epochs as f64)
    }

    /// Progress at which cosine decay begins.
    pub fn decay_start(&self) -> T {
        let w = self.warmup_end();
        w + self.flat_fraction * (T::one() - w)
    }

    /// First epoch with Dense O2O switched off.
    pub fn dense_cutoff_epoch(&self) -> usize {
        (self.dense_o2o_off_fraction * T::lit(self.total_epochs as f64))
            .floor()
            .to_usize()
            .unwrap_or(0)
    }

    /// First epoch of the augmentation-free tail.
    pub fn tail_start_epoch(&self) -> usize {
        self.total_epochs.saturating_sub(self.no_aug_tail_epochs)
    }
}

/// Training progress in `[0, 1]` after `step` optimizer steps.
pub fn epoch_progress<T: Real>(step: usize, steps_per_epoch: usize, total_epochs: usize) -> T {
    let total = (steps_per_epoch * total_epochs).max(1);
    T::lit(step.min(total) as f64 / total as f64)
}

/// Learning rate at training progress `progress` (clamped to `[0, 1]`).
///
/// Linear warmup from 0, a flat span at `base_lr`, then cosine decay that
/// lands on `min_lr` at progress 1.
pub fn lr_at<T: Real>(progress: T, cfg: &ScheduleConfig<T>) -> T {
    let t = progress.max(T::zero()).min(T::one());
    let warm = cfg.warmup_end();
    if t < warm {
        return cfg.base_lr * t / warm;
    }
    let decay = cfg.decay_start();
    if t <= decay {
        return cfg.base_lr;
    }
    let span = T::one() - decay;
    let frac = (t - decay) / span;
    let pi = T::lit(std::f64::consts::PI);
    let cosine = (T::one() + (pi * frac).cos()) / T::lit(2.0);
    cfg.min_lr + (cfg.base_lr - cfg.min_lr) * cosine
}

/// Augmentation state for `epoch`.
///
/// `[0, aug_warmup)`: everything off; `[aug_warmup, cutoff)`: Dense O2O on;
/// `[cutoff, total - tail)`: standard augmentation only; last `tail` epochs: off.
pub fn aug_at<T: Real>(epoch: usize, cfg: &ScheduleConfig<T>) -> Result<AugState> {
    if epoch >= cfg.total_epochs {
        return Err(Error::input(format!(
            "epoch {epoch} out of range for a {}-epoch schedule",
            cfg.total_epochs
        )));
    }
    Ok(if epoch < cfg.aug_warmup_epochs || epoch >= cfg.tail_start_epoch() {
        AugState::OFF
    } else if epoch < cfg.dense_cutoff_epoch() {
        AugState::DENSE
    } else {
        AugState::STANDARD
    })
}
