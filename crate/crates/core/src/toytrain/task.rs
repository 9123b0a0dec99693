use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densify::ImageAnnotations;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::matching::Target;

/// A fixed world of objects seen through partially annotated views.
///
/// Every training view shows each world object independently with
/// probability `keep_prob` (at least one per view). Evaluation uses the
/// fully annotated world scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub n_objects: usize,
    pub n_views: usize,
    pub keep_prob: f64,
    pub min_size: f64,
    pub max_size: f64,
    /// World objects overlap each other by at most this IoU.
    pub max_overlap: f64,
    /// Deal every object to exactly one view (round-robin after a shuffle)
    /// instead of sampling views with `keep_prob`.
    pub disjoint: bool,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            n_objects: 32,
            n_views: 16,
            keep_prob: 0.3,
            min_size: 0.06,
            max_size: 0.15,
            max_overlap: 0.1,
            disjoint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTask {
    pub views: Vec<ImageAnnotations>,
    pub eval_scenes: Vec<ImageAnnotations>,
}

pub const TOY_CANVAS: u32 = 640;

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 || self.n_views == 0 {
            return Err(Error::config("toy task needs at least one object and one view"));
        }
        if self.disjoint && self.n_objects < self.n_views {
            return Err(Error::config("disjoint views need at least one object per view"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::config("keep_prob must lie in (0, 1]"));
        }
        if !(self.min_size > 0.0 && self.min_size <= self.max_size && self.max_size < 1.0) {
            return Err(Error::config("need 0 < min_size <= max_size < 1"));
        }
        Ok(())
    }

    pub fn generate(&self, task_seed: u64) -> Result<ToyTask> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
        let mut world: Vec<Target<f64>> = Vec::with_capacity(self.n_objects);
        let mut attempts = 0;
        while world.len() < self.n_objects {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::config(
                    "could not place world objects; lower n_objects or max_overlap",
                ));
            }
            let w = rng.gen_range(self.min_size..=self.max_size);
            let h = rng.gen_range(self.min_size..=self.max_size);
            let cx = rng.gen_range(w / 2.0..=1.0 - w / 2.0);
            let cy = rng.gen_range(h / 2.0..=1.0 - h / 2.0);
            let bbox = BBox::new(cx, cy, w, h);
            if world.iter().all(|t| iou(&t.bbox, &bbox) <= self.max_overlap) {
                world.push(Target::new(bbox, 0));
            }
        }
        if self.disjoint {
            let mut order: Vec<usize> = (0..world.len()).collect();
            order.shuffle(&mut rng);
            let views = (0..self.n_views)
                .map(|v| {
                    let targets = order.iter().skip(v).step_by(self.n_views).map(|&k| world[k]).collect();
                    ImageAnnotations::new(v as u64, TOY_CANVAS, TOY_CANVAS, targets)
                })
                .collect();
            let eval_scenes = vec![ImageAnnotations::new(u64::MAX, TOY_CANVAS, TOY_CANVAS, world)];
            return Ok(ToyTask { views, eval_scenes });
        }
        let views = (0..self.n_views)
            .map(|v| {
                let mut targets: Vec<_> = world
                    .iter()
                    .filter(|_| rng.gen::<f64>() < self.keep_prob)
                    .copied()
                    .collect();
                if targets.is_empty() {
                    targets.push(world[rng.gen_range(0..world.len())]);
                }
                ImageAnnotations::new(v as u64, TOY_CANVAS, TOY_CANVAS, targets)
            })
            .collect();
        let eval_scenes = vec![ImageAnnotations::new(u64::MAX, TOY_CANVAS, TOY_CANVAS, world)];
        Ok(ToyTask { views, eval_scenes })
    }
}
