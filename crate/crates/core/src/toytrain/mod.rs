//! Desk-scale synthetic detection trainer.
//!
//! A [`ToyModel`] is a set of free queries (no image features). Each step
//! matches the queries to every (optionally densified) training view with the
//! Hungarian matcher, applies the classification loss to all queries and an
//! L1 box loss to matched ones, and takes a plain gradient step at the
//! FlatCosine learning rate. The point is comparing arms that differ only in
//! loss variant and Dense O2O, not absolute detection quality.

pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod objective;
pub mod task;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densify::{apply_policy, AugPolicy};
use crate::error::{Error, Result};
use crate::losses::{LossParams, LossVariant};
use crate::matching::CostWeights;
use crate::schedule::{aug_at, epoch_progress, lr_at, AugState, ScheduleConfig};

pub use eval::{evaluate, evaluate_predictions, EvalMetrics};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::ToyModel;
pub use objective::{loss_and_grad, loss_value, match_scene, plan_step, LossBreakdown, ObjectiveConfig, StepPlan};
pub use task::{TaskConfig, ToyTask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossParams<f64>,
    pub dense_o2o: bool,
    pub policy: AugPolicy,
    pub schedule: ScheduleConfig<f64>,
    pub cost_weights: CostWeights<f64>,
    pub lambda_cls: f64,
    pub lambda_l1: f64,
    pub steps_per_epoch: usize,
    pub num_queries: usize,
    /// Initial query confidence.
    pub init_prob: f64,
    pub seed: u64,
    pub eval_iou: f64,
    pub task: TaskConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossParams::varifocal(),
            dense_o2o: false,
            // Mosaic shrinks objects to quarter scale, which a query-only model
            // cannot reuse at evaluation size, so the toy densifies by mixup only.
            policy: AugPolicy {
                mosaic_prob: 0.0,
                mixup_prob: 1.0,
                seed: 0,
            },
            schedule: ScheduleConfig {
                total_epochs: 24,
                warmup_epochs_lr: 1,
                flat_fraction: 0.5,
                base_lr: 0.3,
                min_lr: 0.15,
                aug_warmup_epochs: 4,
                dense_o2o_off_fraction: 0.5,
                no_aug_tail_epochs: 2,
            },
            cost_weights: CostWeights::default(),
            lambda_cls: 2.0,
            lambda_l1: 5.0,
            steps_per_epoch: 10,
            num_queries: 50,
            init_prob: 0.1,
            seed: 0,
            eval_iou: 0.5,
            task: TaskConfig::default(),
        }
    }
}

/// Named training configurations compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// VFL with plain one-to-one matching.
    Baseline,
    /// MAL with Dense O2O.
    Deim,
    /// MAL without densification.
    MalOnly,
    /// VFL with Dense O2O.
    DenseOnly,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Deim => "deim",
            Arm::MalOnly => "mal-only",
            Arm::DenseOnly => "dense-only",
        }
    }

    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let (variant, dense) = match self {
            Arm::Baseline => (LossVariant::Varifocal, false),
            Arm::Deim => (LossVariant::Mal, true),
            Arm::MalOnly => (LossVariant::Mal, false),
            Arm::DenseOnly => (LossVariant::Varifocal, true),
        };
        TrainConfig {
            loss: LossParams::default_for(variant),
            dense_o2o: dense,
            ..*base
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Arm::Baseline),
            "deim" => Ok(Arm::Deim),
            "mal-only" => Ok(Arm::MalOnly),
            "dense-only" => Ok(Arm::DenseOnly),
            other => Err(Error::input(format!("unknown arm `{other}`"))),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.policy.validate()?;
        self.schedule.validate()?;
        self.cost_weights.validate()?;
        self.task.validate()?;
        if !(self.lambda_cls > 0.0 && self.lambda_l1 > 0.0) {
            return Err(Error::config("loss weights must be positive"));
        }
        if self.steps_per_epoch == 0 || self.num_queries == 0 {
            return Err(Error::config("steps_per_epoch and num_queries must be positive"));
        }
        if !(self.init_prob > 0.0 && self.init_prob < 1.0) {
            return Err(Error::config("init_prob must lie in (0, 1)"));
        }
        if !(self.eval_iou > 0.0 && self.eval_iou <= 1.0) {
            return Err(Error::config("eval_iou must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            loss: self.loss,
            lambda_cls: self.lambda_cls,
            lambda_l1: self.lambda_l1,
        }
    }

    /// Augmentation state the trainer uses at `epoch`; Dense O2O only when enabled.
    pub fn aug_state(&self, epoch: usize) -> Result<AugState> {
        let state = aug_at(epoch, &self.schedule)?;
        Ok(AugState {
            advanced_aug_on: state.advanced_aug_on,
            dense_o2o_on: state.dense_o2o_on && self.dense_o2o,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub dense_o2o_on: bool,
    pub total_loss: f64,
    pub cls_loss: f64,
    pub box_loss: f64,
    pub toy_ap: f64,
    pub mean_matched_iou: f64,
    pub positives_per_image: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn final_ap(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.toy_ap)
    }

    /// Number of epochs until toy-AP first reaches `target`.
    pub fn epochs_to_reach(&self, target: f64) -> Option<usize> {
        self.epochs.iter().position(|e| e.toy_ap >= target).map(|i| i + 1)
    }

    /// One row per epoch.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Seed for the model initialisation and augmentation streams of one run.
fn run_seed(cfg_seed: u64, task_seed: u64) -> u64 {
    cfg_seed ^ task_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains from a fresh initialisation on the task generated from `task_seed`.
pub fn train(cfg: &TrainConfig, task_seed: u64) -> Result<TrainTrace> {
    cfg.validate()?;
    let task = cfg.task.generate(task_seed)?;
    let seed = run_seed(cfg.seed, task_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ToyModel::init(cfg.num_queries, cfg.init_prob, &mut rng);
    train_model(cfg, &task, model, seed).map(|(trace, _)| trace)
}

/// Runs the training loop on an explicit task and starting model.
pub fn train_model(
    cfg: &TrainConfig,
    task: &ToyTask,
    mut model: ToyModel,
    aug_seed: u64,
) -> Result<(TrainTrace, ToyModel)> {
    cfg.validate()?;
    let policy = AugPolicy {
        seed: cfg.policy.seed ^ aug_seed,
        ..cfg.policy
    };
    let objective = cfg.objective();
    let total_epochs = cfg.schedule.total_epochs;
    let mut epochs = Vec::with_capacity(total_epochs);
    for epoch in 0..total_epochs {
        let state = cfg.aug_state(epoch)?;
        let (mut total, mut cls, mut boxes) = (0.0, 0.0, 0.0);
        let (mut positives, mut images) = (0usize, 0usize);
        let (mut iou_sum, mut iou_steps) = (0.0, 0usize);
        let mut lr = 0.0;
        for s in 0..cfg.steps_per_epoch {
            let step = epoch * cfg.steps_per_epoch + s;
            let scenes = apply_policy(&task.views, &policy, state, step as u64)?.images;
            let plan = plan_step(&model, &scenes, &cfg.cost_weights)?;
            let (loss, grad) = loss_and_grad(&model, &scenes, &plan, &objective)?;
            if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { step });
            }
            lr = lr_at(epoch_progress(step, cfg.steps_per_epoch, total_epochs), &cfg.schedule);
            for (k, g) in grad.iter().enumerate() {
                model.set(k, model.get(k) - lr * g);
            }
            total += loss.total;
            cls += loss.cls;
            boxes += loss.boxes;
            positives += plan.positives();
            images += scenes.len();
            if let Some(q) = plan.mean_matched_iou() {
                iou_sum += q;
                iou_steps += 1;
            }
        }
        let n = cfg.steps_per_epoch as f64;
        let metrics = evaluate(&model, &task.eval_scenes, cfg.eval_iou);
        epochs.push(EpochRecord {
            epoch,
            lr,
            dense_o2o_on: state.dense_o2o_on,
            total_loss: total / n,
            cls_loss: cls / n,
            box_loss: boxes / n,
            toy_ap: metrics.ap,
            mean_matched_iou: if iou_steps == 0 {
                0.0
            } else {
                iou_sum / iou_steps as f64
            },
            positives_per_image: positives as f64 / images.max(1) as f64,
        });
    }
    Ok((TrainTrace { epochs }, model))
}

/// Outcome of one paired seed in an arm comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub task_seed: u64,
    pub baseline_final_ap: f64,
    pub candidate_final_ap: f64,
    /// Epochs the candidate needed to match the baseline's final toy-AP.
    pub candidate_epochs_to_match: Option<usize>,
    pub within_half: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub total_epochs: usize,
    pub pairs: Vec<PairOutcome>,
    pub pairs_within_half: usize,
}

/// Compares `candidate` against `baseline` run to run on the same task seeds.
pub fn speedup_summary(
    total_epochs: usize,
    seeds: &[u64],
    baseline: &[TrainTrace],
    candidate: &[TrainTrace],
) -> SpeedupSummary {
    let pairs: Vec<PairOutcome> = seeds
        .iter()
        .zip(baseline.iter().zip(candidate))
        .map(|(&task_seed, (b, c))| {
            let target = b.final_ap();
            let reach = c.epochs_to_reach(target);
            PairOutcome {
                task_seed,
                baseline_final_ap: target,
                candidate_final_ap: c.final_ap(),
                candidate_epochs_to_match: reach,
                within_half: reach.is_some_and(|e| 2 * e <= total_epochs),
            }
        })
        .collect();
    SpeedupSummary {
        total_epochs,
        pairs_within_half: pairs.iter().filter(|p| p.within_half).count(),
        pairs,
    }
}

/// Trains every `(arm, seed)` combination in parallel; results are ordered by arm then seed.
pub fn run_arms(base: &TrainConfig, arms: &[Arm], seeds: &[u64]) -> Result<Vec<(Arm, u64, TrainTrace)>> {
    let jobs: Vec<(Arm, u64)> = arms.iter().flat_map(|&a| seeds.iter().map(move |&s| (a, s))).collect();
    jobs.par_iter()
        .map(|&(arm, seed)| train(&arm.configure(base), seed).map(|t| (arm, seed, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densify::ImageAnnotations;
    use crate::geometry::BBox;
    use crate::matching::Target;

    fn short() -> TrainConfig {
        TrainConfig {
            schedule: ScheduleConfig {
                total_epochs: 8,
                ..TrainConfig::default().schedule
            },
            steps_per_epoch: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_trace_constant() {
        let cfg = TrainConfig {
            schedule: ScheduleConfig {
                base_lr: 0.0,
                min_lr: 0.0,
                ..short().schedule
            },
            ..short()
        };
        let trace = train(&cfg, 1).unwrap();
        let first = trace.epochs[0];
        for e in &trace.epochs {
            assert_eq!(e.total_loss, first.total_loss);
            assert_eq!(e.toy_ap, first.toy_ap);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = Arm::Deim.configure(&short());
        assert_eq!(train(&cfg, 5).unwrap(), train(&cfg, 5).unwrap());
    }

    #[test]
    fn loss_at_optimum_is_analytic_floor() {
        let b = BBox::new(0.4, 0.5, 0.2, 0.3);
        let model = ToyModel::from_boxes(&[(b, 0.99)]);
        let scene = ImageAnnotations::new(0, 100, 100, vec![Target::new(b, 0)]);
        let cfg = Arm::Deim.configure(&TrainConfig::default());
        let plan = plan_step(&model, std::slice::from_ref(&scene), &cfg.cost_weights).unwrap();
        let loss = loss_value(&model, &[scene], &plan, &cfg.objective()).unwrap();
        let floor = cfg.lambda_cls * -(0.99f64.ln());
        assert!((loss.total - floor).abs() < 1e-9, "{} vs {floor}", loss.total);
    }

    #[test]
    fn arm_parsing_round_trip() {
        for arm in [Arm::Baseline, Arm::Deim, Arm::MalOnly, Arm::DenseOnly] {
            assert_eq!(arm.name().parse::<Arm>().unwrap(), arm);
        }
    }
}
