//! Central-difference check of the trainer's analytic gradient.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densify::apply_policy;
use crate::error::Result;
use crate::schedule::AugState;

use super::model::{logit, ToyModel};
use super::objective::{loss_and_grad, loss_value, plan_step};
use super::TrainConfig;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub points: usize,
    pub params_checked: usize,
    pub max_rel_error: f64,
    /// `(point, flat parameter index)` of the worst entry.
    pub worst: (usize, usize),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic and central-difference gradients at `n_points` seeded
/// random models on (densified) views of seeded toy tasks.
///
/// The assignment and IoU qualities are frozen at each point, matching how the
/// trainer treats them.
#[allow(clippy::needless_range_loop)]
pub fn grad_check(cfg: &TrainConfig, n_points: usize, seed: u64) -> Result<GradCheckReport> {
    cfg.validate()?;
    let objective = cfg.objective();
    let mut report = GradCheckReport {
        points: n_points,
        params_checked: 0,
        max_rel_error: 0.0,
        worst: (0, 0),
    };
    for point in 0..n_points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(point as u64));
        let task = cfg.task.generate(rng.gen())?;
        let mut model = ToyModel::init(cfg.num_queries, cfg.init_prob, &mut rng);
        for q in model.params.iter_mut() {
            q[4] = logit(rng.gen_range(0.02..0.98));
        }
        let state = if cfg.dense_o2o { AugState::DENSE } else { AugState::OFF };
        let scenes = apply_policy(&task.views, &cfg.policy, state, point as u64)?.images;
        let plan = plan_step(&model, &scenes, &cfg.cost_weights)?;
        let (_, grad) = loss_and_grad(&model, &scenes, &plan, &objective)?;
        for k in 0..model.num_params() {
            let orig = model.get(k);
            model.set(k, orig + FD_STEP);
            let up = loss_value(&model, &scenes, &plan, &objective)?.total;
            model.set(k, orig - FD_STEP);
            let down = loss_value(&model, &scenes, &plan, &objective)?.total;
            model.set(k, orig);
            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = relative_error(grad[k], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (point, k);
            }
            report.params_checked += 1;
        }
    }
    Ok(report)
}
