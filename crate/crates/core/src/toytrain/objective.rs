//! Training objective of the toy detector and its analytic gradient.
//!
//! The loss of one step, for a fixed assignment, is the mean over scenes of
//! `lambda_cls * sum_i cls_i + lambda_l1 * sum_(i,j) |box_i - box_j|_1`.
//! Matched queries take the positive branch of the active loss with `q` the
//! IoU at assignment time; unmatched queries take the background branch.
//! Matching and `q` are frozen inputs ([`StepPlan`]) so the gradient and its
//! finite-difference check see the same function.

use serde::{Deserialize, Serialize};

use crate::densify::ImageAnnotations;
use crate::error::Result;
use crate::geometry::iou;
use crate::losses::{self, LossParams};
use crate::matching::{cost_matrix, hungarian, CostWeights, MatchResult};

use super::model::{ToyModel, PARAMS_PER_QUERY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub loss: LossParams<f64>,
    pub lambda_cls: f64,
    pub lambda_l1: f64,
}

/// Frozen per-query assignment for one scene: `(target index, q)` or background.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAssignment {
    pub matched: Vec<Option<(usize, f64)>>,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub scenes: Vec<SceneAssignment>,
}

impl StepPlan {
    pub fn positives(&self) -> usize {
        self.scenes.iter().map(|s| s.positives).sum()
    }

    pub fn mean_matched_iou(&self) -> Option<f64> {
        let qs: Vec<f64> = self
            .scenes
            .iter()
            .flat_map(|s| s.matched.iter().flatten().map(|&(_, q)| q))
            .collect();
        (!qs.is_empty()).then(|| qs.iter().sum::<f64>() / qs.len() as f64)
    }
}

/// Hungarian matching of the model's current predictions against one scene.
pub fn match_scene(model: &ToyModel, scene: &ImageAnnotations, weights: &CostWeights<f64>) -> Result<MatchResult<f64>> {
    let preds = model.predictions();
    let cost = cost_matrix(&preds, &scene.targets, weights)?;
    hungarian(&cost)
}

pub fn plan_step(model: &ToyModel, scenes: &[ImageAnnotations], weights: &CostWeights<f64>) -> Result<StepPlan> {
    let plans = scenes
        .iter()
        .map(|scene| {
            let result = match_scene(model, scene, weights)?;
            let mut matched = vec![None; model.num_queries()];
            for &(p, t) in &result.pairs {
                let q = iou(&model.decode_box(p), &scene.targets[t].bbox);
                matched[p] = Some((t, q));
            }
            Ok(SceneAssignment {
                matched,
                positives: result.pairs.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StepPlan { scenes: plans })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cls: f64,
    pub boxes: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss value only.
pub fn loss_value(
    model: &ToyModel,
    scenes: &[ImageAnnotations],
    plan: &StepPlan,
    cfg: &ObjectiveConfig,
) -> Result<LossBreakdown> {
    evaluate(model, scenes, plan, cfg, None)
}

/// Loss value and its gradient with respect to every model parameter
/// (flattened query-major, see [`ToyModel::get`]).
pub fn loss_and_grad(
    model: &ToyModel,
    scenes: &[ImageAnnotations],
    plan: &StepPlan,
    cfg: &ObjectiveConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut grad = vec![0.0; model.num_params()];
    let loss = evaluate(model, scenes, plan, cfg, Some(&mut grad))?;
    Ok((loss, grad))
}

fn evaluate(
    model: &ToyModel,
    scenes: &[ImageAnnotations],
    plan: &StepPlan,
    cfg: &ObjectiveConfig,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<LossBreakdown> {
    let mut out = LossBreakdown::default();
    if scenes.is_empty() {
        return Ok(out);
    }
    let norm = 1.0 / scenes.len() as f64;
    let boxes: Vec<_> = (0..model.num_queries()).map(|i| model.decode_box(i)).collect();
    for (scene, assignment) in scenes.iter().zip(&plan.scenes) {
        for (i, m) in assignment.matched.iter().enumerate() {
            let p = model.confidence(i);
            let (positive, q) = match m {
                Some((_, q)) => (true, *q),
                None => (false, 0.0),
            };
            let e = losses::evaluate(p, q, positive, &cfg.loss)?;
            out.cls += norm * e.value;
            if let Some(g) = grad.as_deref_mut() {
                g[i * PARAMS_PER_QUERY + 4] += norm * cfg.lambda_cls * e.dvalue_dp * p * (1.0 - p);
            }
            if let Some((t, _)) = m {
                let b = boxes[i].as_array();
                let target = scene.targets[*t].bbox.as_array();
                for k in 0..4 {
                    let d = b[k] - target[k];
                    out.boxes += norm * d.abs();
                    if let Some(g) = grad.as_deref_mut() {
                        g[i * PARAMS_PER_QUERY + k] += norm * cfg.lambda_l1 * sign(d) * b[k] * (1.0 - b[k]);
                    }
                }
            }
        }
    }
    out.total = cfg.lambda_cls * out.cls + cfg.lambda_l1 * out.boxes;
    Ok(out)
}
