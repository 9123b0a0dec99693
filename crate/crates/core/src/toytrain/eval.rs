use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::densify::ImageAnnotations;
use crate::geometry::iou;
use crate::matching::Prediction;

use super::model::ToyModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// True positives over all predictions.
    pub precision: f64,
    pub recall: f64,
    /// Area under the (non-interpolated) precision-recall step curve.
    pub ap: f64,
    /// Mean IoU of true-positive detections.
    pub mean_iou: f64,
}

/// Greedy confidence-ordered evaluation of per-scene predictions.
///
/// Predictions from every scene are ranked together by confidence (ties keep
/// scene then query order). Each one claims the unclaimed target of its own
/// scene with the highest IoU; it counts as a true positive when that IoU is
/// at least `iou_threshold`.
pub fn evaluate_predictions(
    per_scene: &[Vec<Prediction<f64>>],
    scenes: &[ImageAnnotations],
    iou_threshold: f64,
) -> EvalMetrics {
    let total_targets: usize = scenes.iter().map(|s| s.targets.len()).sum();
    let mut ranked: Vec<(f64, usize, usize)> = per_scene
        .iter()
        .enumerate()
        .flat_map(|(s, preds)| preds.iter().enumerate().map(move |(i, p)| (p.scores[0], s, i)))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut claimed: Vec<Vec<bool>> = scenes.iter().map(|s| vec![false; s.targets.len()]).collect();
    let (mut tp, mut ap, mut iou_sum) = (0usize, 0.0, 0.0);
    for (rank, &(_, s, i)) in ranked.iter().enumerate() {
        let pred = &per_scene[s][i];
        let best = scenes[s]
            .targets
            .iter()
            .enumerate()
            .filter(|(j, _)| !claimed[s][*j])
            .map(|(j, t)| (j, iou(&pred.bbox, &t.bbox)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(b.0.cmp(&a.0)));
        if let Some((j, v)) = best {
            if v >= iou_threshold {
                claimed[s][j] = true;
                tp += 1;
                iou_sum += v;
                // each true positive adds one recall step of height precision@rank
                ap += (tp as f64 / (rank + 1) as f64) / total_targets as f64;
            }
        }
    }
    EvalMetrics {
        precision: if ranked.is_empty() {
            0.0
        } else {
            tp as f64 / ranked.len() as f64
        },
        recall: if total_targets == 0 {
            0.0
        } else {
            tp as f64 / total_targets as f64
        },
        ap: if total_targets == 0 { 0.0 } else { ap },
        mean_iou: if tp == 0 { 0.0 } else { iou_sum / tp as f64 },
    }
}

/// Evaluates the model's (scene-independent) queries on every scene.
pub fn evaluate(model: &ToyModel, scenes: &[ImageAnnotations], iou_threshold: f64) -> EvalMetrics {
    let preds = model.predictions();
    let per_scene = vec![preds; scenes.len()];
    evaluate_predictions(&per_scene, scenes, iou_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::matching::Target;

    fn scene(boxes: &[BBox<f64>]) -> ImageAnnotations {
        ImageAnnotations::new(0, 100, 100, boxes.iter().map(|b| Target::new(*b, 0)).collect())
    }

    #[test]
    fn perfect_predictions() {
        let boxes = [BBox::new(0.3, 0.3, 0.2, 0.2), BBox::new(0.7, 0.6, 0.1, 0.3)];
        let model = ToyModel::from_boxes(&[(boxes[0], 1.0 - 1e-12), (boxes[1], 1.0 - 1e-12)]);
        let m = evaluate(&model, &[scene(&boxes)], 0.5);
        assert!((m.ap - 1.0).abs() < 1e-12);
        assert!((m.mean_iou - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_predictions() {
        let boxes = [BBox::new(0.2, 0.2, 0.1, 0.1)];
        let model = ToyModel::from_boxes(&[(BBox::new(0.8, 0.8, 0.1, 0.1), 0.9)]);
        let m = evaluate(&model, &[scene(&boxes)], 0.5);
        assert_eq!(m.ap, 0.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn hand_computed_pr_steps() {
        // ranks: 0.9 -> TP (P=1, R=1/2), 0.8 -> FP, 0.7 -> TP (P=2/3, R=1)
        let t = [BBox::new(0.25, 0.25, 0.2, 0.2), BBox::new(0.75, 0.75, 0.2, 0.2)];
        let preds = vec![
            Prediction::new(t[0], 0.9),
            Prediction::new(BBox::new(0.5, 0.9, 0.1, 0.1), 0.8),
            Prediction::new(BBox::new(0.76, 0.75, 0.2, 0.2), 0.7),
        ];
        let m = evaluate_predictions(&[preds], &[scene(&t)], 0.5);
        let expected = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((m.ap - expected).abs() < 1e-12);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn duplicates_are_false_positives() {
        let t = [BBox::new(0.5, 0.5, 0.2, 0.2)];
        let preds = vec![Prediction::new(t[0], 0.9), Prediction::new(t[0], 0.8)];
        let m = evaluate_predictions(&[preds], &[scene(&t)], 0.5);
        assert_eq!(m.ap, 1.0);
        assert_eq!(m.precision, 0.5);
    }
}
