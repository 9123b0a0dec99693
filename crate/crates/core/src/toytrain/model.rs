use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::matching::Prediction;

/// Parameters per query: four box logits then one confidence logit.
pub const PARAMS_PER_QUERY: usize = 5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A set of learnable queries. Every parameter passes through the logistic
/// function, so decoded boxes always have `w, h` in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub params: Vec<[f64; PARAMS_PER_QUERY]>,
}

impl ToyModel {
    pub fn num_queries(&self) -> usize {
        self.params.len()
    }

    /// Random queries: centers spread over the canvas, small boxes, low confidence.
    pub fn init<R: Rng>(num_queries: usize, init_prob: f64, rng: &mut R) -> Self {
        let params = (0..num_queries)
            .map(|_| {
                [
                    logit(rng.gen_range(0.05..0.95)),
                    logit(rng.gen_range(0.05..0.95)),
                    logit(rng.gen_range(0.05..0.25)),
                    logit(rng.gen_range(0.05..0.25)),
                    logit(init_prob),
                ]
            })
            .collect();
        Self { params }
    }

    /// Queries placed exactly on the given boxes with the given confidences.
    pub fn from_boxes(boxes: &[(BBox<f64>, f64)]) -> Self {
        let params = boxes
            .iter()
            .map(|(b, p)| [logit(b.cx), logit(b.cy), logit(b.w), logit(b.h), logit(*p)])
            .collect();
        Self { params }
    }

    pub fn decode_box(&self, i: usize) -> BBox<f64> {
        let u = &self.params[i];
        BBox::new(sigmoid(u[0]), sigmoid(u[1]), sigmoid(u[2]), sigmoid(u[3]))
    }

    pub fn confidence(&self, i: usize) -> f64 {
        sigmoid(self.params[i][4])
    }

    pub fn predictions(&self) -> Vec<Prediction<f64>> {
        (0..self.num_queries())
            .map(|i| Prediction::new(self.decode_box(i), self.confidence(i)))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.len() * PARAMS_PER_QUERY
    }

    pub fn get(&self, k: usize) -> f64 {
        self.params[k / PARAMS_PER_QUERY][k % PARAMS_PER_QUERY]
    }

    pub fn set(&mut self, k: usize, v: f64) {
        self.params[k / PARAMS_PER_QUERY][k % PARAMS_PER_QUERY] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_logit_inverse() {
        for p in [1e-6, 0.1, 0.5, 0.93] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn from_boxes_decodes_back() {
        let b = BBox::new(0.3, 0.6, 0.2, 0.1);
        let m = ToyModel::from_boxes(&[(b, 0.99)]);
        let d = m.decode_box(0);
        assert!(d.l1(&b) < 1e-12);
        assert!((m.confidence(0) - 0.99).abs() < 1e-12);
    }
}
