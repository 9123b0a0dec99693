//! Prediction-to-target assignment.
//!
//! [`hungarian`] gives the one-to-one (O2O) minimum-cost assignment used by
//! DETR-style training. [`o2m_assign`] is a SimOTA-style one-to-many assigner
//! whose only job here is producing match-count statistics to compare against.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{giou, iou, BBox};
use crate::scalar::Real;

/// Cost assigned to padding rows when there are fewer predictions than targets.
pub const DUMMY_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target<T> {
    pub bbox: BBox<T>,
    pub label: usize,
}

impl<T: Real> Target<T> {
    pub fn new(bbox: BBox<T>, label: usize) -> Self {
        Self { bbox, label }
    }
}

/// A predicted box with one foreground probability per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub bbox: BBox<T>,
    pub scores: Vec<T>,
}

impl<T: Real> Prediction<T> {
    /// Single-class prediction.
    pub fn new(bbox: BBox<T>, score: T) -> Self {
        Self {
            bbox,
            scores: vec![score],
        }
    }

    pub fn score(&self, label: usize) -> Result<T> {
        self.scores.get(label).copied().ok_or_else(|| {
            Error::input(format!(
                "prediction has {} class scores, target label {label} out of range",
                self.scores.len()
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<T> {
    pub w_cls: T,
    pub w_l1: T,
    pub w_giou: T,
}

impl<T: Real> Default for CostWeights<T> {
    fn default() -> Self {
        Self {
            w_cls: T::lit(2.0),
            w_l1: T::lit(5.0),
            w_giou: T::lit(2.0),
        }
    }
}

impl<T: Real> CostWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_cls, self.w_l1, self.w_giou];
        if ws.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::input("cost weights must be finite and non-negative"));
        }
        if ws.iter().all(|w| *w == T::zero()) {
            return Err(Error::input("at least one cost weight must be positive"));
        }
        Ok(())
    }
}

/// Dense row-major matrix; rows are predictions, columns are targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> CostMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "cost matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged cost matrix rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult<T> {
    /// `(prediction, target)` pairs, sorted by target then prediction.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    /// Targets left without a prediction (only when predictions run out).
    pub unmatched_targets: Vec<usize>,
    pub total_cost: T,
}

impl<T: Real> MatchResult<T> {
    pub fn empty(n_preds: usize) -> Self {
        Self {
            pairs: Vec::new(),
            unmatched_predictions: (0..n_preds).collect(),
            unmatched_targets: Vec::new(),
            total_cost: T::zero(),
        }
    }

    /// Target index matched to each prediction.
    pub fn target_of(&self, n_preds: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_preds];
        for &(p, t) in &self.pairs {
            out[p] = Some(t);
        }
        out
    }

    /// Number of positives per target index.
    pub fn matches_per_target(&self, n_targets: usize) -> Vec<usize> {
        let mut counts = vec![0; n_targets];
        for &(_, t) in &self.pairs {
            counts[t] += 1;
        }
        counts
    }
}

pub fn count_positives<T>(result: &MatchResult<T>) -> usize {
    result.pairs.len()
}

/// Entry `(i, j)` is `w_cls * (-p_i[label_j]) + w_l1 * L1(box_i, box_j) + w_giou * (1 - giou(box_i, box_j))`.
pub fn cost_matrix<T: Real>(
    preds: &[Prediction<T>],
    targets: &[Target<T>],
    w: &CostWeights<T>,
) -> Result<CostMatrix<T>> {
    w.validate()?;
    for (i, p) in preds.iter().enumerate() {
        if !p.bbox.is_valid() || p.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::input(format!("prediction {i} has non-finite or invalid values")));
        }
    }
    for (j, t) in targets.iter().enumerate() {
        if !t.bbox.is_valid() {
            return Err(Error::input(format!("target {j} has an invalid box")));
        }
    }
    let mut data = Vec::with_capacity(preds.len() * targets.len());
    for p in preds {
        for t in targets {
            let cls = -p.score(t.label)?;
            let l1 = p.bbox.l1(&t.bbox);
            let g = T::one() - giou(&p.bbox, &t.bbox);
            data.push(w.w_cls * cls + w.w_l1 * l1 + w.w_giou * g);
        }
    }
    CostMatrix::new(preds.len(), targets.len(), data)
}

/// Minimum-cost one-to-one assignment covering every target column.
///
/// With fewer predictions than targets the matrix is padded with
/// [`DUMMY_COST`] rows and the targets that land on padding are reported in
/// `unmatched_targets`. Ties resolve to the lowest index deterministically.
pub fn hungarian<T: Real>(cost: &CostMatrix<T>) -> Result<MatchResult<T>> {
    let (n_preds, n_targets) = (cost.rows(), cost.cols());
    if n_targets == 0 {
        return Ok(MatchResult::empty(n_preds));
    }
    if n_preds == 0 {
        return Err(Error::input("empty cost matrix with targets present"));
    }
    if cost.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("cost matrix has non-finite entries"));
    }
    let m = n_preds.max(n_targets);
    let dummy = T::lit(DUMMY_COST);
    let entry = |t: usize, p: usize| if p < n_preds { cost.get(p, t) } else { dummy };

    // Shortest augmenting path with potentials; targets are the (smaller) row side.
    let n = n_targets;
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pred_of_target = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] > 0 {
            pred_of_target[owner[j] - 1] = j - 1;
        }
    }
    let mut pairs = Vec::with_capacity(n);
    let mut unmatched_targets = Vec::new();
    let mut matched = vec![false; n_preds];
    let mut total = T::zero();
    for (t, &p) in pred_of_target.iter().enumerate() {
        if p < n_preds {
            pairs.push((p, t));
            matched[p] = true;
            total = total + cost.get(p, t);
        } else {
            unmatched_targets.push(t);
        }
    }
    Ok(MatchResult {
        pairs,
        unmatched_predictions: (0..n_preds).filter(|&p| !matched[p]).collect(),
        unmatched_targets,
        total_cost: total,
    })
}

/// Parameters of the dynamic-k one-to-many assigner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct O2mParams {
    pub k_max: usize,
    /// How many top IoUs are summed to estimate each target's `k`.
    pub topk_for_dynamic_k: usize,
}

impl Default for O2mParams {
    fn default() -> Self {
        Self {
            k_max: 10,
            topk_for_dynamic_k: 10,
        }
    }
}

fn by_cost<T: Real>(a: (T, usize), b: (T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// SimOTA-style one-to-many assignment without center-prior filtering.
///
/// Each target `j` takes `k_j = clamp(round(sum of its top IoUs), 1, k_max)`
/// lowest-cost predictions; a prediction claimed twice stays with its cheaper
/// target. Targets emptied by that conflict resolution then take their
/// cheapest prediction that is free or whose target keeps another positive,
/// so every target ends up with at least one positive whenever
/// `n_preds >= n_targets`.
pub fn o2m_assign<T: Real>(
    preds: &[Prediction<T>],
    targets: &[Target<T>],
    weights: &CostWeights<T>,
    params: &O2mParams,
) -> Result<MatchResult<T>> {
    if params.k_max == 0 || params.topk_for_dynamic_k == 0 {
        return Err(Error::input("k_max and topk_for_dynamic_k must be >= 1"));
    }
    let cost = cost_matrix(preds, targets, weights)?;
    let (n_preds, n_targets) = (preds.len(), targets.len());
    if n_targets == 0 {
        return Ok(MatchResult::empty(n_preds));
    }
    if n_preds == 0 {
        return Ok(MatchResult {
            pairs: Vec::new(),
            unmatched_predictions: Vec::new(),
            unmatched_targets: (0..n_targets).collect(),
            total_cost: T::zero(),
        });
    }

    // owner[p] = (cost, target)
    let mut owner: Vec<Option<(T, usize)>> = vec![None; n_preds];
    for (j, target) in targets.iter().enumerate() {
        let mut ious: Vec<T> = preds.iter().map(|p| iou(&p.bbox, &target.bbox)).collect();
        ious.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        let iou_sum = ious
            .iter()
            .take(params.topk_for_dynamic_k)
            .fold(T::zero(), |acc, &v| acc + v);
        let k = iou_sum
            .round()
            .to_usize()
            .unwrap_or(0)
            .clamp(1, params.k_max)
            .min(n_preds);
        let mut order: Vec<(T, usize)> = (0..n_preds).map(|p| (cost.get(p, j), p)).collect();
        order.sort_by(|a, b| by_cost(*a, *b));
        for &(c, p) in order.iter().take(k) {
            let better = match owner[p] {
                None => true,
                Some(prev) => by_cost((c, j), prev) == Ordering::Less,
            };
            if better {
                owner[p] = Some((c, j));
            }
        }
    }

    let mut per_target = vec![0usize; n_targets];
    for (_, t) in owner.iter().flatten() {
        per_target[*t] += 1;
    }
    for j in 0..n_targets {
        if per_target[j] > 0 {
            continue;
        }
        let pick = (0..n_preds)
            .filter(|&p| owner[p].is_none_or(|(_, t)| per_target[t] >= 2))
            .map(|p| (cost.get(p, j), p))
            .min_by(|a, b| by_cost(*a, *b));
        if let Some((c, p)) = pick {
            if let Some((_, prev)) = owner[p] {
                per_target[prev] -= 1;
            }
            owner[p] = Some((c, j));
            per_target[j] += 1;
        }
    }

    let mut pairs: Vec<(usize, usize)> = owner
        .iter()
        .enumerate()
        .filter_map(|(p, o)| o.map(|(_, t)| (p, t)))
        .collect();
    pairs.sort_by_key(|&(p, t)| (t, p));
    let total_cost = pairs.iter().fold(T::zero(), |acc, &(p, t)| acc + cost.get(p, t));
    Ok(MatchResult {
        unmatched_predictions: (0..n_preds).filter(|&p| owner[p].is_none()).collect(),
        unmatched_targets: (0..n_targets).filter(|&t| per_target[t] == 0).collect(),
        pairs,
        total_cost,
    })
}
