//! Reference implementations used only by tests. None of this calls into the
//! library's loss or matching code.

#![allow(dead_code)]

/// Focal loss, direct from the two-case definition.
pub fn focal(p: f64, y: u8, alpha: f64, gamma: f64) -> f64 {
    if y == 1 {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Varifocal loss with IoU soft target `q`.
pub fn varifocal(p: f64, q: f64, alpha: f64, gamma: f64) -> f64 {
    if q > 0.0 {
        -q * (q * p.ln() + (1.0 - q) * (1.0 - p).ln())
    } else {
        -alpha * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Matchability-aware loss: soft target `q^gamma` on positives, no alpha.
pub fn matchability(p: f64, q: f64, y: u8, gamma: f64) -> f64 {
    if y == 1 {
        let t = q.powf(gamma);
        -t * p.ln() - (1.0 - t) * (1.0 - p).ln()
    } else {
        -p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Minimum total cost over every maximum-cardinality one-to-one assignment,
/// by exhaustive enumeration. `cost[p][t]`, predictions by targets.
///
/// Sums are accumulated in ascending target order.
pub fn brute_force_assignment(cost: &[Vec<f64>], n_targets: usize) -> f64 {
    let n_preds = cost.len();
    let pairs = n_preds.min(n_targets);
    let skips = n_targets - pairs;
    let mut best = f64::INFINITY;
    let mut used = vec![false; n_preds];
    fn go(
        t: usize,
        skips_left: usize,
        acc: f64,
        cost: &[Vec<f64>],
        n_targets: usize,
        used: &mut [bool],
        best: &mut f64,
    ) {
        if t == n_targets {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for p in 0..cost.len() {
            if !used[p] {
                used[p] = true;
                go(t + 1, skips_left, acc + cost[p][t], cost, n_targets, used, best);
                used[p] = false;
            }
        }
        if skips_left > 0 {
            go(t + 1, skips_left - 1, acc, cost, n_targets, used, best);
        }
    }
    go(0, skips, 0.0, cost, n_targets, &mut used, &mut best);
    if n_targets == 0 {
        0.0
    } else {
        best
    }
}

/// Central difference of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Columns of the first non-comment row of a CSV file written by the harness.
pub fn csv_header(text: &str) -> Vec<String> {
    text.lines()
        .find(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .unwrap_or_default()
}
