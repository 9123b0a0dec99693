//! Focal, varifocal and matchability-aware classification losses.
//!
//! Each loss is a scalar function of the predicted foreground probability `p`
//! and returns its value together with the analytic derivative `dL/dp`. The
//! IoU `q` enters as a constant soft label and is never differentiated.
//!
//! Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any
//! logarithm; the derivative is evaluated at the clamped point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    #[serde(alias = "fl")]
    Focal,
    #[serde(alias = "vfl")]
    Varifocal,
    Mal,
}

impl LossVariant {
    pub fn short_name(self) -> &'static str {
        match self {
            LossVariant::Focal => "fl",
            LossVariant::Varifocal => "vfl",
            LossVariant::Mal => "mal",
        }
    }
}

impl std::str::FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fl" | "focal" => Ok(LossVariant::Focal),
            "vfl" | "varifocal" => Ok(LossVariant::Varifocal),
            "mal" => Ok(LossVariant::Mal),
            other => Err(Error::input(format!("unknown loss variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for LossVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Focusing parameter `gamma` and class balance `alpha` for one loss variant.
///
/// `alpha` is carried for every variant but the matchability-aware loss ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams<T> {
    pub variant: LossVariant,
    pub gamma: T,
    pub alpha: T,
}

impl<T: Real> LossParams<T> {
    pub fn new(variant: LossVariant, gamma: T, alpha: T) -> Result<Self> {
        let params = Self { variant, gamma, alpha };
        params.validate()?;
        Ok(params)
    }

    /// FL: alpha 0.25, gamma 2.
    pub fn focal() -> Self {
        Self {
            variant: LossVariant::Focal,
            gamma: T::lit(2.0),
            alpha: T::lit(0.25),
        }
    }

    /// VFL: alpha 0.75, gamma 2.
    pub fn varifocal() -> Self {
        Self {
            variant: LossVariant::Varifocal,
            gamma: T::lit(2.0),
            alpha: T::lit(0.75),
        }
    }

    /// MAL: gamma 1.5.
    pub fn mal() -> Self {
        Self {
            variant: LossVariant::Mal,
            gamma: T::lit(1.5),
            alpha: T::lit(0.75),
        }
    }

    pub fn default_for(variant: LossVariant) -> Self {
        match variant {
            LossVariant::Focal => Self::focal(),
            LossVariant::Varifocal => Self::varifocal(),
            LossVariant::Mal => Self::mal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::input(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::input(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval<T> {
    pub value: T,
    /// Derivative with respect to `p`, `q` held constant.
    pub dvalue_dp: T,
}

fn clamp_prob<T: Real>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::input(format!("probability must lie in [0, 1], got {p}")));
    }
    let eps = T::lit(PROB_EPS);
    Ok(p.max(eps).min(T::one() - eps))
}

fn check_quality<T: Real>(q: T) -> Result<()> {
    if !(q >= T::zero() && q <= T::one()) {
        return Err(Error::input(format!("IoU quality must lie in [0, 1], got {q}")));
    }
    Ok(())
}

/// `-w * (1-p)^g * ln p` and its derivative.
fn pos_focal_term<T: Real>(p: T, weight: T, gamma: T) -> LossEval<T> {
    let one_m = T::one() - p;
    let ln_p = p.ln();
    LossEval {
        value: -weight * one_m.powf(gamma) * ln_p,
        dvalue_dp: weight * (gamma * one_m.powf(gamma - T::one()) * ln_p - one_m.powf(gamma) / p),
    }
}

/// `-w * p^g * ln(1-p)` and its derivative.
fn neg_focal_term<T: Real>(p: T, weight: T, gamma: T) -> LossEval<T> {
    let one_m = T::one() - p;
    let ln_1mp = one_m.ln();
    LossEval {
        value: -weight * p.powf(gamma) * ln_1mp,
        dvalue_dp: -weight * (gamma * p.powf(gamma - T::one()) * ln_1mp - p.powf(gamma) / one_m),
    }
}

/// Binary cross-entropy against soft target `t`, scaled by `weight`.
fn soft_bce<T: Real>(p: T, t: T, weight: T) -> LossEval<T> {
    let one_m = T::one() - p;
    LossEval {
        value: -weight * (t * p.ln() + (T::one() - t) * one_m.ln()),
        dvalue_dp: -weight * (t / p - (T::one() - t) / one_m),
    }
}

/// Focal loss for a hard label `positive`.
pub fn focal_loss<T: Real>(p: T, positive: bool, params: &LossParams<T>) -> Result<LossEval<T>> {
    params.validate()?;
    let p = clamp_prob(p)?;
    Ok(if positive {
        pos_focal_term(p, params.alpha, params.gamma)
    } else {
        neg_focal_term(p, T::one() - params.alpha, params.gamma)
    })
}

/// Varifocal loss. `q > 0` is an IoU-weighted soft BCE with target `q`; `q == 0` is the background term.
pub fn varifocal_loss<T: Real>(p: T, q: T, params: &LossParams<T>) -> Result<LossEval<T>> {
    params.validate()?;
    check_quality(q)?;
    let p = clamp_prob(p)?;
    Ok(if q > T::zero() {
        soft_bce(p, q, q)
    } else {
        neg_focal_term(p, params.alpha, params.gamma)
    })
}

/// Matchability-aware loss: soft BCE with target `q^gamma` for positives,
/// `-p^gamma ln(1-p)` for background. No `alpha`.
pub fn mal<T: Real>(p: T, q: T, positive: bool, params: &LossParams<T>) -> Result<LossEval<T>> {
    params.validate()?;
    check_quality(q)?;
    if !positive && q > T::zero() {
        return Err(Error::input(format!(
            "background sample cannot carry an IoU quality (q = {q})"
        )));
    }
    let p = clamp_prob(p)?;
    Ok(if positive {
        soft_bce(p, q.powf(params.gamma), T::one())
    } else {
        neg_focal_term(p, T::one(), params.gamma)
    })
}

/// Dispatches on `params.variant`.
///
/// For a positive sample `q` is the IoU with its matched target. Focal loss
/// ignores `q`; varifocal ignores `positive` (a zero-IoU positive falls into
/// its background branch).
pub fn evaluate<T: Real>(p: T, q: T, positive: bool, params: &LossParams<T>) -> Result<LossEval<T>> {
    match params.variant {
        LossVariant::Focal => focal_loss(p, positive, params),
        LossVariant::Varifocal => varifocal_loss(p, if positive { q } else { T::zero() }, params),
        LossVariant::Mal => mal(p, if positive { q } else { T::zero() }, positive, params),
    }
}

/// Positive-sample loss over a `q × p` grid: row `i` is `q_grid[i]`, column `j` is `p_grid[j]`.
pub fn landscape<T: Real>(params: &LossParams<T>, p_grid: &[T], q_grid: &[T]) -> Result<Vec<Vec<T>>> {
    if p_grid.is_empty() || q_grid.is_empty() {
        return Err(Error::input("landscape grids must be non-empty"));
    }
    if let Some(p) = p_grid.iter().find(|&&p| !(p > T::zero() && p < T::one())) {
        return Err(Error::input(format!("p grid values must lie in (0, 1), got {p}")));
    }
    q_grid
        .iter()
        .map(|&q| {
            p_grid
                .iter()
                .map(|&p| evaluate(p, q, true, params).map(|e| e.value))
                .collect()
        })
        .collect()
}

/// Minimizer over `p` of the positive-sample loss at fixed `q`.
///
/// Every positive-sample loss here is unimodal in `p`, so this bisects on the
/// sign of the analytic derivative over the clamped interval.
pub fn argmin_p<T: Real>(params: &LossParams<T>, q: T) -> Result<T> {
    let eps = T::lit(PROB_EPS);
    let slope = |p: T| evaluate(p, q, true, params).map(|e| e.dvalue_dp);
    let (mut a, mut b) = (eps, T::one() - eps);
    if slope(a)? >= T::zero() {
        return Ok(a);
    }
    if slope(b)? <= T::zero() {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = (a + b) / T::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid)? < T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) / T::lit(2.0))
}

/// Evenly spaced grid over `[lo, hi]` with `n` points (`n >= 2`) or `[lo]` when `n == 1`.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::lit((n - 1) as f64);
            (0..n).map(|i| lo + step * T::lit(i as f64)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn focal_examples() {
        let params = LossParams::<f64>::focal();
        let e = focal_loss(1.0 - PROB_EPS, true, &params).unwrap();
        assert!(e.value < 1e-12);
        let e = focal_loss(PROB_EPS, false, &params).unwrap();
        assert!(e.value < 1e-12);
        let e = focal_loss(0.5, true, &params).unwrap();
        assert_relative_eq!(e.value, -0.25 * 0.25 * 0.5f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(e.value, 0.043322, epsilon = 1e-6);
    }

    #[test]
    fn varifocal_examples() {
        let params = LossParams::<f64>::varifocal();
        let e = varifocal_loss(0.9, 1.0, &params).unwrap();
        assert_relative_eq!(e.value, -(0.9f64.ln()), max_relative = 1e-14);
        assert!(varifocal_loss(PROB_EPS, 0.0, &params).unwrap().value < 1e-12);
        let e = varifocal_loss(0.9, 0.05, &params).unwrap();
        // -0.05 * (0.05 ln 0.9 + 0.95 ln 0.1)
        assert_relative_eq!(e.value, 0.10963623, epsilon = 1e-7);
    }

    #[test]
    fn mal_examples() {
        let params = LossParams::<f64>::mal();
        let e = mal(0.9, 1.0, true, &params).unwrap();
        assert_relative_eq!(e.value, 0.105361, epsilon = 1e-6);
        for q in [0.0, 0.3, 0.77, 1.0] {
            for gamma in [0.5, 1.5, 3.0] {
                let p = LossParams::new(LossVariant::Mal, gamma, 0.5).unwrap();
                assert_relative_eq!(mal(0.5, q, true, &p).unwrap().value, LN2, max_relative = 1e-12);
            }
        }
        let e = mal(0.9, 0.05, true, &params).unwrap();
        assert_relative_eq!(e.value, 2.278, epsilon = 1e-3);
        assert!(e.value > varifocal_loss(0.9, 0.05, &LossParams::varifocal()).unwrap().value);
    }

    #[test]
    fn input_errors() {
        let params = LossParams::<f64>::mal();
        assert!(mal(1.5, 0.5, true, &params).is_err());
        assert!(mal(-0.1, 0.5, true, &params).is_err());
        assert!(mal(0.5, 1.5, true, &params).is_err());
        assert!(mal(0.5, 0.2, false, &params).is_err());
        assert!(mal(f64::NAN, 0.2, true, &params).is_err());
        assert!(varifocal_loss(0.5, -0.2, &LossParams::varifocal()).is_err());
        assert!(focal_loss(2.0, true, &LossParams::focal()).is_err());
        assert!(LossParams::new(LossVariant::Focal, 0.0, 0.5).is_err());
        assert!(LossParams::new(LossVariant::Focal, 2.0, 1.5).is_err());
    }

    #[test]
    fn endpoint_probabilities_are_clamped() {
        let params = LossParams::<f64>::mal();
        assert!(mal(0.0, 0.5, true, &params).unwrap().value.is_finite());
        assert!(mal(1.0, 0.5, true, &params).unwrap().value.is_finite());
    }

    #[test]
    fn landscape_examples() {
        let params = LossParams::<f64>::mal();
        let grid = landscape(&params, &[0.5], &[0.5]).unwrap();
        assert_relative_eq!(grid[0][0], LN2, max_relative = 1e-12);
        assert!(landscape(&params, &[], &[0.5]).is_err());
        assert!(landscape(&params, &[0.5], &[]).is_err());
        assert!(landscape(&params, &[0.0], &[0.5]).is_err());

        let p_grid = linspace(0.1, 0.9, 81);
        let span = |params: &LossParams<f64>| {
            let row = &landscape(params, &p_grid, &[0.05]).unwrap()[0];
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            let min = row.iter().cloned().fold(f64::MAX, f64::min);
            max - min
        };
        assert!(span(&LossParams::varifocal()) < 0.15);
        assert!(span(&LossParams::mal()) > 1.5);
    }

    #[test]
    fn argmin_matches_soft_targets() {
        let m = LossParams::<f64>::mal();
        let v = LossParams::<f64>::varifocal();
        for q in [0.05, 0.5, 0.95] {
            assert!((argmin_p(&m, q).unwrap() - q.powf(1.5)).abs() < 1e-6);
            assert!((argmin_p(&v, q).unwrap() - q).abs() < 1e-6);
        }
    }

    #[test]
    fn f32_instantiation() {
        let params = LossParams::<f32>::mal();
        let e = mal(0.5f32, 0.3, true, &params).unwrap();
        assert!((e.value - LN2 as f32).abs() < 1e-5);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("MAL".parse::<LossVariant>().unwrap(), LossVariant::Mal);
        assert_eq!("vfl".parse::<LossVariant>().unwrap(), LossVariant::Varifocal);
        assert!("bce".parse::<LossVariant>().is_err());
    }
}
