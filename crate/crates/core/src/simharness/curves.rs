//! Loss landscapes over (p, q) and 1-D loss curves at fixed soft targets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_csv, ExperimentSpec};
use crate::error::{Error, Result};
use crate::losses::{argmin_p, evaluate, landscape, linspace, LossParams};

/// Inclusive evenly spaced grids for confidence `p` and soft target `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub p_min: f64,
    pub p_max: f64,
    pub p_steps: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub q_steps: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            p_min: 0.01,
            p_max: 0.99,
            p_steps: 99,
            q_min: 0.0,
            q_max: 1.0,
            q_steps: 21,
        }
    }
}

impl Grid {
    pub fn p_values(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.p_steps)
    }

    pub fn q_values(&self) -> Vec<f64> {
        linspace(self.q_min, self.q_max, self.q_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.p_steps >= 2
            && self.q_steps >= 1
            && 0.0 < self.p_min
            && self.p_min < self.p_max
            && self.p_max < 1.0
            && 0.0 <= self.q_min
            && self.q_min <= self.q_max
            && self.q_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid grid {self:?}")))
        }
    }
}

/// Loss values with rows indexed by `q` and columns by `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeTable {
    pub params: LossParams<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn landscape_table(params: &LossParams<f64>, grid: &Grid) -> Result<LandscapeTable> {
    grid.validate()?;
    let (p, q) = (grid.p_values(), grid.q_values());
    let values = landscape(params, &p, &q)?;
    Ok(LandscapeTable {
        params: *params,
        p,
        q,
        values,
    })
}

impl LandscapeTable {
    /// Header row is `q` followed by the p-grid values.
    pub fn write_csv(&self, path: &Path, spec: &ExperimentSpec) -> Result<()> {
        let header: Vec<String> = std::iter::once("q".to_string())
            .chain(self.p.iter().map(|p| format!("p={p}")))
            .collect();
        let rows: Vec<Vec<f64>> = self
            .q
            .iter()
            .zip(&self.values)
            .map(|(&q, row)| std::iter::once(q).chain(row.iter().copied()).collect())
            .collect();
        write_csv(path, spec, &header, &rows)
    }
}

/// VFL and MAL at one soft target over the p-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePair {
    pub q: f64,
    pub vfl: Vec<f64>,
    pub mal: Vec<f64>,
    pub vfl_argmin: f64,
    pub mal_argmin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub p: Vec<f64>,
    pub curves: Vec<CurvePair>,
}

/// Positive-sample curves of both losses at each `q` in `qs`.
pub fn loss_curves(vfl: &LossParams<f64>, mal: &LossParams<f64>, qs: &[f64], grid: &Grid) -> Result<CurveReport> {
    grid.validate()?;
    let p = grid.p_values();
    let eval = |params: &LossParams<f64>, q: f64| -> Result<Vec<f64>> {
        p.iter()
            .map(|&pi| evaluate(pi, q, true, params).map(|e| e.value))
            .collect()
    };
    let curves = qs
        .iter()
        .map(|&q| {
            Ok(CurvePair {
                q,
                vfl: eval(vfl, q)?,
                mal: eval(mal, q)?,
                vfl_argmin: argmin_p(vfl, q)?,
                mal_argmin: argmin_p(mal, q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveReport { p, curves })
}

impl CurveReport {
    /// Columns `p, vfl_q=<q>, mal_q=<q>, ...`.
    pub fn write_csv(&self, path: &Path, spec: &ExperimentSpec) -> Result<()> {
        let mut header = vec!["p".to_string()];
        for c in &self.curves {
            header.push(format!("vfl_q={}", c.q));
            header.push(format!("mal_q={}", c.q));
        }
        let rows: Vec<Vec<f64>> = self
            .p
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                std::iter::once(p)
                    .chain(self.curves.iter().flat_map(|c| [c.vfl[i], c.mal[i]]))
                    .collect()
            })
            .collect();
        write_csv(path, spec, &header, &rows)
    }
}
