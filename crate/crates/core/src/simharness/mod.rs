//! Data ingestion, synthetic scenes and the statistics experiments.
//!
//! Every CSV written here starts with a `# spec: {...}` comment line holding
//! the compact JSON of the experiment spec that produced it, followed by a
//! header row. Readers should skip lines starting with `#`.

pub mod coco;
pub mod curves;
pub mod stats;
pub mod svg;
pub mod synth;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densify::{AugPolicy, ImageAnnotations};
use crate::error::{Error, Result};
use crate::losses::LossParams;
use crate::matching::{CostWeights, O2mParams};
use crate::schedule::ScheduleConfig;
use crate::toytrain::TrainConfig;

pub use coco::{load_coco, save_coco, save_coco_with_spec, LoadReport};
pub use curves::{landscape_table, loss_curves, CurveReport, Grid, LandscapeTable};
pub use stats::{run_densify_stats, run_match_stats, DensifyStats, MatchStats};
pub use synth::{predictions_for, synth_dataset, synth_predictions, synth_scene, SynthConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    CocoJson { path: String },
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<ImageAnnotations>,
    /// Category id to name.
    pub categories: BTreeMap<usize, String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for img in &self.images {
            img.validate()?;
            if let Some(t) = img.targets.iter().find(|t| !self.categories.contains_key(&t.label)) {
                return Err(Error::input(format!(
                    "image {} has a target with unknown category {}",
                    img.id, t.label
                )));
            }
        }
        Ok(())
    }

    pub fn num_targets(&self) -> usize {
        self.images.iter().map(|i| i.targets.len()).sum()
    }

    /// Length of the per-prediction score vector needed to cover every category.
    pub fn num_classes(&self) -> usize {
        self.categories.keys().next_back().map_or(1, |&k| k + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MatchStats,
    Landscape,
    LossCurves,
    DensifyStats,
    Densify,
    ToyTrain,
    GradCheck,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherSpec {
    pub weights: CostWeights<f64>,
    pub o2m: O2mParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSpec {
    pub vfl: LossParams<f64>,
    pub mal: LossParams<f64>,
    pub fl: LossParams<f64>,
    /// Soft targets at which 1-D loss curves are drawn.
    pub curve_qs: [f64; 2],
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            vfl: LossParams::varifocal(),
            mal: LossParams::mal(),
            fl: LossParams::focal(),
            curve_qs: [0.05, 0.95],
        }
    }
}

/// Everything needed to reproduce one harness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub matcher: MatcherSpec,
    pub losses: LossSpec,
    pub grid: Grid,
    pub policy: AugPolicy,
    pub schedule: ScheduleConfig<f64>,
    pub batch_size: usize,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    /// Not embedded in outputs, so the same run written to two places stays byte-identical.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::MatchStats,
            seed: None,
            matcher: MatcherSpec::default(),
            losses: LossSpec::default(),
            grid: Grid::default(),
            policy: AugPolicy::default(),
            schedule: ScheduleConfig::default(),
            batch_size: 8,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::config(format!("{:?} needs a seed", self.kind)))
    }

    /// Compact JSON used as the embedded provenance line.
    pub fn embed(&self) -> String {
        serde_json::to_string(self).expect("experiment spec serializes")
    }
}

/// Writes `rows` as CSV below a `# spec:` comment line.
pub fn write_csv<R: Serialize>(path: &Path, spec: &ExperimentSpec, header: &[String], rows: &[R]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# spec: {}", spec.embed()).expect("write to vec");
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_file(path, &buf)
}

/// Writes `value` as pretty JSON with the spec attached under `"spec"`.
pub fn write_json<V: Serialize>(path: &Path, spec: &ExperimentSpec, value: &V) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("spec".into(), serde_json::to_value(spec)?);
    }
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Mixes a base seed with a stream index into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
