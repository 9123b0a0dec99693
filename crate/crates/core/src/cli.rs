//! The `deim` command line.
//!
//! Settings resolve in three layers: built-in defaults, then command-line
//! flags, then the `--config` JSON file (config wins). The output directory is
//! `--out` (or `output` in the config); without either it is
//! `$DEIM_OUT_DIR/<subcommand>`, falling back to `deim-out/<subcommand>`.
//!
//! Exit codes: 0 on success, 2 for usage errors and unreadable inputs, 1 for
//! runtime failures. Errors are a single JSON line on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::densify::raster::{compose_raster, ComposeMode, Raster};
use crate::densify::{apply_policy, mean_targets, Composition, ImageAnnotations};
use crate::error::Error;
use crate::losses::{LossParams, LossVariant};
use crate::schedule::AugState;
use crate::simharness::{
    self, curves, load_coco, predictions_for, run_densify_stats, run_match_stats, save_coco_with_spec, synth_dataset,
    write_csv, write_file, write_json, Dataset, ExperimentKind, ExperimentSpec,
};
use crate::toytrain::{self, grad_check, run_arms, speedup_summary, Arm};

/// Environment variable naming the root directory for outputs when `--out` is absent.
pub const OUT_DIR_ENV: &str = "DEIM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "deim",
    version,
    about = "Label assignment, loss and densification experiments"
)]
pub struct Cli {
    /// Seed for every random stream; required by stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON experiment spec; its values override flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write SVG renderings where available.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Loss values over a (p, q) grid; VFL and MAL unless --loss is given.
    Landscape {
        /// fl, vfl or mal.
        #[arg(long)]
        loss: Option<LossVariant>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// VFL and MAL curves over p at fixed soft targets.
    Curves {
        /// Focusing parameter of MAL.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// O2O versus O2M positives per image.
    MatchStats {
        #[command(flatten)]
        data: DataArgs,
        /// Predictions per image.
        #[arg(long)]
        preds: Option<usize>,
        /// Jitter of synthetic predictions relative to box size.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Densifies a COCO file once with mosaic and mixup.
    Densify {
        /// COCO annotation file to densify.
        #[arg(long)]
        coco: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Directory of `<image id>.ppm` rasters to compose alongside the annotations.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Target counts before and after densification across a scheduled run.
    DensifyStats {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Total epochs of the simulated schedule.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Trains the toy detector under one or more arms.
    ToyTrain {
        /// baseline, deim, mal-only or dense-only; repeatable.
        #[arg(long = "arm")]
        arms: Vec<Arm>,
        /// Number of task seeds, 0..N.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Training epochs per run.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compares analytic and finite-difference gradients of the toy objective.
    GradCheck {
        /// Random parameter points to check.
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long)]
        loss: Option<LossVariant>,
        /// Check on densified scenes.
        #[arg(long)]
        dense: bool,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// COCO annotation file; a synthetic dataset is generated when absent.
    #[arg(long)]
    pub coco: Option<PathBuf>,
    /// Number of synthetic images.
    #[arg(long = "num-images")]
    pub num_images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Per-minibatch probability of mosaic.
    #[arg(long)]
    pub mosaic_prob: Option<f64>,
    /// Per-minibatch probability of mixup.
    #[arg(long)]
    pub mixup_prob: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn to_line(&self) -> String {
        let kind = if self.code == 2 { "usage" } else { "runtime" };
        json!({ "error": kind, "code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::Load { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid usage");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error: ")).to_line());
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.code
        }
    }
}

/// Files written by one invocation, relative to its output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Landscape { .. } => "landscape",
        Command::Curves { .. } => "curves",
        Command::MatchStats { .. } => "match-stats",
        Command::Densify { .. } => "densify",
        Command::DensifyStats { .. } => "densify-stats",
        Command::ToyTrain { .. } => "toy-train",
        Command::GradCheck { .. } => "grad-check",
    }
}

fn kind_of(c: &Command) -> ExperimentKind {
    match c {
        Command::Landscape { .. } => ExperimentKind::Landscape,
        Command::Curves { .. } => ExperimentKind::LossCurves,
        Command::MatchStats { .. } => ExperimentKind::MatchStats,
        Command::Densify { .. } => ExperimentKind::Densify,
        Command::DensifyStats { .. } => ExperimentKind::DensifyStats,
        Command::ToyTrain { .. } => ExperimentKind::ToyTrain,
        Command::GradCheck { .. } => ExperimentKind::GradCheck,
    }
}

fn is_stochastic(c: &Command) -> bool {
    !matches!(c, Command::Landscape { .. } | Command::Curves { .. })
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_policy_flags(spec: &mut ExperimentSpec, p: &PolicyArgs) {
    if let Some(v) = p.mosaic_prob {
        spec.policy.mosaic_prob = v;
    }
    if let Some(v) = p.mixup_prob {
        spec.policy.mixup_prob = v;
    }
    if let Some(v) = p.batch_size {
        spec.batch_size = v;
    }
}

fn loss_slot(spec: &mut ExperimentSpec, v: LossVariant) -> &mut LossParams<f64> {
    match v {
        LossVariant::Focal => &mut spec.losses.fl,
        LossVariant::Varifocal => &mut spec.losses.vfl,
        LossVariant::Mal => &mut spec.losses.mal,
    }
}

/// Defaults, then flags, then the config file.
fn resolve_spec(cli: &Cli) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(kind_of(&cli.command));
    spec.seed = cli.seed;
    match &cli.command {
        Command::Landscape { loss, gamma, alpha } => {
            for v in loss.map_or(vec![LossVariant::Varifocal, LossVariant::Mal], |l| vec![l]) {
                let slot = loss_slot(&mut spec, v);
                slot.gamma = gamma.unwrap_or(slot.gamma);
                slot.alpha = alpha.unwrap_or(slot.alpha);
            }
        }
        Command::Curves { gamma } => {
            if let Some(g) = gamma {
                spec.losses.mal.gamma = *g;
            }
        }
        Command::MatchStats { data, preds, noise } => {
            spec.synth.images = data.num_images.unwrap_or(spec.synth.images);
            spec.synth.preds_per_image = preds.unwrap_or(spec.synth.preds_per_image);
            spec.synth.noise = noise.unwrap_or(spec.synth.noise);
        }
        Command::Densify { policy, .. } => apply_policy_flags(&mut spec, policy),
        Command::DensifyStats { data, policy, epochs } => {
            spec.synth.images = data.num_images.unwrap_or(spec.synth.images);
            apply_policy_flags(&mut spec, policy);
            if let Some(e) = epochs {
                spec.schedule.total_epochs = *e;
            }
        }
        Command::ToyTrain { epochs, .. } => {
            if let Some(e) = epochs {
                spec.train.schedule.total_epochs = *e;
            }
        }
        Command::GradCheck { loss, dense, .. } => {
            if let Some(l) = loss {
                spec.train.loss = LossParams::default_for(*l);
            }
            spec.train.dense_o2o = *dense;
        }
    }

    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let mut merged = serde_json::to_value(&spec).map_err(Error::from)?;
        merge(&mut merged, patch);
        let output = cli.out.clone();
        spec =
            serde_json::from_value(merged).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        spec.kind = kind_of(&cli.command);
        spec.output = spec.output.or(output);
    } else {
        spec.output = cli.out.clone();
    }

    if is_stochastic(&cli.command) {
        let seed = spec
            .seed
            .ok_or_else(|| CliError::usage(format!("{} requires --seed", subcommand_name(&cli.command))))?;
        spec.policy.seed = seed;
        spec.train.seed = seed;
    }
    Ok(spec)
}

fn output_dir(spec: &ExperimentSpec, command: &Command) -> PathBuf {
    if let Some(out) = &spec.output {
        return out.clone();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("deim-out"), PathBuf::from);
    root.join(subcommand_name(command))
}

fn load_input(path: &Path) -> CliResult<Dataset> {
    let (d, report) = load_coco(path).map_err(CliError::usage)?;
    if report.dropped_boxes > 0 {
        eprintln!(
            "{}",
            json!({ "warning": "dropped_boxes", "path": path.display().to_string(), "count": report.dropped_boxes })
        );
    }
    Ok(d)
}

fn dataset_for(data: &DataArgs, spec: &ExperimentSpec, inputs: &mut Vec<String>) -> CliResult<Dataset> {
    match &data.coco {
        Some(p) => {
            inputs.push(p.display().to_string());
            load_input(p)
        }
        None => Ok(synth_dataset(&spec.synth, spec.require_seed()?)?.0),
    }
}

fn dispatch(cli: &Cli) -> CliResult<Value> {
    let spec = resolve_spec(cli)?;
    let mut out = Outputs {
        dir: output_dir(&spec, &cli.command),
        files: Vec::new(),
    };
    let mut inputs: Vec<String> = cli.config.iter().map(|p| p.display().to_string()).collect();

    let summary = match &cli.command {
        Command::Landscape { loss, .. } => {
            let variants = loss.map_or(vec![LossVariant::Varifocal, LossVariant::Mal], |l| vec![l]);
            let mut minima = serde_json::Map::new();
            for v in variants {
                let params = *loss_slot(&mut spec.clone(), v);
                let table = curves::landscape_table(&params, &spec.grid)?;
                table.write_csv(&out.path(&format!("landscape_{v}.csv")), &spec)?;
                if cli.svg {
                    let svg = simharness::svg::landscape_heatmap(&table);
                    write_file(&out.path(&format!("landscape_{v}.svg")), svg.as_bytes())?;
                }
                let max = table.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                minima.insert(v.to_string(), json!({ "params": params, "max_value": max }));
            }
            Value::Object(minima)
        }
        Command::Curves { .. } => {
            let report = curves::loss_curves(&spec.losses.vfl, &spec.losses.mal, &spec.losses.curve_qs, &spec.grid)?;
            report.write_csv(&out.path("curves.csv"), &spec)?;
            let minimizers: Vec<Value> = report
                .curves
                .iter()
                .map(|c| json!({ "q": c.q, "vfl_argmin": c.vfl_argmin, "mal_argmin": c.mal_argmin }))
                .collect();
            let summary = json!({ "minimizers": minimizers });
            write_json(&out.path("curves_summary.json"), &spec, &summary)?;
            if cli.svg {
                write_file(
                    &out.path("curves.svg"),
                    simharness::svg::curves_plot(&report).as_bytes(),
                )?;
            }
            summary
        }
        Command::MatchStats { data, .. } => {
            let seed = spec.require_seed()?;
            let (dataset, preds) = match &data.coco {
                Some(p) => {
                    inputs.push(p.display().to_string());
                    let d = load_input(p)?;
                    let preds = predictions_for(&d, &spec.synth, seed)?;
                    (d, preds)
                }
                None => synth_dataset(&spec.synth, seed)?,
            };
            let stats = run_match_stats(&dataset, &preds, &spec.matcher)?;
            out.files
                .extend(["match_counts.csv".to_string(), "match_histogram.csv".to_string()]);
            stats.write(&out.dir, &spec)?;
            write_json(&out.path("match_summary.json"), &spec, &stats.summary)?;
            if cli.svg {
                write_file(
                    &out.path("match_histogram.svg"),
                    simharness::svg::match_histogram(&stats).as_bytes(),
                )?;
            }
            serde_json::to_value(stats.summary).map_err(Error::from)?
        }
        Command::Densify { coco: path, images, .. } => {
            inputs.push(path.display().to_string());
            let dataset = load_input(path)?;
            densify_once(&dataset, &spec, images.as_deref(), &mut out, &mut inputs)?
        }
        Command::DensifyStats { data, .. } => {
            let dataset = dataset_for(data, &spec, &mut inputs)?;
            let stats = run_densify_stats(&dataset, &spec.policy, &spec.schedule, spec.batch_size)?;
            out.files
                .extend(["densify_counts.csv".to_string(), "densify_epochs.csv".to_string()]);
            stats.write(&out.dir, &spec)?;
            let summary = json!({ "images": dataset.images.len(), "epochs": stats.epochs });
            write_json(&out.path("densify_summary.json"), &spec, &summary)?;
            summary
        }
        Command::ToyTrain { arms, seeds, .. } => toy_train(&spec, arms, *seeds, &mut out)?,
        Command::GradCheck { points, .. } => {
            let report = grad_check(&spec.train, *points, spec.require_seed()?)?;
            write_json(&out.path("grad_check.json"), &spec, &report)?;
            serde_json::to_value(report).map_err(Error::from)?
        }
    };

    out.files.sort();
    let manifest = json!({
        "tool": "deim",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand_name(&cli.command),
        "seed": spec.seed,
        "inputs": inputs,
        "files": out.files,
        "spec": spec,
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
    text.push('\n');
    write_file(&out.dir.join("manifest.json"), text.as_bytes())?;

    Ok(json!({
        "subcommand": subcommand_name(&cli.command),
        "out_dir": out.dir.display().to_string(),
        "files": out.files,
        "summary": summary,
    }))
}

#[derive(Serialize)]
struct CompositionRecord {
    image_id: u64,
    batch: usize,
    /// Image ids placed top-left, top-right, bottom-left, bottom-right.
    mosaic: Option<[u64; 4]>,
    /// Image id blended in and the base image's blend ratio.
    mixup: Option<(u64, f64)>,
}

fn densify_once(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    raster_dir: Option<&Path>,
    out: &mut Outputs,
    inputs: &mut Vec<String>,
) -> CliResult<Value> {
    if spec.batch_size == 0 {
        return Err(CliError::usage("batch_size must be >= 1"));
    }
    if let Some(d) = raster_dir {
        inputs.push(d.display().to_string());
    }
    let mut images: Vec<ImageAnnotations> = Vec::with_capacity(dataset.images.len());
    let mut records = Vec::with_capacity(dataset.images.len());
    let mut rasters_written = 0usize;
    for (b, batch) in dataset.images.chunks(spec.batch_size).enumerate() {
        let result = apply_policy(batch, &spec.policy, AugState::DENSE, b as u64)?;
        let ids = |c: &Composition| CompositionRecord {
            image_id: 0,
            batch: b,
            mosaic: c.mosaic.map(|q| q.map(|i| batch[i].id)),
            mixup: c.mixup.map(|(i, r)| (batch[i].id, r)),
        };
        for (img, comp) in result.images.iter().zip(&result.compositions) {
            records.push(CompositionRecord {
                image_id: img.id,
                ..ids(comp)
            });
        }
        if let Some(dir) = raster_dir {
            rasters_written += compose_batch(dir, batch, &result.compositions, out)?;
        }
        images.extend(result.images);
    }
    let densified = Dataset {
        images,
        categories: dataset.categories.clone(),
        provenance: dataset.provenance.clone(),
    };
    save_coco_with_spec(&densified, &out.path("densified.json"), spec)?;
    write_json(
        &out.path("compositions.json"),
        spec,
        &json!({ "compositions": records }),
    )?;
    let summary = json!({
        "images": dataset.images.len(),
        "mean_targets_before": mean_targets(&dataset.images),
        "mean_targets_after": mean_targets(&densified.images),
        "rasters_written": rasters_written,
    });
    Ok(summary)
}

/// Composes rasters for one batch; images with a missing source are skipped with a warning.
fn compose_batch(dir: &Path, batch: &[ImageAnnotations], comps: &[Composition], out: &mut Outputs) -> CliResult<usize> {
    let load = |id: u64| -> CliResult<Option<Raster>> {
        let path = dir.join(format!("{id}.ppm"));
        if !path.exists() {
            return Ok(None);
        }
        Raster::read_ppm(&path).map(Some).map_err(CliError::usage)
    };
    let sources = batch.iter().map(|img| load(img.id)).collect::<CliResult<Vec<_>>>()?;
    let mut stage: Vec<Option<Raster>> = Vec::with_capacity(batch.len());
    for (i, c) in comps.iter().enumerate() {
        stage.push(match c.mosaic {
            Some(q) => {
                let inputs: Vec<Option<&Raster>> = q.iter().map(|&k| sources[k].as_ref()).collect();
                compose_raster(&inputs, ComposeMode::Mosaic)?
            }
            None => sources[i].clone(),
        });
    }
    let mut written = 0;
    for (i, c) in comps.iter().enumerate() {
        let raster = match c.mixup {
            Some((partner, ratio)) => compose_raster(
                &[stage[i].as_ref(), stage[partner].as_ref()],
                ComposeMode::Mixup { ratio },
            )?,
            None => stage[i].clone(),
        };
        match raster {
            Some(r) => {
                let path = out.path(&format!("images/{}.ppm", batch[i].id));
                let parent = path.parent().expect("has parent");
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                r.write_ppm(&path)?;
                written += 1;
            }
            None => log::warn!("no raster written for image {}", batch[i].id),
        }
    }
    Ok(written)
}

fn toy_train(spec: &ExperimentSpec, arms: &[Arm], n_seeds: u64, out: &mut Outputs) -> CliResult<Value> {
    let arms: Vec<Arm> = if arms.is_empty() {
        vec![Arm::Baseline, Arm::Deim]
    } else {
        arms.to_vec()
    };
    if n_seeds == 0 {
        return Err(CliError::usage("--seeds must be >= 1"));
    }
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let runs = run_arms(&spec.train, &arms, &seeds)?;
    let header: Vec<String> = [
        "epoch",
        "lr",
        "dense_o2o_on",
        "total_loss",
        "cls_loss",
        "box_loss",
        "toy_ap",
        "mean_matched_iou",
        "positives_per_image",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut finals = serde_json::Map::new();
    for (arm, seed, trace) in &runs {
        write_csv(
            &out.path(&format!("trace_{}_seed{seed}.csv", arm.name())),
            spec,
            &header,
            &trace.epochs,
        )?;
        finals
            .entry(arm.name())
            .or_insert_with(|| json!([]))
            .as_array_mut()
            .expect("array")
            .push(json!(trace.final_ap()));
    }
    let traces_of =
        |a: Arm| -> Vec<toytrain::TrainTrace> { runs.iter().filter(|r| r.0 == a).map(|r| r.2.clone()).collect() };
    let mut comparisons = serde_json::Map::new();
    if arms.contains(&Arm::Baseline) {
        let base = traces_of(Arm::Baseline);
        for &a in arms.iter().filter(|&&a| a != Arm::Baseline) {
            let s = speedup_summary(spec.train.schedule.total_epochs, &seeds, &base, &traces_of(a));
            comparisons.insert(a.name().to_string(), serde_json::to_value(s).map_err(Error::from)?);
        }
    }
    let summary = json!({
        "task_seeds": seeds,
        "arms": arms.iter().map(|a| a.name()).collect::<Vec<_>>(),
        "final_ap": finals,
        "versus_baseline": comparisons,
    });
    write_json(&out.path("summary.json"), spec, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("deim").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn config_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"policy":{"mosaic_prob":0.9},"batch_size":3}"#).unwrap();
        let cli = parse(&[
            "densify-stats",
            "--seed",
            "4",
            "--mosaic-prob",
            "0.2",
            "--mixup-prob",
            "0.1",
            "--config",
            cfg.to_str().unwrap(),
        ]);
        let spec = resolve_spec(&cli).unwrap();
        assert_eq!(spec.policy.mosaic_prob, 0.9);
        assert_eq!(spec.policy.mixup_prob, 0.1);
        assert_eq!(spec.policy.seed, 4);
        assert_eq!(spec.batch_size, 3);
    }

    #[test]
    fn stochastic_subcommands_need_a_seed() {
        let e = resolve_spec(&parse(&["match-stats"])).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(resolve_spec(&parse(&["curves"])).is_ok());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["deim", "landscape", "--bogus"]), 2);
        assert_eq!(run(["deim", "densify", "--seed", "1"]), 2);
        assert_eq!(run(["deim", "landscape", "--loss", "xyz"]), 2);
    }

    #[test]
    fn merge_is_deep() {
        let mut a = json!({"x": {"y": 1, "z": 2}, "w": 0});
        merge(&mut a, json!({"x": {"y": 5}}));
        assert_eq!(a, json!({"x": {"y": 5, "z": 2}, "w": 0}));
    }
}
