//! Commands behind the `affectfuse` binary. Each returns the paths it wrote
//! so callers (and tests) can inspect them.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use affectfuse::dataio::{fit_minmax, load_dataset, ClipDataset};
use affectfuse::evaluation::{evaluate_model, render_table, run_loocv, ClipCurves, EvalReport, LoocvSpec, Metrics};
use affectfuse::models::{write_checkpoint, read_checkpoint, Checkpoint, CheckpointMeta, FusionModel};
use affectfuse::synth::{generate, SynthSpec};
use affectfuse::training::train;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<affectfuse::Error> for CliError {
    fn from(e: affectfuse::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(path, text + "\n")
}

fn write_curves(dir: &Path, curves: &[&ClipCurves]) -> Result<Vec<PathBuf>, CliError> {
    curves
        .iter()
        .map(|c| {
            let path = dir.join(format!("{}.csv", c.clip_id));
            write_file(&path, c.to_csv_string())?;
            Ok(path)
        })
        .collect()
}

/// Picks clips by id, in the order given. Unknown ids are a validation error.
fn select<'a>(clips: &'a [ClipDataset], ids: Option<&[String]>) -> Result<Vec<&'a ClipDataset>, CliError> {
    let Some(ids) = ids else {
        return Ok(clips.iter().collect());
    };
    let by_id: BTreeMap<&str, &ClipDataset> = clips.iter().map(|c| (c.clip_id(), c)).collect();
    let missing: Vec<&str> = ids.iter().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "clip ids not in the manifest: {}",
            missing.join(", ")
        )));
    }
    Ok(ids.iter().map(|id| by_id[id.as_str()]).collect())
}

fn load_validated(config: Option<&Path>, overrides: &Overrides) -> Result<(RunConfig, Vec<ClipDataset>), CliError> {
    let cfg = RunConfig::load(config, overrides)?;
    cfg.validate()?;
    let clips = load_dataset(cfg.manifest_path())?;
    Ok((cfg, clips))
}

/// Writes a synthetic dataset under `out` and returns its manifest path.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<PathBuf, CliError> {
    spec.validate()?;
    Ok(generate(spec, out)?)
}

#[derive(Debug)]
pub struct LoocvOutputs {
    pub report: PathBuf,
    pub table: PathBuf,
    pub curves: Vec<PathBuf>,
    pub table_text: String,
}

pub fn cmd_loocv(config: Option<&Path>, overrides: &Overrides) -> Result<LoocvOutputs, CliError> {
    let (cfg, clips) = load_validated(config, overrides)?;
    let spec = LoocvSpec {
        architecture: cfg.model,
        dimension: cfg.dimension,
        modalities: cfg.modalities.clone(),
        train: cfg.train.clone(),
        reconstruction: cfg.reconstruction,
        parallel_folds: cfg.parallel_folds,
    };
    let report = run_loocv(&clips, &spec, None)?;
    let out = cfg.out_dir();
    let tag = cfg.tag();
    let report_path = out.join(format!("loocv_{tag}.json"));
    write_json(&report_path, &report)?;
    let table_text = render_table(std::slice::from_ref(&report))?;
    let table_path = out.join(format!("loocv_{tag}.txt"));
    write_file(&table_path, &table_text)?;
    let curves: Vec<&ClipCurves> = report.completed().filter_map(|f| f.curves.as_ref()).collect();
    let curves = write_curves(&out.join("curves").join(format!("loocv_{tag}")), &curves)?;
    if let Some(failed) = report.folds.iter().find(|f| f.result().is_none()) {
        log::warn!("fold {} failed; aggregate is partial", failed.test_clip_id());
    }
    Ok(LoocvOutputs {
        report: report_path,
        table: table_path,
        curves,
        table_text,
    })
}

#[derive(Debug)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

pub fn cmd_train(config: Option<&Path>, overrides: &Overrides) -> Result<TrainOutputs, CliError> {
    let (cfg, clips) = load_validated(config, overrides)?;
    let training = select(&clips, cfg.train_clips.as_deref())?;
    let stats = fit_minmax(&training)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let model = FusionModel::init(cfg.model, &cfg.modalities, cfg.train.sequence_layout(cfg.model), &mut rng);
    let (model, report) = train(model, &training, &stats, cfg.dimension, &cfg.train)?;
    let ckpt = Checkpoint {
        model,
        normalization: stats,
        meta: CheckpointMeta {
            dimension: cfg.dimension,
            seed: cfg.train.seed,
            train_config: serde_json::to_value(&cfg.train).map_err(|e| CliError::Runtime(e.to_string()))?,
        },
    };
    let checkpoint = cfg.checkpoint_path();
    if let Some(parent) = checkpoint.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    write_checkpoint(&checkpoint, &ckpt)?;
    let report_path = cfg.out_dir().join(format!("train_{}.json", cfg.tag()));
    write_json(&report_path, &report)?;
    Ok(TrainOutputs {
        checkpoint,
        report: report_path,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipScore {
    pub clip_id: String,
    pub metrics: Metrics,
    pub pearson_zero_variance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: PathBuf,
    pub clips: Vec<ClipScore>,
    pub mean: Metrics,
}

#[derive(Debug)]
pub struct EvalOutputs {
    pub summary: EvalSummary,
    pub report: PathBuf,
    pub curves: Vec<PathBuf>,
}

pub fn cmd_eval(config: Option<&Path>, overrides: &Overrides) -> Result<EvalOutputs, CliError> {
    let (cfg, clips) = load_validated(config, overrides)?;
    let path = cfg.checkpoint_path();
    if !path.is_file() {
        return Err(CliError::Validation(format!("checkpoint {} does not exist", path.display())));
    }
    let ckpt = read_checkpoint(&path)?;
    ckpt.expect(cfg.model, cfg.dimension)?;
    if ckpt.model.modalities() != cfg.modalities {
        return Err(CliError::Validation(format!(
            "checkpoint uses modalities {}, config asks for {}",
            ckpt.model.modalities(),
            cfg.modalities
        )));
    }
    let tests = select(&clips, cfg.test_clips.as_deref())?;
    let scored = evaluate_model(&ckpt.model, &ckpt.normalization, &tests, cfg.dimension, &cfg.reconstruction)?;
    let scores: Vec<ClipScore> = scored
        .iter()
        .map(|(m, zv, c)| ClipScore {
            clip_id: c.clip_id.clone(),
            metrics: *m,
            pearson_zero_variance: *zv,
        })
        .collect();
    let mean = Metrics::mean(&scores.iter().map(|s| s.metrics).collect::<Vec<_>>())
        .ok_or_else(|| CliError::Validation("no clips to evaluate".into()))?;
    let summary = EvalSummary {
        checkpoint: path,
        clips: scores,
        mean,
    };
    let tag = cfg.tag();
    let report = cfg.out_dir().join(format!("eval_{tag}.json"));
    write_json(&report, &summary)?;
    let curve_refs: Vec<&ClipCurves> = scored.iter().map(|(_, _, c)| c).collect();
    let curves = write_curves(&cfg.out_dir().join("curves").join(format!("eval_{tag}")), &curve_refs)?;
    Ok(EvalOutputs {
        summary,
        report,
        curves,
    })
}

/// Tables for a set of LOOCV reports, one per emotion dimension. Written as
/// `table_<dimension>.txt` under `out` when given.
pub fn cmd_report(reports: &[PathBuf], out: Option<&Path>) -> Result<Vec<(PathBuf, String)>, CliError> {
    let mut paths = reports.to_vec();
    if paths.is_empty() {
        let dir = out.ok_or_else(|| CliError::Validation("give report files or --out to scan".into()))?;
        let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
        for entry in entries {
            let p = entry.map_err(|e| io_err(dir, e))?.path();
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("loocv_") && name.ends_with(".json") {
                paths.push(p);
            }
        }
        paths.sort();
    }
    if paths.is_empty() {
        return Err(CliError::Validation("no LOOCV reports found".into()));
    }
    let mut by_dim: BTreeMap<String, Vec<EvalReport>> = BTreeMap::new();
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let r: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{} is not a LOOCV report: {e}", p.display())))?;
        by_dim.entry(r.dimension.to_string()).or_default().push(r);
    }
    let mut written = Vec::new();
    for (dim, reports) in by_dim {
        let text = render_table(&reports)?;
        let path = match out {
            Some(dir) => {
                let p = dir.join(format!("table_{dim}.txt"));
                write_file(&p, &text)?;
                p
            }
            None => PathBuf::new(),
        };
        written.push((path, text));
    }
    Ok(written)
}
