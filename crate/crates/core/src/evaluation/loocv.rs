use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, accuracy_pm1, mae_mse, pearson_flagged, Correlation, Metrics};
use crate::dataio::{fit_minmax, ClipDataset, EmotionDimension, NormalizationStats};
use crate::error::{Error, Result};
use crate::labeling::{quantize, reconstruct_continuous, EmotionLabel, ReconstructionConfig};
use crate::models::{predict_class, Architecture, FusionInput, FusionModel, ModalitySet};
use crate::training::{examples_in, train, TrainConfig, TrainReport};

const PREDICT_CHUNK: usize = 512;

/// Per-window predictions for one clip. Windows before the first full model
/// context have no prediction and are left out.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipCurves {
    pub clip_id: String,
    /// Video frame of each evaluated window.
    pub frames: Vec<usize>,
    pub predicted_class: Vec<EmotionLabel>,
    pub true_class: Vec<EmotionLabel>,
    pub predicted_value: Vec<f64>,
    pub true_value: Vec<f64>,
}

impl ClipCurves {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frame,true_value,predicted_value,true_class,predicted_class\n");
        for k in 0..self.frames.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.frames[k],
                self.true_value[k],
                self.predicted_value[k],
                self.true_class[k].index(),
                self.predicted_class[k].index()
            ));
        }
        out
    }
}

/// Class predictions for every window of `clip` that has a full context.
/// Returns the index of the first predicted window alongside.
pub fn predict_clip(
    model: &FusionModel,
    clip: &ClipDataset,
    stats: &NormalizationStats,
) -> Result<(usize, Vec<EmotionLabel>)> {
    let layout = model.sequence();
    let first = layout.span() - 1;
    if clip.len() <= first {
        return Err(Error::InsufficientData(format!(
            "clip {} has {} windows, fewer than one {}-window context",
            clip.clip_id(),
            clip.len(),
            layout.span()
        )));
    }
    let items: Vec<(usize, usize)> = examples_in(0, 0..clip.len(), layout).collect();
    let clips = [clip];
    let mut out = Vec::with_capacity(items.len());
    let modalities = model.modalities();
    for part in items.chunks(PREDICT_CHUNK) {
        let steps = (0..layout.length)
            .map(|s| {
                let back = (layout.length - 1 - s) * layout.stride;
                let at: Vec<(usize, usize)> = part.iter().map(|&(c, t)| (c, t - back)).collect();
                FusionInput::gather(&clips, &at, &modalities, stats)
            })
            .collect::<Vec<_>>();
        let logits = model.logits(&steps)?;
        for r in 0..part.len() {
            out.push(predict_class(logits.row(r))?);
        }
    }
    Ok((first, out))
}

/// Scores predictions on one clip: discrete metrics against quantized labels,
/// continuous ones between the reconstructed curve and the raw labels.
pub fn score_clip(
    clip: &ClipDataset,
    dimension: EmotionDimension,
    first: usize,
    predicted: Vec<EmotionLabel>,
    reconstruction: &ReconstructionConfig,
) -> Result<(Metrics, bool, ClipCurves)> {
    let n = predicted.len();
    let raw = &clip.labels(dimension)[first..first + n];
    let truth = raw.iter().map(|&v| quantize(v)).collect::<Result<Vec<_>>>()?;
    let acc = accuracy(&predicted, &truth)?;
    let acc1 = accuracy_pm1(&predicted, &truth)?;
    let continuous = reconstruct_continuous(&predicted, reconstruction)?;
    let (mae, mse) = mae_mse(&continuous, raw)?;
    let corr = if n >= 2 {
        pearson_flagged(&continuous, raw)?
    } else {
        Correlation {
            value: 0.0,
            zero_variance: true,
        }
    };
    let curves = ClipCurves {
        clip_id: clip.clip_id().to_string(),
        frames: clip.frames()[first..first + n].to_vec(),
        predicted_class: predicted,
        true_class: truth,
        predicted_value: continuous,
        true_value: raw.to_vec(),
    };
    Ok((
        Metrics {
            accuracy: acc,
            accuracy_pm1: acc1,
            mae,
            mse,
            pearson: corr.value,
        },
        corr.zero_variance,
        curves,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_clip_id: String,
    pub evaluated_windows: usize,
    pub metrics: Metrics,
    /// Pearson fell back to 0 because a curve was constant.
    pub pearson_zero_variance: bool,
    pub training: TrainReport,
    #[serde(skip)]
    pub curves: Option<ClipCurves>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FoldOutcome {
    Completed(FoldResult),
    Failed { test_clip_id: String, error: String },
}

impl FoldOutcome {
    pub fn test_clip_id(&self) -> &str {
        match self {
            FoldOutcome::Completed(r) => &r.test_clip_id,
            FoldOutcome::Failed { test_clip_id, .. } => test_clip_id,
        }
    }

    pub fn result(&self) -> Option<&FoldResult> {
        match self {
            FoldOutcome::Completed(r) => Some(r),
            FoldOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub architecture: Architecture,
    pub dimension: EmotionDimension,
    pub modalities: ModalitySet,
    pub train_config: TrainConfig,
    pub reconstruction: ReconstructionConfig,
    pub folds: Vec<FoldOutcome>,
    /// Mean over completed folds, absent when none completed.
    pub aggregate: Option<Metrics>,
    /// Some folds failed and the aggregate covers only the rest.
    pub partial: bool,
    pub pearson_zero_variance_folds: usize,
}

impl EvalReport {
    pub fn completed(&self) -> impl Iterator<Item = &FoldResult> {
        self.folds.iter().filter_map(FoldOutcome::result)
    }

    pub fn recompute_aggregate(&self) -> Option<Metrics> {
        Metrics::mean(&self.completed().map(|f| f.metrics).collect::<Vec<_>>())
    }
}

/// What a LOOCV run is asked to do.
#[derive(Clone, Debug)]
pub struct LoocvSpec {
    pub architecture: Architecture,
    pub dimension: EmotionDimension,
    pub modalities: ModalitySet,
    pub train: TrainConfig,
    pub reconstruction: ReconstructionConfig,
    /// Folds trained concurrently; 1 runs them in sequence.
    pub parallel_folds: usize,
}

/// Notifications from inside each fold, so callers can check the protocol.
pub enum FoldEvent<'a> {
    Normalized {
        fold: usize,
        test_clip_id: &'a str,
        stats: &'a NormalizationStats,
    },
    Trained {
        fold: usize,
        test_clip_id: &'a str,
        report: &'a TrainReport,
    },
}

pub type FoldObserver<'a> = &'a (dyn Fn(&FoldEvent<'_>) + Sync);

fn run_fold(
    clips: &[ClipDataset],
    fold: usize,
    spec: &LoocvSpec,
    observer: Option<FoldObserver<'_>>,
) -> Result<FoldResult> {
    let test = &clips[fold];
    let training: Vec<&ClipDataset> = clips.iter().enumerate().filter(|&(i, _)| i != fold).map(|(_, c)| c).collect();
    let stats = fit_minmax(&training)?;
    if stats.fitted_on.iter().any(|id| id == test.clip_id()) {
        return Err(Error::invalid(format!(
            "normalization for fold {fold} was fitted on its own test clip {}",
            test.clip_id()
        )));
    }
    if let Some(obs) = observer {
        obs(&FoldEvent::Normalized {
            fold,
            test_clip_id: test.clip_id(),
            stats: &stats,
        });
    }

    // every fold starts from the same seed, so folds differ only in their data
    let mut rng = ChaCha8Rng::seed_from_u64(spec.train.seed);
    let layout = spec.train.sequence_layout(spec.architecture);
    let model = FusionModel::init(spec.architecture, &spec.modalities, layout, &mut rng);
    let (model, report) = train(model, &training, &stats, spec.dimension, &spec.train)?;
    if let Some(obs) = observer {
        obs(&FoldEvent::Trained {
            fold,
            test_clip_id: test.clip_id(),
            report: &report,
        });
    }

    let (first, predicted) = predict_clip(&model, test, &stats)?;
    let evaluated = predicted.len();
    let (metrics, zero_variance, curves) = score_clip(test, spec.dimension, first, predicted, &spec.reconstruction)?;
    Ok(FoldResult {
        test_clip_id: test.clip_id().to_string(),
        evaluated_windows: evaluated,
        metrics,
        pearson_zero_variance: zero_variance,
        training: report,
        curves: Some(curves),
    })
}

/// Leave-one-clip-out evaluation. Each fold fits normalization and trains on
/// the other clips only; a failing fold is reported rather than aborting the
/// run.
pub fn run_loocv(clips: &[ClipDataset], spec: &LoocvSpec, observer: Option<FoldObserver<'_>>) -> Result<EvalReport> {
    if clips.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-one-out needs at least 2 clips, got {}",
            clips.len()
        )));
    }
    spec.train.validate()?;
    spec.reconstruction.validate()?;

    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.sort_by(|&a, &b| clips[a].clip_id().cmp(clips[b].clip_id()));

    let run = |fold: usize| -> FoldOutcome {
        match run_fold(clips, fold, spec, observer) {
            Ok(r) => FoldOutcome::Completed(r),
            Err(e) => {
                log::warn!("fold {} failed: {e}", clips[fold].clip_id());
                FoldOutcome::Failed {
                    test_clip_id: clips[fold].clip_id().to_string(),
                    error: e.to_string(),
                }
            }
        }
    };

    let folds: Vec<FoldOutcome> = if spec.parallel_folds > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.parallel_folds)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start fold workers: {e}")))?;
        pool.install(|| order.par_iter().map(|&f| run(f)).collect())
    } else {
        order.iter().map(|&f| run(f)).collect()
    };

    let mut report = EvalReport {
        architecture: spec.architecture,
        dimension: spec.dimension,
        modalities: spec.modalities.clone(),
        train_config: spec.train.clone(),
        reconstruction: spec.reconstruction,
        partial: folds.iter().any(|f| f.result().is_none()),
        folds,
        aggregate: None,
        pearson_zero_variance_folds: 0,
    };
    report.aggregate = report.recompute_aggregate();
    report.pearson_zero_variance_folds = report.completed().filter(|f| f.pearson_zero_variance).count();
    Ok(report)
}

/// Scores a trained model on clips it may or may not have seen.
pub fn evaluate_model(
    model: &FusionModel,
    stats: &NormalizationStats,
    clips: &[&ClipDataset],
    dimension: EmotionDimension,
    reconstruction: &ReconstructionConfig,
) -> Result<Vec<(Metrics, bool, ClipCurves)>> {
    clips
        .iter()
        .map(|clip| {
            let (first, predicted) = predict_clip(model, clip, stats)?;
            score_clip(clip, dimension, first, predicted, reconstruction)
        })
        .collect()
}
