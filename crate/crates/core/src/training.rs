//! Mini-batch SGD with early stopping on a temporal holdout.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{ClipDataset, EmotionDimension, NormalizationStats};
use crate::error::{Error, Result};
use crate::labeling::quantize;
use crate::models::{Architecture, Batch, FusionInput, FusionModel, SequenceLayout};
use crate::nn::{sgd_step, softmax_cross_entropy_batch, Parameters, SgdConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub temperature: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// LSTM only.
    pub sequence_length: usize,
    /// Windows between consecutive LSTM steps (10 windows = 400 ms).
    pub sequence_stride: usize,
    pub seed: u64,
    /// Trailing share of each training clip held out for early stopping.
    pub validation_fraction: f64,
    /// Smallest validation-loss decrease that counts as an improvement.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            weight_decay: 0.005,
            temperature: 2.0,
            epochs: 200,
            batch_size: 128,
            patience: 25,
            sequence_length: 5,
            sequence_stride: 10,
            seed: 0,
            validation_fraction: 0.1,
            min_delta: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            problems.push(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            problems.push(format!("temperature must be positive, got {}", self.temperature));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("sequence_length", self.sequence_length),
            ("sequence_stride", self.sequence_stride),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if self.patience > self.epochs {
            problems.push(format!("patience {} exceeds epochs {}", self.patience, self.epochs));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            problems.push(format!("validation_fraction must lie in (0, 1), got {}", self.validation_fraction));
        }
        if !(self.min_delta >= 0.0) {
            problems.push(format!("min_delta must be non-negative, got {}", self.min_delta));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
        }
    }

    pub fn sequence_layout(&self, architecture: Architecture) -> SequenceLayout {
        match architecture {
            Architecture::Fc => SequenceLayout { length: 1, stride: 1 },
            Architecture::Lstm => SequenceLayout {
                length: self.sequence_length,
                stride: self.sequence_stride,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Completed,
    EarlyStopped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

/// Patience-based stopping on a loss that should decrease.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if self.best_epoch == 0 || loss < self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Seeded shuffle followed by contiguous chunks; the last chunk may be short.
pub fn make_batches<T: Clone, R: Rng + ?Sized>(examples: &[T], batch_size: usize, rng: &mut R) -> Result<Vec<Vec<T>>> {
    if examples.is_empty() {
        return Err(Error::InsufficientData("no training examples to batch".into()));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    let mut order = examples.to_vec();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[T]>::to_vec).collect())
}

/// An example is the window index (within its clip) whose label is predicted;
/// for sequence models it is the last step of the sequence.
pub type Example = (usize, usize);

/// Every prediction target in `clips[c]` within windows `range`, whose full
/// sequence also lies inside `range`.
pub fn examples_in(clip: usize, range: std::ops::Range<usize>, layout: SequenceLayout) -> impl Iterator<Item = Example> {
    let first = range.start + layout.span() - 1;
    (first..range.end.max(first)).map(move |t| (clip, t))
}

/// Normalized model inputs and quantized targets for `items`.
pub fn assemble_batch(
    clips: &[&ClipDataset],
    items: &[Example],
    layout: SequenceLayout,
    model: &FusionModel,
    stats: &NormalizationStats,
    dimension: EmotionDimension,
) -> Result<Batch> {
    let modalities = model.modalities();
    let steps = (0..layout.length)
        .map(|s| {
            let back = (layout.length - 1 - s) * layout.stride;
            let at: Vec<Example> = items.iter().map(|&(c, t)| (c, t - back)).collect();
            FusionInput::gather(clips, &at, &modalities, stats)
        })
        .collect();
    let targets = items
        .iter()
        .map(|&(c, t)| quantize(clips[c].labels(dimension)[t]).map(|l| l.index()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Batch { steps, targets })
}

/// Splits each clip's timeline into a training head and a validation tail.
fn temporal_split(clips: &[&ClipDataset], config: &TrainConfig, layout: SequenceLayout) -> (Vec<Example>, Vec<Example>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, clip) in clips.iter().enumerate() {
        let n = clip.len();
        let held = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        let cut = n - held.min(n);
        train.extend(examples_in(c, 0..cut, layout));
        val.extend(examples_in(c, cut..n, layout));
    }
    (train, val)
}

/// Mean loss and accuracy over `items`, evaluated in chunks.
pub fn evaluate_examples(
    model: &FusionModel,
    clips: &[&ClipDataset],
    items: &[Example],
    stats: &NormalizationStats,
    dimension: EmotionDimension,
    temperature: f64,
    chunk: usize,
) -> Result<(f64, f64)> {
    let layout = model.sequence();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for part in items.chunks(chunk.max(1)) {
        let batch = assemble_batch(clips, part, layout, model, stats, dimension)?;
        let logits = model.logits(&batch.steps)?;
        let ce = softmax_cross_entropy_batch(&logits, &batch.targets, temperature)?;
        loss_sum += ce.loss * part.len() as f64;
        for (r, &t) in batch.targets.iter().enumerate() {
            if crate::models::predict_class(logits.row(r))?.index() == t {
                correct += 1;
            }
        }
    }
    let n = items.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains `model` in place of a copy and returns the parameters of the epoch
/// with the lowest validation loss.
pub fn train(
    model: FusionModel,
    clips: &[&ClipDataset],
    stats: &NormalizationStats,
    dimension: EmotionDimension,
    config: &TrainConfig,
) -> Result<(FusionModel, TrainReport)> {
    config.validate()?;
    let layout = model.sequence();
    let (train_items, val_items) = temporal_split(clips, config, layout);
    if train_items.is_empty() {
        return Err(Error::InsufficientData(format!(
            "training clips yield no examples for a {}-window context",
            layout.span()
        )));
    }
    if val_items.is_empty() {
        return Err(Error::InsufficientData(
            "validation tails are too short to hold a single example".into(),
        ));
    }

    let sgd = config.sgd();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = model;
    let mut best = current.clone();
    let mut stopper = EarlyStopping::new(config.patience, config.min_delta);
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::Completed,
    };

    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        for items in make_batches(&train_items, config.batch_size, &mut rng)? {
            let batch = assemble_batch(clips, &items, layout, &current, stats, dimension)?;
            let (loss, grads) = current.loss_and_gradients(&batch, config.temperature)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("batch loss became {loss}"),
                });
            }
            sgd_step(&mut current, &grads, &sgd)?;
            loss_sum += loss * items.len() as f64;
        }
        if !current.all_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
        let train_loss = loss_sum / train_items.len() as f64;
        let (val_loss, val_acc) = evaluate_examples(
            &current,
            clips,
            &val_items,
            stats,
            dimension,
            config.temperature,
            config.batch_size.max(256),
        )?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("validation loss became {val_loss}"),
            });
        }
        log::debug!("epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}, val acc {val_acc:.4}");
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.val_accuracy.push(val_acc);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = current.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                report.stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }
    report.best_epoch = stopper.best_epoch();
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_of_five_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = make_batches(&[1, 2, 3, 4, 5], 2, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
        let mut all: Vec<i32> = b.into_iter().flatten().collect();
        all.sort();
        assert_eq!(all, vec![1, 2, 3, 4, 5]);
        assert!(make_batches::<i32, _>(&[], 2, &mut rng).is_err());
    }

    #[test]
    fn batches_depend_only_on_seed() {
        let items: Vec<usize> = (0..50).collect();
        let a = make_batches(&items, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = make_batches(&items, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = make_batches(&items, 7, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn improving_loss_never_stops() {
        let mut s = EarlyStopping::new(25, 1e-6);
        for epoch in 1..=200 {
            assert_eq!(s.observe(epoch, 10.0 - epoch as f64 * 0.01), StopDecision::Improved);
        }
        assert_eq!(s.best_epoch(), 200);
    }

    #[test]
    fn constant_loss_with_patience_one_stops_at_two() {
        let mut s = EarlyStopping::new(1, 1e-6);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.5), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn improvements_below_min_delta_do_not_count() {
        let mut s = EarlyStopping::new(3, 1e-3);
        s.observe(1, 1.0);
        assert_eq!(s.observe(2, 0.9995), StopDecision::Continue);
        assert_eq!(s.observe(3, 0.99), StopDecision::Improved);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = TrainConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!((c.learning_rate, c.weight_decay, c.temperature), (0.005, 0.005, 2.0));
        assert_eq!((c.epochs, c.batch_size, c.patience, c.sequence_length), (200, 128, 25, 5));
        let bad = TrainConfig {
            patience: 300,
            validation_fraction: 1.0,
            ..TrainConfig::default()
        };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("patience") && msg.contains("validation_fraction"), "{msg}");
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "patience": 2}"#).unwrap();
        assert_eq!(parsed.epochs, 3);
        assert_eq!(parsed.batch_size, 128);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }

    #[test]
    fn examples_respect_sequence_span() {
        let l = SequenceLayout { length: 3, stride: 2 };
        let e: Vec<Example> = examples_in(1, 10..20, l).collect();
        assert_eq!(e.first(), Some(&(1, 14)));
        assert_eq!(e.last(), Some(&(1, 19)));
        assert_eq!(examples_in(0, 0..4, l).count(), 0);
    }
}
