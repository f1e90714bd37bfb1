//! Fusion architectures: per-modality projections followed by either dense
//! layers or a two-layer LSTM.

pub mod checkpoint;
mod fc;
mod fusion;
mod lstm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use fc::{fc_forward, fc_loss_and_gradients, FcFusionParams, HIDDEN_UNITS};
pub use fusion::{fuse, FusionInput, ModalitySet, Projections, PROJECTION_UNITS};
pub use lstm::{
    lstm_cell_step, lstm_forward, lstm_loss_and_gradients, LstmCellParams, LstmFusionParams, LstmState,
    SequenceLayout,
};

use crate::error::{Error, Result};
use crate::labeling::{EmotionLabel, NUM_CLASSES};
use crate::nn::{Matrix, ParamView, ParamViewMut, Parameters};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Fc,
    Lstm,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Fc => "fc",
            Architecture::Lstm => "lstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" => Ok(Architecture::Fc),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(Error::invalid(format!("unknown model '{other}'; valid names are fc, lstm"))),
        }
    }
}

/// Inputs of one mini-batch: a single step for the FC model, one step per
/// sequence position for the LSTM.
#[derive(Clone, Debug)]
pub struct Batch {
    pub steps: Vec<FusionInput>,
    pub targets: Vec<usize>,
}

/// Either architecture behind one type, so training and evaluation need not
/// care which is in use.
#[derive(Clone, Debug, PartialEq)]
pub enum FusionModel {
    Fc(FcFusionParams),
    Lstm(LstmFusionParams),
}

impl FusionModel {
    pub fn init<R: Rng + ?Sized>(
        architecture: Architecture,
        modalities: &ModalitySet,
        sequence: SequenceLayout,
        rng: &mut R,
    ) -> Self {
        match architecture {
            Architecture::Fc => FusionModel::Fc(FcFusionParams::glorot(modalities, rng)),
            Architecture::Lstm => FusionModel::Lstm(LstmFusionParams::glorot(modalities, sequence, rng)),
        }
    }

    pub fn zeros(architecture: Architecture, modalities: &ModalitySet, sequence: SequenceLayout) -> Self {
        match architecture {
            Architecture::Fc => FusionModel::Fc(FcFusionParams::zeros(modalities)),
            Architecture::Lstm => FusionModel::Lstm(LstmFusionParams::zeros(modalities, sequence)),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            FusionModel::Fc(_) => Architecture::Fc,
            FusionModel::Lstm(_) => Architecture::Lstm,
        }
    }

    pub fn modalities(&self) -> ModalitySet {
        self.projections().modalities()
    }

    pub fn projections(&self) -> &Projections {
        match self {
            FusionModel::Fc(p) => &p.projections,
            FusionModel::Lstm(p) => &p.projections,
        }
    }

    /// Windows consumed per prediction and their spacing. The FC model sees a
    /// single window.
    pub fn sequence(&self) -> SequenceLayout {
        match self {
            FusionModel::Fc(_) => SequenceLayout { length: 1, stride: 1 },
            FusionModel::Lstm(p) => p.sequence,
        }
    }

    pub fn loss_and_gradients(&self, batch: &Batch, temperature: f64) -> Result<(f64, FusionModel)> {
        match self {
            FusionModel::Fc(p) => {
                let step = single_step(&batch.steps)?;
                let (loss, g) = fc_loss_and_gradients(p, step, &batch.targets, temperature)?;
                Ok((loss, FusionModel::Fc(g)))
            }
            FusionModel::Lstm(p) => {
                let (loss, g) = lstm_loss_and_gradients(p, &batch.steps, &batch.targets, temperature)?;
                Ok((loss, FusionModel::Lstm(g)))
            }
        }
    }

    /// Raw output-layer activations, one row per example.
    pub fn logits(&self, steps: &[FusionInput]) -> Result<Matrix> {
        match self {
            FusionModel::Fc(p) => Ok(fc::fc_logits_batch(p, single_step(steps)?)?.0),
            FusionModel::Lstm(p) => lstm::lstm_logits_batch(p, steps),
        }
    }
}

fn single_step(steps: &[FusionInput]) -> Result<&FusionInput> {
    match steps {
        [one] => Ok(one),
        _ => Err(Error::shape("FC batch steps", 1, steps.len())),
    }
}

impl Parameters for FusionModel {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        match self {
            FusionModel::Fc(p) => p.visit(prefix, out),
            FusionModel::Lstm(p) => p.visit(prefix, out),
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        match self {
            FusionModel::Fc(p) => p.visit_mut(prefix, out),
            FusionModel::Lstm(p) => p.visit_mut(prefix, out),
        }
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        FusionModel::zeros(self.architecture(), &self.modalities(), self.sequence())
    }
}

/// Argmax of a probability vector, lowest index on ties.
/// Works on logits as well, since temperature and softmax keep the order.
pub fn predict_class(probabilities: &[f64]) -> Result<EmotionLabel> {
    if probabilities.len() != NUM_CLASSES {
        return Err(Error::shape("predict_class input", NUM_CLASSES, probabilities.len()));
    }
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > probabilities[best] {
            best = i;
        }
    }
    EmotionLabel::new(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Modality;
    use crate::nn::{softmax_temperature, Vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predict_class_examples() {
        let mut v = Vector::zeros(7);
        v[5] = 1.0;
        assert_eq!(predict_class(&v).unwrap().index(), 5);
        assert_eq!(predict_class(&[1.0 / 7.0; 7]).unwrap().index(), 0);
        let logits = [0.3, -1.0, 2.5, 2.4, 0.0, 1.0, -3.0];
        for t in [0.5, 1.0, 2.0, 10.0] {
            assert_eq!(predict_class(&softmax_temperature(&logits, t).unwrap()).unwrap().index(), 2);
        }
    }

    #[test]
    fn architecture_parsing() {
        assert_eq!("LSTM".parse::<Architecture>().unwrap(), Architecture::Lstm);
        let err = "gru".parse::<Architecture>().unwrap_err().to_string();
        assert!(err.contains("fc, lstm"), "{err}");
    }

    #[test]
    fn zeros_like_keeps_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = ModalitySet::new([Modality::Audio]).unwrap();
        let m = FusionModel::init(Architecture::Lstm, &set, SequenceLayout { length: 3, stride: 2 }, &mut rng);
        let z = m.zeros_like();
        assert_eq!(z.sequence(), m.sequence());
        assert_eq!(z.param_count(), m.param_count());
        assert!(z.params().iter().all(|p| p.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn separate_models_share_no_storage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = ModalitySet::all();
        let valence = FusionModel::init(Architecture::Fc, &set, SequenceLayout::default(), &mut rng);
        let arousal = FusionModel::init(Architecture::Fc, &set, SequenceLayout::default(), &mut rng);
        let ranges = |m: &FusionModel| -> Vec<(usize, usize)> {
            m.params()
                .iter()
                .map(|p| {
                    let start = p.values.as_ptr() as usize;
                    (start, start + std::mem::size_of_val(p.values))
                })
                .collect()
        };
        for (a0, a1) in ranges(&valence) {
            for (b0, b1) in ranges(&arousal) {
                assert!(a1 <= b0 || b1 <= a0);
            }
        }
        assert_ne!(valence, arousal);
    }
}
