//! Multimodal (RGB frame, optical flow, audio) fusion models for predicting
//! evoked valence and arousal, with label quantization, continuous-curve
//! reconstruction and leave-one-clip-out evaluation.

pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod models;
pub mod nn;
pub mod synth;
pub mod training;

pub use dataio::{ClipDataset, EmotionDimension, FeatureWindow, Modality, NormalizationStats};
pub use error::{Error, FormatError, Result};
pub use evaluation::{EvalReport, LoocvSpec, Metrics};
pub use labeling::{EmotionLabel, ReconstructionConfig};
pub use models::{Architecture, FusionModel, ModalitySet};
pub use training::{TrainConfig, TrainReport};
