//! Seven-class quantization of valence/arousal and reconstruction of
//! continuous curves from class predictions.

mod filters;
mod quantize;
mod reconstruct;

pub use filters::{largest_odd_at_most, moving_average, savgol_coefficients, savitzky_golay};
pub use quantize::{bin_center, quantize, EmotionLabel, BIN_WIDTH, NUM_CLASSES};
pub use reconstruct::{reconstruct_continuous, smooth_classes, ReconstructionConfig};
