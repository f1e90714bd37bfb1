use serde::{Deserialize, Serialize};

use super::filters::{largest_odd_at_most, moving_average, savitzky_golay};
use super::quantize::EmotionLabel;
use crate::error::{Error, Result};

/// Smoothing applied when turning per-frame class predictions back into a
/// continuous curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Moving-average length in frames (25 = 1 s).
    pub lowpass_window: usize,
    pub sg_window: usize,
    pub sg_polyorder: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            lowpass_window: 25,
            sg_window: 51,
            sg_polyorder: 3,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("lowpass_window", self.lowpass_window), ("sg_window", self.sg_window)] {
            if w < 3 || w % 2 == 0 {
                return Err(Error::invalid(format!("{name} must be odd and >= 3, got {w}")));
            }
        }
        if self.sg_polyorder >= self.sg_window {
            return Err(Error::invalid(format!(
                "sg_polyorder {} must be below sg_window {}",
                self.sg_polyorder, self.sg_window
            )));
        }
        Ok(())
    }
}

/// Bin centres passed through the low-pass and Savitzky–Golay filters, before
/// rescaling. Windows longer than the sequence shrink to the largest odd
/// length that fits.
pub fn smooth_classes(classes: &[EmotionLabel], config: &ReconstructionConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if classes.is_empty() {
        return Err(Error::InsufficientData("no predictions to reconstruct".into()));
    }
    let n = classes.len();
    let centres: Vec<f64> = classes.iter().map(|c| c.center()).collect();
    let lowpass = moving_average(&centres, config.lowpass_window.min(largest_odd_at_most(n)))?;
    let sg_window = config.sg_window.min(largest_odd_at_most(n));
    let polyorder = config.sg_polyorder.min(sg_window - 1);
    savitzky_golay(&lowpass, sg_window, polyorder)
}

/// Continuous curve in `[-1, 1]` from a class sequence: smoothing followed by
/// an affine map of the curve's min to -1 and max to +1. A constant class
/// sequence yields its bin centre unchanged.
pub fn reconstruct_continuous(classes: &[EmotionLabel], config: &ReconstructionConfig) -> Result<Vec<f64>> {
    let smoothed = smooth_classes(classes, config)?;
    if classes.windows(2).all(|w| w[0] == w[1]) {
        return Ok(vec![classes[0].center(); classes.len()]);
    }
    let lo = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12) {
        return Ok(smoothed.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect());
    }
    Ok(smoothed
        .into_iter()
        .map(|v| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(idx: &[usize]) -> Vec<EmotionLabel> {
        idx.iter().map(|&i| EmotionLabel::new(i).unwrap()).collect()
    }

    #[test]
    fn constant_sequence_passes_through() {
        let out = reconstruct_continuous(&labels(&[3; 80]), &ReconstructionConfig::default()).unwrap();
        assert_eq!(out, vec![0.0; 80]);
        let out = reconstruct_continuous(&labels(&[5; 7]), &ReconstructionConfig::default()).unwrap();
        assert!(out.iter().all(|&v| v == EmotionLabel::new(5).unwrap().center()));
    }

    #[test]
    fn rescaled_range_is_exactly_unit() {
        let idx: Vec<usize> = (0..300).map(|i| (i / 40) % 7).collect();
        let out = reconstruct_continuous(&labels(&idx), &ReconstructionConfig::default()).unwrap();
        assert_eq!(out.len(), 300);
        let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn short_sequences_fall_back_to_smaller_windows() {
        let out = reconstruct_continuous(&labels(&[0, 6, 0, 6]), &ReconstructionConfig::default()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(reconstruct_continuous(&labels(&[2]), &ReconstructionConfig::default()).unwrap().len(), 1);
        assert!(reconstruct_continuous(&[], &ReconstructionConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ReconstructionConfig::default();
        assert!(c.validate().is_ok());
        c.sg_window = 50;
        assert!(c.validate().is_err());
        c = ReconstructionConfig { sg_polyorder: 51, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
