use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 7;

/// Width of one bin over `[-1, 1]`.
pub const BIN_WIDTH: f64 = 2.0 / NUM_CLASSES as f64;

/// A quantized emotion value: class 0 is the most negative bin, 6 the most
/// positive, 3 is centred on neutral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EmotionLabel(u8);

impl EmotionLabel {
    pub fn new(class_index: usize) -> Result<Self> {
        if class_index < NUM_CLASSES {
            Ok(EmotionLabel(class_index as u8))
        } else {
            Err(Error::invalid(format!(
                "class index {class_index} outside 0..{NUM_CLASSES}"
            )))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn center(self) -> f64 {
        -1.0 + BIN_WIDTH * (self.index() as f64 + 0.5)
    }
}

impl TryFrom<u8> for EmotionLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        EmotionLabel::new(v as usize)
    }
}

impl From<EmotionLabel> for u8 {
    fn from(l: EmotionLabel) -> u8 {
        l.0
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Equal-width binning of `[-1, 1]` into seven classes. Bins are half-open
/// `[edge, next)` except the top one, which also holds 1.0. Out-of-range
/// input is clamped first.
pub fn quantize(value: f64) -> Result<EmotionLabel> {
    if !value.is_finite() {
        return Err(Error::NonFinite("quantize input"));
    }
    let v = value.clamp(-1.0, 1.0);
    // (v + 1) / (2/7) == (v + 1) * 3.5, and 3.5 is exact
    let bin = ((v + 1.0) * (NUM_CLASSES as f64 / 2.0)).floor() as usize;
    Ok(EmotionLabel(bin.min(NUM_CLASSES - 1) as u8))
}

pub fn bin_center(class_index: usize) -> Result<f64> {
    Ok(EmotionLabel::new(class_index)?.center())
}
