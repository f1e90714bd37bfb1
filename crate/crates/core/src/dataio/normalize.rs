use serde::{Deserialize, Serialize};

use super::clip::{ClipDataset, FeatureWindow};
use super::features::Modality;
use crate::error::{Error, Result};
use crate::nn::Vector;

/// Per-feature range of one modality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vector,
    pub max: Vector,
}

impl MinMax {
    /// `(v - min) / (max - min)`, or 0 for a constant column. Values outside
    /// the fitted range are not clamped.
    #[inline]
    pub fn normalize(&self, i: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[i], self.max[i]);
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }
}

/// Min-max statistics for all three modalities, plus the clips they were
/// fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub rgb: MinMax,
    pub flow: MinMax,
    pub audio: MinMax,
    pub fitted_on: Vec<String>,
}

impl NormalizationStats {
    pub fn modality(&self, m: Modality) -> &MinMax {
        match m {
            Modality::Rgb => &self.rgb,
            Modality::Flow => &self.flow,
            Modality::Audio => &self.audio,
        }
    }

    /// Normalizes one stored feature row into `out`.
    pub fn normalize_row_into(&self, m: Modality, row: &[f32], out: &mut [f64]) {
        let mm = self.modality(m);
        debug_assert_eq!(row.len(), mm.dim());
        for (i, (o, &v)) in out.iter_mut().zip(row).enumerate() {
            *o = mm.normalize(i, v as f64);
        }
    }
}

pub fn fit_minmax(training_clips: &[&ClipDataset]) -> Result<NormalizationStats> {
    if training_clips.iter().all(|c| c.is_empty()) {
        return Err(Error::InsufficientData("no windows to fit normalization on".into()));
    }
    let fit = |m: Modality| -> MinMax {
        let d = m.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for clip in training_clips {
            let s = clip.stream(m);
            for w in 0..s.windows() {
                for (i, &v) in s.row(w).iter().enumerate() {
                    let v = v as f64;
                    min[i] = min[i].min(v);
                    max[i] = max[i].max(v);
                }
            }
        }
        MinMax {
            min: min.into(),
            max: max.into(),
        }
    };
    Ok(NormalizationStats {
        rgb: fit(Modality::Rgb),
        flow: fit(Modality::Flow),
        audio: fit(Modality::Audio),
        fitted_on: training_clips.iter().map(|c| c.clip_id().to_string()).collect(),
    })
}

pub fn apply_minmax(window: &FeatureWindow, stats: &NormalizationStats) -> Result<FeatureWindow> {
    let map = |m: Modality, v: &Vector| -> Result<Vector> {
        let mm = stats.modality(m);
        if v.len() != mm.dim() {
            return Err(Error::shape("apply_minmax", mm.dim(), v.len()));
        }
        Ok(v.iter()
            .enumerate()
            .map(|(i, &x)| mm.normalize(i, x))
            .collect::<Vec<_>>()
            .into())
    };
    Ok(FeatureWindow {
        index: window.index,
        rgb: map(Modality::Rgb, &window.rgb)?,
        flow: map(Modality::Flow, &window.flow)?,
        audio: map(Modality::Audio, &window.audio)?,
        label_valence: window.label_valence,
        label_arousal: window.label_arousal,
    })
}
