use serde::{Deserialize, Serialize};

use super::annotations::AnnotationTrack;
use super::features::{Modality, ModalityStream};
use crate::error::{Error, Result};
use crate::nn::Vector;

/// Frames at the start of a clip without a complete 10-flow stack or
/// 400 ms audio window.
pub const WARMUP_FRAMES: usize = 9;

/// Largest accepted disagreement between the aligned stream lengths.
pub const LENGTH_TOLERANCE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionDimension {
    Valence,
    Arousal,
}

impl EmotionDimension {
    pub const fn name(self) -> &'static str {
        match self {
            EmotionDimension::Valence => "valence",
            EmotionDimension::Arousal => "arousal",
        }
    }
}

impl std::fmt::Display for EmotionDimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EmotionDimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valence" => Ok(EmotionDimension::Valence),
            "arousal" => Ok(EmotionDimension::Arousal),
            other => Err(Error::invalid(format!(
                "unknown emotion dimension {other:?}; valid names are valence, arousal"
            ))),
        }
    }
}

/// One aligned time step, widened to `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindow {
    /// Annotation frame the window ends at.
    pub index: usize,
    pub rgb: Vector,
    pub flow: Vector,
    pub audio: Vector,
    pub label_valence: f64,
    pub label_arousal: f64,
}

impl FeatureWindow {
    pub fn modality(&self, m: Modality) -> &Vector {
        match m {
            Modality::Rgb => &self.rgb,
            Modality::Flow => &self.flow,
            Modality::Audio => &self.audio,
        }
    }

    pub fn label(&self, d: EmotionDimension) -> f64 {
        match d {
            EmotionDimension::Valence => self.label_valence,
            EmotionDimension::Arousal => self.label_arousal,
        }
    }
}

/// An aligned clip. Features stay in their on-disk `f32` form, one row per
/// window, so a full-length clip fits in memory; [`ClipDataset::window`]
/// materializes a widened [`FeatureWindow`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClipDataset {
    clip_id: String,
    frames: Vec<usize>,
    rgb: ModalityStream,
    flow: ModalityStream,
    audio: ModalityStream,
    valence: Vec<f64>,
    arousal: Vec<f64>,
}

impl ClipDataset {
    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn stream(&self, m: Modality) -> &ModalityStream {
        match m {
            Modality::Rgb => &self.rgb,
            Modality::Flow => &self.flow,
            Modality::Audio => &self.audio,
        }
    }

    pub fn labels(&self, d: EmotionDimension) -> &[f64] {
        match d {
            EmotionDimension::Valence => &self.valence,
            EmotionDimension::Arousal => &self.arousal,
        }
    }

    pub fn window(&self, i: usize) -> FeatureWindow {
        let widen = |s: &ModalityStream| -> Vector {
            s.row(i).iter().map(|&v| v as f64).collect::<Vec<_>>().into()
        };
        FeatureWindow {
            index: self.frames[i],
            rgb: widen(&self.rgb),
            flow: widen(&self.flow),
            audio: widen(&self.audio),
            label_valence: self.valence[i],
            label_arousal: self.arousal[i],
        }
    }

    pub fn windows(&self) -> impl Iterator<Item = FeatureWindow> + '_ {
        (0..self.len()).map(|i| self.window(i))
    }
}

/// Pairs the three streams with the annotation track.
///
/// Unless `pre_aligned`, row `t` of the rgb stream is frame `t`, while row
/// `k` of the flow and audio streams is the window ending at frame
/// `k + WARMUP_FRAMES`; the warm-up frames are dropped. Pre-aligned streams
/// already start at a common frame and map row `i` to annotation frame `i`.
pub fn align_clip(
    clip_id: impl Into<String>,
    rgb: &ModalityStream,
    flow: &ModalityStream,
    audio: &ModalityStream,
    annotations: &AnnotationTrack,
    pre_aligned: bool,
) -> Result<ClipDataset> {
    let clip_id = clip_id.into();
    for (s, want) in [(rgb, Modality::Rgb), (flow, Modality::Flow), (audio, Modality::Audio)] {
        if s.modality() != want {
            return Err(Error::Alignment(format!(
                "{clip_id}: expected a {want} stream, got {}",
                s.modality()
            )));
        }
        if s.windows() == 0 {
            return Err(Error::Alignment(format!("{clip_id}: {want} stream is empty")));
        }
        if s.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature stream"));
        }
    }
    let offset = if pre_aligned { 0 } else { WARMUP_FRAMES };
    if rgb.windows() <= offset {
        return Err(Error::Alignment(format!(
            "{clip_id}: rgb stream has {} frames, fewer than the {offset}-frame warm-up",
            rgb.windows()
        )));
    }
    let lengths = [rgb.windows() - offset, flow.windows(), audio.windows()];
    let n = *lengths.iter().min().expect("three lengths");
    let longest = *lengths.iter().max().expect("three lengths");
    if longest - n > LENGTH_TOLERANCE {
        return Err(Error::Alignment(format!(
            "{clip_id}: aligned stream lengths {lengths:?} differ by more than {LENGTH_TOLERANCE}"
        )));
    }
    if annotations.len() < offset + n {
        return Err(Error::Alignment(format!(
            "{clip_id}: {} annotation frames, need {}",
            annotations.len(),
            offset + n
        )));
    }
    Ok(ClipDataset {
        clip_id,
        frames: (offset..offset + n).collect(),
        rgb: rgb.slice(offset, n),
        flow: flow.slice(0, n),
        audio: audio.slice(0, n),
        valence: annotations.valence()[offset..offset + n].to_vec(),
        arousal: annotations.arousal()[offset..offset + n].to_vec(),
    })
}
