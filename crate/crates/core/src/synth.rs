//! Synthetic datasets with a known emotion-to-feature mapping, and
//! straight-line reference implementations of the model equations.
//!
//! Latent valence and arousal drift periodically. Every feature of every
//! modality is a fixed affine function of the two latents (shared by all
//! clips) blended with Gaussian noise: `s·(a·v + b·u + c) + (1 − s)·ε`,
//! where `s` is the separability.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    align_clip, write_annotations, write_feature_file, write_manifest, AnnotationTrack, ClipDataset, ClipManifest,
    FeatureWindow, Modality, ModalityStream, WARMUP_FRAMES,
};
use crate::error::{Error, Result};
use crate::labeling::NUM_CLASSES;
use crate::models::{FcFusionParams, LstmCellParams, LstmState};
use crate::nn::{DenseLayerParams, Vector};

/// Sharpness of the periodic drift. At 1 the drift is a triangle wave, whose
/// values are uniform over [-1, 1]; slightly below 1 it stays uniform enough
/// for balanced classes while rounding the turning points.
const DRIFT_SHAPE: f64 = 0.999;
/// Arousal period relative to valence, so the two never lock in phase.
const AROUSAL_PERIOD_RATIO: f64 = 1.37;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub clips: usize,
    pub frames_per_clip: usize,
    pub seed: u64,
    /// 1 gives noiseless features, 0 pure noise.
    pub separability: f64,
    /// Valence period in frames.
    pub drift_period: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            clips: 12,
            frames_per_clip: 2000,
            seed: 0,
            separability: 1.0,
            drift_period: 400.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clips < 2 {
            return Err(Error::invalid(format!(
                "clips must be at least 2 for leave-one-out, got {}",
                self.clips
            )));
        }
        if self.frames_per_clip < 100 {
            return Err(Error::invalid(format!(
                "frames_per_clip must be at least 100, got {}",
                self.frames_per_clip
            )));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return Err(Error::invalid(format!(
                "separability must lie in [0, 1], got {}",
                self.separability
            )));
        }
        if !(self.drift_period >= 2.0 && self.drift_period.is_finite()) {
            return Err(Error::invalid(format!(
                "drift_period must be at least 2 frames, got {}",
                self.drift_period
            )));
        }
        Ok(())
    }
}

/// Raw files of one clip before alignment, in the on-disk layout: one RGB
/// row per frame, flow and audio rows for frames 9.. onwards.
#[derive(Clone, Debug)]
pub struct SynthClip {
    pub clip_id: String,
    pub rgb: ModalityStream,
    pub flow: ModalityStream,
    pub audio: ModalityStream,
    pub annotations: AnnotationTrack,
}

impl SynthClip {
    pub fn align(&self) -> Result<ClipDataset> {
        align_clip(self.clip_id.clone(), &self.rgb, &self.flow, &self.audio, &self.annotations, false)
    }
}

struct Embedding {
    // per feature: weight on valence, weight on arousal, offset
    coef: Vec<[f64; 3]>,
}

fn drift(t: f64, period: f64, phase: f64) -> f64 {
    (DRIFT_SHAPE * (2.0 * PI * t / period + phase).sin()).asin() / DRIFT_SHAPE.asin()
}

pub fn synthesize(spec: &SynthSpec) -> Result<Vec<SynthClip>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let embeddings: Vec<Embedding> = Modality::ALL
        .iter()
        .map(|m| Embedding {
            coef: (0..m.dim())
                .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
                .collect(),
        })
        .collect();

    let s = spec.separability;
    let n = spec.frames_per_clip;
    let mut clips = Vec::with_capacity(spec.clips);
    for c in 0..spec.clips {
        let phase_v = rng.gen_range(0.0..2.0 * PI);
        let phase_a = rng.gen_range(0.0..2.0 * PI);
        let valence: Vec<f64> = (0..n).map(|t| drift(t as f64, spec.drift_period, phase_v)).collect();
        let arousal: Vec<f64> = (0..n)
            .map(|t| drift(t as f64, spec.drift_period * AROUSAL_PERIOD_RATIO, phase_a))
            .collect();

        let mut streams = Vec::with_capacity(3);
        for (m, emb) in Modality::ALL.iter().zip(&embeddings) {
            // flow stacks and audio segments need the 9 preceding frames
            let start = if *m == Modality::Rgb { 0 } else { WARMUP_FRAMES };
            let mut values = Vec::with_capacity((n - start) * m.dim());
            for t in start..n {
                let (v, a) = (valence[t], arousal[t]);
                for k in &emb.coef {
                    let signal = k[0] * v + k[1] * a + k[2];
                    let noise: f64 = if s < 1.0 { rng.sample(StandardNormal) } else { 0.0 };
                    values.push((s * signal + (1.0 - s) * noise) as f32);
                }
            }
            streams.push(ModalityStream::new(*m, n - start, values)?);
        }
        let audio = streams.pop().expect("3 streams");
        let flow = streams.pop().expect("3 streams");
        let rgb = streams.pop().expect("3 streams");
        clips.push(SynthClip {
            clip_id: format!("synth_{c:02}"),
            rgb,
            flow,
            audio,
            annotations: AnnotationTrack::new(valence, arousal)?,
        });
    }
    Ok(clips)
}

/// Aligned clips, skipping the file round trip.
pub fn synthesize_datasets(spec: &SynthSpec) -> Result<Vec<ClipDataset>> {
    synthesize(spec)?.iter().map(SynthClip::align).collect()
}

/// Writes feature files, annotations and `manifest.json` under `dir` and
/// returns the manifest path.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    let clips = synthesize(spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(clips.len());
    for clip in &clips {
        let name = |suffix: &str| PathBuf::from(format!("{}_{suffix}", clip.clip_id));
        let entry = ClipManifest {
            clip_id: clip.clip_id.clone(),
            rgb: name("rgb.aff"),
            flow: name("flow.aff"),
            audio: name("audio.aff"),
            annotations: name("annotations.csv"),
            pre_aligned: false,
        };
        write_feature_file(dir.join(&entry.rgb), &clip.rgb)?;
        write_feature_file(dir.join(&entry.flow), &clip.flow)?;
        write_feature_file(dir.join(&entry.audio), &clip.audio)?;
        write_annotations(dir.join(&entry.annotations), &clip.annotations)?;
        entries.push(entry);
    }
    let manifest = dir.join("manifest.json");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

// Reference implementations. These deliberately avoid the production layer
// and tensor code and use index loops over the raw parameter storage.

fn oracle_dense(layer: &DenseLayerParams, x: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
    if x.len() != cols || layer.bias.len() != rows {
        return Err(Error::shape("oracle dense input", cols, x.len()));
    }
    let w = layer.weights.as_slice();
    let mut y = vec![0.0; rows];
    for i in 0..rows {
        let mut acc = layer.bias[i];
        for j in 0..cols {
            acc += w[i * cols + j] * x[j];
        }
        y[i] = acc;
    }
    Ok(y)
}

fn oracle_relu(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Reference for the FC model's forward pass.
pub fn oracle_forward_fc(window: &FeatureWindow, params: &FcFusionParams, temperature: f64) -> Result<Vector> {
    let mut fused = Vec::new();
    for (m, layer) in params.projections.branches() {
        let mut p = oracle_dense(layer, window.modality(m))?;
        oracle_relu(&mut p);
        fused.extend(p);
    }
    let mut h1 = oracle_dense(&params.hidden1, &fused)?;
    oracle_relu(&mut h1);
    let mut h2 = oracle_dense(&params.hidden2, &h1)?;
    oracle_relu(&mut h2);
    let z = oracle_dense(&params.output, &h2)?;
    if z.len() != NUM_CLASSES {
        return Err(Error::shape("oracle output", NUM_CLASSES, z.len()));
    }
    let mut top = z[0];
    for &v in &z {
        if v > top {
            top = v;
        }
    }
    let mut e = vec![0.0; z.len()];
    let mut total = 0.0;
    for k in 0..z.len() {
        e[k] = ((z[k] - top) / temperature).exp();
        total += e[k];
    }
    for v in e.iter_mut() {
        *v /= total;
    }
    Ok(e.into())
}

/// Reference for one LSTM cell update, one scalar at a time.
pub fn oracle_lstm_step(params: &LstmCellParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    let hidden = params.w_xf.rows();
    let input = params.w_xf.cols();
    if x.len() != input {
        return Err(Error::shape("oracle lstm input", input, x.len()));
    }
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::shape("oracle lstm state", hidden, prev.h.len()));
    }
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
    let gate = |wx: &crate::nn::Matrix, wh: &crate::nn::Matrix, b: &Vector, k: usize| -> f64 {
        let mut acc = b[k];
        for j in 0..input {
            acc += wx.as_slice()[k * input + j] * x[j];
        }
        for j in 0..hidden {
            acc += wh.as_slice()[k * hidden + j] * prev.h[j];
        }
        acc
    };
    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        let f = sigmoid(gate(&params.w_xf, &params.w_hf, &params.b_f, k));
        let i = sigmoid(gate(&params.w_xi, &params.w_hi, &params.b_i, k));
        let g = gate(&params.w_xc, &params.w_hc, &params.b_c, k).tanh();
        let o = sigmoid(gate(&params.w_xo, &params.w_ho, &params.b_o, k));
        c[k] = f * prev.c[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    Ok(LstmState { c: c.into(), h: h.into() })
}
