use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{ClipDataset, FeatureWindow, Modality, NormalizationStats};
use crate::error::{Error, Result};
use crate::nn::{
    dense_backward_batch, dense_forward, dense_forward_batch, join, relu_backward_in_place, relu_in_place,
    DenseLayerParams, Matrix, ParamView, ParamViewMut, Parameters, Vector,
};

/// Width of each per-modality projection.
pub const PROJECTION_UNITS: usize = 128;

/// A nonempty subset of modalities, kept in canonical (rgb, flow, audio)
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Modality>", into = "Vec<Modality>")]
pub struct ModalitySet(Vec<Modality>);

impl ModalitySet {
    pub fn new(modalities: impl IntoIterator<Item = Modality>) -> Result<Self> {
        let mut v: Vec<Modality> = modalities.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::invalid("modality subset must not be empty"));
        }
        Ok(ModalitySet(v))
    }

    pub fn all() -> Self {
        ModalitySet(Modality::ALL.to_vec())
    }

    /// Parses a comma-separated list such as `rgb,flow`.
    pub fn parse_list(s: &str) -> Result<Self> {
        ModalitySet::new(
            s.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(str::parse)
                .collect::<Result<Vec<Modality>>>()?,
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = Modality> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.0.contains(&m)
    }

    /// Row label in the results table, e.g. `RGB frame + OF + Audio`.
    pub fn table_label(&self) -> String {
        self.iter()
            .map(|m| match (m, self.len()) {
                (Modality::Rgb, _) => "RGB frame",
                (Modality::Flow, 1) => "Optical Flow (OF)",
                (Modality::Flow, _) => "OF",
                (Modality::Audio, _) => "Audio",
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl TryFrom<Vec<Modality>> for ModalitySet {
    type Error = Error;
    fn try_from(v: Vec<Modality>) -> Result<Self> {
        ModalitySet::new(v)
    }
}

impl From<ModalitySet> for Vec<Modality> {
    fn from(s: ModalitySet) -> Self {
        s.0
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Modality::name).collect();
        f.write_str(&names.join(","))
    }
}

/// One 128-unit projection per included modality. Excluded modalities have
/// no branch at all, so ablated models carry fewer parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Projections {
    branches: Vec<(Modality, DenseLayerParams)>,
}

impl Projections {
    pub fn glorot<R: Rng + ?Sized>(modalities: &ModalitySet, rng: &mut R) -> Self {
        Projections {
            branches: modalities
                .iter()
                .map(|m| (m, DenseLayerParams::glorot(PROJECTION_UNITS, m.dim(), rng)))
                .collect(),
        }
    }

    pub fn zeros(modalities: &ModalitySet) -> Self {
        Projections {
            branches: modalities
                .iter()
                .map(|m| (m, DenseLayerParams::zeros(PROJECTION_UNITS, m.dim())))
                .collect(),
        }
    }

    /// Builds from explicit layers; each must map its modality's width to
    /// 128 units.
    pub fn from_layers(layers: Vec<(Modality, DenseLayerParams)>) -> Result<Self> {
        let set = ModalitySet::new(layers.iter().map(|(m, _)| *m))?;
        if set.len() != layers.len() {
            return Err(Error::invalid("duplicate projection branch"));
        }
        let mut branches = layers;
        branches.sort_by_key(|(m, _)| *m);
        for (m, l) in &branches {
            if l.input_dim() != m.dim() || l.output_dim() != PROJECTION_UNITS {
                return Err(Error::shape(
                    "projection layer",
                    format!("{PROJECTION_UNITS}x{}", m.dim()),
                    format!("{}x{}", l.output_dim(), l.input_dim()),
                ));
            }
        }
        Ok(Projections { branches })
    }

    pub fn modalities(&self) -> ModalitySet {
        ModalitySet(self.branches.iter().map(|(m, _)| *m).collect())
    }

    pub fn get(&self, m: Modality) -> Option<&DenseLayerParams> {
        self.branches.iter().find(|(b, _)| *b == m).map(|(_, l)| l)
    }

    pub fn branches(&self) -> impl Iterator<Item = (Modality, &DenseLayerParams)> {
        self.branches.iter().map(|(m, l)| (*m, l))
    }

    /// Width of the concatenated fused vector.
    pub fn width(&self) -> usize {
        PROJECTION_UNITS * self.branches.len()
    }
}

impl Parameters for Projections {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        for (m, l) in &self.branches {
            l.visit(&join(prefix, &format!("proj_{m}")), out);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        for (m, l) in &mut self.branches {
            l.visit_mut(&join(prefix, &format!("proj_{m}")), out);
        }
    }
}

/// Concatenation of the ReLU-activated projections of one window.
pub fn fuse(window: &FeatureWindow, projections: &Projections) -> Result<Vector> {
    let mut out = Vec::with_capacity(projections.width());
    for (m, layer) in projections.branches() {
        let mut p = dense_forward(layer, window.modality(m))?;
        relu_in_place(&mut p);
        out.extend_from_slice(&p);
    }
    Ok(out.into())
}

/// Normalized inputs of a batch at one time step: one `batch × dim` block
/// per modality of the model, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionInput {
    pub blocks: Vec<(Modality, Matrix)>,
}

impl FusionInput {
    pub fn batch_size(&self) -> usize {
        self.blocks.first().map_or(0, |(_, m)| m.rows())
    }

    pub fn from_windows(windows: &[&FeatureWindow], modalities: &ModalitySet) -> Self {
        FusionInput {
            blocks: modalities
                .iter()
                .map(|m| {
                    let rows: Vec<&[f64]> = windows.iter().map(|w| &w.modality(m)[..]).collect();
                    let mut mat = Matrix::zeros(rows.len(), m.dim());
                    for (r, src) in rows.iter().enumerate() {
                        mat.row_mut(r).copy_from_slice(src);
                    }
                    (m, mat)
                })
                .collect(),
        }
    }

    /// Builds a batch straight from stored clip rows, normalizing on the way.
    /// Each item is `(clip, window)` indexing into `clips`.
    pub fn gather(
        clips: &[&ClipDataset],
        items: &[(usize, usize)],
        modalities: &ModalitySet,
        stats: &NormalizationStats,
    ) -> Self {
        FusionInput {
            blocks: modalities
                .iter()
                .map(|m| {
                    let mut mat = Matrix::zeros(items.len(), m.dim());
                    for (r, &(c, w)) in items.iter().enumerate() {
                        stats.normalize_row_into(m, clips[c].stream(m).row(w), mat.row_mut(r));
                    }
                    (m, mat)
                })
                .collect(),
        }
    }
}

pub(crate) struct FusionCache {
    activations: Vec<Matrix>,
}

pub(crate) fn fuse_batch(projections: &Projections, input: &FusionInput) -> Result<(Matrix, FusionCache)> {
    if input.blocks.len() != projections.branches.len() {
        return Err(Error::shape("fused modalities", projections.branches.len(), input.blocks.len()));
    }
    let mut activations = Vec::with_capacity(input.blocks.len());
    for ((m, layer), (im, x)) in projections.branches.iter().zip(&input.blocks) {
        if m != im {
            return Err(Error::invalid(format!("fusion input block {im} where {m} was expected")));
        }
        let mut a = dense_forward_batch(layer, x)?;
        relu_in_place(a.as_mut_slice());
        activations.push(a);
    }
    let fused = Matrix::hcat(&activations.iter().collect::<Vec<_>>())?;
    Ok((fused, FusionCache { activations }))
}

pub(crate) fn fuse_backward(
    projections: &Projections,
    input: &FusionInput,
    cache: &FusionCache,
    grad_fused: &Matrix,
    grads: &mut Projections,
) -> Result<()> {
    for (k, ((_, layer), (_, x))) in projections.branches.iter().zip(&input.blocks).enumerate() {
        let mut g = grad_fused.column_block(k * PROJECTION_UNITS, PROJECTION_UNITS);
        relu_backward_in_place(cache.activations[k].as_slice(), g.as_mut_slice());
        dense_backward_batch(layer, x, &g, &mut grads.branches[k].1, false)?;
    }
    Ok(())
}
