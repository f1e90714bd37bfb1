use rand::Rng;

use super::fusion::{fuse, fuse_backward, fuse_batch, FusionInput, ModalitySet, Projections};
use crate::dataio::FeatureWindow;
use crate::error::Result;
use crate::labeling::NUM_CLASSES;
use crate::nn::{
    dense_backward_batch, dense_forward, dense_forward_batch, join, relu_backward_in_place, relu_in_place,
    softmax_cross_entropy_batch, softmax_temperature, DenseLayerParams, Matrix, ParamView, ParamViewMut,
    Parameters, Vector,
};

pub const HIDDEN_UNITS: usize = 64;

/// Projections, two 64-unit ReLU layers and a 7-way output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FcFusionParams {
    pub projections: Projections,
    pub hidden1: DenseLayerParams,
    pub hidden2: DenseLayerParams,
    pub output: DenseLayerParams,
}

impl FcFusionParams {
    pub fn glorot<R: Rng + ?Sized>(modalities: &ModalitySet, rng: &mut R) -> Self {
        let projections = Projections::glorot(modalities, rng);
        let width = projections.width();
        FcFusionParams {
            projections,
            hidden1: DenseLayerParams::glorot(HIDDEN_UNITS, width, rng),
            hidden2: DenseLayerParams::glorot(HIDDEN_UNITS, HIDDEN_UNITS, rng),
            output: DenseLayerParams::glorot(NUM_CLASSES, HIDDEN_UNITS, rng),
        }
    }

    pub fn zeros(modalities: &ModalitySet) -> Self {
        let projections = Projections::zeros(modalities);
        let width = projections.width();
        FcFusionParams {
            projections,
            hidden1: DenseLayerParams::zeros(HIDDEN_UNITS, width),
            hidden2: DenseLayerParams::zeros(HIDDEN_UNITS, HIDDEN_UNITS),
            output: DenseLayerParams::zeros(NUM_CLASSES, HIDDEN_UNITS),
        }
    }
}

impl Parameters for FcFusionParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        self.projections.visit(prefix, out);
        self.hidden1.visit(&join(prefix, "hidden1"), out);
        self.hidden2.visit(&join(prefix, "hidden2"), out);
        self.output.visit(&join(prefix, "output"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        self.projections.visit_mut(prefix, out);
        self.hidden1.visit_mut(&join(prefix, "hidden1"), out);
        self.hidden2.visit_mut(&join(prefix, "hidden2"), out);
        self.output.visit_mut(&join(prefix, "output"), out);
    }
}

/// Class probabilities for one normalized window.
pub fn fc_forward(window: &FeatureWindow, params: &FcFusionParams, temperature: f64) -> Result<Vector> {
    let z = fuse(window, &params.projections)?;
    let mut a1 = dense_forward(&params.hidden1, &z)?;
    relu_in_place(&mut a1);
    let mut a2 = dense_forward(&params.hidden2, &a1)?;
    relu_in_place(&mut a2);
    let logits = dense_forward(&params.output, &a2)?;
    softmax_temperature(&logits, temperature)
}

pub(crate) struct FcCache {
    fused: Matrix,
    fusion: super::fusion::FusionCache,
    a1: Matrix,
    a2: Matrix,
}

pub(crate) fn fc_logits_batch(params: &FcFusionParams, input: &FusionInput) -> Result<(Matrix, FcCache)> {
    let (fused, fusion) = fuse_batch(&params.projections, input)?;
    let mut a1 = dense_forward_batch(&params.hidden1, &fused)?;
    relu_in_place(a1.as_mut_slice());
    let mut a2 = dense_forward_batch(&params.hidden2, &a1)?;
    relu_in_place(a2.as_mut_slice());
    let logits = dense_forward_batch(&params.output, &a2)?;
    Ok((logits, FcCache { fused, fusion, a1, a2 }))
}

/// Mean temperature-softmax cross-entropy over the batch and its gradient
/// with respect to every parameter.
pub fn fc_loss_and_gradients(
    params: &FcFusionParams,
    input: &FusionInput,
    targets: &[usize],
    temperature: f64,
) -> Result<(f64, FcFusionParams)> {
    let (logits, cache) = fc_logits_batch(params, input)?;
    let ce = softmax_cross_entropy_batch(&logits, targets, temperature)?;
    let mut grads = FcFusionParams::zeros(&params.projections.modalities());

    let mut g2 = dense_backward_batch(&params.output, &cache.a2, &ce.grad_logits, &mut grads.output, true)?
        .expect("input grad requested");
    relu_backward_in_place(cache.a2.as_slice(), g2.as_mut_slice());
    let mut g1 = dense_backward_batch(&params.hidden2, &cache.a1, &g2, &mut grads.hidden2, true)?
        .expect("input grad requested");
    relu_backward_in_place(cache.a1.as_slice(), g1.as_mut_slice());
    let gz = dense_backward_batch(&params.hidden1, &cache.fused, &g1, &mut grads.hidden1, true)?
        .expect("input grad requested");
    fuse_backward(&params.projections, input, &cache.fusion, &gz, &mut grads.projections)?;
    Ok((ce.loss, grads))
}
