//! Two-layer LSTM fusion model with backpropagation through time.
//!
//! Each cell follows
//!
//! ```text
//! f_t = σ(W_xf x_t + W_hf h_{t-1} + b_f)
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + b_i)
//! g_t = tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fc::HIDDEN_UNITS;
use super::fusion::{fuse, fuse_backward, fuse_batch, FusionCache, FusionInput, ModalitySet, Projections};
use crate::dataio::FeatureWindow;
use crate::error::{Error, Result};
use crate::labeling::NUM_CLASSES;
use crate::nn::{
    dense_backward_batch, dense_forward, dense_forward_batch, gemm, glorot_matrix, join, sigmoid,
    softmax_cross_entropy_batch, softmax_temperature, DenseLayerParams, Matrix, Op, ParamRole, ParamView,
    ParamViewMut, Parameters, Vector,
};

/// How many windows a sequence holds and how many windows apart they are.
/// The default spans 5 steps of 400 ms (10 frames at 25 fps), i.e. 2 s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLayout {
    pub length: usize,
    pub stride: usize,
}

impl Default for SequenceLayout {
    fn default() -> Self {
        SequenceLayout { length: 5, stride: 10 }
    }
}

impl SequenceLayout {
    /// Windows covered from the first to the last step, inclusive.
    pub fn span(&self) -> usize {
        (self.length - 1) * self.stride + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.stride == 0 {
            return Err(Error::invalid(format!(
                "sequence length and stride must be positive, got {}/{}",
                self.length, self.stride
            )));
        }
        Ok(())
    }

    /// Window indices of the sequence ending at `end`.
    pub fn indices(&self, end: usize) -> impl Iterator<Item = usize> + '_ {
        let first = end + 1 - self.span();
        (0..self.length).map(move |s| first + s * self.stride)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_xf: Matrix,
    pub w_xi: Matrix,
    pub w_xc: Matrix,
    pub w_xo: Matrix,
    pub w_hf: Matrix,
    pub w_hi: Matrix,
    pub w_hc: Matrix,
    pub w_ho: Matrix,
    pub b_f: Vector,
    pub b_i: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let x = || Matrix::zeros(hidden, input);
        let h = || Matrix::zeros(hidden, hidden);
        let b = || Vector::zeros(hidden);
        LstmCellParams {
            w_xf: x(),
            w_xi: x(),
            w_xc: x(),
            w_xo: x(),
            w_hf: h(),
            w_hi: h(),
            w_hc: h(),
            w_ho: h(),
            b_f: b(),
            b_i: b(),
            b_c: b(),
            b_o: b(),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = LstmCellParams::zeros(input, hidden);
        for m in [&mut p.w_xf, &mut p.w_xi, &mut p.w_xc, &mut p.w_xo] {
            *m = glorot_matrix(hidden, input, rng);
        }
        for m in [&mut p.w_hf, &mut p.w_hi, &mut p.w_hc, &mut p.w_ho] {
            *m = glorot_matrix(hidden, hidden, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_xf.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xf.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, n) = (self.hidden_dim(), self.input_dim());
        for m in [&self.w_xf, &self.w_xi, &self.w_xc, &self.w_xo] {
            if m.shape() != (h, n) {
                return Err(Error::shape("LSTM input weights", format!("{h}x{n}"), format!("{:?}", m.shape())));
            }
        }
        for m in [&self.w_hf, &self.w_hi, &self.w_hc, &self.w_ho] {
            if m.shape() != (h, h) {
                return Err(Error::shape("LSTM recurrent weights", format!("{h}x{h}"), format!("{:?}", m.shape())));
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_c, &self.b_o] {
            if b.len() != h {
                return Err(Error::shape("LSTM bias", h, b.len()));
            }
        }
        Ok(())
    }

    fn gates(&self) -> [(&Matrix, &Matrix, &Vector); 4] {
        [
            (&self.w_xf, &self.w_hf, &self.b_f),
            (&self.w_xi, &self.w_hi, &self.b_i),
            (&self.w_xc, &self.w_hc, &self.b_c),
            (&self.w_xo, &self.w_ho, &self.b_o),
        ]
    }
}

impl Parameters for LstmCellParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        let w = ParamRole::Weight;
        for (name, m) in [
            ("w_xf", &self.w_xf),
            ("w_xi", &self.w_xi),
            ("w_xc", &self.w_xc),
            ("w_xo", &self.w_xo),
            ("w_hf", &self.w_hf),
            ("w_hi", &self.w_hi),
            ("w_hc", &self.w_hc),
            ("w_ho", &self.w_ho),
        ] {
            out.push(ParamView::matrix(join(prefix, name), m, w));
        }
        for (name, b) in [("b_f", &self.b_f), ("b_i", &self.b_i), ("b_c", &self.b_c), ("b_o", &self.b_o)] {
            out.push(ParamView::vector(join(prefix, name), b, ParamRole::Bias));
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        let w = ParamRole::Weight;
        for (name, m) in [
            ("w_xf", &mut self.w_xf),
            ("w_xi", &mut self.w_xi),
            ("w_xc", &mut self.w_xc),
            ("w_xo", &mut self.w_xo),
            ("w_hf", &mut self.w_hf),
            ("w_hi", &mut self.w_hi),
            ("w_hc", &mut self.w_hc),
            ("w_ho", &mut self.w_ho),
        ] {
            out.push(ParamViewMut::matrix(join(prefix, name), m, w));
        }
        for (name, b) in [
            ("b_f", &mut self.b_f),
            ("b_i", &mut self.b_i),
            ("b_c", &mut self.b_c),
            ("b_o", &mut self.b_o),
        ] {
            out.push(ParamViewMut::vector(join(prefix, name), b, ParamRole::Bias));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub c: Vector,
    pub h: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            c: Vector::zeros(hidden),
            h: Vector::zeros(hidden),
        }
    }
}

/// One cell update; the new hidden output is `state.h` of the result.
pub fn lstm_cell_step(params: &LstmCellParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    let h = params.hidden_dim();
    if x.len() != params.input_dim() {
        return Err(Error::shape("lstm_cell_step input", params.input_dim(), x.len()));
    }
    if prev.h.len() != h || prev.c.len() != h {
        return Err(Error::shape("lstm_cell_step state", h, prev.h.len().max(prev.c.len())));
    }
    let pre = |wx: &Matrix, wh: &Matrix, b: &Vector| -> Result<Vec<f64>> {
        let a = wx.matvec(x)?;
        let r = wh.matvec(&prev.h)?;
        Ok(a.iter().zip(r.iter()).zip(b.iter()).map(|((a, r), b)| a + r + b).collect())
    };
    let f: Vec<f64> = pre(&params.w_xf, &params.w_hf, &params.b_f)?.into_iter().map(sigmoid).collect();
    let i: Vec<f64> = pre(&params.w_xi, &params.w_hi, &params.b_i)?.into_iter().map(sigmoid).collect();
    let g: Vec<f64> = pre(&params.w_xc, &params.w_hc, &params.b_c)?.into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = pre(&params.w_xo, &params.w_ho, &params.b_o)?.into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..h).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let hn: Vec<f64> = (0..h).map(|k| o[k] * c[k].tanh()).collect();
    Ok(LstmState { c: c.into(), h: hn.into() })
}

/// Projections, two stacked 64-unit LSTM layers and the 7-way output layer
/// applied to the top layer's final hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmFusionParams {
    pub projections: Projections,
    pub layer1: LstmCellParams,
    pub layer2: LstmCellParams,
    pub output: DenseLayerParams,
    pub sequence: SequenceLayout,
}

impl LstmFusionParams {
    pub fn glorot<R: Rng + ?Sized>(modalities: &ModalitySet, sequence: SequenceLayout, rng: &mut R) -> Self {
        let projections = Projections::glorot(modalities, rng);
        let width = projections.width();
        LstmFusionParams {
            projections,
            layer1: LstmCellParams::glorot(width, HIDDEN_UNITS, rng),
            layer2: LstmCellParams::glorot(HIDDEN_UNITS, HIDDEN_UNITS, rng),
            output: DenseLayerParams::glorot(NUM_CLASSES, HIDDEN_UNITS, rng),
            sequence,
        }
    }

    pub fn zeros(modalities: &ModalitySet, sequence: SequenceLayout) -> Self {
        let projections = Projections::zeros(modalities);
        let width = projections.width();
        LstmFusionParams {
            projections,
            layer1: LstmCellParams::zeros(width, HIDDEN_UNITS),
            layer2: LstmCellParams::zeros(HIDDEN_UNITS, HIDDEN_UNITS),
            output: DenseLayerParams::zeros(NUM_CLASSES, HIDDEN_UNITS),
            sequence,
        }
    }
}

impl Parameters for LstmFusionParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        self.projections.visit(prefix, out);
        self.layer1.visit(&join(prefix, "lstm1"), out);
        self.layer2.visit(&join(prefix, "lstm2"), out);
        self.output.visit(&join(prefix, "output"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        self.projections.visit_mut(prefix, out);
        self.layer1.visit_mut(&join(prefix, "lstm1"), out);
        self.layer2.visit_mut(&join(prefix, "lstm2"), out);
        self.output.visit_mut(&join(prefix, "output"), out);
    }
}

/// Class probabilities for one sequence of normalized windows. Both layers
/// start from a zero state.
pub fn lstm_forward(sequence: &[FeatureWindow], params: &LstmFusionParams, temperature: f64) -> Result<Vector> {
    if sequence.len() != params.sequence.length {
        return Err(Error::shape("lstm_forward sequence length", params.sequence.length, sequence.len()));
    }
    let mut s1 = LstmState::zeros(params.layer1.hidden_dim());
    let mut s2 = LstmState::zeros(params.layer2.hidden_dim());
    for w in sequence {
        let z = fuse(w, &params.projections)?;
        s1 = lstm_cell_step(&params.layer1, &z, &s1)?;
        s2 = lstm_cell_step(&params.layer2, &s1.h, &s2)?;
    }
    let logits = dense_forward(&params.output, &s2.h)?;
    softmax_temperature(&logits, temperature)
}

struct CellCache {
    x: Matrix,
    h_prev: Matrix,
    c_prev: Matrix,
    f: Matrix,
    i: Matrix,
    g: Matrix,
    o: Matrix,
    tanh_c: Matrix,
}

fn cell_forward_batch(p: &LstmCellParams, x: &Matrix, h_prev: &Matrix, c_prev: &Matrix) -> Result<(CellCache, Matrix, Matrix)> {
    let (b, h) = (x.rows(), p.hidden_dim());
    let mut gates = Vec::with_capacity(4);
    for (k, (wx, wh, bias)) in p.gates().into_iter().enumerate() {
        let mut a = Matrix::zeros(b, h);
        for r in 0..b {
            a.row_mut(r).copy_from_slice(bias);
        }
        gemm(1.0, x, Op::N, wx, Op::T, 1.0, &mut a)?;
        gemm(1.0, h_prev, Op::N, wh, Op::T, 1.0, &mut a)?;
        let act: fn(f64) -> f64 = if k == 2 { f64::tanh } else { sigmoid };
        a.as_mut_slice().iter_mut().for_each(|v| *v = act(*v));
        gates.push(a);
    }
    let o = gates.pop().expect("4 gates");
    let g = gates.pop().expect("4 gates");
    let i = gates.pop().expect("4 gates");
    let f = gates.pop().expect("4 gates");
    let mut c = Matrix::zeros(b, h);
    let mut tanh_c = Matrix::zeros(b, h);
    let mut hn = Matrix::zeros(b, h);
    for k in 0..b * h {
        let cv = f.as_slice()[k] * c_prev.as_slice()[k] + i.as_slice()[k] * g.as_slice()[k];
        c.as_mut_slice()[k] = cv;
        let t = cv.tanh();
        tanh_c.as_mut_slice()[k] = t;
        hn.as_mut_slice()[k] = o.as_slice()[k] * t;
    }
    let cache = CellCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        f,
        i,
        g,
        o,
        tanh_c,
    };
    Ok((cache, hn, c))
}

/// Backward through one cell. Returns `(dx, dh_prev, dc_prev)`.
fn cell_backward_batch(
    p: &LstmCellParams,
    cache: &CellCache,
    dh: &Matrix,
    dc_next: &Matrix,
    grads: &mut LstmCellParams,
) -> Result<(Matrix, Matrix, Matrix)> {
    let (b, h) = (dh.rows(), p.hidden_dim());
    let mut da_f = Matrix::zeros(b, h);
    let mut da_i = Matrix::zeros(b, h);
    let mut da_g = Matrix::zeros(b, h);
    let mut da_o = Matrix::zeros(b, h);
    let mut dc_prev = Matrix::zeros(b, h);
    for k in 0..b * h {
        let (f, i, g, o, t) = (
            cache.f.as_slice()[k],
            cache.i.as_slice()[k],
            cache.g.as_slice()[k],
            cache.o.as_slice()[k],
            cache.tanh_c.as_slice()[k],
        );
        let dhk = dh.as_slice()[k];
        let dc = dhk * o * (1.0 - t * t) + dc_next.as_slice()[k];
        da_o.as_mut_slice()[k] = dhk * t * o * (1.0 - o);
        da_f.as_mut_slice()[k] = dc * cache.c_prev.as_slice()[k] * f * (1.0 - f);
        da_i.as_mut_slice()[k] = dc * g * i * (1.0 - i);
        da_g.as_mut_slice()[k] = dc * i * (1.0 - g * g);
        dc_prev.as_mut_slice()[k] = dc * f;
    }
    let mut dx = Matrix::zeros(b, p.input_dim());
    let mut dh_prev = Matrix::zeros(b, h);
    let parts = [
        (&da_f, &p.w_xf, &p.w_hf, &mut grads.w_xf, &mut grads.w_hf, &mut grads.b_f),
        (&da_i, &p.w_xi, &p.w_hi, &mut grads.w_xi, &mut grads.w_hi, &mut grads.b_i),
        (&da_g, &p.w_xc, &p.w_hc, &mut grads.w_xc, &mut grads.w_hc, &mut grads.b_c),
        (&da_o, &p.w_xo, &p.w_ho, &mut grads.w_xo, &mut grads.w_ho, &mut grads.b_o),
    ];
    for (da, wx, wh, gwx, gwh, gb) in parts {
        gemm(1.0, da, Op::T, &cache.x, Op::N, 1.0, gwx)?;
        gemm(1.0, da, Op::T, &cache.h_prev, Op::N, 1.0, gwh)?;
        for r in 0..b {
            for (acc, d) in gb.iter_mut().zip(da.row(r)) {
                *acc += d;
            }
        }
        gemm(1.0, da, Op::N, wx, Op::N, 1.0, &mut dx)?;
        gemm(1.0, da, Op::N, wh, Op::N, 1.0, &mut dh_prev)?;
    }
    Ok((dx, dh_prev, dc_prev))
}

/// Runs one layer over all steps from a zero state.
fn layer_forward(p: &LstmCellParams, xs: &[Matrix]) -> Result<(Vec<CellCache>, Vec<Matrix>)> {
    let b = xs.first().map_or(0, |x| x.rows());
    let mut h = Matrix::zeros(b, p.hidden_dim());
    let mut c = Matrix::zeros(b, p.hidden_dim());
    let mut caches = Vec::with_capacity(xs.len());
    let mut hs = Vec::with_capacity(xs.len());
    for x in xs {
        let (cache, hn, cn) = cell_forward_batch(p, x, &h, &c)?;
        caches.push(cache);
        hs.push(hn.clone());
        h = hn;
        c = cn;
    }
    Ok((caches, hs))
}

/// Backpropagation through time for one layer. `dh_external[t]` is the loss
/// gradient reaching `h_t` from outside the recurrence.
fn layer_backward(
    p: &LstmCellParams,
    caches: &[CellCache],
    dh_external: &[Matrix],
    grads: &mut LstmCellParams,
) -> Result<Vec<Matrix>> {
    let b = dh_external.first().map_or(0, |m| m.rows());
    let h = p.hidden_dim();
    let mut dh_next = Matrix::zeros(b, h);
    let mut dc_next = Matrix::zeros(b, h);
    let mut dxs = vec![Matrix::zeros(0, 0); caches.len()];
    for t in (0..caches.len()).rev() {
        let mut dh = dh_external[t].clone();
        dh.as_mut_slice().iter_mut().zip(dh_next.as_slice()).for_each(|(a, b)| *a += b);
        let (dx, dh_prev, dc_prev) = cell_backward_batch(p, &caches[t], &dh, &dc_next, grads)?;
        dxs[t] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Ok(dxs)
}

struct LstmCache {
    fusions: Vec<FusionCache>,
    layer1: Vec<CellCache>,
    layer2: Vec<CellCache>,
    last_h: Matrix,
}

fn lstm_logits_cached(params: &LstmFusionParams, steps: &[FusionInput]) -> Result<(Matrix, LstmCache)> {
    if steps.len() != params.sequence.length {
        return Err(Error::shape("LSTM batch sequence length", params.sequence.length, steps.len()));
    }
    let mut fused = Vec::with_capacity(steps.len());
    let mut fusions = Vec::with_capacity(steps.len());
    for s in steps {
        let (z, cache) = fuse_batch(&params.projections, s)?;
        fused.push(z);
        fusions.push(cache);
    }
    let (layer1, h1) = layer_forward(&params.layer1, &fused)?;
    let (layer2, h2) = layer_forward(&params.layer2, &h1)?;
    let last_h = h2.last().expect("nonempty sequence").clone();
    let logits = dense_forward_batch(&params.output, &last_h)?;
    Ok((
        logits,
        LstmCache {
            fusions,
            layer1,
            layer2,
            last_h,
        },
    ))
}

pub(crate) fn lstm_logits_batch(params: &LstmFusionParams, steps: &[FusionInput]) -> Result<Matrix> {
    Ok(lstm_logits_cached(params, steps)?.0)
}

/// Mean temperature-softmax cross-entropy over a batch of sequences and its
/// gradient with respect to every parameter.
pub fn lstm_loss_and_gradients(
    params: &LstmFusionParams,
    steps: &[FusionInput],
    targets: &[usize],
    temperature: f64,
) -> Result<(f64, LstmFusionParams)> {
    let (logits, cache) = lstm_logits_cached(params, steps)?;
    let ce = softmax_cross_entropy_batch(&logits, targets, temperature)?;
    let mut grads = LstmFusionParams::zeros(&params.projections.modalities(), params.sequence);
    let b = targets.len();
    let t = steps.len();

    let dh_last = dense_backward_batch(&params.output, &cache.last_h, &ce.grad_logits, &mut grads.output, true)?
        .expect("input grad requested");
    let mut dh2 = vec![Matrix::zeros(b, params.layer2.hidden_dim()); t];
    dh2[t - 1] = dh_last;
    let dh1 = layer_backward(&params.layer2, &cache.layer2, &dh2, &mut grads.layer2)?;
    let dz = layer_backward(&params.layer1, &cache.layer1, &dh1, &mut grads.layer1)?;
    for ((step, fc), g) in steps.iter().zip(&cache.fusions).zip(&dz) {
        fuse_backward(&params.projections, step, fc, g, &mut grads.projections)?;
    }
    Ok((ce.loss, grads))
}
