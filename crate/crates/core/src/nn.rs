//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Used for the payload autoencoder (DEC phase I) and the fully connected
//! baseline classifier. Weights are stored `fan_in × fan_out` so a batch
//! forward pass is `X · W + b` on row-major batches.

use ndarray::{s, Array1, Array2, ArrayD, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataio::{Dataset, PAYLOAD_LEN};
use crate::error::{invalid, OdxuError, Result};
use crate::rng::{seeded, stream};
use crate::transfer::{early_stop_check, EarlyStop, Phase};

pub const LATENT_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// Multiplies `grad` in place by the derivative, expressed via the
    /// activation output `y`.
    fn backprop(self, y: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Relu => Zip::from(grad).and(y).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Sigmoid => Zip::from(grad).and(y).for_each(|g, &y| *g *= y * (1.0 - y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform init in `±1/sqrt(fan_in)`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut crate::rng::Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
        Self {
            weights,
            bias: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.bias;
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Layer inputs and outputs recorded during a forward pass.
pub(crate) struct Trace {
    inputs: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
    outputs: Vec<Array2<f64>>,
}

pub(crate) fn forward_trace(layers: &[Dense], x: ArrayView2<f64>) -> Trace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut outputs = Vec::with_capacity(layers.len());
    let mut cur = x.to_owned();
    for layer in layers {
        let next = layer.forward(&cur.view());
        inputs.push(cur);
        outputs.push(next.clone());
        cur = next;
    }
    Trace {
        inputs,
        output: cur,
        outputs,
    }
}

/// Backpropagates `grad_out` (dLoss/dOutput). Returns per-layer gradients and
/// dLoss/dInput.
pub(crate) fn backward(layers: &[Dense], trace: &Trace, grad_out: Array2<f64>) -> (Vec<LayerGrad>, Array2<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut g = grad_out;
    for (i, layer) in layers.iter().enumerate().rev() {
        layer.activation.backprop(&trace.outputs[i], &mut g);
        let gw = trace.inputs[i].t().dot(&g);
        let gb = g.sum_axis(Axis(0));
        let g_in = g.dot(&layer.weights.t());
        grads.push(LayerGrad { weights: gw, bias: gb });
        g = g_in;
    }
    grads.reverse();
    (grads, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub(crate) layers: Vec<Dense>,
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("network needs at least one layer");
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(OdxuError::DimensionMismatch {
                    expected: pair[0].fan_out(),
                    got: pair[1].fan_in(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.fan_out() {
                return Err(OdxuError::DimensionMismatch {
                    expected: l.fan_out(),
                    got: l.bias.len(),
                });
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return invalid("non-finite network parameter");
            }
        }
        Ok(Self { layers })
    }

    /// `dims` lists every layer width including input and output.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return invalid("need one activation per layer and at least two dims");
        }
        if dims.contains(&0) {
            return invalid("zero-width layer");
        }
        let mut rng = seeded(seed, stream::INIT);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &a)| Dense::init(d[0], d[1], a, &mut rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut cur = self.layers[0].forward(&x);
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur.view());
        }
        cur
    }

    /// Analytic gradients of `loss` at `(x, target)`.
    pub fn gradients(&self, loss: Loss, x: ArrayView2<f64>, target: &Target) -> Result<(f64, Vec<LayerGrad>)> {
        let trace = forward_trace(&self.layers, x);
        let (value, grad_out) = loss.eval(&trace.output, target)?;
        let (grads, _) = backward(&self.layers, &trace, grad_out);
        Ok((value, grads))
    }

    fn param_mut(&mut self, flat: usize) -> &mut f64 {
        let mut idx = flat;
        for l in &mut self.layers {
            if idx < l.weights.len() {
                let cols = l.weights.ncols();
                return &mut l.weights[[idx / cols, idx % cols]];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index {flat} out of range");
    }
}

fn grad_at(grads: &[LayerGrad], flat: usize) -> f64 {
    let mut idx = flat;
    for g in grads {
        if idx < g.weights.len() {
            let cols = g.weights.ncols();
            return g.weights[[idx / cols, idx % cols]];
        }
        idx -= g.weights.len();
        if idx < g.bias.len() {
            return g.bias[idx];
        }
        idx -= g.bias.len();
    }
    panic!("parameter index {flat} out of range");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean squared error over every output element.
    Mse,
    /// Softmax over the outputs followed by mean cross-entropy.
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone)]
pub enum Target {
    Values(Array2<f64>),
    Classes(Vec<usize>),
}

impl Loss {
    fn eval(self, out: &Array2<f64>, target: &Target) -> Result<(f64, Array2<f64>)> {
        let n = out.nrows().max(1) as f64;
        match (self, target) {
            (Loss::Mse, Target::Values(t)) => {
                if t.dim() != out.dim() {
                    return Err(OdxuError::DimensionMismatch {
                        expected: out.len(),
                        got: t.len(),
                    });
                }
                let diff = out - t;
                let m = diff.len().max(1) as f64;
                let value = diff.iter().map(|d| d * d).sum::<f64>() / m;
                Ok((value, diff * (2.0 / m)))
            }
            (Loss::SoftmaxCrossEntropy, Target::Classes(labels)) => {
                if labels.len() != out.nrows() {
                    return Err(OdxuError::DimensionMismatch {
                        expected: out.nrows(),
                        got: labels.len(),
                    });
                }
                let mut probs = softmax_rows(out);
                let mut value = 0.0;
                for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
                    if y >= row.len() {
                        return Err(OdxuError::ClassOutOfRange {
                            index: y,
                            n_classes: row.len(),
                        });
                    }
                    value -= row[y].max(f64::MIN_POSITIVE).ln();
                    row[y] -= 1.0;
                }
                probs /= n;
                Ok((value / n, probs))
            }
            _ => invalid("loss and target kinds do not match"),
        }
    }
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Sgd { momentum: 0.0 }
    }
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter optimizer state. Each parameter tensor owns one slot.
pub(crate) struct OptState {
    opt: Optimizer,
    first: Vec<ArrayD<f64>>,
    second: Vec<ArrayD<f64>>,
    step: i32,
}

impl OptState {
    pub(crate) fn new(opt: Optimizer, shapes: impl IntoIterator<Item = Vec<usize>>) -> Self {
        let first: Vec<ArrayD<f64>> = shapes.into_iter().map(ArrayD::zeros).collect();
        Self {
            opt,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    fn for_layers(opt: Optimizer, layers: &[Dense]) -> Self {
        Self::new(
            opt,
            layers
                .iter()
                .flat_map(|l| [l.weights.shape().to_vec(), l.bias.shape().to_vec()]),
        )
    }

    pub(crate) fn begin_step(&mut self) {
        self.step += 1;
    }

    pub(crate) fn update(&mut self, slot: usize, lr: f64, param: ArrayViewMutD<f64>, grad: ArrayViewD<f64>) {
        match self.opt {
            Optimizer::Sgd { momentum: 0.0 } => {
                let mut param = param;
                param.scaled_add(-lr, &grad);
            }
            Optimizer::Sgd { momentum } => {
                let v = &mut self.first[slot];
                *v *= momentum;
                *v += &grad;
                let mut param = param;
                param.scaled_add(-lr, v);
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                Zip::from(param)
                    .and(&mut self.first[slot])
                    .and(&mut self.second[slot])
                    .and(grad)
                    .for_each(|w, m, v, &g| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
            }
        }
    }

    pub(crate) fn apply_layers(&mut self, lr: f64, layers: &mut [Dense], grads: &[LayerGrad]) {
        self.begin_step();
        for (i, (layer, g)) in layers.iter_mut().zip(grads).enumerate() {
            self.update(2 * i, lr, layer.weights.view_mut().into_dyn(), g.weights.view().into_dyn());
            self.update(2 * i + 1, lr, layer.bias.view_mut().into_dyn(), g.bias.view().into_dyn());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            seed: 0,
            optimizer: Optimizer::adam(),
            stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero step size is allowed: it freezes the parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        if self.batch_size == 0 {
            return invalid("batch size must be >= 1");
        }
        if let Some(stop) = &self.stop {
            stop.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    /// Mean training loss per completed epoch.
    pub losses: Vec<f64>,
    /// Held-out loss per epoch when a validation set was supplied.
    pub validation: Vec<f64>,
    pub stopped_early: bool,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.losses.len()
    }
}

/// Mini-batch training loop shared by the autoencoder and the classifier.
fn fit_layers(
    layers: &mut [Dense],
    x: &Array2<f64>,
    target: &Target,
    val: Option<(&Array2<f64>, &Target)>,
    loss: Loss,
    cfg: &TrainConfig,
    phase: Phase,
) -> Result<History> {
    cfg.validate()?;
    let n = x.nrows();
    if n == 0 {
        return invalid("training data is empty");
    }
    let mut rng = seeded(cfg.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut state = OptState::for_layers(cfg.optimizer, layers);
    let mut history = History::default();
    let phase_name = match phase {
        Phase::Ae => "autoencoder pretraining",
        Phase::Cluster => "clustering",
        Phase::Classifier => "classifier training",
    };

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            let tb = match target {
                Target::Values(t) => Target::Values(t.select(Axis(0), chunk)),
                Target::Classes(c) => Target::Classes(chunk.iter().map(|&i| c[i]).collect()),
            };
            let trace = forward_trace(layers, xb.view());
            let (value, grad_out) = loss.eval(&trace.output, &tb)?;
            if !value.is_finite() {
                return Err(OdxuError::NonFinite {
                    phase: phase_name,
                    epoch,
                    batch: batch_no,
                });
            }
            let (grads, _) = backward(layers, &trace, grad_out);
            state.apply_layers(cfg.learning_rate, layers, &grads);
            total += value * chunk.len() as f64;
        }
        history.losses.push(total / n as f64);
        if let Some((vx, vt)) = val {
            let out = forward_trace(layers, vx.view()).output;
            history.validation.push(loss.eval(&out, vt)?.0);
        }
        if let Some(stop) = &cfg.stop {
            if early_stop_check(&history.losses, stop, phase) {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
}

/// Hidden widths of the encoder; the decoder mirrors them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AeArch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
}

impl Default for AeArch {
    fn default() -> Self {
        Self {
            input: PAYLOAD_LEN,
            hidden: vec![512, 128],
            latent: LATENT_DIM,
        }
    }
}

impl Autoencoder {
    /// ReLU hidden layers, linear latent and reconstruction layers.
    pub fn new(arch: &AeArch, seed: u64) -> Result<Self> {
        let mut enc_dims = vec![arch.input];
        enc_dims.extend(&arch.hidden);
        enc_dims.push(arch.latent);
        let dec_dims: Vec<usize> = enc_dims.iter().rev().copied().collect();
        let acts = |len: usize| {
            let mut a = vec![Activation::Relu; len - 2];
            a.push(Activation::Linear);
            a
        };
        let encoder = DenseNet::new(&enc_dims, &acts(enc_dims.len()), seed)?;
        let decoder = DenseNet::new(&dec_dims, &acts(dec_dims.len()), seed.wrapping_add(1))?;
        Self::from_parts(encoder, decoder)
    }

    pub fn from_parts(encoder: DenseNet, decoder: DenseNet) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
            return invalid("encoder and decoder shapes do not mirror");
        }
        Ok(Self { encoder, decoder })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.decoder.forward(self.encoder.forward(x).view())
    }

    pub fn reconstruction_mse(&self, x: ArrayView2<f64>) -> f64 {
        let r = self.reconstruct(x);
        let d = &r - &x;
        d.iter().map(|v| v * v).sum::<f64>() / d.len().max(1) as f64
    }

    /// The network as one stack (encoder then decoder).
    pub fn stacked(&self) -> DenseNet {
        let mut layers = self.encoder.layers.clone();
        layers.extend(self.decoder.layers.iter().cloned());
        DenseNet { layers }
    }
}

/// Phase I: fits the autoencoder to reconstruct its input under MSE.
pub fn ae_pretrain(ae: Autoencoder, data: &Dataset, cfg: &TrainConfig) -> Result<(Autoencoder, History)> {
    ae_pretrain_validated(ae, data, None, cfg)
}

pub fn ae_pretrain_validated(
    ae: Autoencoder,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Autoencoder, History)> {
    if data.is_empty() {
        return invalid("autoencoder pretraining needs data");
    }
    let x = data.feature_matrix();
    let vx = validation.filter(|v| !v.is_empty()).map(|v| v.feature_matrix());
    let target = Target::Values(x.clone());
    let vt = vx.as_ref().map(|v| Target::Values(v.clone()));
    let split_at = ae.encoder.layers.len();
    let mut layers = ae.encoder.layers;
    layers.extend(ae.decoder.layers);
    let history = fit_layers(
        &mut layers,
        &x,
        &target,
        vx.as_ref().zip(vt.as_ref()),
        Loss::Mse,
        cfg,
        Phase::Ae,
    )?;
    let decoder = layers.split_off(split_at);
    let ae = Autoencoder {
        encoder: DenseNet { layers },
        decoder: DenseNet { layers: decoder },
    };
    Ok((ae, history))
}

const ENCODE_CHUNK: usize = 512;

/// Latent codes, one row per record.
pub fn encode(ae: &Autoencoder, records: &Dataset) -> Array2<f64> {
    let mut out = Array2::zeros((records.len(), ae.latent_dim()));
    for (i, chunk) in records.records().chunks(ENCODE_CHUNK).enumerate() {
        let mut x = Array2::zeros((chunk.len(), ae.encoder.input_dim()));
        for (mut row, r) in x.rows_mut().into_iter().zip(chunk) {
            row.assign(&ndarray::ArrayView1::from(r.bytes()));
        }
        let z = ae.encoder.forward(x.view());
        let start = i * ENCODE_CHUNK;
        out.slice_mut(s![start..start + chunk.len(), ..]).assign(&z);
    }
    out
}

/// One probe sample for [`grad_check`].
#[derive(Debug, Clone)]
pub struct Probe {
    pub input: Array2<f64>,
    pub target: Target,
}

pub const GRAD_CHECK_STEP: f64 = 1e-4;

/// Relative error used by the gradient checks: `|a - n| / max(|a|, |n|, 1e-7)`.
/// The floor keeps parameters with (near) zero gradient from dividing noise
/// by noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Compares backprop gradients against central differences on
/// `n_params` randomly chosen parameters and returns the worst relative error.
pub fn grad_check(net: &DenseNet, loss: Loss, probe: &Probe, n_params: usize, seed: u64) -> Result<f64> {
    if probe.input.ncols() != net.input_dim() {
        return Err(OdxuError::DimensionMismatch {
            expected: net.input_dim(),
            got: probe.input.ncols(),
        });
    }
    let (_, grads) = net.gradients(loss, probe.input.view(), &probe.target)?;
    let total = net.param_count();
    let mut rng = seeded(seed, stream::GRAD_CHECK);
    let picks = rand::seq::index::sample(&mut rng, total, n_params.min(total));
    let mut probe_net = net.clone();
    let mut worst: f64 = 0.0;
    for flat in picks {
        let original = *probe_net.param_mut(flat);
        *probe_net.param_mut(flat) = original + GRAD_CHECK_STEP;
        let plus = loss.eval(&probe_net.forward(probe.input.view()), &probe.target)?.0;
        *probe_net.param_mut(flat) = original - GRAD_CHECK_STEP;
        let minus = loss.eval(&probe_net.forward(probe.input.view()), &probe.target)?.0;
        *probe_net.param_mut(flat) = original;
        let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
        worst = worst.max(relative_error(grad_at(&grads, flat), numeric));
    }
    Ok(worst)
}

/// Fully connected baseline: ReLU hidden layers, linear logits.
pub fn fcnn_new(input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Result<DenseNet> {
    if n_classes < 2 {
        return invalid("classifier needs at least 2 classes");
    }
    let mut dims = vec![input_dim];
    dims.extend(hidden);
    dims.push(n_classes);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Linear);
    DenseNet::new(&dims, &acts, seed)
}

/// Parameter count of a dense stack, `Σ (d_in·d_out + d_out)`.
pub fn dense_param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum()
}

fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= n_classes) {
        Some(&y) => Err(OdxuError::ClassOutOfRange { index: y, n_classes }),
        None => Ok(()),
    }
}

pub fn fcnn_train(net: DenseNet, x: &Array2<f64>, labels: &[usize], cfg: &TrainConfig) -> Result<(DenseNet, History)> {
    if x.nrows() != labels.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    check_labels(labels, net.output_dim())?;
    let mut layers = net.layers;
    let target = Target::Classes(labels.to_vec());
    let history = fit_layers(&mut layers, x, &target, None, Loss::SoftmaxCrossEntropy, cfg, Phase::Classifier)?;
    Ok((DenseNet { layers }, history))
}

/// Class probabilities, one row per sample.
pub fn fcnn_predict(net: &DenseNet, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != net.input_dim() {
        return Err(OdxuError::DimensionMismatch {
            expected: net.input_dim(),
            got: x.ncols(),
        });
    }
    Ok(softmax_rows(&net.forward(x)))
}

/// Predicted class per row, checking the reference labels are in range.
pub fn fcnn_classify(net: &DenseNet, x: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<usize>> {
    check_labels(labels, net.output_dim())?;
    let p = fcnn_predict(net, x)?;
    Ok(p.rows().into_iter().map(|r| crate::argmax(r.iter().copied())).collect())
}
