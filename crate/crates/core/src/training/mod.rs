//! Loss, backpropagation through recorded causal sets, Adam, and the
//! mini-batch training loop.

mod config;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{argmin, Network, SampleRecord};

pub use config::{RunConfig, CONFIG_SCHEMA_VERSION};

/// Finite stand-in for `NO_SPIKE` outputs inside the loss.
pub const NO_SPIKE_SENTINEL: f64 = 1e6;

/// Samples per work unit in the gradient reduction. Fixed so that the
/// summation order never depends on the thread count.
const REDUCE_CHUNK: usize = 16;

/// Which classes enter the denominator of the data term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// `Σ_{i≠c} 1/z_i`.
    #[default]
    ExcludeTrue,
    /// `Σ_i 1/z_i`, the usual softmax form.
    AllClasses,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub k: f64,
    pub beta: f64,
    pub denominator: Denominator,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 0.001,
            k: 100.0,
            beta: 1.0,
            denominator: Denominator::ExcludeTrue,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::InvalidParameter(format!("K must be >= 0, got {}", self.k)));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 1, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Stop after this many epochs without improvement (validation accuracy
    /// when a validation set is given, training loss otherwise).
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("batch_size and epochs must be positive".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::InvalidParameter(format!("adam_eps must be positive, got {}", self.adam_eps)));
        }
        Ok(())
    }
}

/// `ln z_c + ln Σ 1/z_i`, with `NO_SPIKE` replaced by [`NO_SPIKE_SENTINEL`].
pub fn data_loss(z: &[f64], c: usize, denominator: Denominator) -> Result<f64> {
    Ok(data_loss_and_grad(z, c, denominator)?.0)
}

fn sentinel(z: f64) -> f64 {
    if z.is_finite() {
        z
    } else {
        NO_SPIKE_SENTINEL
    }
}

/// Data term and its gradient with respect to `z_L`.
fn data_loss_and_grad(z: &[f64], c: usize, denominator: Denominator) -> Result<(f64, Vec<f64>)> {
    if z.len() < 2 {
        return Err(Error::Shape(format!("loss needs at least two outputs, got {}", z.len())));
    }
    if c >= z.len() {
        return Err(Error::Shape(format!("class {c} out of range for {} outputs", z.len())));
    }
    let z: Vec<f64> = z.iter().map(|&v| sentinel(v)).collect();
    if z.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("loss needs positive outputs".into()));
    }
    let in_denominator = |i: usize| denominator == Denominator::AllClasses || i != c;
    let s: f64 = (0..z.len()).filter(|&i| in_denominator(i)).map(|i| 1.0 / z[i]).sum();
    let loss = z[c].ln() + s.ln();
    let mut g = vec![0.0; z.len()];
    for i in 0..z.len() {
        if in_denominator(i) {
            g[i] -= 1.0 / (z[i] * z[i] * s);
        }
    }
    g[c] += 1.0 / z[c];
    Ok((loss, g))
}

/// `λ Σ w² + K Σ_rows max(0, β − Σ_i w)` over the whole network.
pub fn regularizer(net: &Network, lcfg: &LossConfig) -> f64 {
    let mut total = 0.0;
    for layer in net.layers() {
        let w = layer.weights();
        total += lcfg.lambda * w.iter().map(|x| x * x).sum::<f64>();
        total += lcfg.k * w.rows().into_iter().map(|r| (lcfg.beta - r.sum()).max(0.0)).sum::<f64>();
    }
    total
}

/// Full per-sample loss: data term plus regularizer.
pub fn loss(z_l: &[f64], c: usize, net: &Network, lcfg: &LossConfig) -> Result<f64> {
    Ok(data_loss(z_l, c, lcfg.denominator)? + regularizer(net, lcfg))
}

/// One gradient array per layer, shaped like the layer's weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.layers().iter().map(|l| Array2::zeros(l.weights().dim())).collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        for a in &mut self.layers {
            a.mapv_inplace(|x| x * s);
        }
    }
}

/// Adds the data-term gradient of one recorded sample into `grads`.
fn backprop_sample(net: &Network, rec: &SampleRecord, c: usize, lcfg: &LossConfig, grads: &mut Gradients) -> Result<f64> {
    let (loss, mut delta) = data_loss_and_grad(rec.output(), c, lcfg.denominator)?;
    let offset = net.cfg().denominator_offset();
    for l in (0..net.depth()).rev() {
        let layer = &net.layers()[l];
        let w = layer.weights();
        let z_in = &rec.values[l];
        let z_out = &rec.values[l + 1];
        let order = &rec.orders[l];
        let g = &mut grads.layers[l];
        let mut delta_in = vec![0.0; z_in.len()];
        for j in 0..layer.fan_out() {
            let k = rec.prefixes[l][j] as usize;
            if k == 0 || delta[j] == 0.0 {
                continue;
            }
            let causal = &order[..k];
            let denom = causal.iter().map(|&i| w[(j, i as usize)]).sum::<f64>() - offset;
            let scale = delta[j] / denom;
            for &i in causal {
                let i = i as usize;
                g[(j, i)] += scale * (z_in[i] - z_out[j]);
                delta_in[i] += scale * w[(j, i)];
            }
        }
        delta = delta_in;
    }
    Ok(loss)
}

fn add_regularizer_grad(net: &Network, lcfg: &LossConfig, grads: &mut Gradients) {
    for (layer, g) in net.layers().iter().zip(grads.layers.iter_mut()) {
        let w = layer.weights();
        g.zip_mut_with(w, |gi, &wi| *gi += 2.0 * lcfg.lambda * wi);
        for (j, row) in w.rows().into_iter().enumerate() {
            if row.sum() < lcfg.beta {
                g.row_mut(j).mapv_inplace(|x| x - lcfg.k);
            }
        }
    }
}

fn check_gradient_support(net: &Network) -> Result<()> {
    let v = net.cfg().variant();
    if !v.is_rational() {
        return Err(Error::UnsupportedVariant(v.name()));
    }
    Ok(())
}

/// Gradient of the per-sample loss for every recorded sample in `record`
/// (labels `classes`), averaged over the samples, plus the regularizer
/// gradient. Returns `(mean loss, gradients)`.
pub fn backward(
    record: &crate::network::ForwardRecord,
    classes: &[usize],
    net: &Network,
    lcfg: &LossConfig,
) -> Result<(f64, Gradients)> {
    record.check_fresh(net)?;
    check_gradient_support(net)?;
    if classes.len() != record.len() {
        return Err(Error::LengthMismatch {
            what: "labels vs recorded samples",
            left: classes.len(),
            right: record.len(),
        });
    }
    if record.is_empty() {
        return Err(Error::EmptyInput);
    }
    let samples = record.samples();
    let chunks: Vec<(f64, Gradients)> = (0..samples.len())
        .collect::<Vec<_>>()
        .par_chunks(REDUCE_CHUNK)
        .map(|idx| {
            let mut g = Gradients::zeros_like(net);
            let mut loss = 0.0;
            for &s in idx {
                loss += backprop_sample(net, &samples[s], classes[s], lcfg, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut total = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for (l, g) in &chunks {
        loss += l;
        total.add_assign(g);
    }
    let n = samples.len() as f64;
    total.scale(1.0 / n);
    add_regularizer_grad(net, lcfg, &mut total);
    Ok((loss / n + regularizer(net, lcfg), total))
}

/// Forward and backward over a batch of encoded inputs; also returns the
/// number of correctly classified rows.
pub fn loss_and_gradient(
    net: &Network,
    inputs: &Array2<f64>,
    classes: &[usize],
    lcfg: &LossConfig,
) -> Result<(f64, Gradients, usize)> {
    let (out, record) = net.forward(inputs)?;
    let (loss, grads) = backward(&record, classes, net, lcfg)?;
    let correct = out
        .rows()
        .into_iter()
        .zip(classes)
        .filter(|(row, &c)| argmin(row.as_slice().expect("contiguous")) == c)
        .count();
    Ok((loss, grads, correct))
}

/// Mean loss of a batch, without gradients.
pub fn batch_loss(net: &Network, inputs: &Array2<f64>, classes: &[usize], lcfg: &LossConfig) -> Result<f64> {
    let (out, _) = net.forward(inputs)?;
    if out.nrows() != classes.len() {
        return Err(Error::LengthMismatch {
            what: "labels vs inputs",
            left: classes.len(),
            right: out.nrows(),
        });
    }
    let mut sum = 0.0;
    for (row, &c) in out.rows().into_iter().zip(classes) {
        sum += data_loss(&row.to_vec(), c, lcfg.denominator)?;
    }
    Ok(sum / classes.len() as f64 + regularizer(net, lcfg))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        let zeros = Gradients::zeros_like(net).layers;
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected Adam update of every weight.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut OptimizerState, tcfg: &TrainConfig) -> Result<()> {
    if grads.layers.len() != net.depth() || state.m.len() != net.depth() {
        return Err(Error::Shape("gradient layer count does not match the network".into()));
    }
    for (l, g) in grads.layers.iter().enumerate() {
        if g.dim() != net.layers()[l].weights().dim() || state.m[l].dim() != g.dim() {
            return Err(Error::Shape(format!("gradient shape mismatch in layer {l}")));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of layer {l}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (tcfg.adam_beta1, tcfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (l, g) in grads.layers.iter().enumerate() {
        let m = &mut state.m[l];
        let v = &mut state.v[l];
        let w = net.layer_mut(l);
        ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= tcfg.learning_rate * mhat / (vhat.sqrt() + tcfg.adam_eps);
        });
    }
    Ok(())
}

/// Encoded inputs with their class labels.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a> {
    pub inputs: &'a Array2<f64>,
    pub labels: &'a [usize],
}

impl<'a> Samples<'a> {
    pub fn new(inputs: &'a Array2<f64>, labels: &'a [usize]) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels vs inputs",
                left: labels.len(),
                right: inputs.nrows(),
            });
        }
        Ok(Samples { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn gather(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let x = self.inputs.select(ndarray::Axis(0), idx);
        let y = idx.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }
}

/// Fraction of rows whose earliest output neuron matches the label.
pub fn accuracy(net: &Network, data: Samples<'_>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pred = net.predict(data.inputs)?;
    let correct = pred.iter().zip(data.labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub loss: f64,
    /// Accuracy of the mini-batch forward passes, before each update.
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub steps: u64,
}

impl History {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Config(format!("writing history: {e}"));
        out.write_record(["epoch", "loss", "train_acc", "val_acc"]).map_err(csv_err)?;
        for r in &self.epochs {
            out.write_record([
                r.epoch.to_string(),
                format!("{:.10}", r.loss),
                format!("{:.6}", r.train_acc),
                r.val_acc.map(|v| format!("{v:.6}")).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("history", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Hooks called by [`train`]. Returning an error aborts training.
pub trait TrainObserver {
    fn on_step(&mut self, _net: &Network, _step: u64, _batch_loss: f64, _batch_acc: f64) -> Result<()> {
        Ok(())
    }

    fn on_epoch(&mut self, _net: &Network, _record: &EpochRecord) -> Result<()> {
        Ok(())
    }

    /// Checked after every step; `true` ends training early.
    fn should_stop(&self) -> bool {
        false
    }
}

/// Observer that does nothing.
pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Mini-batch Adam training. Each epoch draws a fresh seeded permutation and
/// keeps the last partial batch.
pub fn train(
    net: &mut Network,
    data: Samples<'_>,
    val: Option<Samples<'_>>,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
    observer: &mut dyn TrainObserver,
) -> Result<History> {
    tcfg.validate()?;
    lcfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let width = net.output_width();
    if let Some(&bad) = data
        .labels
        .iter()
        .chain(val.iter().flat_map(|v| v.labels))
        .find(|&&c| c >= width)
    {
        return Err(Error::Shape(format!("label {bad} out of range for {width} outputs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut state = OptimizerState::new(net);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best = f64::NEG_INFINITY;
    let mut since_best = 0usize;
    'epochs: for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for idx in order.chunks(tcfg.batch_size) {
            let (x, y) = data.gather(idx);
            let (loss, grads, ok) = loss_and_gradient(net, &x, &y, lcfg)?;
            adam_step(net, &grads, &mut state, tcfg)?;
            history.steps += 1;
            loss_sum += loss * idx.len() as f64;
            correct += ok;
            observer.on_step(net, history.steps, loss, ok as f64 / idx.len() as f64)?;
            if observer.should_stop() {
                push_epoch(&mut history, epoch, loss_sum, correct, data.len(), net, val, observer)?;
                break 'epochs;
            }
        }
        let record = push_epoch(&mut history, epoch, loss_sum, correct, data.len(), net, val, observer)?;
        if observer.should_stop() {
            break;
        }
        if let Some(patience) = tcfg.patience {
            let score = record.val_acc.unwrap_or(-record.loss);
            if score > best {
                best = score;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }
    Ok(history)
}

#[allow(clippy::too_many_arguments)]
fn push_epoch(
    history: &mut History,
    epoch: usize,
    loss_sum: f64,
    correct: usize,
    seen: usize,
    net: &Network,
    val: Option<Samples<'_>>,
    observer: &mut dyn TrainObserver,
) -> Result<EpochRecord> {
    let val_acc = match val {
        Some(v) if !v.is_empty() => Some(accuracy(net, v)?),
        _ => None,
    };
    let record = EpochRecord {
        epoch,
        loss: loss_sum / seen as f64,
        train_acc: correct as f64 / seen as f64,
        val_acc,
    };
    history.epochs.push(record);
    observer.on_epoch(net, &record)?;
    Ok(record)
}

/// Central finite-difference estimate of the mean batch loss gradient for one
/// weight. Used by gradient checks.
pub fn finite_difference(
    net: &Network,
    inputs: &Array2<f64>,
    classes: &[usize],
    lcfg: &LossConfig,
    layer: usize,
    j: usize,
    i: usize,
    h: f64,
) -> Result<f64> {
    let mut plus = net.clone();
    plus.layer_mut(layer)[(j, i)] += h;
    let mut minus = net.clone();
    minus.layer_mut(layer)[(j, i)] -= h;
    Ok((batch_loss(&plus, inputs, classes, lcfg)? - batch_loss(&minus, inputs, classes, lcfg)?) / (2.0 * h))
}

#[cfg(test)]
mod tests;
