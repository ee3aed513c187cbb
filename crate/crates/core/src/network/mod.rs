//! Layered fully-connected networks of single-spike neurons.
//!
//! Every neuron in a layer sees the same input vector, so the input is sorted
//! once per layer and each neuron only runs the prefix scan over its own
//! weight row. The forward pass can record, per sample and layer, the sort
//! order and the causal prefix length of every neuron; that is all the
//! backward pass needs.

mod checkpoint;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{first_valid_prefix, sorted_order, CausalSet, NeuronModelConfig};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Slack allowed on normalised features outside `[0, 1]`.
pub const FEATURE_SLACK: f64 = 1e-9;

/// Input features map to spike times `t = 2 d`.
pub const INPUT_TIME_SCALE: f64 = 2.0;

/// Weights `w[j][i]` from input `i` to output neuron `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let (fan_out, fan_in) = weights.dim();
        if fan_out == 0 || fan_in == 0 {
            return Err(Error::Shape(format!("layer {fan_out}x{fan_in} is empty")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("layer weights".into()));
        }
        Ok(Layer {
            weights: weights.as_standard_layout().to_owned(),
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.weights.row(j)
    }

    fn row_slice(&self, j: usize) -> &[f64] {
        let n = self.fan_in();
        &self.weights.as_slice().expect("standard layout")[j * n..(j + 1) * n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum InitScheme {
    /// Uniform in `[0, scale / fan_in]`, then each row whose sum falls short of
    /// `beta (1 + margin)` is shifted up uniformly to meet it.
    PositiveMean { beta: f64, margin: f64, scale: f64 },
}

impl InitScheme {
    pub fn positive_mean(beta: f64) -> Self {
        InitScheme::PositiveMean {
            beta,
            margin: 0.25,
            scale: 4.0,
        }
    }
}

/// Deterministic layer initialisation from a seeded generator.
pub fn init_weights(fan_out: usize, fan_in: usize, rng: &mut impl Rng, scheme: InitScheme) -> Result<Layer> {
    if fan_out == 0 || fan_in == 0 {
        return Err(Error::Shape(format!("layer {fan_out}x{fan_in} is empty")));
    }
    let InitScheme::PositiveMean { beta, margin, scale } = scheme;
    let c = scale / fan_in as f64;
    let target = beta * (1.0 + margin);
    let mut w = Array2::<f64>::zeros((fan_out, fan_in));
    for mut row in w.rows_mut() {
        for x in row.iter_mut() {
            *x = rng.gen_range(0.0..=c);
        }
        let sum: f64 = row.sum();
        if sum < target {
            let shift = (target - sum) / fan_in as f64;
            row.mapv_inplace(|x| x + shift);
        }
    }
    Layer::new(w)
}

/// A feed-forward stack of [`Layer`]s sharing one neuron model.
///
/// Mutation goes through [`Network::layer_mut`], which bumps a revision
/// counter so forward records taken before an update are detected as stale.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    cfg: NeuronModelConfig,
    revision: u64,
}

impl Network {
    pub fn new(cfg: NeuronModelConfig, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer {} has {} outputs but layer {} expects {} inputs",
                    l,
                    pair[0].fan_out(),
                    l + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Network {
            layers,
            cfg,
            revision: 0,
        })
    }

    /// Initialises a network with layer widths `sizes = [input, hidden.., output]`.
    pub fn init(cfg: NeuronModelConfig, sizes: &[usize], seed: u64, scheme: InitScheme) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape(format!("need at least two layer sizes, got {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|p| init_weights(p[1], p[0], &mut rng, scheme))
            .collect::<Result<Vec<_>>>()?;
        Network::new(cfg, layers)
    }

    pub fn cfg(&self) -> &NeuronModelConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Layer sizes `[input, hidden.., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(Layer::fan_out))
            .collect()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// Mutable weights of layer `l`; invalidates outstanding forward records.
    pub fn layer_mut(&mut self, l: usize) -> &mut Array2<f64> {
        self.revision += 1;
        &mut self.layers[l].weights
    }

    /// Encodes one feature row in `[0, 1]` as input neuron values.
    pub fn encode_input(&self, d: &[f64]) -> Result<Vec<f64>> {
        encode_input(d, &self.cfg)
    }

    /// Encodes every row of a feature matrix.
    pub fn encode_batch(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(features.dim());
        for (i, row) in features.rows().into_iter().enumerate() {
            let z = self.encode_input(&row.to_vec())?;
            out.row_mut(i).assign(&ArrayView1::from(&z));
        }
        Ok(out)
    }

    /// Propagates one sample; `z0` holds encoded input values.
    pub fn forward_sample(&self, z0: &[f64]) -> Result<SampleRecord> {
        if z0.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} does not match the network's {}",
                z0.len(),
                self.input_width()
            )));
        }
        Ok(self.forward_unchecked(z0))
    }

    fn forward_unchecked(&self, z0: &[f64]) -> SampleRecord {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut orders = Vec::with_capacity(self.layers.len());
        let mut prefixes = Vec::with_capacity(self.layers.len());
        values.push(z0.to_vec());
        for layer in &self.layers {
            let z = values.last().expect("input pushed");
            let order: Vec<u32> = sorted_order(z).into_iter().map(|i| i as u32).collect();
            let mut out = Vec::with_capacity(layer.fan_out());
            let mut prefix = Vec::with_capacity(layer.fan_out());
            for j in 0..layer.fan_out() {
                let row = layer.row_slice(j);
                let (k, zj) = first_valid_prefix(
                    &self.cfg,
                    order.iter().map(|&i| (z[i as usize], row[i as usize])),
                );
                out.push(zj);
                prefix.push(k as u32);
            }
            values.push(out);
            orders.push(order);
            prefixes.push(prefix);
        }
        SampleRecord {
            values,
            orders,
            prefixes,
        }
    }

    /// Batched forward pass over rows of encoded inputs. Rows are evaluated in
    /// parallel and independently.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardRecord)> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch width {} does not match the network's {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        let samples: Vec<SampleRecord> = (0..batch.nrows())
            .into_par_iter()
            .map(|i| self.forward_unchecked(&batch.row(i).to_vec()))
            .collect();
        let width = self.output_width();
        let mut out = Array2::zeros((samples.len(), width));
        for (i, s) in samples.iter().enumerate() {
            out.row_mut(i).assign(&ArrayView1::from(s.output()));
        }
        Ok((
            out,
            ForwardRecord {
                revision: self.revision,
                samples,
            },
        ))
    }

    /// Predicted class of every row: the output neuron that fires first.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Vec<usize>> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch width {} does not match the network's {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        Ok((0..batch.nrows())
            .into_par_iter()
            .map(|i| {
                let rec = self.forward_unchecked(&batch.row(i).to_vec());
                argmin(rec.output())
            })
            .collect())
    }
}

/// `t = 2 d` and `z = enc(t)` for each feature `d ∈ [0, 1]`.
pub fn encode_input(d: &[f64], cfg: &NeuronModelConfig) -> Result<Vec<f64>> {
    d.iter()
        .enumerate()
        .map(|(index, &value)| {
            if !(value >= -FEATURE_SLACK && value <= 1.0 + FEATURE_SLACK) {
                return Err(Error::FeatureRange { index, value });
            }
            Ok(cfg.encode_raw(INPUT_TIME_SCALE * value.clamp(0.0, 1.0)))
        })
        .collect()
}

/// Index of the smallest value; ties go to the lowest index. All-`NO_SPIKE`
/// rows predict class 0.
pub fn argmin(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v < z[best] {
            best = i;
        }
    }
    best
}

/// Values and causal prefixes of one sample through the whole network.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    /// `values[0]` is the encoded input, `values[l + 1]` the output of layer `l`.
    pub values: Vec<Vec<f64>>,
    /// Ascending order of the finite inputs of each layer.
    pub orders: Vec<Vec<u32>>,
    /// Causal prefix length per neuron per layer; `0` means no spike.
    pub prefixes: Vec<Vec<u32>>,
}

impl SampleRecord {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("at least the input")
    }

    pub fn causal_set(&self, layer: usize, neuron: usize) -> CausalSet {
        let k = self.prefixes[layer][neuron] as usize;
        CausalSet {
            indices: self.orders[layer][..k].iter().map(|&i| i as usize).collect(),
        }
    }
}

/// Backpropagation cache produced by [`Network::forward`].
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardRecord {
    revision: u64,
    samples: Vec<SampleRecord>,
}

impl ForwardRecord {
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn causal_set(&self, sample: usize, layer: usize, neuron: usize) -> CausalSet {
        self.samples[sample].causal_set(layer, neuron)
    }

    /// Fails when the network changed since this record was taken.
    pub fn check_fresh(&self, net: &Network) -> Result<()> {
        if self.revision != net.revision {
            return Err(Error::StaleRecord {
                recorded: self.revision,
                current: net.revision,
            });
        }
        Ok(())
    }
}
