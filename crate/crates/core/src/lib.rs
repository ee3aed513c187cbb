//! Single-spike temporal-coded spiking neural networks.
//!
//! Every neuron fires at most once per presentation and carries its value in
//! the firing time. For the integrate-and-fire variants in [`neuron`] the
//! output firing time is a closed-form function of the input firing times, so
//! networks can be evaluated and trained without simulating membrane
//! dynamics. [`oracle`] integrates the membrane ODE numerically and serves as
//! ground truth for those closed forms.

pub mod data;
pub mod error;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod training;

pub use error::{Error, Result};
pub use network::{ForwardRecord, Layer, Network};
pub use neuron::{CausalSet, NeuronModel, NeuronModelConfig, NeuronValue, SpikeTime};
