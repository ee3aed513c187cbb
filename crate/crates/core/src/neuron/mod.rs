//! Closed-form spike times for single-spike integrate-and-fire neurons.
//!
//! A neuron receives one spike from each input at time `tᵢ` and fires once,
//! at the first time its membrane potential reaches the threshold `v0`. Five
//! kernel/leak combinations admit a closed-form output time. Each variant
//! works on an *encoded value* `z = enc(t)` (strictly increasing in `t`) in
//! which the input-output relation becomes algebraically simple:
//!
//! | variant          | membrane                     | encoding        |
//! |------------------|------------------------------|-----------------|
//! | `NlifStep`       | `v' = Σ wᵢ a`                | `α t`           |
//! | `NlifExp`        | `v' = Σ wᵢ e^{-(t-tᵢ)/τ}`      | `α e^{t/τ}`     |
//! | `LifStep`        | `v' + b v = Σ wᵢ a`          | `α e^{bt}`      |
//! | `LifExpBt1`      | `v' + b v = Σ wᵢ e^{-(t-tᵢ)/τ}`, `bτ = 1`   | `α t` |
//! | `LifExpBtHalf`   | `v' + b v = Σ wᵢ e^{-(t-tᵢ)/τ}`, `bτ = 1/2` | `α e^{t/2τ}` |
//!
//! The output only depends on the *causal set*: the inputs that fire strictly
//! before the output does. [`forward_neuron`] finds it by sorting the inputs
//! and evaluating the closed form on every sorted prefix, keeping the first
//! candidate that lands after the prefix's last input and no later than the
//! next one.

mod lambert;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lambert::{lambert_w0, lambert_w0_derivative, BRANCH_POINT};

/// Prefixes whose closed-form denominator is smaller than this are treated as
/// unable to produce a finite crossing.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// Discriminants (and Lambert arguments past `-1/e`) within this relative
/// distance of zero are snapped onto the tangency.
const TANGENCY_SLACK: f64 = 1e-13;

/// Firing time of a neuron; `NO_SPIKE` sorts after every finite time.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpikeTime(f64);

impl SpikeTime {
    pub const NO_SPIKE: SpikeTime = SpikeTime(f64::INFINITY);

    pub fn new(t: f64) -> Result<Self> {
        if t.is_nan() {
            return Err(Error::NonFinite("spike time".into()));
        }
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(SpikeTime(t))
    }

    pub fn is_spike(self) -> bool {
        self.0.is_finite()
    }

    pub fn get(self) -> Option<f64> {
        self.is_spike().then_some(self.0)
    }

    /// Raw value, `+∞` for `NO_SPIKE`.
    pub fn raw(self) -> f64 {
        self.0
    }
}

impl fmt::Debug for SpikeTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Some(t) => write!(f, "SpikeTime({t})"),
            None => f.write_str("NO_SPIKE"),
        }
    }
}

/// Encoded neuron value `z = enc(t)`; `NO_SPIKE` sorts after every finite value.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeuronValue(f64);

impl NeuronValue {
    pub const NO_SPIKE: NeuronValue = NeuronValue(f64::INFINITY);

    /// Wraps an encoded value. Values are nonnegative (zero only for the
    /// linear encodings at `t = 0`); `+∞` means no spike.
    pub fn new(z: f64) -> Result<Self> {
        if z.is_nan() || z < 0.0 {
            return Err(Error::InvalidParameter(format!("encoded value {z}")));
        }
        Ok(NeuronValue(z))
    }

    pub fn is_spike(self) -> bool {
        self.0.is_finite()
    }

    pub fn get(self) -> Option<f64> {
        self.is_spike().then_some(self.0)
    }

    pub fn raw(self) -> f64 {
        self.0
    }
}

impl fmt::Debug for NeuronValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Some(z) => write!(f, "NeuronValue({z})"),
            None => f.write_str("NO_SPIKE"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronModel {
    /// Nonleaky, unit-step kernel.
    NlifStep,
    /// Nonleaky, exponentially decaying kernel.
    NlifExp,
    /// Leaky, unit-step kernel.
    LifStep,
    /// Leaky, exponential kernel with `bτ = 1` (Lambert W form).
    LifExpBt1,
    /// Leaky, exponential kernel with `bτ = 1/2` (quadratic form).
    LifExpBtHalf,
}

impl NeuronModel {
    pub const ALL: [NeuronModel; 5] = [
        NeuronModel::NlifStep,
        NeuronModel::NlifExp,
        NeuronModel::LifStep,
        NeuronModel::LifExpBt1,
        NeuronModel::LifExpBtHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NeuronModel::NlifStep => "nlif-step",
            NeuronModel::NlifExp => "nlif-exp",
            NeuronModel::LifStep => "lif-step",
            NeuronModel::LifExpBt1 => "lif-exp-bt1",
            NeuronModel::LifExpBtHalf => "lif-exp-bthalf",
        }
    }

    pub fn is_leaky(self) -> bool {
        matches!(
            self,
            NeuronModel::LifStep | NeuronModel::LifExpBt1 | NeuronModel::LifExpBtHalf
        )
    }

    pub fn has_step_kernel(self) -> bool {
        matches!(self, NeuronModel::NlifStep | NeuronModel::LifStep)
    }

    /// Variants whose closed form is `z = Σ wᵢzᵢ (+ c) / (Σ wᵢ − offset)` and
    /// so share the same analytic gradient.
    pub fn is_rational(self) -> bool {
        matches!(
            self,
            NeuronModel::NlifStep | NeuronModel::NlifExp | NeuronModel::LifStep
        )
    }
}

impl fmt::Display for NeuronModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NeuronModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeuronModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown neuron model {s:?}")))
    }
}

/// Neuron variant and its parameters. Construct through [`NeuronModelConfig::new`]
/// or the per-variant helpers so the invariants are checked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronModelConfig {
    variant: NeuronModel,
    /// Step kernel amplitude.
    a: f64,
    /// Exponential kernel decay constant.
    tau: f64,
    /// Leak rate.
    b: f64,
    /// Firing threshold.
    v0: f64,
    /// Encoding scale.
    alpha: f64,
}

impl NeuronModelConfig {
    pub fn new(variant: NeuronModel, a: f64, tau: f64, b: f64, v0: f64, alpha: f64) -> Result<Self> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("a", a)?;
        positive("tau", tau)?;
        positive("v0", v0)?;
        positive("alpha", alpha)?;
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidParameter(format!("b must be nonnegative, got {b}")));
        }
        if variant.is_leaky() {
            positive("b", b)?;
        }
        let bt = b * tau;
        match variant {
            NeuronModel::LifExpBt1 if (bt - 1.0).abs() > 1e-12 => {
                return Err(Error::InvalidParameter(format!(
                    "lif-exp-bt1 requires b*tau = 1, got {bt}"
                )))
            }
            NeuronModel::LifExpBtHalf if (bt - 0.5).abs() > 1e-12 => {
                return Err(Error::InvalidParameter(format!(
                    "lif-exp-bthalf requires b*tau = 1/2, got {bt}"
                )))
            }
            _ => {}
        }
        Ok(NeuronModelConfig {
            variant,
            a,
            tau,
            b,
            v0,
            alpha,
        })
    }

    pub fn nlif_step(a: f64, v0: f64, alpha: f64) -> Result<Self> {
        Self::new(NeuronModel::NlifStep, a, 1.0, 0.0, v0, alpha)
    }

    pub fn nlif_exp(tau: f64, v0: f64, alpha: f64) -> Result<Self> {
        Self::new(NeuronModel::NlifExp, 1.0, tau, 0.0, v0, alpha)
    }

    pub fn lif_step(a: f64, b: f64, v0: f64, alpha: f64) -> Result<Self> {
        Self::new(NeuronModel::LifStep, a, 1.0, b, v0, alpha)
    }

    pub fn lif_exp_bt1(tau: f64, v0: f64, alpha: f64) -> Result<Self> {
        Self::new(NeuronModel::LifExpBt1, 1.0, tau, 1.0 / tau, v0, alpha)
    }

    pub fn lif_exp_bthalf(tau: f64, v0: f64, alpha: f64) -> Result<Self> {
        Self::new(NeuronModel::LifExpBtHalf, 1.0, tau, 0.5 / tau, v0, alpha)
    }

    /// τ = 1, v0 = 1, α = 1 nonleaky exponential neuron used for training.
    pub fn training_default() -> Self {
        Self::nlif_exp(1.0, 1.0, 1.0).expect("valid defaults")
    }

    /// Default parameters for a variant: a = τ = v0 = α = 1, and b = 0.5 for
    /// the leaky variants (b = 1 for `LifExpBt1`).
    pub fn default_for(variant: NeuronModel) -> Self {
        match variant {
            NeuronModel::NlifStep => Self::nlif_step(1.0, 1.0, 1.0),
            NeuronModel::NlifExp => Self::nlif_exp(1.0, 1.0, 1.0),
            NeuronModel::LifStep => Self::lif_step(1.0, 0.5, 1.0, 1.0),
            NeuronModel::LifExpBt1 => Self::lif_exp_bt1(1.0, 1.0, 1.0),
            NeuronModel::LifExpBtHalf => Self::lif_exp_bthalf(1.0, 1.0, 1.0),
        }
        .expect("valid defaults")
    }

    pub fn with_v0(self, v0: f64) -> Result<Self> {
        Self::new(self.variant, self.a, self.tau, self.b, v0, self.alpha)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(self.variant, self.a, self.tau, self.b, self.v0, alpha)
    }

    pub fn variant(&self) -> NeuronModel {
        self.variant
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The constant subtracted from the causal weight sum in the denominator of
    /// the rational closed forms.
    pub(crate) fn denominator_offset(&self) -> f64 {
        match self.variant {
            NeuronModel::NlifStep => 0.0,
            NeuronModel::NlifExp => self.v0 / self.tau,
            NeuronModel::LifStep => self.b * self.v0 / self.a,
            NeuronModel::LifExpBt1 | NeuronModel::LifExpBtHalf => 0.0,
        }
    }

    pub(crate) fn encode_raw(&self, t: f64) -> f64 {
        if !t.is_finite() {
            return f64::INFINITY;
        }
        let s = match self.variant {
            NeuronModel::NlifStep | NeuronModel::LifExpBt1 => t,
            NeuronModel::NlifExp => (t / self.tau).exp(),
            NeuronModel::LifStep => (self.b * t).exp(),
            NeuronModel::LifExpBtHalf => (t / (2.0 * self.tau)).exp(),
        };
        self.alpha * s
    }

    pub(crate) fn decode_raw(&self, z: f64) -> f64 {
        if !z.is_finite() {
            return f64::INFINITY;
        }
        let s = z / self.alpha;
        match self.variant {
            NeuronModel::NlifStep | NeuronModel::LifExpBt1 => s,
            NeuronModel::NlifExp => self.tau * s.ln(),
            NeuronModel::LifStep => s.ln() / self.b,
            NeuronModel::LifExpBtHalf => 2.0 * self.tau * s.ln(),
        }
    }

    /// Encoded value of the earliest possible spike, `enc(0)`.
    pub fn encoded_origin(&self) -> f64 {
        self.encode_raw(0.0)
    }

    /// Maps an encoded value back to its spike time.
    pub fn decode(&self, z: NeuronValue) -> SpikeTime {
        SpikeTime(self.decode_raw(z.0).max(0.0))
    }
}

/// Inputs included in a spike computation: the `prefix_count` earliest inputs,
/// listed in ascending spike-time order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CausalSet {
    pub indices: Vec<usize>,
}

impl CausalSet {
    pub fn empty() -> Self {
        CausalSet::default()
    }

    pub fn prefix_count(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }
}

/// `z = enc(t)` for the configured variant.
pub fn encode_value(t: SpikeTime, cfg: &NeuronModelConfig) -> Result<NeuronValue> {
    if t.0 < 0.0 {
        return Err(Error::NegativeTime(t.0));
    }
    Ok(NeuronValue(cfg.encode_raw(t.0)))
}

/// Running prefix sums of the two weighted quantities each closed form needs.
#[derive(Clone, Copy, Default)]
struct PrefixSums {
    p: f64,
    q: f64,
}

impl PrefixSums {
    /// Adds one input with encoded value `z` and weight `w`.
    #[inline]
    fn push(&mut self, cfg: &NeuronModelConfig, z: f64, w: f64) {
        match cfg.variant {
            // p = Σ w, q = Σ w z
            NeuronModel::NlifStep | NeuronModel::NlifExp | NeuronModel::LifStep => {
                self.p += w;
                self.q += w * z;
            }
            // p = Σ w e^{b t}, q = Σ w t e^{b t}
            NeuronModel::LifExpBt1 => {
                let t = z / cfg.alpha;
                let e = (cfg.b * t).exp();
                self.p += w * e;
                self.q += w * t * e;
            }
            // p = Σ w y, q = Σ w y², y = e^{t/2τ}
            NeuronModel::LifExpBtHalf => {
                let y = z / cfg.alpha;
                self.p += w * y;
                self.q += w * y * y;
            }
        }
    }

    /// Closed-form output value of this prefix, `None` when the prefix cannot
    /// produce a real crossing. `z_last` is the largest included value.
    #[inline]
    fn candidate(&self, cfg: &NeuronModelConfig, z_last: f64) -> Option<f64> {
        match cfg.variant {
            NeuronModel::NlifStep => {
                if self.p.abs() < DENOMINATOR_GUARD {
                    return None;
                }
                Some((self.q + cfg.alpha * cfg.v0 / cfg.a) / self.p)
            }
            NeuronModel::NlifExp | NeuronModel::LifStep => {
                let d = self.p - cfg.denominator_offset();
                if d.abs() < DENOMINATOR_GUARD {
                    return None;
                }
                Some(self.q / d)
            }
            NeuronModel::LifExpBt1 => lambert_candidate(cfg, self.p, self.q),
            NeuronModel::LifExpBtHalf => quadratic_candidate(cfg, self.p, self.q, z_last),
        }
    }
}

/// `t = S_t/S − W₀(−(b v0/S) e^{b S_t/S}) / b`, encoded as `α t`.
fn lambert_candidate(cfg: &NeuronModelConfig, s: f64, s_t: f64) -> Option<f64> {
    // S ≤ 0 puts the argument at or above zero, where the only real root is a
    // downward crossing.
    if s <= DENOMINATOR_GUARD {
        return None;
    }
    let b = cfg.b;
    let mean_t = s_t / s;
    let ln_mag = (b * cfg.v0 / s).ln() + b * mean_t;
    // |x| > 1/e: the membrane peak stays below threshold.
    if ln_mag > -1.0 + TANGENCY_SLACK {
        return None;
    }
    let x = -(ln_mag.exp()).min(-BRANCH_POINT);
    let w = lambert_w0(x).ok()?;
    Some(cfg.alpha * (mean_t - w / b))
}

/// Roots of `(v0/2τ) y² − A y + B = 0` with `y = e^{t/2τ}`; returns the
/// smallest encoded root exceeding `z_last`.
fn quadratic_candidate(cfg: &NeuronModelConfig, a_sum: f64, b_sum: f64, z_last: f64) -> Option<f64> {
    let tau = cfg.tau;
    let v0 = cfg.v0;
    let mut disc = a_sum * a_sum - 2.0 * v0 * b_sum / tau;
    if disc < 0.0 {
        if disc >= -TANGENCY_SLACK * a_sum * a_sum {
            disc = 0.0;
        } else {
            return None;
        }
    }
    let sq = disc.sqrt();
    // Stable pair: the larger-magnitude root from the direct formula, the
    // other from the product of roots 2τB/v0.
    let big = (tau / v0) * (a_sum + a_sum.signum() * sq);
    if big == 0.0 {
        return None;
    }
    let other = (2.0 * tau * b_sum / v0) / big;
    let (lo, hi) = if big < other { (big, other) } else { (other, big) };
    [lo, hi]
        .into_iter()
        .map(|y| cfg.alpha * y)
        .find(|&z| z > z_last)
}

/// Evaluates the closed form over every prefix of inputs already sorted by
/// encoded value and returns `(prefix_count, z_out)` for the first valid
/// prefix. Non-finite values must have been dropped by the caller. When no
/// prefix is valid returns `(0, +∞)`.
pub(crate) fn first_valid_prefix(
    cfg: &NeuronModelConfig,
    z_sorted: impl ExactSizeIterator<Item = (f64, f64)>,
) -> (usize, f64) {
    let mut sums = PrefixSums::default();
    let mut it = z_sorted.peekable();
    let mut k = 0usize;
    while let Some((z, w)) = it.next() {
        sums.push(cfg, z, w);
        k += 1;
        let next = it.peek().map_or(f64::INFINITY, |&(zn, _)| zn);
        if let Some(c) = sums.candidate(cfg, z) {
            if c > z && c <= next {
                return (k, c);
            }
        }
    }
    (0, f64::INFINITY)
}

/// Indices of the finite inputs in ascending value order; ties keep index order.
pub(crate) fn sorted_order(z: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..z.len()).filter(|&i| z[i].is_finite()).collect();
    order.sort_by(|&i, &j| z[i].total_cmp(&z[j]));
    order
}

fn check_inputs(z: &[NeuronValue], w: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    if z.len() != w.len() {
        return Err(Error::LengthMismatch {
            what: "inputs and weights",
            left: z.len(),
            right: w.len(),
        });
    }
    if let Some(i) = w.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("weight {i}")));
    }
    Ok(())
}

/// Generalised forward pass of one neuron for any variant.
///
/// Sorts inputs by encoded value, evaluates the variant's closed form on each
/// prefix and returns the first candidate `c` with `z_last < c ≤ z_next`
/// (`z_next = +∞` after the last input) together with its causal set.
/// Returns `NO_SPIKE` and an empty causal set when no prefix qualifies.
pub fn forward_neuron(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    check_inputs(z, w)?;
    let raw: Vec<f64> = z.iter().map(|v| v.0).collect();
    let order = sorted_order(&raw);
    let (k, out) = first_valid_prefix(cfg, order.iter().map(|&i| (raw[i], w[i])));
    let causal = CausalSet {
        indices: order[..k].to_vec(),
    };
    Ok((NeuronValue(out), causal))
}

fn forward_checked(
    expected: NeuronModel,
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    if cfg.variant != expected {
        return Err(Error::InvalidParameter(format!(
            "expected a {expected} configuration, got {}",
            cfg.variant
        )));
    }
    forward_neuron(z, w, cfg)
}

/// Nonleaky unit-step neuron: `z_out = (Σ zᵢwᵢ + α v0/a) / Σ wᵢ` over the causal set.
pub fn spike_time_nlif_step(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    forward_checked(NeuronModel::NlifStep, z, w, cfg)
}

/// Nonleaky exponential neuron: `z_out = Σ zᵢwᵢ / (Σ wᵢ − v0/τ)`.
pub fn spike_time_nlif_exp(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    forward_checked(NeuronModel::NlifExp, z, w, cfg)
}

/// Leaky unit-step neuron: `z_out = Σ zᵢwᵢ / (Σ wᵢ − b v0/a)` with `z = α e^{bt}`.
pub fn spike_time_lif_step(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    forward_checked(NeuronModel::LifStep, z, w, cfg)
}

/// Leaky exponential neuron with `bτ = 1`, solved with the principal branch
/// of Lambert W (earliest crossing).
pub fn spike_time_lif_exp_bt1(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    forward_checked(NeuronModel::LifExpBt1, z, w, cfg)
}

/// Leaky exponential neuron with `bτ = 1/2`, solved as a quadratic in `e^{t/2τ}`.
pub fn spike_time_lif_exp_bthalf(
    z: &[NeuronValue],
    w: &[f64],
    cfg: &NeuronModelConfig,
) -> Result<(NeuronValue, CausalSet)> {
    forward_checked(NeuronModel::LifExpBtHalf, z, w, cfg)
}

/// Evaluates the closed form on an explicit causal set, without the validity
/// mask. Used to replay recorded causal sets.
pub fn replay_causal_set(
    z: &[NeuronValue],
    w: &[f64],
    causal: &CausalSet,
    cfg: &NeuronModelConfig,
) -> Result<NeuronValue> {
    check_inputs(z, w)?;
    if causal.indices.is_empty() {
        return Ok(NeuronValue::NO_SPIKE);
    }
    let mut sums = PrefixSums::default();
    let mut z_last = f64::NEG_INFINITY;
    for &i in &causal.indices {
        let zi = *z.get(i).ok_or_else(|| {
            Error::InconsistentCausalSet(format!("index {i} out of range"))
        })?;
        sums.push(cfg, zi.0, w[i]);
        z_last = z_last.max(zi.0);
    }
    Ok(NeuronValue(sums.candidate(cfg, z_last).unwrap_or(f64::INFINITY)))
}

fn validate_causal_set(z: &[NeuronValue], causal: &CausalSet) -> Result<()> {
    let mut seen = vec![false; z.len()];
    let mut max_in = f64::NEG_INFINITY;
    for &i in &causal.indices {
        if i >= z.len() {
            return Err(Error::InconsistentCausalSet(format!("index {i} out of range")));
        }
        if seen[i] {
            return Err(Error::InconsistentCausalSet(format!("index {i} repeated")));
        }
        seen[i] = true;
        if !z[i].is_spike() {
            return Err(Error::InconsistentCausalSet(format!(
                "input {i} never spikes"
            )));
        }
        max_in = max_in.max(z[i].0);
    }
    if let Some(i) = (0..z.len()).find(|&i| !seen[i] && z[i].0 < max_in) {
        return Err(Error::InconsistentCausalSet(format!(
            "excluded input {i} fires before an included input"
        )));
    }
    Ok(())
}

/// Analytic gradients `(∂z_out/∂z, ∂z_out/∂w)` of a rational-form neuron.
///
/// With `D = Σ_{ℓ∈C} w_ℓ − offset`: `∂z_out/∂zᵢ = wᵢ/D` and
/// `∂z_out/∂wᵢ = (zᵢ − z_out)/D` for `i ∈ C`, zero elsewhere. All gradients
/// vanish when the neuron does not spike. At causal-set boundaries this is the
/// one-sided gradient of the given set.
pub fn grad_neuron(
    z: &[NeuronValue],
    w: &[f64],
    causal: &CausalSet,
    z_out: NeuronValue,
    cfg: &NeuronModelConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(z, w)?;
    if !cfg.variant.is_rational() {
        return Err(Error::UnsupportedVariant(cfg.variant.name()));
    }
    let n = z.len();
    let mut dz = vec![0.0; n];
    let mut dw = vec![0.0; n];
    if !z_out.is_spike() {
        return Ok((dz, dw));
    }
    validate_causal_set(z, causal)?;
    if causal.indices.is_empty() {
        return Err(Error::InconsistentCausalSet(
            "finite output with an empty causal set".into(),
        ));
    }
    let d: f64 =
        causal.indices.iter().map(|&i| w[i]).sum::<f64>() - cfg.denominator_offset();
    for &i in &causal.indices {
        dz[i] = w[i] / d;
        dw[i] = (z[i].0 - z_out.0) / d;
    }
    Ok((dz, dw))
}

#[cfg(test)]
mod tests;
