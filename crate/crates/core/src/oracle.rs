//! Numerical ground truth for the membrane equation
//! `dv/dt + b v = Σ wᵢ g(t − tᵢ)`, `v(0) = 0`.
//!
//! Integration uses an adaptive Dormand–Prince 5(4) pair and restarts at every
//! input spike time, where the drive is discontinuous. The first threshold
//! crossing is bracketed per accepted step (including a cubic Hermite check
//! for crossings that rise and fall inside one step) and then localised by
//! bisection, re-integrating from the last state below threshold.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neuron::{NeuronModelConfig, SpikeTime};

/// Synaptic current waveform of one input spike.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `g(t) = a` for `t ≥ 0`.
    Step { a: f64 },
    /// `g(t) = e^{-t/τ}` for `t ≥ 0`.
    Exp { tau: f64 },
}

impl Kernel {
    #[inline]
    fn eval(&self, dt: f64) -> f64 {
        match *self {
            Kernel::Step { a } => a,
            Kernel::Exp { tau } => (-dt / tau).exp(),
        }
    }
}

/// Membrane dynamics independent of any closed form; also covers leaky
/// exponential neurons with arbitrary `b τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membrane {
    pub kernel: Kernel,
    /// Leak rate, `0` for nonleaky neurons.
    pub leak: f64,
    pub threshold: f64,
    /// Time scale for the horizon and step limits.
    pub tau: f64,
}

impl Membrane {
    pub fn from_config(cfg: &NeuronModelConfig) -> Self {
        let kernel = if cfg.variant().has_step_kernel() {
            Kernel::Step { a: cfg.a() }
        } else {
            Kernel::Exp { tau: cfg.tau() }
        };
        Membrane {
            kernel,
            leak: if cfg.variant().is_leaky() { cfg.b() } else { 0.0 },
            threshold: cfg.v0(),
            tau: cfg.tau(),
        }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Membrane { threshold, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration stops at `horizon · τ`.
    pub horizon: f64,
    /// Width of the final bisection bracket, in time units.
    pub refinement: f64,
    /// Largest step, in units of τ.
    pub max_step: f64,
    /// Number of evenly spaced trace samples.
    pub trace_points: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            horizon: 50.0,
            refinement: 1e-12,
            max_step: 0.02,
            trace_points: 0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.refinement > 0.0
            && self.max_step > 0.0
            && self.horizon > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "integrator tolerances must be positive and horizon > 1: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub crossing: SpikeTime,
    /// Evenly sampled `(t, v)` over `[0, end]`, where `end` is the crossing or
    /// the horizon.
    pub trace: Vec<(f64, f64)>,
}

struct Drive<'a> {
    times: &'a [f64],
    weights: &'a [f64],
    membrane: Membrane,
}

impl Drive<'_> {
    /// Right-hand side with the active inputs fixed for the whole segment, so
    /// stages evaluated exactly at the next knot see the left limit.
    #[inline]
    fn rhs(&self, t: f64, v: f64) -> f64 {
        let mut s = 0.0;
        for (&ti, &wi) in self.times.iter().zip(self.weights) {
            s += wi * self.membrane.kernel.eval(t - ti);
        }
        s - self.membrane.leak * v
    }

    /// Drive restricted to inputs that fired at or before `t`.
    fn active_at(&self, t: f64) -> Drive<'_> {
        let n = self.times.partition_point(|&ti| ti <= t);
        Drive {
            times: &self.times[..n],
            weights: &self.weights[..n],
            membrane: self.membrane,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a> {
    drive: Drive<'a>,
    icfg: IntegratorConfig,
    h_max: f64,
}

impl Stepper<'_> {
    /// Stepper for the knot interval starting at `t0`.
    fn segment(&self, t0: f64) -> Stepper<'_> {
        Stepper {
            drive: self.drive.active_at(t0),
            icfg: self.icfg,
            h_max: self.h_max,
        }
    }

    /// One trial step; returns `(v_new, f_new, error_norm)`. `t + h` must not
    /// cross a knot.
    fn try_step(&self, t: f64, v: f64, f0: f64, h: f64) -> (f64, f64, f64) {
        let d = &self.drive;
        let k1 = f0;
        let k2 = d.rhs(t + C2 * h, v + h * A21 * k1);
        let k3 = d.rhs(t + C3 * h, v + h * (A31 * k1 + A32 * k2));
        let k4 = d.rhs(t + C4 * h, v + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = d.rhs(
            t + C5 * h,
            v + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        );
        let k6 = d.rhs(
            t + h,
            v + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let v_new = v + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = d.rhs(t + h, v_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = self.icfg.abs_tol + self.icfg.rel_tol * v.abs().max(v_new.abs());
        (v_new, k7, (err / scale).abs())
    }

    /// Integrates from `(t0, v0)` to `t1` inside one knot interval.
    fn advance(&self, t0: f64, v0: f64, t1: f64) -> f64 {
        let mut t = t0;
        let mut v = v0;
        let mut h = (t1 - t0).min(self.h_max);
        while t < t1 {
            let last = t + h >= t1;
            let hh = if last { t1 - t } else { h };
            if hh <= 0.0 {
                break;
            }
            let f0 = self.drive.rhs(t, v);
            let (v_new, _, err) = self.try_step(t, v, f0, hh);
            if err <= 1.0 || hh < 1e-14 {
                t = if last { t1 } else { t + hh };
                v = v_new;
            }
            h = next_step(hh, err).min(self.h_max);
        }
        v
    }
}

fn next_step(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

/// Integrates the membrane for the given input spike times and weights and
/// returns the first time `v(t) ≥ threshold`, or `NO_SPIKE` when the
/// threshold is not reached within `horizon · τ`.
pub fn integrate(
    t_in: &[SpikeTime],
    w: &[f64],
    membrane: Membrane,
    icfg: &IntegratorConfig,
) -> Result<OracleResult> {
    icfg.validate()?;
    if t_in.len() != w.len() {
        return Err(Error::LengthMismatch {
            what: "spike times and weights",
            left: t_in.len(),
            right: w.len(),
        });
    }
    if let Some(i) = w.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("weight {i}")));
    }
    if !(membrane.threshold > 0.0 && membrane.tau > 0.0 && membrane.leak >= 0.0) {
        return Err(Error::InvalidParameter(format!("membrane {membrane:?}")));
    }

    let end = icfg.horizon * membrane.tau;
    let mut inputs: Vec<(f64, f64)> = t_in
        .iter()
        .zip(w)
        .filter_map(|(t, &wi)| t.get().filter(|&t| t <= end).map(|t| (t, wi)))
        .collect();
    inputs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (times, weights): (Vec<f64>, Vec<f64>) = inputs.into_iter().unzip();

    let mut knots: Vec<f64> = times.clone();
    knots.push(0.0);
    knots.push(end);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let stepper = Stepper {
        drive: Drive {
            times: &times,
            weights: &weights,
            membrane,
        },
        icfg: *icfg,
        h_max: icfg.max_step * membrane.tau,
    };

    let crossing = find_crossing(&stepper, &knots);
    let trace_end = crossing.unwrap_or(end);
    let trace = if icfg.trace_points > 0 {
        sample_trace(&stepper, &knots, trace_end, icfg.trace_points)
    } else {
        Vec::new()
    };
    Ok(OracleResult {
        crossing: crossing.map_or(SpikeTime::NO_SPIKE, |t| {
            SpikeTime::new(t).expect("crossing time is nonnegative")
        }),
        trace,
    })
}

/// [`integrate`] with the membrane implied by a closed-form neuron config.
pub fn integrate_membrane(
    t_in: &[SpikeTime],
    w: &[f64],
    cfg: &NeuronModelConfig,
    icfg: &IntegratorConfig,
) -> Result<OracleResult> {
    integrate(t_in, w, Membrane::from_config(cfg), icfg)
}

fn find_crossing(s: &Stepper<'_>, knots: &[f64]) -> Option<f64> {
    let mut v = 0.0;
    for seg in knots.windows(2) {
        let (k0, k1) = (seg[0], seg[1]);
        let s = s.segment(k0);
        let s = &s;
        let mut t = k0;
        let mut h = (k1 - k0).min(s.h_max);
        // Right-sided derivative at the knot: inputs at k0 are active.
        let mut f = s.drive.rhs(t, v);
        while t < k1 {
            let last = t + h >= k1;
            let hh = if last { k1 - t } else { h };
            if hh <= 0.0 {
                break;
            }
            let (v_new, f_new, err) = s.try_step(t, v, f, hh);
            if err <= 1.0 || hh < 1e-14 {
                let t_new = if last { k1 } else { t + hh };
                if let Some(tb) = bracket(s, t, v, f, t_new, v_new, f_new) {
                    return Some(bisect(s, t, v, tb));
                }
                t = t_new;
                v = v_new;
                f = f_new;
            }
            h = next_step(hh, err).min(s.h_max);
        }
    }
    None
}

/// Returns a time `tb` in `(t0, t1]` with `v(tb) ≥ threshold` if the step
/// crosses the threshold.
fn bracket(
    s: &Stepper<'_>,
    t0: f64,
    v0: f64,
    f0: f64,
    t1: f64,
    v1: f64,
    f1: f64,
) -> Option<f64> {
    let th = s.drive.membrane.threshold;
    if v1 >= th {
        return Some(t1);
    }
    // Cubic Hermite interpolant on the step; look for an interior maximum
    // that may exceed the threshold.
    let h = t1 - t0;
    let peak = hermite_peak(v0, f0, v1, f1, h)?;
    let (theta, v_peak) = peak;
    let margin = 1e-6 * th.max(1.0);
    if v_peak < th - margin {
        return None;
    }
    // Check the true trajectory at a few points around the interpolated peak.
    let mut probes = [theta - 0.05, theta, theta + 0.05];
    for p in probes.iter_mut() {
        *p = p.clamp(1e-6, 1.0 - 1e-6);
    }
    for &p in &probes {
        let tp = t0 + p * h;
        let vp = s.advance(t0, v0, tp);
        if vp >= th {
            return Some(tp);
        }
    }
    // Dense scan for very narrow excursions.
    let n = 64;
    for i in 1..n {
        let tp = t0 + h * i as f64 / n as f64;
        if s.advance(t0, v0, tp) >= th {
            return Some(tp);
        }
    }
    None
}

/// Interior maximum `(θ, v)` of the cubic Hermite interpolant over `[0, 1]`.
fn hermite_peak(v0: f64, f0: f64, v1: f64, f1: f64, h: f64) -> Option<(f64, f64)> {
    // p(θ) = h00 v0 + h10 h f0 + h01 v1 + h11 h f1
    let m0 = h * f0;
    let m1 = h * f1;
    // p'(θ) = 3Aθ² + 2Bθ + C
    let a = 2.0 * v0 + m0 - 2.0 * v1 + m1;
    let b = -3.0 * v0 - 2.0 * m0 + 3.0 * v1 - m1;
    let c = m0;
    let eval = |th: f64| ((a * th + b) * th + c) * th + v0;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |th: f64| {
        if th > 0.0 && th < 1.0 && th.is_finite() {
            let v = eval(th);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((th, v));
            }
        }
    };
    if a.abs() < 1e-300 {
        if b.abs() > 1e-300 {
            consider(-c / (2.0 * b));
        }
    } else {
        let disc = 4.0 * b * b - 12.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            consider((-2.0 * b + sq) / (6.0 * a));
            consider((-2.0 * b - sq) / (6.0 * a));
        }
    }
    best
}

/// Shrinks `[ta, tb]` (with `v(ta) < threshold ≤ v(tb)`) below the refinement
/// width, re-integrating from the known state at `ta`.
fn bisect(s: &Stepper<'_>, mut ta: f64, mut va: f64, mut tb: f64) -> f64 {
    let th = s.drive.membrane.threshold;
    for _ in 0..200 {
        if tb - ta <= s.icfg.refinement {
            break;
        }
        let mid = 0.5 * (ta + tb);
        if mid <= ta || mid >= tb {
            break;
        }
        let vm = s.advance(ta, va, mid);
        if vm >= th {
            tb = mid;
        } else {
            ta = mid;
            va = vm;
        }
    }
    0.5 * (ta + tb)
}

fn sample_trace(s: &Stepper<'_>, knots: &[f64], end: f64, points: usize) -> Vec<(f64, f64)> {
    let times: Vec<f64> = if points == 1 {
        vec![0.0]
    } else {
        (0..points)
            .map(|i| end * i as f64 / (points - 1) as f64)
            .collect()
    };
    let mut out = Vec::with_capacity(points);
    let mut t = 0.0;
    let mut v = 0.0;
    let mut knot_iter = knots.iter().copied().filter(|&k| k > 0.0).peekable();
    for target in times {
        // Advance knot by knot so no step straddles a discontinuity.
        while let Some(&k) = knot_iter.peek() {
            if k <= target {
                v = s.segment(t).advance(t, v, k);
                t = k;
                knot_iter.next();
            } else {
                break;
            }
        }
        if target > t {
            v = s.segment(t).advance(t, v, target);
            t = target;
        }
        out.push((target, v));
    }
    out
}

/// Writes a trace as CSV with header `t,v`.
pub fn write_trace_csv(trace: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::from("t,v\n");
    for (t, v) in trace {
        buf.push_str(&format!("{t},{v}\n"));
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(ts: &[f64]) -> Vec<SpikeTime> {
        ts.iter().map(|&t| SpikeTime::new(t).unwrap()).collect()
    }

    #[test]
    fn no_inputs_never_spike() {
        let cfg = NeuronModelConfig::training_default();
        let icfg = IntegratorConfig {
            trace_points: 11,
            ..Default::default()
        };
        let r = integrate_membrane(&[], &[], &cfg, &icfg).unwrap();
        assert_eq!(r.crossing, SpikeTime::NO_SPIKE);
        assert_eq!(r.trace.len(), 11);
        assert!(r.trace.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn step_kernel_ramp() {
        let cfg = NeuronModelConfig::nlif_step(1.0, 1.0, 1.0).unwrap();
        let r = integrate_membrane(&st(&[0.0]), &[1.0], &cfg, &Default::default()).unwrap();
        assert!((r.crossing.raw() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn exp_kernel_nonleaky() {
        // v(t) = 2(1 - e^{-t}) = 1 at t = ln 2
        let cfg = NeuronModelConfig::training_default();
        let r = integrate_membrane(&st(&[0.0]), &[2.0], &cfg, &Default::default()).unwrap();
        assert!((r.crossing.raw() - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn leaky_step_matches_analytic() {
        // v = (a w / b)(1 - e^{-bt}); w = 1, a = 1, b = 0.5, v0 = 1 -> t = 2 ln 2
        let cfg = NeuronModelConfig::lif_step(1.0, 0.5, 1.0, 1.0).unwrap();
        let r = integrate_membrane(&st(&[0.0]), &[1.0], &cfg, &Default::default()).unwrap();
        assert!((r.crossing.raw() - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn horizon_bounds_search() {
        // Asymptote 0.999 stays below threshold.
        let cfg = NeuronModelConfig::training_default();
        let r = integrate_membrane(&st(&[0.0]), &[0.999], &cfg, &Default::default()).unwrap();
        assert_eq!(r.crossing, SpikeTime::NO_SPIKE);
    }

    #[test]
    fn rejects_non_finite_weights() {
        let cfg = NeuronModelConfig::training_default();
        assert!(integrate_membrane(&st(&[0.0]), &[f64::NAN], &cfg, &Default::default()).is_err());
    }

    #[test]
    fn nonleaky_positive_weights_trace_is_monotone() {
        let cfg = NeuronModelConfig::training_default().with_v0(100.0).unwrap();
        let icfg = IntegratorConfig {
            trace_points: 200,
            ..Default::default()
        };
        let r = integrate_membrane(&st(&[0.3, 1.2, 2.5]), &[0.4, 1.1, 0.2], &cfg, &icfg).unwrap();
        assert!(r.trace.windows(2).all(|p| p[1].1 >= p[0].1 - 1e-12));
    }

    #[test]
    fn grazing_crossing_inside_one_step_is_found() {
        // Leaky bt=1 single input peaks at t = 1 with v = w/e; put the peak
        // just above threshold.
        let cfg = NeuronModelConfig::lif_exp_bt1(1.0, 1.0, 1.0).unwrap();
        let w = std::f64::consts::E * (1.0 + 1e-6);
        let icfg = IntegratorConfig {
            max_step: 5.0,
            ..Default::default()
        };
        let r = integrate_membrane(&st(&[0.0]), &[w], &cfg, &icfg).unwrap();
        assert!(r.crossing.is_spike());
        assert!((r.crossing.raw() - 1.0).abs() < 2e-3);
    }
}
