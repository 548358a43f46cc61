//! Phase response curves of a ring oscillator.
//!
//! Three interchangeable sources:
//!
//! - **analytic**: the closed-form perturbation projection vector;
//! - **malkin**: backward integration of the adjoint linearisation
//!   `dQ/dt = -J(x_s(t))ᵀ Q` along the numerically located limit cycle,
//!   normalised so that `Q · dx_s/dt = 1`;
//! - **winfree**: rectangular pulses injected on node 3 at each probe phase,
//!   with the asymptotic phase shift measured from rising zero crossings.
//!
//! All three are reported in the same units: cycles of phase advance per unit
//! impulse on the coupling node, with phase measured in nominal periods of the
//! oscillator, so they can be dropped into [`crate::phase`] directly. Phase
//! origin follows the closed-form waveforms, on which node 3 crosses zero
//! upward at phase 1/2.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::RingOscillatorSpec;
use crate::error::{Error, Result};
use crate::ode::Rk4;
use crate::signal::PeriodicSignal;
use crate::waveform::{analytic_ppv, ring_state, Node, DEFAULT_RESOLUTION};

pub const DEFAULT_MALKIN_CYCLES: usize = 4;
pub const DEFAULT_WINFREE_AMPLITUDE: f64 = 0.05;
pub const DEFAULT_WINFREE_PULSE_WIDTH: f64 = 0.01;
pub const DEFAULT_WINFREE_RESOLUTION: usize = 128;
pub const DEFAULT_SETTLE_PERIODS: f64 = 5.0;

/// Phase at which the reference coordinate crosses zero upward.
const CROSSING_PHASE: f64 = 0.5;
const MIN_MALKIN_STEPS: usize = 4096;
const CONVERGENCE_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PrcMethod {
    Analytic,
    Malkin,
    Winfree,
}

impl PrcMethod {
    pub const ALL: [PrcMethod; 3] = [PrcMethod::Analytic, PrcMethod::Malkin, PrcMethod::Winfree];

    pub fn name(self) -> &'static str {
        match self {
            PrcMethod::Analytic => "analytic",
            PrcMethod::Malkin => "malkin",
            PrcMethod::Winfree => "winfree",
        }
    }
}

impl std::fmt::Display for PrcMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrcMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(PrcMethod::Analytic),
            "malkin" => Ok(PrcMethod::Malkin),
            "winfree" => Ok(PrcMethod::Winfree),
            other => Err(Error::Config(format!("unknown PRC method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrcDiagnostics {
    Analytic {
        node: usize,
    },
    Malkin {
        cycles: usize,
        /// Measured free-running period.
        period: f64,
        /// `max |Q(start) - Q(end)|` of the final backward cycle, relative to peak.
        residual: f64,
        /// Period average of `Q · dx/dt` before rescaling.
        normalization: f64,
        /// Node 1, 2 and 3 components.
        components: Vec<PeriodicSignal>,
    },
    Winfree {
        amplitude: f64,
        pulse_width: f64,
        settle_periods: f64,
        period: f64,
        /// `max |Z|`, in cycles.
        raw_shift_amplitude: f64,
        /// `max |Z| / amplitude`.
        shift_per_amplitude: f64,
        raw_shift: PeriodicSignal,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrcResult {
    pub signal: PeriodicSignal,
    pub method: PrcMethod,
    pub diagnostics: PrcDiagnostics,
}

/// JSON companion written next to a PRC CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrcSidecar {
    pub method: PrcMethod,
    pub resolution: usize,
    pub diagnostics: PrcDiagnostics,
}

impl PrcResult {
    pub fn sidecar(&self) -> PrcSidecar {
        PrcSidecar {
            method: self.method,
            resolution: self.signal.resolution(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn component(&self, node: Node) -> Option<&PeriodicSignal> {
        match &self.diagnostics {
            PrcDiagnostics::Malkin { components, .. } => components.get(node.index()),
            _ if node == Node::N3 => Some(&self.signal),
            _ => None,
        }
    }
}

/// An autonomous oscillator with a smooth vector field, probed through one
/// coordinate. The adjoint and pulse methods are written against this.
pub trait LimitCycleModel: Sync {
    fn dim(&self) -> usize;
    /// Vector field with `inject` added on the probe coordinate.
    fn rhs(&self, x: &[f64], inject: f64, out: &mut [f64]);
    /// Row-major `dim × dim` Jacobian of `rhs`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    fn probe_index(&self) -> usize;
    fn nominal_period(&self) -> f64;
    /// A state on or near the limit cycle.
    fn initial_state(&self) -> Vec<f64>;
}

impl LimitCycleModel for RingOscillatorSpec {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, x: &[f64], inject: f64, out: &mut [f64]) {
        self.rates(x, inject, out);
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        RingOscillatorSpec::jacobian(self, x, out)
    }

    fn probe_index(&self) -> usize {
        Node::N3.index()
    }

    fn nominal_period(&self) -> f64 {
        1.0 / self.lambda
    }

    fn initial_state(&self) -> Vec<f64> {
        ring_state(0.1).to_vec()
    }
}

/// A located limit cycle: the state where the probe coordinate crosses zero
/// upward, and the period.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub start: Vec<f64>,
    pub period: f64,
}

struct Stepper<'a, M: LimitCycleModel> {
    model: &'a M,
    rk: Rk4,
}

impl<'a, M: LimitCycleModel> Stepper<'a, M> {
    fn new(model: &'a M) -> Self {
        Self {
            model,
            rk: Rk4::new(model.dim()),
        }
    }

    fn step(&mut self, x: &mut [f64], h: f64, inject: f64) {
        let model = self.model;
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| model.rhs(y, inject, out);
        self.rk.step(&mut f, 0.0, x, h);
    }

    /// Advances by exactly `duration` using steps of at most `h`.
    fn advance(&mut self, x: &mut [f64], duration: f64, h: f64, inject: f64) {
        let full = (duration / h).floor();
        for _ in 0..full as usize {
            self.step(x, h, inject);
        }
        let rest = duration - full * h;
        if rest > 1e-14 * h {
            self.step(x, rest, inject);
        }
    }

    /// Steps until the probe coordinate crosses zero upward, ignoring crossings
    /// before `min_time`. Returns the state at the crossing and the elapsed time.
    fn to_crossing(
        &mut self,
        x: &mut Vec<f64>,
        h: f64,
        min_time: f64,
        max_time: f64,
    ) -> Option<f64> {
        let p = self.model.probe_index();
        let mut t = 0.0;
        let mut prev = x.clone();
        while t < max_time {
            prev.copy_from_slice(x);
            self.step(x, h, 0.0);
            t += h;
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
            if t > min_time && prev[p] < 0.0 && x[p] >= 0.0 {
                let tau = self.refine(&prev, h);
                x.copy_from_slice(&prev);
                self.step(x, tau, 0.0);
                return Some(t - h + tau);
            }
        }
        None
    }

    /// Sub-step `τ ∈ (0, h]` at which the probe coordinate of a single RK4 step
    /// from `from` vanishes (Illinois false position).
    fn refine(&mut self, from: &[f64], h: f64) -> f64 {
        let p = self.model.probe_index();
        let mut y = from.to_vec();
        let mut eval = |s: &mut Self, tau: f64| {
            y.copy_from_slice(from);
            s.step(&mut y, tau, 0.0);
            y[p]
        };
        let (mut a, mut fa) = (0.0, from[p]);
        let (mut b, mut fb) = (h, eval(self, h));
        let mut side = 0;
        for _ in 0..60 {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = eval(self, c);
            if fc == 0.0 || (b - a).abs() < 1e-15 * h {
                return c;
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb /= 2.0;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa /= 2.0;
                }
                side = 1;
            }
            if fc.abs() < 1e-15 {
                return c;
            }
        }
        (a * fb - b * fa) / (fb - fa)
    }
}

/// Settles the model onto its limit cycle and measures the period with steps
/// of `period / steps_per_period`.
pub fn find_limit_cycle<M: LimitCycleModel>(model: &M, steps_per_period: usize) -> Result<LimitCycle> {
    let nominal = model.nominal_period();
    let mut h = nominal / steps_per_period as f64;
    let mut st = Stepper::new(model);
    let mut x = model.initial_state();
    st.advance(&mut x, 30.0 * nominal, h, 0.0);

    let none = || Error::NoOscillation { oscillator: 0 };
    st.to_crossing(&mut x, h, 0.0, 3.0 * nominal).ok_or_else(none)?;
    let mut period = nominal;
    for _ in 0..3 {
        period = st
            .to_crossing(&mut x, h, 0.25 * nominal, 3.0 * nominal)
            .ok_or_else(none)?;
        h = period / steps_per_period as f64;
    }
    Ok(LimitCycle { start: x, period })
}

pub fn analytic_prc(node: Node, resolution: usize) -> Result<PrcResult> {
    Ok(PrcResult {
        signal: analytic_ppv(node, resolution)?,
        method: PrcMethod::Analytic,
        diagnostics: PrcDiagnostics::Analytic { node: node.number() },
    })
}

/// Adjoint PRC of a ring oscillator, normalised so that `Q · dx/dt = 1`.
/// The node 3 component is returned; all three are in the diagnostics.
pub fn malkin_prc(osc: &RingOscillatorSpec, cycles: usize, resolution: usize) -> Result<PrcResult> {
    osc.validate()?;
    if !osc.inverter.is_smooth() {
        return Err(Error::Unsupported(
            "the adjoint method needs a smoothed inverter (the ideal transfer has no Jacobian)".into(),
        ));
    }
    malkin_prc_for(osc, cycles, resolution, osc.lambda)
}

/// Adjoint PRC for any [`LimitCycleModel`]; `lambda` is its nominal frequency.
pub fn malkin_prc_for<M: LimitCycleModel>(
    model: &M,
    cycles: usize,
    resolution: usize,
    lambda: f64,
) -> Result<PrcResult> {
    if cycles < 2 {
        return Err(Error::Config(format!("at least 2 backward cycles are needed, got {cycles}")));
    }
    if resolution < 64 {
        return Err(Error::Config(format!("adjoint resolution must be >= 64, got {resolution}")));
    }
    let dim = model.dim();
    let mut check = vec![0.0; dim * dim];
    model.jacobian(&model.initial_state(), &mut check)?;

    let mut mult = MIN_MALKIN_STEPS.div_ceil(resolution);
    if (resolution * mult) % 2 == 1 {
        mult += 1;
    }
    let steps = resolution * mult;
    let lc = find_limit_cycle(model, steps)?;
    let h = lc.period / steps as f64;

    // orbit at half steps, with Jacobians and vector field
    let mut st = Stepper::new(model);
    let mut x = lc.start.clone();
    let mut orbit = Vec::with_capacity((2 * steps + 1) * dim);
    orbit.extend_from_slice(&x);
    for _ in 0..2 * steps {
        st.step(&mut x, 0.5 * h, 0.0);
        orbit.extend_from_slice(&x);
    }
    let mut jac = vec![0.0; (2 * steps + 1) * dim * dim];
    for k in 0..=2 * steps {
        model.jacobian(&orbit[k * dim..(k + 1) * dim], &mut jac[k * dim * dim..(k + 1) * dim * dim])?;
    }
    let mut field = vec![0.0; steps * dim];
    for s in 0..steps {
        model.rhs(&orbit[2 * s * dim..(2 * s + 1) * dim], 0.0, &mut field[s * dim..(s + 1) * dim]);
    }

    // dQ/dσ = Jᵀ Q in reversed time σ = -t
    let jt_mul = |k: usize, q: &[f64], out: &mut [f64]| {
        let m = &jac[k * dim * dim..(k + 1) * dim * dim];
        for a in 0..dim {
            let mut acc = 0.0;
            for b in 0..dim {
                acc += m[b * dim + a] * q[b];
            }
            out[a] = acc;
        }
    };

    let f0 = &field[..dim];
    let f0n: f64 = f0.iter().map(|v| v * v).sum();
    let mut q: Vec<f64> = f0.iter().map(|v| v / f0n).collect();
    let mut cycle = vec![0.0; (steps + 1) * dim];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for _ in 0..cycles {
        cycle[steps * dim..].copy_from_slice(&q);
        for s in (0..steps).rev() {
            jt_mul(2 * s + 2, &q, &mut k1);
            for a in 0..dim {
                tmp[a] = q[a] + 0.5 * h * k1[a];
            }
            jt_mul(2 * s + 1, &tmp, &mut k2);
            for a in 0..dim {
                tmp[a] = q[a] + 0.5 * h * k2[a];
            }
            jt_mul(2 * s + 1, &tmp, &mut k3);
            for a in 0..dim {
                tmp[a] = q[a] + h * k3[a];
            }
            jt_mul(2 * s, &tmp, &mut k4);
            for a in 0..dim {
                q[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            cycle[s * dim..(s + 1) * dim].copy_from_slice(&q);
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence { residual: f64::INFINITY });
        }
    }

    let normalization = (0..steps)
        .map(|s| {
            (0..dim)
                .map(|a| cycle[s * dim + a] * field[s * dim + a])
                .sum::<f64>()
        })
        .sum::<f64>()
        / steps as f64;
    let peak = cycle.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let residual = (0..dim)
        .map(|a| (cycle[a] - cycle[steps * dim + a]).abs())
        .fold(0.0, f64::max)
        / peak;
    if !(residual <= CONVERGENCE_LIMIT) {
        return Err(Error::NonConvergence { residual });
    }

    // time offset s·h from the crossing is phase 1/2 + s/steps
    let unit = 1.0 / (normalization * lambda * lc.period);
    let components = (0..dim)
        .map(|a| {
            let fine = PeriodicSignal::new(
                (0..steps)
                    .map(|j| cycle[((j + steps / 2) % steps) * dim + a] * unit)
                    .collect(),
            )?;
            fine.resample(resolution)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PrcResult {
        signal: components[model.probe_index()].clone(),
        method: PrcMethod::Malkin,
        diagnostics: PrcDiagnostics::Malkin {
            cycles,
            period: lc.period,
            residual,
            normalization,
            components,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinfreeOptions {
    /// Pulse height, added to the node 3 derivative.
    pub amplitude: f64,
    /// Pulse duration in nominal periods.
    pub pulse_width: f64,
    /// Number of probe phases.
    pub resolution: usize,
    pub settle_periods: f64,
    pub steps_per_period: usize,
}

impl Default for WinfreeOptions {
    fn default() -> Self {
        Self {
            amplitude: DEFAULT_WINFREE_AMPLITUDE,
            pulse_width: DEFAULT_WINFREE_PULSE_WIDTH,
            resolution: DEFAULT_WINFREE_RESOLUTION,
            settle_periods: DEFAULT_SETTLE_PERIODS,
            steps_per_period: 2000,
        }
    }
}

impl WinfreeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("pulse amplitude must be > 0, got {}", self.amplitude)));
        }
        if !(self.pulse_width > 0.0 && self.pulse_width < 0.5) {
            return Err(Error::Config(format!(
                "pulse width must lie in (0, 0.5) periods, got {}",
                self.pulse_width
            )));
        }
        if self.resolution < 32 {
            return Err(Error::Config(format!("probe resolution must be >= 32, got {}", self.resolution)));
        }
        if !(self.settle_periods >= 1.0) {
            return Err(Error::Config("settling interval must be at least one period".into()));
        }
        if self.steps_per_period < 100 {
            return Err(Error::Config("at least 100 steps per period are needed".into()));
        }
        Ok(())
    }
}

pub fn winfree_prc(
    osc: &RingOscillatorSpec,
    amplitude: f64,
    pulse_width: f64,
    resolution: usize,
) -> Result<PrcResult> {
    winfree_prc_with(
        osc,
        &WinfreeOptions {
            amplitude,
            pulse_width,
            resolution,
            ..WinfreeOptions::default()
        },
    )
}

pub fn winfree_prc_with(osc: &RingOscillatorSpec, opts: &WinfreeOptions) -> Result<PrcResult> {
    osc.validate()?;
    winfree_prc_for(osc, opts)
}

/// Pulse-probe PRC for any [`LimitCycleModel`]. Probes run in parallel and are
/// assembled in phase order.
pub fn winfree_prc_for<M: LimitCycleModel>(model: &M, opts: &WinfreeOptions) -> Result<PrcResult> {
    opts.validate()?;
    let lc = find_limit_cycle(model, opts.steps_per_period)?;
    let period = lc.period;
    let h = period / opts.steps_per_period as f64;
    let width = opts.pulse_width * model.nominal_period();
    let settle = opts.settle_periods * period;

    let probe = |k: usize| -> Result<f64> {
        let phase = k as f64 / opts.resolution as f64;
        let delay = (phase - CROSSING_PHASE).rem_euclid(1.0) * period;
        let fail = |reason: &str| Error::ProbeFailure {
            phase,
            reason: reason.to_string(),
        };
        let run = |amplitude: f64| -> Option<f64> {
            let mut st = Stepper::new(model);
            let mut x = lc.start.clone();
            st.advance(&mut x, delay, h, 0.0);
            st.advance(&mut x, width, h, amplitude);
            st.advance(&mut x, settle, h, 0.0);
            st.to_crossing(&mut x, h, 0.0, 3.0 * period)
                .map(|t| t + delay + width + settle)
        };
        let unperturbed = run(0.0).ok_or_else(|| fail("reference run stopped oscillating"))?;
        let perturbed = run(opts.amplitude).ok_or_else(|| fail("oscillation died after the pulse"))?;
        let mut dt = unperturbed - perturbed;
        // both runs should report the same cycle
        if dt > 0.5 * period {
            dt -= period;
        } else if dt < -0.5 * period {
            dt += period;
        }
        Ok(dt / period)
    };

    let shifts = (0..opts.resolution)
        .into_par_iter()
        .map(probe)
        .collect::<Result<Vec<f64>>>()?;
    let raw_shift = PeriodicSignal::new(shifts)?;
    let raw_shift_amplitude = raw_shift.peak();
    let signal = raw_shift.scaled(1.0 / (opts.amplitude * opts.pulse_width));

    Ok(PrcResult {
        signal,
        method: PrcMethod::Winfree,
        diagnostics: PrcDiagnostics::Winfree {
            amplitude: opts.amplitude,
            pulse_width: opts.pulse_width,
            settle_periods: opts.settle_periods,
            period,
            raw_shift_amplitude,
            shift_per_amplitude: raw_shift_amplitude / opts.amplitude,
            raw_shift,
        },
    })
}

/// Extracts a PRC at node 3 with default settings for the chosen method.
pub fn extract_prc(method: PrcMethod, osc: &RingOscillatorSpec, resolution: usize) -> Result<PrcResult> {
    match method {
        PrcMethod::Analytic => analytic_prc(Node::N3, resolution),
        PrcMethod::Malkin => malkin_prc(osc, DEFAULT_MALKIN_CYCLES, resolution),
        PrcMethod::Winfree => winfree_prc_with(
            osc,
            &WinfreeOptions {
                resolution,
                ..WinfreeOptions::default()
            },
        ),
    }
}

/// Default resolution per method (pulse probing is the expensive one).
pub fn default_resolution(method: PrcMethod) -> usize {
    match method {
        PrcMethod::Winfree => DEFAULT_WINFREE_RESOLUTION,
        _ => DEFAULT_RESOLUTION,
    }
}

/// RMS difference after optimal circular alignment (and scalar fit when
/// `allow_scale`), on the finer of the two grids.
pub fn prc_rmse(a: &PrcResult, b: &PrcResult, allow_scale: bool) -> f64 {
    a.signal.align(&b.signal, allow_scale).rmse
}
