//! Reduced phase model of weakly coupled oscillators.
//!
//! Each oscillator is a single unwrapped phase `θ_i` in cycles:
//!
//! ```text
//! dθ_i/dt = λ_i + λ_i · Γ(θ_i) · C_i(θ),    C_i = Σ_j g_ij · v(θ_j)
//! ```
//!
//! where `v` is the coupling-node waveform and `Γ` the phase response at
//! that node, both period-1 functions. Any waveform/PRC pair can be plugged in.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::direct::{validate_coupling_matrix, CoupledSystemSpec, DEFAULT_INCLUDE_SELF};
use crate::error::{Error, Result};
use crate::ode::Rk4;
use crate::signal::{csv_writer, PeriodicSignal};
use crate::waveform::{analytic_ppv, analytic_waveform, Node, DEFAULT_RESOLUTION};

/// Default step, in cycles of the fastest oscillator.
pub const DEFAULT_STEP_CYCLES: f64 = 0.02;
/// Default duration, in cycles of the slowest oscillator.
pub const DEFAULT_CYCLES: f64 = 200.0;
pub const DEFAULT_LOCK_TOLERANCE: f64 = 1e-3;
pub const MIN_WINDOW: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSystem {
    pub lambda: Vec<f64>,
    pub epsilon: f64,
    /// Explicit symmetric coefficients; uniform `epsilon` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    pub prc: PeriodicSignal,
    pub waveform: PeriodicSignal,
    pub include_self: bool,
}

impl PhaseSystem {
    pub fn new(lambda: &[f64], epsilon: f64, prc: PeriodicSignal, waveform: PeriodicSignal) -> Result<Self> {
        let sys = Self {
            lambda: lambda.to_vec(),
            epsilon,
            g: None,
            prc,
            waveform,
            include_self: DEFAULT_INCLUDE_SELF,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Closed-form ring waveform and PPV at node 3.
    pub fn analytic(lambda: &[f64], epsilon: f64) -> Result<Self> {
        Self::new(
            lambda,
            epsilon,
            analytic_ppv(Node::N3, DEFAULT_RESOLUTION)?,
            analytic_waveform(Node::N3, DEFAULT_RESOLUTION)?,
        )
    }

    /// Mirrors a direct-simulation configuration with the given PRC.
    pub fn from_coupled(spec: &CoupledSystemSpec, prc: PeriodicSignal) -> Result<Self> {
        spec.validate()?;
        let sys = Self {
            lambda: spec.lambdas(),
            epsilon: spec.epsilon,
            g: spec.coupling.clone(),
            prc,
            waveform: analytic_waveform(Node::N3, DEFAULT_RESOLUTION)?,
            include_self: spec.include_self,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_include_self(mut self, include_self: bool) -> Self {
        self.include_self = include_self;
        self
    }

    pub fn with_coupling(mut self, g: Vec<Vec<f64>>) -> Result<Self> {
        self.g = Some(g);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_empty() {
            return Err(Error::Config("at least one oscillator is required".into()));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lambda must be > 0, got {l}")));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(g) = &self.g {
            validate_coupling_matrix(g, self.n())?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn default_dt(&self) -> f64 {
        DEFAULT_STEP_CYCLES / self.lambda.iter().cloned().fold(0.0, f64::max)
    }

    pub fn default_t_end(&self) -> f64 {
        DEFAULT_CYCLES / self.lambda.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Phase velocities into `out`, with `v` as scratch of length `n`.
    /// Returns the smallest velocity.
    fn rates_into(&self, wave: &Table, prc: &Table, theta: &[f64], v: &mut [f64], out: &mut [f64]) -> f64 {
        let n = self.n();
        for j in 0..n {
            v[j] = wave.at(theta[j]);
        }
        let mut min_rate = f64::INFINITY;
        match &self.g {
            None => {
                let total: f64 = v.iter().sum();
                for i in 0..n {
                    let sum = if self.include_self { total } else { total - v[i] };
                    let c = self.epsilon * sum;
                    out[i] = self.lambda[i] * (1.0 + prc.at(theta[i]) * c);
                    min_rate = min_rate.min(out[i]);
                }
            }
            Some(g) => {
                for i in 0..n {
                    let c = self.matrix_term(g, v, i);
                    out[i] = self.lambda[i] * (1.0 + prc.at(theta[i]) * c);
                    min_rate = min_rate.min(out[i]);
                }
            }
        }
        min_rate
    }

    fn matrix_term(&self, g: &[Vec<f64>], v: &[f64], i: usize) -> f64 {
        let mut c = 0.0;
        for (j, vj) in v.iter().enumerate() {
            if j != i || self.include_self {
                c += g[i][j] * vj;
            }
        }
        c
    }
}

/// Wrapped linear interpolation without the exact-sample snapping of
/// [`PeriodicSignal::at`], for the integration loop.
struct Table {
    m: f64,
    last: usize,
    y: Vec<f64>,
}

impl Table {
    fn new(s: &PeriodicSignal) -> Self {
        let mut y = s.samples().to_vec();
        y.push(y[0]);
        Self {
            m: s.resolution() as f64,
            last: s.resolution() - 1,
            y,
        }
    }

    #[inline]
    fn at(&self, t: f64) -> f64 {
        let mut fl = t as i64 as f64;
        if fl > t {
            fl -= 1.0;
        }
        let x = (t - fl) * self.m;
        let k = (x as usize).min(self.last);
        let fr = x - k as f64;
        self.y[k] + fr * (self.y[k + 1] - self.y[k])
    }
}

/// `C_i`: weighted sum of the coupling-node waveform over the other
/// oscillators (and itself when `include_self`).
pub fn coupling_term(system: &PhaseSystem, thetas: &[f64], i: usize) -> Result<f64> {
    let n = system.n();
    if thetas.len() != n {
        return Err(Error::Contract(format!("{} phases given for {n} oscillators", thetas.len())));
    }
    if i >= n {
        return Err(Error::Contract(format!("oscillator index {i} out of range for n = {n}")));
    }
    let v: Vec<f64> = thetas.iter().map(|t| system.waveform.at(*t)).collect();
    Ok(match &system.g {
        Some(g) => system.matrix_term(g, &v, i),
        None => {
            let sum: f64 = v
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i || system.include_self)
                .map(|(_, x)| x)
                .sum();
            system.epsilon * sum
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    /// Set when some phase velocity was not positive: the weak-coupling
    /// picture no longer holds.
    pub strong_coupling: bool,
    pub first_nonpositive_time: Option<f64>,
    pub min_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    lambda: Vec<f64>,
    dt: f64,
    times: Vec<f64>,
    thetas: Vec<f64>,
    diagnostics: PhaseDiagnostics,
}

impl PhaseTrajectory {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Unwrapped phases at sample `k`.
    pub fn theta(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.thetas[k * n..(k + 1) * n]
    }

    pub fn final_theta(&self) -> &[f64] {
        self.theta(self.len() - 1)
    }

    pub fn theta_trace(&self, i: usize) -> Vec<f64> {
        let n = self.n();
        self.thetas.iter().skip(i).step_by(n).copied().collect()
    }

    /// Phase deviations `φ_i = θ_i - λ_i t` at sample `k`.
    pub fn phi(&self, k: usize) -> Vec<f64> {
        let t = self.times[k];
        self.theta(k)
            .iter()
            .zip(&self.lambda)
            .map(|(th, l)| th - l * t)
            .collect()
    }

    pub fn diagnostics(&self) -> &PhaseDiagnostics {
        &self.diagnostics
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend((1..=self.n()).map(|i| format!("theta_{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.theta(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixed-step RK4 integration of the phase equations to `t_end`.
pub fn integrate_phases(system: &PhaseSystem, theta0: &[f64], t_end: f64, dt: f64) -> Result<PhaseTrajectory> {
    system.validate()?;
    let n = system.n();
    if theta0.len() != n {
        return Err(Error::Contract(format!("{} initial phases for {n} oscillators", theta0.len())));
    }
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("initial phases are not finite".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::Config(format!("t_end must be >= dt, got {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;

    let mut times = Vec::with_capacity(steps + 1);
    let mut thetas = Vec::with_capacity((steps + 1) * n);
    let mut y = theta0.to_vec();
    let mut scratch = vec![0.0; n];
    let mut min_rate = f64::INFINITY;
    let mut first_nonpositive = None;
    let mut rk = Rk4::new(n);
    let (wave, prc) = (Table::new(&system.waveform), Table::new(&system.prc));

    times.push(0.0);
    thetas.extend_from_slice(&y);
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut stage_min = f64::INFINITY;
        let mut f = |_t: f64, th: &[f64], out: &mut [f64]| {
            stage_min = stage_min.min(system.rates_into(&wave, &prc, th, &mut scratch, out));
        };
        rk.step(&mut f, t, &mut y, dt);
        if stage_min <= 0.0 && first_nonpositive.is_none() {
            first_nonpositive = Some(t);
        }
        min_rate = min_rate.min(stage_min);
        let t_next = (k + 1) as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { time: t_next });
        }
        times.push(t_next);
        thetas.extend_from_slice(&y);
    }

    Ok(PhaseTrajectory {
        lambda: system.lambda.clone(),
        dt,
        times,
        thetas,
        diagnostics: PhaseDiagnostics {
            strong_coupling: first_nonpositive.is_some(),
            first_nonpositive_time: first_nonpositive,
            min_rate,
        },
    })
}

fn slope(times: &[f64], values: &[f64]) -> f64 {
    let m = times.len() as f64;
    let tm = times.iter().sum::<f64>() / m;
    let vm = values.iter().sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in times.iter().zip(values) {
        num += (t - tm) * (v - vm);
        den += (t - tm) * (t - tm);
    }
    num / den
}

fn window_slopes(traj: &PhaseTrajectory, start: usize, end: usize) -> Vec<f64> {
    let times = &traj.times[start..end];
    (0..traj.n())
        .map(|i| {
            let trace: Vec<f64> = (start..end).map(|k| traj.theta(k)[i]).collect();
            slope(times, &trace)
        })
        .collect()
}

fn window_start(traj: &PhaseTrajectory, window_fraction: f64) -> Result<usize> {
    if !(window_fraction >= MIN_WINDOW && window_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "window fraction must lie in [{MIN_WINDOW}, 1], got {window_fraction}"
        )));
    }
    let last = traj.len() - 1;
    let start = ((1.0 - window_fraction) * last as f64).floor() as usize;
    if last - start < 2 {
        return Err(Error::Config("frequency window holds fewer than 3 samples".into()));
    }
    Ok(start)
}

/// Least-squares slope of each unwrapped phase over the final
/// `window_fraction` of the run.
pub fn extract_frequencies(traj: &PhaseTrajectory, window_fraction: f64) -> Result<Vec<f64>> {
    let start = window_start(traj, window_fraction)?;
    Ok(window_slopes(traj, start, traj.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub first_half: Vec<f64>,
    pub second_half: Vec<f64>,
    pub max_difference: f64,
    pub converged: bool,
}

/// Compares the frequencies of the two halves of the extraction window.
pub fn check_convergence(traj: &PhaseTrajectory, window_fraction: f64, tol: f64) -> Result<Convergence> {
    let start = window_start(traj, window_fraction)?;
    let mid = (start + traj.len()) / 2;
    if mid - start < 2 || traj.len() - mid < 2 {
        return Err(Error::Config("window too short to split".into()));
    }
    let first_half = window_slopes(traj, start, mid + 1);
    let second_half = window_slopes(traj, mid, traj.len());
    let max_difference = first_half
        .iter()
        .zip(&second_half)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Convergence {
        first_half,
        second_half,
        max_difference,
        converged: max_difference <= tol,
    })
}

/// True iff `max - min <= tol`.
pub fn detect_locking(freqs: &[f64], tol: f64) -> Result<bool> {
    if freqs.is_empty() {
        return Err(Error::Contract("no frequencies to compare".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("locking tolerance must be > 0, got {tol}")));
    }
    let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi - lo <= tol)
}
