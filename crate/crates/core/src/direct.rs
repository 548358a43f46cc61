//! Time-domain simulation of coupled ring oscillators.
//!
//! Each oscillator is three RC-loaded inverter stages in a loop. Stage `k` is
//! driven by the previous node and relaxes toward the inverted transfer of its
//! input:
//!
//! ```text
//! dv_k/dt = (-f(v_{k-1}) - v_k) / RC_i
//! ```
//!
//! Oscillators interact only through node 3, which receives the additive
//! perturbation `λ_i · Σ_j g_ij v_{j,3}`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Rk4;
use crate::signal::csv_writer;
use crate::waveform::{gamma, ring_state, InverterMode, Node};

/// Node through which oscillators are coupled and at which phase is read.
pub const COUPLING_NODE: Node = Node::N3;

/// Self-coupling default, calibrated against the three-oscillator reference case.
pub const DEFAULT_INCLUDE_SELF: bool = true;

/// Any voltage beyond this magnitude is treated as a blow-up.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

pub const DEFAULT_STEPS_PER_PERIOD: f64 = 200.0;
pub const DEFAULT_PERIODS: f64 = 60.0;
pub const DEFAULT_WINDOW: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingOscillatorSpec {
    /// Natural frequency relative to the reference oscillator.
    pub lambda: f64,
    pub inverter: InverterMode,
}

impl Default for RingOscillatorSpec {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            inverter: InverterMode::default(),
        }
    }
}

impl RingOscillatorSpec {
    pub fn new(lambda: f64, inverter: InverterMode) -> Result<Self> {
        let spec = Self { lambda, inverter };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        self.inverter.validate()
    }

    /// `1 / RC`.
    pub fn rate(&self) -> f64 {
        gamma() * self.lambda
    }

    pub fn rc(&self) -> f64 {
        1.0 / self.rate()
    }

    /// Node derivatives of a single ring, with `inject` added on node 3.
    #[inline]
    pub fn rates(&self, v: &[f64], inject: f64, out: &mut [f64]) {
        let r = self.rate();
        let f = &self.inverter;
        out[0] = r * (-f.response(v[2]) - v[0]);
        out[1] = r * (-f.response(v[0]) - v[1]);
        out[2] = r * (-f.response(v[1]) - v[2]) + inject;
    }

    /// Row-major 3×3 Jacobian of [`rates`](Self::rates).
    pub fn jacobian(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.inverter.is_smooth() {
            return Err(Error::Unsupported(
                "the ideal inverter has no usable Jacobian; use a smoothed inverter".into(),
            ));
        }
        let r = self.rate();
        let f = &self.inverter;
        out.fill(0.0);
        out[0] = -r;
        out[2] = -r * f.slope(v[2]);
        out[3] = -r * f.slope(v[0]);
        out[4] = -r;
        out[7] = -r * f.slope(v[1]);
        out[8] = -r;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystemSpec {
    pub oscillators: Vec<RingOscillatorSpec>,
    /// Uniform coupling coefficient, used when `coupling` is absent.
    pub epsilon: f64,
    /// Whether `j = i` appears in the coupling sum.
    pub include_self: bool,
    /// Optional explicit symmetric `n × n` coefficients `g_ij`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Vec<f64>>>,
}

impl CoupledSystemSpec {
    pub fn new(lambdas: &[f64], inverter: InverterMode, epsilon: f64) -> Result<Self> {
        let spec = Self {
            oscillators: lambdas
                .iter()
                .map(|&lambda| RingOscillatorSpec { lambda, inverter })
                .collect(),
            epsilon,
            include_self: DEFAULT_INCLUDE_SELF,
            coupling: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_include_self(mut self, include_self: bool) -> Self {
        self.include_self = include_self;
        self
    }

    pub fn with_coupling(mut self, g: Vec<Vec<f64>>) -> Result<Self> {
        self.coupling = Some(g);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.oscillators.is_empty() {
            return Err(Error::Config("at least one oscillator is required".into()));
        }
        for o in &self.oscillators {
            o.validate()?;
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(g) = &self.coupling {
            validate_coupling_matrix(g, self.n())?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.oscillators.len()
    }

    pub fn dim(&self) -> usize {
        3 * self.n()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.oscillators.iter().map(|o| o.lambda).collect()
    }

    /// 1/200 of the shortest natural period.
    pub fn default_dt(&self) -> f64 {
        let fastest = self.oscillators.iter().map(|o| o.lambda).fold(0.0, f64::max);
        1.0 / (DEFAULT_STEPS_PER_PERIOD * fastest)
    }

    /// 60 natural periods of the slowest oscillator.
    pub fn default_t_end(&self) -> f64 {
        let slowest = self
            .oscillators
            .iter()
            .map(|o| o.lambda)
            .fold(f64::INFINITY, f64::min);
        DEFAULT_PERIODS / slowest
    }

    /// Unchecked derivative for a state of length `3n`.
    pub fn derivative_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        let c = COUPLING_NODE.index();
        match &self.coupling {
            None => {
                let total: f64 = (0..n).map(|j| v[3 * j + c]).sum();
                for (i, osc) in self.oscillators.iter().enumerate() {
                    let own = v[3 * i + c];
                    let sum = if self.include_self { total } else { total - own };
                    let inject = osc.lambda * self.epsilon * sum;
                    osc.rates(&v[3 * i..3 * i + 3], inject, &mut out[3 * i..3 * i + 3]);
                }
            }
            Some(g) => {
                for (i, osc) in self.oscillators.iter().enumerate() {
                    let mut sum = 0.0;
                    for j in 0..n {
                        if j != i || self.include_self {
                            sum += g[i][j] * v[3 * j + c];
                        }
                    }
                    let inject = osc.lambda * sum;
                    osc.rates(&v[3 * i..3 * i + 3], inject, &mut out[3 * i..3 * i + 3]);
                }
            }
        }
    }
}

pub(crate) fn validate_coupling_matrix(g: &[Vec<f64>], n: usize) -> Result<()> {
    if g.len() != n || g.iter().any(|row| row.len() != n) {
        return Err(Error::Config(format!("coupling matrix must be {n}×{n}")));
    }
    for i in 0..n {
        for j in 0..n {
            if !g[i][j].is_finite() {
                return Err(Error::Config(format!("coupling g[{i}][{j}] is not finite")));
            }
            if (g[i][j] - g[j][i]).abs() > 1e-12 * (1.0 + g[i][j].abs()) {
                return Err(Error::Config(format!("coupling matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Checked derivative of the coupled system.
pub fn derivative(spec: &CoupledSystemSpec, voltages: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if voltages.len() != spec.dim() {
        return Err(Error::Contract(format!(
            "state has {} entries, expected {}",
            voltages.len(),
            spec.dim()
        )));
    }
    let mut out = vec![0.0; spec.dim()];
    spec.derivative_into(voltages, &mut out);
    Ok(out)
}

/// Uniformly sampled node voltages of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    spec: CoupledSystemSpec,
    dt: f64,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn spec(&self) -> &CoupledSystemSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let d = self.spec.dim();
        &self.states[k * d..(k + 1) * d]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn node_trace(&self, oscillator: usize, node: Node) -> Vec<f64> {
        let d = self.spec.dim();
        let idx = 3 * oscillator + node.index();
        self.states.iter().skip(idx).step_by(d).copied().collect()
    }

    /// CSV with header `time,v1_1,v1_2,v1_3,v2_1,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        let mut header = vec!["time".to_string()];
        for i in 1..=self.n() {
            for k in 1..=3 {
                header.push(format!("v{i}_{k}"));
            }
        }
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for k in 0..self.len() {
            row.clear();
            row.push(self.times[k].to_string());
            row.extend(self.state(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_step(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::Config(format!("t_end must be >= dt, got {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Fixed-step RK4 integration from `v0` to `t_end`.
pub fn integrate(spec: &CoupledSystemSpec, v0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    spec.validate()?;
    let steps = check_step(t_end, dt)?;
    let dim = spec.dim();
    if v0.len() != dim {
        return Err(Error::Contract(format!("initial state has {} entries, expected {dim}", v0.len())));
    }
    if v0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * dim);
    let mut y = v0.to_vec();
    let mut rk = Rk4::new(dim);
    let mut f = |_t: f64, v: &[f64], out: &mut [f64]| spec.derivative_into(v, out);

    times.push(0.0);
    states.extend_from_slice(&y);
    for k in 0..steps {
        let t = k as f64 * dt;
        rk.step(&mut f, t, &mut y, dt);
        let t_next = (k + 1) as f64 * dt;
        if y.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Instability { time: t_next });
        }
        times.push(t_next);
        states.extend_from_slice(&y);
    }
    Ok(Trajectory {
        spec: spec.clone(),
        dt,
        times,
        states,
    })
}

/// Rising zero-crossing times with linear interpolation between samples.
pub fn rising_crossings(times: &[f64], values: &[f64]) -> Vec<f64> {
    values
        .windows(2)
        .zip(times.windows(2))
        .filter(|(v, _)| v[0] < 0.0 && v[1] >= 0.0)
        .map(|(v, t)| t[0] + (t[1] - t[0]) * (-v[0]) / (v[1] - v[0]))
        .collect()
}

/// Mean frequency of a trace from its rising zero crossings.
pub fn trace_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let c = rising_crossings(times, values);
    if c.len() < 2 {
        return None;
    }
    Some((c.len() - 1) as f64 / (c[c.len() - 1] - c[0]))
}

pub(crate) fn check_window(window_fraction: f64) -> Result<()> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    Ok(())
}

/// Per-oscillator frequency of the node 3 trace over the final
/// `window_fraction` of the trajectory.
pub fn measure_frequencies(traj: &Trajectory, window_fraction: f64) -> Result<Vec<f64>> {
    check_window(window_fraction)?;
    let start = ((1.0 - window_fraction) * (traj.len() - 1) as f64).floor() as usize;
    let times = &traj.times()[start..];
    (0..traj.n())
        .map(|i| {
            let trace = traj.node_trace(i, COUPLING_NODE);
            trace_frequency(times, &trace[start..]).ok_or(Error::NoOscillation { oscillator: i })
        })
        .collect()
}

/// `n` phase offsets uniform on `[0, 1)` from a seeded ChaCha generator.
pub fn random_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Places every oscillator on the closed-form limit cycle at its phase offset.
pub fn state_from_phases(phases: &[f64]) -> Vec<f64> {
    phases.iter().flat_map(|&p| ring_state(p)).collect()
}

pub fn random_initial_state(spec: &CoupledSystemSpec, seed: u64) -> Vec<f64> {
    state_from_phases(&random_phases(spec.n(), seed))
}

/// True when every voltage is identical: the unstable symmetric equilibrium.
pub fn is_symmetric_state(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{analytic_waveform, ring_voltage};

    fn single(inverter: InverterMode) -> CoupledSystemSpec {
        CoupledSystemSpec::new(&[1.0], inverter, 0.0).unwrap()
    }

    #[test]
    fn hand_evaluated_derivative() {
        // v = [0.5, -0.5, 0.5]: node 1 sees v3 = 0.5, ideal f = +1, stage output -1
        let g = gamma();
        let d = derivative(&single(InverterMode::Ideal), &[0.5, -0.5, 0.5]).unwrap();
        assert!((d[0] - (-1.0 - 0.5) * g).abs() < 1e-12);
        assert!((d[1] - (-1.0 + 0.5) * g).abs() < 1e-12);
        assert!((d[2] - (1.0 - 0.5) * g).abs() < 1e-12);
    }

    #[test]
    fn symmetric_zero_state() {
        // f(0) = -1, so every stage is driven toward +1 at rate γλ
        let spec = CoupledSystemSpec::new(&[1.0, 1.5], InverterMode::Ideal, 0.0).unwrap();
        let d = derivative(&spec, &[0.0; 6]).unwrap();
        for (k, v) in d.iter().enumerate() {
            let lambda = if k < 3 { 1.0 } else { 1.5 };
            assert!((v - gamma() * lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coupling_decouples() {
        let spec = CoupledSystemSpec::new(&[1.0, 0.9, 1.1], InverterMode::default(), 0.0).unwrap();
        let a = [0.1, -0.3, 0.4, 0.2, 0.2, -0.6, -0.9, 0.5, 0.05];
        let mut b = a;
        b[3..].iter_mut().for_each(|v| *v = -*v * 0.7);
        let da = derivative(&spec, &a).unwrap();
        let db = derivative(&spec, &b).unwrap();
        assert_eq!(&da[..3], &db[..3]);
    }

    #[test]
    fn coupling_term_on_node_three() {
        let base = CoupledSystemSpec::new(&[1.0, 2.0], InverterMode::default(), 0.0).unwrap();
        let coupled = CoupledSystemSpec::new(&[1.0, 2.0], InverterMode::default(), 0.3).unwrap();
        let v = [0.1, -0.2, 0.3, 0.4, -0.5, -0.6];
        let d0 = derivative(&base, &v).unwrap();
        let with_self = derivative(&coupled.clone().with_include_self(true), &v).unwrap();
        let without = derivative(&coupled.with_include_self(false), &v).unwrap();
        assert!((with_self[2] - d0[2] - 0.3 * (0.3 - 0.6)).abs() < 1e-14);
        assert!((with_self[5] - d0[5] - 2.0 * 0.3 * (0.3 - 0.6)).abs() < 1e-14);
        assert!((without[2] - d0[2] - 0.3 * -0.6).abs() < 1e-14);
        assert_eq!(&without[..2], &d0[..2]);
        // explicit uniform matrix agrees with the scalar form
        let g = vec![vec![0.3; 2]; 2];
        let m = CoupledSystemSpec::new(&[1.0, 2.0], InverterMode::default(), 0.0)
            .unwrap()
            .with_coupling(g)
            .unwrap();
        let dm = derivative(&m.with_include_self(false), &v).unwrap();
        for (a, b) in dm.iter().zip(&without) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn contract_and_config_errors() {
        let spec = single(InverterMode::Ideal);
        assert!(matches!(derivative(&spec, &[0.0; 4]), Err(Error::Contract(_))));
        assert!(CoupledSystemSpec::new(&[], InverterMode::Ideal, 0.0).is_err());
        assert!(CoupledSystemSpec::new(&[1.0], InverterMode::Ideal, -0.1).is_err());
        assert!(CoupledSystemSpec::new(&[0.0], InverterMode::Ideal, 0.1).is_err());
        let asym = vec![vec![0.0, 0.1], vec![0.2, 0.0]];
        assert!(CoupledSystemSpec::new(&[1.0, 1.0], InverterMode::Ideal, 0.0)
            .unwrap()
            .with_coupling(asym)
            .is_err());
        assert!(integrate(&spec, &[0.1, 0.2, 0.3], 1.0, 0.0).is_err());
        assert!(integrate(&spec, &[0.1, 0.2, 0.3], 0.001, 0.01).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // a huge self-coupling makes node 3 grow exponentially
        let spec = CoupledSystemSpec::new(&[1.0], InverterMode::default(), 50.0).unwrap();
        match integrate(&spec, &ring_state(0.2), 20.0, 0.005) {
            Err(Error::Instability { time }) => assert!(time > 0.0 && time < 20.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sinusoid_frequency() {
        let dt = 0.001;
        let times: Vec<f64> = (0..20_001).map(|k| k as f64 * dt).collect();
        let values: Vec<f64> = times.iter().map(|t| (std::f64::consts::PI * t + 0.3).sin()).collect();
        let f = trace_frequency(&times, &values).unwrap();
        assert!((f - 0.5).abs() < 1e-6, "{f}");
        assert!(trace_frequency(&times, &vec![0.2; times.len()]).is_none());
    }

    #[test]
    fn equilibrium_has_no_oscillation() {
        // all-zero voltages are the (unstable) fixed point of the smoothed ring
        let spec = single(InverterMode::default());
        let traj = integrate(&spec, &[0.0; 3], 5.0, 0.01).unwrap();
        assert!(matches!(
            measure_frequencies(&traj, 0.5),
            Err(Error::NoOscillation { oscillator: 0 })
        ));
    }

    #[test]
    fn free_running_frequency() {
        for inverter in [InverterMode::Ideal, InverterMode::default()] {
            let spec = single(inverter);
            let traj = integrate(&spec, &ring_state(0.1), 20.0, 0.005).unwrap();
            let f = measure_frequencies(&traj, 0.5).unwrap()[0];
            assert!((f - 1.0).abs() < 0.02, "{inverter:?}: {f}");
        }
    }

    #[test]
    fn ideal_ring_reproduces_closed_form() {
        // started on the closed-form cycle, the ideal ring stays on it
        let spec = single(InverterMode::Ideal);
        let dt = 1e-3;
        let traj = integrate(&spec, &ring_state(0.0), 3.0, dt).unwrap();
        let v3 = traj.node_trace(0, Node::N3);
        let max_err = traj
            .times()
            .iter()
            .zip(&v3)
            .map(|(t, v)| (v - ring_voltage(Node::N3, *t)).abs())
            .fold(0.0, f64::max);
        // the hard switch costs up to a step of timing per crossing, so the
        // error is first order in dt and grows slowly over the run
        assert!(max_err < 30.0 * dt, "{max_err}");
        let _ = analytic_waveform(Node::N3, 64).unwrap();
    }

    #[test]
    fn seeded_initial_states() {
        let spec = CoupledSystemSpec::new(&[1.0, 0.9, 1.1], InverterMode::default(), 0.1).unwrap();
        let a = random_initial_state(&spec, 7);
        assert_eq!(a, random_initial_state(&spec, 7));
        assert_ne!(a, random_initial_state(&spec, 8));
        let phases = random_phases(3, 7);
        for (i, p) in phases.iter().enumerate() {
            for node in Node::ALL {
                assert_eq!(a[3 * i + node.index()], ring_voltage(node, *p));
            }
        }
        assert!(is_symmetric_state(&[0.2; 6]));
        assert!(!is_symmetric_state(&a));
    }

    #[test]
    fn integration_is_deterministic() {
        let spec = CoupledSystemSpec::new(&[1.0, 0.95, 1.05], InverterMode::default(), 0.2).unwrap();
        let v0 = random_initial_state(&spec, 3);
        let a = integrate(&spec, &v0, 5.0, 0.005).unwrap();
        let b = integrate(&spec, &v0, 5.0, 0.005).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1001);
        assert!(a.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn trajectory_csv_header() {
        let spec = CoupledSystemSpec::new(&[1.0, 1.0], InverterMode::default(), 0.0).unwrap();
        let traj = integrate(&spec, &random_initial_state(&spec, 0), 0.02, 0.01).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,v1_1,v1_2,v1_3,v2_1,v2_2,v2_3");
        assert_eq!(text.lines().count(), 4);
    }
}
