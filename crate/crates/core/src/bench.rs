//! Wall-clock comparison of the phase model against direct simulation.
//!
//! Every trial draws natural frequencies (the first fixed at 1, the others
//! uniform on `[0.8, 1.2]`) and initial phases from its own seed, then times
//! one direct run and one phase-model run per PRC method over the same
//! simulated duration. PRCs are extracted before timing starts. Everything
//! runs on the calling thread.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::direct::{integrate, measure_frequencies, random_phases, state_from_phases, CoupledSystemSpec};
use crate::error::{Error, Result};
use crate::phase::{extract_frequencies, integrate_phases, PhaseSystem};
use crate::prc::PrcMethod;
use crate::sync::{cell_seed, CellModel, DEFAULT_RANGE};
use crate::waveform::InverterMode;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_BENCH_EPSILON: f64 = 0.2;
pub const DEFAULT_BENCH_T_END: f64 = 60.0;
/// The timer must resolve 1% of the shortest run.
const TIMER_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Timing {
    fn from_samples(s: &[f64]) -> Self {
        Timing {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s.iter().cloned().fold(f64::INFINITY, f64::min),
            max: s.iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: PrcMethod,
    /// Seconds per phase-model run.
    pub timing: Timing,
    /// Mean direct time over mean phase time.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub n: usize,
    pub trials: usize,
    /// Simulated duration shared by both models.
    pub t_end: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Seconds per direct run.
    pub direct: Timing,
    pub methods: Vec<MethodTiming>,
    pub timer_resolution: f64,
}

impl SpeedupReport {
    pub fn speedup(&self, method: PrcMethod) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.speedup)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub trials: usize,
    pub t_end: f64,
    pub methods: Vec<PrcMethod>,
    pub epsilon: f64,
    pub seed: u64,
    pub inverter: InverterMode,
}

impl BenchConfig {
    pub fn new(n: usize, trials: usize, t_end: f64, methods: &[PrcMethod]) -> Self {
        Self {
            n,
            trials,
            t_end,
            methods: methods.to_vec(),
            epsilon: DEFAULT_BENCH_EPSILON,
            seed: 0,
            inverter: InverterMode::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one PRC method is required".into()));
        }
        Ok(())
    }
}

/// Smallest observable step of the monotonic clock, in seconds.
pub fn timer_resolution() -> f64 {
    let mut best = Duration::MAX;
    for _ in 0..50 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min(t1 - t0);
    }
    best.as_secs_f64()
}

fn trial_system(cfg: &BenchConfig, trial: usize) -> (Vec<f64>, Vec<f64>) {
    let seed = cell_seed(cfg.seed, trial, usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = DEFAULT_RANGE;
    let lambdas: Vec<f64> = (0..cfg.n)
        .map(|i| if i == 0 { 1.0 } else { rng.random_range(lo..hi) })
        .collect();
    (lambdas, random_phases(cfg.n, seed ^ 0x5eed))
}

fn time<T>(f: impl FnOnce() -> Result<T>) -> Result<f64> {
    let t0 = Instant::now();
    std::hint::black_box(f()?);
    Ok(t0.elapsed().as_secs_f64())
}

pub fn bench_speedup(n: usize, trials: usize, t_end: f64, methods: &[PrcMethod]) -> Result<SpeedupReport> {
    bench_speedup_with(&BenchConfig::new(n, trials, t_end, methods))
}

pub fn bench_speedup_with(cfg: &BenchConfig) -> Result<SpeedupReport> {
    cfg.validate()?;
    let models = cfg
        .methods
        .iter()
        .map(|m| match CellModel::for_method((*m).into(), cfg.inverter)? {
            CellModel::Phase { prc, waveform } => Ok((prc, waveform)),
            CellModel::Direct => unreachable!("PRC methods always build phase models"),
        })
        .collect::<Result<Vec<_>>>()?;

    let direct_run = |lambdas: &[f64], phases: &[f64]| -> Result<f64> {
        let spec = CoupledSystemSpec::new(lambdas, cfg.inverter, cfg.epsilon)?;
        let v0 = state_from_phases(phases);
        time(|| {
            let traj = integrate(&spec, &v0, cfg.t_end, spec.default_dt())?;
            measure_frequencies(&traj, 0.5)
        })
    };
    let phase_run = |k: usize, lambdas: &[f64], phases: &[f64]| -> Result<f64> {
        let (prc, waveform) = &models[k];
        let sys = PhaseSystem::new(lambdas, cfg.epsilon, prc.clone(), waveform.clone())?;
        time(|| {
            let traj = integrate_phases(&sys, phases, cfg.t_end, sys.default_dt())?;
            extract_frequencies(&traj, 0.5)
        })
    };

    // warm-up, discarded
    let (l0, p0) = trial_system(cfg, 0);
    direct_run(&l0, &p0)?;
    for k in 0..models.len() {
        phase_run(k, &l0, &p0)?;
    }

    let mut direct = Vec::with_capacity(cfg.trials);
    let mut phase = vec![Vec::with_capacity(cfg.trials); models.len()];
    for trial in 0..cfg.trials {
        let (lambdas, phases) = trial_system(cfg, trial);
        direct.push(direct_run(&lambdas, &phases)?);
        for (k, times) in phase.iter_mut().enumerate() {
            times.push(phase_run(k, &lambdas, &phases)?);
        }
    }

    let resolution = timer_resolution();
    let shortest = direct
        .iter()
        .chain(phase.iter().flatten())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(shortest > 0.0) || resolution > TIMER_FRACTION * shortest {
        return Err(Error::BenchmarkInvalid(format!(
            "timer resolution {resolution:.3e} s is coarser than 1% of the shortest run ({shortest:.3e} s); increase t_end"
        )));
    }

    let direct = Timing::from_samples(&direct);
    let methods = cfg
        .methods
        .iter()
        .zip(&phase)
        .map(|(m, times)| {
            let timing = Timing::from_samples(times);
            MethodTiming {
                method: *m,
                timing,
                speedup: direct.mean / timing.mean,
            }
        })
        .collect();
    Ok(SpeedupReport {
        n: cfg.n,
        trials: cfg.trials,
        t_end: cfg.t_end,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        direct,
        methods,
        timer_resolution: resolution,
    })
}

/// Speedup reports for each oscillator count.
pub fn speedup_curve(ns: &[usize], trials: usize, t_end: f64, methods: &[PrcMethod]) -> Result<Vec<SpeedupReport>> {
    ns.iter().map(|&n| bench_speedup(n, trials, t_end, methods)).collect()
}

/// Times the phase model against itself; the ratio should sit near 1.
pub fn self_speedup(n: usize, trials: usize, t_end: f64) -> Result<f64> {
    let cfg = BenchConfig::new(n, trials, t_end, &[PrcMethod::Analytic]);
    let sys = |l: &[f64]| PhaseSystem::analytic(l, cfg.epsilon);
    let mut a = 0.0;
    let mut b = 0.0;
    for trial in 0..=trials {
        let (lambdas, phases) = trial_system(&cfg, trial);
        let s = sys(&lambdas)?;
        let ta = time(|| integrate_phases(&s, &phases, t_end, s.default_dt()))?;
        let tb = time(|| integrate_phases(&s, &phases, t_end, s.default_dt()))?;
        if trial > 0 {
            a += ta;
            b += tb;
        }
    }
    Ok(a / b)
}
