//! Degree of synchronisation and two-parameter frequency sweeps.
//!
//! A sweep fixes every natural frequency at 1 except the last two, which run
//! over a square grid. Each cell is simulated independently from seeded random
//! phases and scored with [`degree_of_sync`].

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::{
    integrate, measure_frequencies, random_phases, state_from_phases, CoupledSystemSpec, DEFAULT_INCLUDE_SELF,
    DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::phase::{extract_frequencies, integrate_phases, PhaseSystem};
use crate::prc::{analytic_prc, extract_prc, PrcMethod};
use crate::signal::{csv_writer, parse_field, PeriodicSignal};
use crate::waveform::{analytic_waveform, InverterMode, Node, DEFAULT_RESOLUTION};

pub const DEFAULT_GRID_SIZE: usize = 21;
pub const DEFAULT_RANGE: (f64, f64) = (0.8, 1.2);
pub const DEFAULT_LOCK_THRESHOLD: f64 = 1.0 - 1e-4;
/// Largest tolerated share of failed cells.
pub const MAX_INVALID_FRACTION: f64 = 0.05;
/// Sweep duration for every method, so direct and phase surfaces see the
/// same settling time.
pub const DEFAULT_SWEEP_PERIODS: f64 = 200.0;

/// `1 - Σ_{k≥2} (f_k - f_1)²`, with the first oscillator as reference.
pub fn degree_of_sync(freqs: &[f64]) -> Result<f64> {
    if freqs.len() < 2 {
        return Err(Error::Contract(format!(
            "degree of synchronisation needs at least 2 frequencies, got {}",
            freqs.len()
        )));
    }
    let f1 = freqs[0];
    Ok(1.0 - freqs[1..].iter().map(|f| (f - f1) * (f - f1)).sum::<f64>())
}

/// How a sweep obtains coupled frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Direct,
    Analytic,
    Malkin,
    Winfree,
}

impl SweepMethod {
    pub fn prc_method(self) -> Option<PrcMethod> {
        match self {
            SweepMethod::Direct => None,
            SweepMethod::Analytic => Some(PrcMethod::Analytic),
            SweepMethod::Malkin => Some(PrcMethod::Malkin),
            SweepMethod::Winfree => Some(PrcMethod::Winfree),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Direct => "direct",
            SweepMethod::Analytic => "analytic",
            SweepMethod::Malkin => "malkin",
            SweepMethod::Winfree => "winfree",
        }
    }
}

impl From<PrcMethod> for SweepMethod {
    fn from(m: PrcMethod) -> Self {
        match m {
            PrcMethod::Analytic => SweepMethod::Analytic,
            PrcMethod::Malkin => SweepMethod::Malkin,
            PrcMethod::Winfree => SweepMethod::Winfree,
        }
    }
}

impl std::fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SweepMethod::Direct),
            other => other.parse::<PrcMethod>().map(Into::into),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub epsilon: f64,
    pub method: SweepMethod,
    pub range: (f64, f64),
    pub grid_size: usize,
    pub seed: u64,
    pub inverter: InverterMode,
    pub include_self: bool,
    /// Simulated duration in natural periods of the slowest oscillator;
    /// the model's default when absent.
    pub periods: Option<f64>,
    pub window: f64,
    /// Worker threads; rayon's default when absent.
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn new(n: usize, epsilon: f64, method: SweepMethod) -> Self {
        Self {
            n,
            epsilon,
            method,
            range: DEFAULT_RANGE,
            grid_size: DEFAULT_GRID_SIZE,
            seed: 0,
            inverter: InverterMode::default(),
            include_self: DEFAULT_INCLUDE_SELF,
            periods: Some(DEFAULT_SWEEP_PERIODS),
            window: DEFAULT_WINDOW,
            workers: None,
        }
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("a sweep needs n >= 3 oscillators, got {}", self.n)));
        }
        if self.grid_size < 3 {
            return Err(Error::Config(format!("grid size must be >= 3, got {}", self.grid_size)));
        }
        let (lo, hi) = self.range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("sweep range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(p) = self.periods {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("periods must be > 0, got {p}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.inverter.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeta {
    pub epsilon: f64,
    pub n: usize,
    pub method: SweepMethod,
    pub include_self: bool,
    pub base_seed: u64,
    /// How each cell's seed is derived.
    pub seed_policy: String,
    pub invalid_cells: usize,
}

/// S over the `(λ2, λ3)` grid; `values[i][j]` belongs to `(axis2[i], axis3[j])`.
/// Failed cells hold NaN (null in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SurfaceJson", try_from = "SurfaceJson")]
pub struct SyncSurface {
    pub axis2: Vec<f64>,
    pub axis3: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub meta: Option<SurfaceMeta>,
}

#[derive(Serialize, Deserialize)]
struct SurfaceJson {
    axis2: Vec<f64>,
    axis3: Vec<f64>,
    values: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<SurfaceMeta>,
}

impl From<SyncSurface> for SurfaceJson {
    fn from(s: SyncSurface) -> Self {
        SurfaceJson {
            axis2: s.axis2,
            axis3: s.axis3,
            values: s
                .values
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.is_finite().then_some(v)).collect())
                .collect(),
            meta: s.meta,
        }
    }
}

impl TryFrom<SurfaceJson> for SyncSurface {
    type Error = Error;

    fn try_from(j: SurfaceJson) -> Result<Self> {
        let s = SyncSurface {
            axis2: j.axis2,
            axis3: j.axis3,
            values: j
                .values
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect(),
            meta: j.meta,
        };
        s.validate()?;
        Ok(s)
    }
}

impl SyncSurface {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.axis2.len() || self.values.iter().any(|r| r.len() != self.axis3.len()) {
            return Err(Error::format("values", "grid dimensions do not match the axes"));
        }
        if self.values.iter().flatten().any(|v| *v > 1.0 + 1e-12) {
            return Err(Error::format("values", "degree of synchronisation above 1"));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn cells(&self) -> usize {
        self.axis2.len() * self.axis3.len()
    }

    pub fn invalid_cells(&self) -> usize {
        self.values.iter().flatten().filter(|v| !v.is_finite()).count()
    }

    /// Rows `lambda2,lambda3,S`, `lambda3` varying fastest.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        w.write_record(["lambda2", "lambda3", "S"])?;
        for (i, a2) in self.axis2.iter().enumerate() {
            for (j, a3) in self.axis3.iter().enumerate() {
                w.write_record([a2.to_string(), a3.to_string(), self.values[i][j].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout back; metadata is not stored there.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["lambda2", "lambda3", "S"] {
            return Err(Error::format("header", "expected `lambda2,lambda3,S`"));
        }
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            rows.push((
                parse_field(&rec, 0, "lambda2", k)?,
                parse_field(&rec, 1, "lambda3", k)?,
                parse_field(&rec, 2, "S", k)?,
            ));
        }
        let mut axis3 = Vec::new();
        for (_, a3, _) in &rows {
            if axis3.contains(a3) {
                break;
            }
            axis3.push(*a3);
        }
        if axis3.is_empty() || rows.len() % axis3.len() != 0 {
            return Err(Error::format("lambda3", "rows do not form a complete grid"));
        }
        let m = axis3.len();
        let axis2: Vec<f64> = rows.iter().step_by(m).map(|r| r.0).collect();
        let mut values = vec![vec![0.0; m]; axis2.len()];
        for (k, (a2, a3, s)) in rows.iter().enumerate() {
            let (i, j) = (k / m, k % m);
            if *a2 != axis2[i] || *a3 != axis3[j] {
                return Err(Error::format("lambda2", format!("row {k} is out of grid order")));
            }
            values[i][j] = *s;
        }
        let s = SyncSurface {
            axis2,
            axis3,
            values,
            meta: None,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-cell seed, independent of evaluation order.
pub fn cell_seed(base: u64, i: usize, j: usize) -> u64 {
    splitmix(splitmix(splitmix(base) ^ i as u64) ^ (j as u64).rotate_left(32))
}

/// What a single cell is simulated with.
#[derive(Debug, Clone)]
pub enum CellModel {
    Direct,
    Phase { prc: PeriodicSignal, waveform: PeriodicSignal },
}

impl CellModel {
    /// Builds the model for `method`, extracting the PRC once from a unit
    /// frequency oscillator.
    pub fn for_method(method: SweepMethod, inverter: InverterMode) -> Result<Self> {
        let prc = match method.prc_method() {
            None => return Ok(CellModel::Direct),
            Some(PrcMethod::Analytic) => analytic_prc(Node::N3, DEFAULT_RESOLUTION)?,
            Some(m) => {
                let osc = crate::direct::RingOscillatorSpec::new(1.0, inverter)?;
                let res = crate::prc::default_resolution(m);
                extract_prc(m, &osc, res)?
            }
        };
        Ok(CellModel::Phase {
            prc: prc.signal,
            waveform: analytic_waveform(Node::N3, DEFAULT_RESOLUTION)?,
        })
    }
}

/// Coupled frequencies for one configuration from the given phases.
#[allow(clippy::too_many_arguments)]
pub fn simulate_frequencies(
    model: &CellModel,
    lambdas: &[f64],
    epsilon: f64,
    inverter: InverterMode,
    include_self: bool,
    phases: &[f64],
    periods: Option<f64>,
    window: f64,
) -> Result<Vec<f64>> {
    let slowest = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    match model {
        CellModel::Direct => {
            let spec = CoupledSystemSpec::new(lambdas, inverter, epsilon)?.with_include_self(include_self);
            let t_end = periods.map(|p| p / slowest).unwrap_or_else(|| spec.default_t_end());
            let traj = integrate(&spec, &state_from_phases(phases), t_end, spec.default_dt())?;
            measure_frequencies(&traj, window)
        }
        CellModel::Phase { prc, waveform } => {
            let sys = PhaseSystem::new(lambdas, epsilon, prc.clone(), waveform.clone())?
                .with_include_self(include_self);
            let t_end = periods.map(|p| p / slowest).unwrap_or_else(|| sys.default_t_end());
            let traj = integrate_phases(&sys, phases, t_end, sys.default_dt())?;
            extract_frequencies(&traj, window)
        }
    }
}

/// Sweeps `(λ_{n-1}, λ_n)` over `config.range` with every other λ fixed at 1.
pub fn sweep_surface(config: &SweepConfig) -> Result<SyncSurface> {
    config.validate()?;
    let model = CellModel::for_method(config.method, config.inverter)?;
    sweep_surface_with(config, &model)
}

/// As [`sweep_surface`], reusing an already built cell model.
pub fn sweep_surface_with(config: &SweepConfig, model: &CellModel) -> Result<SyncSurface> {
    config.validate()?;
    let g = config.grid_size;
    let axis = linspace(config.range.0, config.range.1, g);
    let n = config.n;

    let cell = |k: usize| -> f64 {
        let (i, j) = (k / g, k % g);
        let mut lambdas = vec![1.0; n];
        lambdas[n - 2] = axis[i];
        lambdas[n - 1] = axis[j];
        let phases = random_phases(n, cell_seed(config.seed, i, j));
        simulate_frequencies(
            model,
            &lambdas,
            config.epsilon,
            config.inverter,
            config.include_self,
            &phases,
            config.periods,
            config.window,
        )
        .and_then(|f| degree_of_sync(&f))
        .unwrap_or(f64::NAN)
    };

    let flat: Vec<f64> = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(|| (0..g * g).into_par_iter().map(cell).collect()),
        None => (0..g * g).into_par_iter().map(cell).collect(),
    };

    let invalid = flat.iter().filter(|v| !v.is_finite()).count();
    if invalid as f64 > MAX_INVALID_FRACTION * (g * g) as f64 {
        return Err(Error::SweepFailed {
            invalid,
            total: g * g,
        });
    }
    Ok(SyncSurface {
        axis2: axis.clone(),
        axis3: axis,
        values: flat.chunks(g).map(|r| r.to_vec()).collect(),
        meta: Some(SurfaceMeta {
            epsilon: config.epsilon,
            n,
            method: config.method,
            include_self: config.include_self,
            base_seed: config.seed,
            seed_policy: "splitmix64(base, row, column)".into(),
            invalid_cells: invalid,
        }),
    })
}

/// RMS of cellwise differences over cells valid in both surfaces.
pub fn surface_rmse(a: &SyncSurface, b: &SyncSurface) -> Result<f64> {
    let same_axis = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-9);
    if !same_axis(&a.axis2, &b.axis2) || !same_axis(&a.axis3, &b.axis3) {
        return Err(Error::Contract("surfaces are on different grids".into()));
    }
    if let (Some(ma), Some(mb)) = (&a.meta, &b.meta) {
        if ma.epsilon != mb.epsilon {
            return Err(Error::Contract(format!(
                "surfaces use different coupling ({} vs {})",
                ma.epsilon, mb.epsilon
            )));
        }
    }
    let (mut sse, mut count) = (0.0, 0usize);
    for (ra, rb) in a.values.iter().zip(&b.values) {
        for (x, y) in ra.iter().zip(rb) {
            if x.is_finite() && y.is_finite() {
                sse += (x - y) * (x - y);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Contract("surfaces share no valid cells".into()));
    }
    Ok((sse / count as f64).sqrt())
}

/// Share of valid cells with `S >= threshold`.
pub fn locking_area(surface: &SyncSurface, threshold: f64) -> f64 {
    let valid: Vec<f64> = surface.values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    if valid.is_empty() {
        return 0.0;
    }
    valid.iter().filter(|v| **v >= threshold).count() as f64 / valid.len() as f64
}
