//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
//! Failures print a one-line JSON record `{"error": kind, "message": ...}` on
//! stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{bench_speedup_with, BenchConfig, SpeedupReport, DEFAULT_BENCH_EPSILON, DEFAULT_BENCH_T_END, DEFAULT_TRIALS};
use crate::direct::{
    integrate, is_symmetric_state, measure_frequencies, random_initial_state, random_phases, CoupledSystemSpec,
    RingOscillatorSpec, DEFAULT_WINDOW,
};
use crate::error::{Error, ErrorClass, Result};
use crate::phase::{check_convergence, detect_locking, extract_frequencies, integrate_phases, PhaseSystem, DEFAULT_LOCK_TOLERANCE};
use crate::prc::{
    analytic_prc, default_resolution, malkin_prc, winfree_prc_with, PrcMethod, PrcResult, WinfreeOptions,
    DEFAULT_MALKIN_CYCLES, DEFAULT_SETTLE_PERIODS, DEFAULT_WINFREE_AMPLITUDE, DEFAULT_WINFREE_PULSE_WIDTH,
};
use crate::record::{Model, SimulationRecord};
use crate::signal::PeriodicSignal;
use crate::sync::{sweep_surface, surface_rmse, SweepConfig, SweepMethod, SyncSurface, DEFAULT_GRID_SIZE, DEFAULT_SWEEP_PERIODS};
use crate::waveform::{analytic_waveform, InverterMode, Node, DEFAULT_GAIN, DEFAULT_RESOLUTION};

#[derive(Debug, Parser)]
#[command(name = "ringphase", version, about = "Ring-oscillator PRCs, phase-model and direct simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a phase response curve.
    Prc(PrcArgs),
    /// Simulate coupled oscillators with the phase model or directly.
    Simulate(SimulateArgs),
    /// Sweep the last two natural frequencies and score synchronisation.
    Sweep(SweepArgs),
    /// RMS difference between two surfaces.
    Compare(CompareArgs),
    /// Time the phase model against direct simulation.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OscArgs {
    /// Natural frequency of the oscillator.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Gain K of the tanh inverter.
    #[arg(long, default_value_t = DEFAULT_GAIN)]
    pub gain: f64,
    /// Use the hard-switching inverter instead.
    #[arg(long)]
    pub ideal: bool,
}

impl OscArgs {
    fn inverter(&self) -> InverterMode {
        if self.ideal {
            InverterMode::Ideal
        } else {
            InverterMode::smoothed(self.gain)
        }
    }
}

#[derive(Debug, Args)]
pub struct PrcArgs {
    #[arg(long, value_enum, default_value_t = PrcMethod::Analytic)]
    pub method: PrcMethod,
    /// Node whose sensitivity is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub node: u8,
    /// Samples per period (method default when omitted).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Backward cycles of the adjoint method.
    #[arg(long, default_value_t = DEFAULT_MALKIN_CYCLES)]
    pub cycles: usize,
    /// Pulse height for pulse probing.
    #[arg(long, default_value_t = DEFAULT_WINFREE_AMPLITUDE)]
    pub amplitude: f64,
    /// Pulse duration in periods.
    #[arg(long, default_value_t = DEFAULT_WINFREE_PULSE_WIDTH)]
    pub pulse_width: f64,
    /// Settling time after each pulse, in periods.
    #[arg(long, default_value_t = DEFAULT_SETTLE_PERIODS)]
    pub settle: f64,
    #[command(flatten)]
    pub osc: OscArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Model::Phase)]
    pub model: Model,
    /// Natural frequencies, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// PRC source for the phase model.
    #[arg(long, value_enum, default_value_t = PrcMethod::Analytic)]
    pub method: PrcMethod,
    /// PRC file (CSV or JSON written by `prc`), overriding --method.
    #[arg(long)]
    pub prc_file: Option<PathBuf>,
    /// Simulated time (model default when omitted).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Step size (model default when omitted).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Include each oscillator's own output in its coupling sum.
    #[arg(long, default_value_t = crate::direct::DEFAULT_INCLUDE_SELF, action = clap::ArgAction::Set)]
    pub include_self: bool,
    /// Final fraction of the run used for frequencies.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: f64,
    /// Frequency spread below which the system counts as locked.
    #[arg(long, default_value_t = DEFAULT_LOCK_TOLERANCE)]
    pub tol: f64,
    /// Explicit initial state: phases for the phase model, 3n voltages for
    /// direct simulation.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_GAIN)]
    pub gain: f64,
    #[arg(long)]
    pub ideal: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, default_value = "analytic")]
    pub method: SweepMethod,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid: usize,
    /// Swept interval `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 1..=2, default_values_t = [0.8, 1.2])]
    pub range: Vec<f64>,
    /// Simulated natural periods per cell.
    #[arg(long, default_value_t = DEFAULT_SWEEP_PERIODS)]
    pub periods: f64,
    #[arg(long, default_value_t = crate::direct::DEFAULT_INCLUDE_SELF, action = clap::ArgAction::Set)]
    pub include_self: bool,
    /// Worker threads (all cores when omitted).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_GAIN)]
    pub gain: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Surface files (CSV or JSON, by extension).
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Oscillator counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_BENCH_T_END)]
    pub t_end: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = PrcMethod::ALL)]
    pub methods: Vec<PrcMethod>,
    #[arg(long, default_value_t = DEFAULT_BENCH_EPSILON)]
    pub epsilon: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let record = ErrorRecord {
                error: e.kind(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Prc(a) => cmd_prc(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Where the JSON companion of a CSV output goes.
fn sidecar_path(output: &Path) -> Result<PathBuf> {
    let side = output.with_extension("json");
    if side == output {
        return Err(Error::Config(format!(
            "CSV output {} would collide with its JSON sidecar; use another extension",
            output.display()
        )));
    }
    Ok(side)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn cmd_prc(a: &PrcArgs) -> Result<()> {
    let node = Node::from_number(a.node as usize)?;
    let resolution = a.resolution.unwrap_or_else(|| default_resolution(a.method));
    let osc = RingOscillatorSpec::new(a.osc.lambda, a.osc.inverter())?;
    let mut result = match a.method {
        PrcMethod::Analytic => analytic_prc(node, resolution)?,
        PrcMethod::Malkin => malkin_prc(&osc, a.cycles, resolution)?,
        PrcMethod::Winfree => {
            if node != Node::N3 {
                return Err(Error::Unsupported("pulse probing only measures node 3".into()));
            }
            winfree_prc_with(
                &osc,
                &WinfreeOptions {
                    amplitude: a.amplitude,
                    pulse_width: a.pulse_width,
                    resolution,
                    settle_periods: a.settle,
                    ..WinfreeOptions::default()
                },
            )?
        }
    };
    if a.method == PrcMethod::Malkin && node != Node::N3 {
        result.signal = result.component(node).cloned().expect("adjoint keeps every node");
    }
    match a.common.format {
        Format::Json => write_json(a.common.output.as_deref(), &result),
        Format::Csv => {
            let mut w = open_output(a.common.output.as_deref())?;
            result.signal.write_csv(&mut w)?;
            w.flush()?;
            if let Some(out) = &a.common.output {
                write_json(Some(&sidecar_path(out)?), &result.sidecar())?;
            }
            Ok(())
        }
    }
}

fn read_prc_file(path: &Path) -> Result<PeriodicSignal> {
    if is_json(path) {
        let r: PrcResult = serde_json::from_reader(open_input(path)?)?;
        Ok(r.signal)
    } else {
        PeriodicSignal::read_csv(open_input(path)?)
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let inverter = if a.ideal { InverterMode::Ideal } else { InverterMode::smoothed(a.gain) };
    let n = a.lambda.len();
    let mut warnings = Vec::new();
    let seed = if a.init.is_some() { None } else { Some(a.common.seed) };

    let (record, csv): (SimulationRecord, Box<dyn Fn(&mut dyn Write) -> Result<()>>) = match a.model {
        Model::Direct => {
            let spec = CoupledSystemSpec::new(&a.lambda, inverter, a.epsilon)?.with_include_self(a.include_self);
            let dt = a.dt.unwrap_or_else(|| spec.default_dt());
            let t_end = a.t_end.unwrap_or_else(|| spec.default_t_end());
            let v0 = match &a.init {
                Some(v) => v.clone(),
                None => random_initial_state(&spec, a.common.seed),
            };
            if is_symmetric_state(&v0) {
                let msg = "initial state is exactly symmetric (an unstable equilibrium)";
                warn(msg);
                warnings.push(msg.to_string());
            }
            let traj = integrate(&spec, &v0, t_end, dt)?;
            let frequencies = measure_frequencies(&traj, a.window)?;
            let locked = detect_locking(&frequencies, a.tol)?;
            (
                SimulationRecord {
                    model: Model::Direct,
                    method: None,
                    n,
                    epsilon: a.epsilon,
                    lambda: a.lambda.clone(),
                    include_self: a.include_self,
                    frequencies,
                    locked,
                    seed,
                    dt,
                    t_end,
                    warnings,
                },
                Box::new(move |w| traj.write_csv(w)),
            )
        }
        Model::Phase => {
            let (prc, method) = match &a.prc_file {
                Some(p) => (read_prc_file(p)?, None),
                None => {
                    let osc = RingOscillatorSpec::new(1.0, inverter)?;
                    let r = match a.method {
                        PrcMethod::Analytic => analytic_prc(Node::N3, DEFAULT_RESOLUTION)?,
                        PrcMethod::Malkin => malkin_prc(&osc, DEFAULT_MALKIN_CYCLES, DEFAULT_RESOLUTION)?,
                        PrcMethod::Winfree => winfree_prc_with(&osc, &WinfreeOptions::default())?,
                    };
                    (r.signal, Some(a.method))
                }
            };
            let sys = PhaseSystem::new(&a.lambda, a.epsilon, prc, analytic_waveform(Node::N3, DEFAULT_RESOLUTION)?)?
                .with_include_self(a.include_self);
            let dt = a.dt.unwrap_or_else(|| sys.default_dt());
            let t_end = a.t_end.unwrap_or_else(|| sys.default_t_end());
            let theta0 = match &a.init {
                Some(t) => t.clone(),
                None => random_phases(n, a.common.seed),
            };
            let traj = integrate_phases(&sys, &theta0, t_end, dt)?;
            if traj.diagnostics().strong_coupling {
                let msg = "a phase velocity became non-positive: coupling is too strong for the phase model";
                warn(msg);
                warnings.push(msg.to_string());
            }
            let frequencies = extract_frequencies(&traj, a.window)?;
            if let Ok(c) = check_convergence(&traj, a.window, a.tol) {
                if !c.converged {
                    let msg = format!(
                        "frequencies still drifting: halves of the window differ by {:.2e}",
                        c.max_difference
                    );
                    warn(&msg);
                    warnings.push(msg);
                }
            }
            let locked = detect_locking(&frequencies, a.tol)?;
            (
                SimulationRecord {
                    model: Model::Phase,
                    method,
                    n,
                    epsilon: a.epsilon,
                    lambda: a.lambda.clone(),
                    include_self: a.include_self,
                    frequencies,
                    locked,
                    seed,
                    dt,
                    t_end,
                    warnings,
                },
                Box::new(move |w| traj.write_csv(w)),
            )
        }
    };

    match (a.common.format, &a.common.output) {
        (Format::Csv, Some(out)) => {
            let mut w = open_output(Some(out))?;
            csv(&mut w)?;
            w.flush()?;
            write_json(Some(&sidecar_path(out)?), &record)
        }
        // the trajectory only goes to files; stdout gets the record
        (Format::Csv, None) | (Format::Json, _) => write_json(a.common.output.as_deref(), &record),
    }
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let [lo, hi] = a.range[..] else {
        return Err(Error::Config(format!("--range needs two values, got {}", a.range.len())));
    };
    let mut cfg = SweepConfig::new(a.n, a.epsilon, a.method).with_grid(a.grid).with_seed(a.common.seed);
    cfg.range = (lo, hi);
    cfg.periods = Some(a.periods);
    cfg.include_self = a.include_self;
    cfg.workers = a.workers;
    cfg.inverter = InverterMode::smoothed(a.gain);
    let surface = sweep_surface(&cfg)?;
    match a.common.format {
        Format::Json => write_json(a.common.output.as_deref(), &surface),
        Format::Csv => {
            let mut w = open_output(a.common.output.as_deref())?;
            surface.write_csv(&mut w)?;
            w.flush()?;
            if let Some(out) = &a.common.output {
                write_json(Some(&sidecar_path(out)?), &surface)?;
            }
            Ok(())
        }
    }
}

/// Reads a surface written by `sweep`, choosing the format by extension.
pub fn read_surface(path: &Path) -> Result<SyncSurface> {
    if is_json(path) {
        serde_json::from_reader(open_input(path)?).map_err(|e| {
            if e.is_data() || e.is_syntax() || e.is_eof() {
                Error::format("surface", format!("{}: {e}", path.display()))
            } else {
                e.into()
            }
        })
    } else {
        SyncSurface::read_csv(open_input(path)?)
    }
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let first = read_surface(&a.first)?;
    let second = read_surface(&a.second)?;
    let rmse = surface_rmse(&first, &second)?;
    #[derive(Serialize)]
    struct Comparison {
        rmse: f64,
        cells: usize,
    }
    write_json(
        a.output.as_deref(),
        &Comparison {
            rmse,
            cells: first.cells(),
        },
    )
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let reports = a
        .n
        .iter()
        .map(|&n| {
            let mut cfg = BenchConfig::new(n, a.trials, a.t_end, &a.methods);
            cfg.epsilon = a.epsilon;
            cfg.seed = a.common.seed;
            bench_speedup_with(&cfg)
        })
        .collect::<Result<Vec<SpeedupReport>>>()?;
    match a.common.format {
        Format::Json => write_json(a.common.output.as_deref(), &reports),
        Format::Csv => {
            let mut w = crate::signal::csv_writer(open_output(a.common.output.as_deref())?);
            w.write_record(["n", "method", "direct_mean", "phase_mean", "speedup"])?;
            for r in &reports {
                for m in &r.methods {
                    w.write_record([
                        r.n.to_string(),
                        m.method.to_string(),
                        r.direct.mean.to_string(),
                        m.timing.mean.to_string(),
                        m.speedup.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}
