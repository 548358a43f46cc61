//! How closely a simulated ring follows the closed-form limit cycle.

use serde::{Deserialize, Serialize};

use crate::direct::{integrate, rising_crossings, CoupledSystemSpec};
use crate::error::{Error, Result};
use crate::signal::PeriodicSignal;
use crate::waveform::{analytic_waveform, ring_state, InverterMode, Node};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformComparison {
    /// Period of the simulated ring, in nominal periods.
    pub period: f64,
    /// Phase delay applied to the simulated waveform.
    pub shift: f64,
    /// Node 3 max abs error at the delay minimising it.
    pub max_error: f64,
    /// Node 3 max abs error at the delay minimising the RMS difference.
    pub max_error_l2: f64,
    pub rmse: f64,
    /// Max abs error per node at `shift`.
    pub node_errors: [f64; 3],
    /// Final simulated cycle of each node, rescaled to unit period.
    pub simulated: Vec<PeriodicSignal>,
}

/// Simulates one uncoupled ring for `cycles` periods from the closed-form
/// state and compares its last full cycle (time-normalised to period 1)
/// against the closed-form waveforms.
pub fn closed_form_mismatch(inverter: InverterMode, cycles: f64, resolution: usize) -> Result<WaveformComparison> {
    if !(cycles >= 2.0) {
        return Err(Error::Config(format!("need at least 2 cycles, got {cycles}")));
    }
    let spec = CoupledSystemSpec::new(&[1.0], inverter, 0.0)?;
    let dt = 1e-4;
    let traj = integrate(&spec, &ring_state(0.0), cycles, dt)?;
    let times = traj.times();
    let v3 = traj.node_trace(0, Node::N3);
    let c = rising_crossings(times, &v3);
    if c.len() < 2 {
        return Err(Error::NoOscillation { oscillator: 0 });
    }
    let (start, end) = (c[c.len() - 2], c[c.len() - 1]);
    let period = end - start;

    // node 3 rises through zero at phase 1/2
    let simulated = Node::ALL
        .iter()
        .map(|&node| {
            let trace = traj.node_trace(0, node);
            PeriodicSignal::from_fn(resolution, |p| {
                let t = start + (p - 0.5).rem_euclid(1.0) * period;
                let x = t / dt;
                let k = (x.floor() as usize).min(trace.len() - 2);
                let f = x - k as f64;
                trace[k] + f * (trace[k + 1] - trace[k])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = Node::ALL
        .iter()
        .map(|&n| analytic_waveform(n, resolution))
        .collect::<Result<Vec<_>>>()?;

    let l2 = reference[2].align(&simulated[2], false);
    let max_error_l2 = reference[2].max_abs_diff(&simulated[2].delayed(l2.shift));

    // minimax delay: integer scan, then eighth-sample refinement
    let m = resolution as f64;
    let err_at = |d: f64| reference[2].max_abs_diff(&simulated[2].delayed(d));
    let (mut shift, mut max_error) = (0.0, f64::INFINITY);
    for k in 0..resolution {
        let e = err_at(k as f64 / m);
        if e < max_error {
            max_error = e;
            shift = k as f64 / m;
        }
    }
    let centre = shift;
    for k in -8i32..=8 {
        let d = centre + k as f64 / (8.0 * m);
        let e = err_at(d);
        if e < max_error {
            max_error = e;
            shift = d.rem_euclid(1.0);
        }
    }
    let mut node_errors = [0.0; 3];
    for i in 0..3 {
        node_errors[i] = reference[i].max_abs_diff(&simulated[i].delayed(shift));
    }

    Ok(WaveformComparison {
        period,
        shift,
        max_error,
        max_error_l2,
        rmse: l2.rmse,
        node_errors,
        simulated,
    })
}

/// Smallest tanh gain on `gains` (ascending) whose mismatch is below `tol`.
pub fn gain_for_tolerance(gains: &[f64], tol: f64, cycles: f64) -> Result<Option<(f64, f64)>> {
    for &k in gains {
        let c = closed_form_mismatch(InverterMode::smoothed(k), cycles, 512)?;
        if c.max_error < tol {
            return Ok(Some((k, c.max_error)));
        }
    }
    Ok(None)
}
