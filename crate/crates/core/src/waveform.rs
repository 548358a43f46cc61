//! Closed-form three-inverter ring oscillator: node waveforms, the perturbation
//! projection vector, and the inverter transfer.
//!
//! With the free-running period normalised to 1, node 1 follows
//!
//! ```text
//! v1(t) = 1 - ψ e^{-γ t},          0 ≤ t ≤ 1/2
//! v1(t) = -1 + ψ e^{-γ (t - 1/2)},  1/2 ≤ t ≤ 1
//! ```
//!
//! with ψ the golden ratio and γ = 6 ln ψ. Nodes 2 and 3 are node 1 delayed by
//! 2/3 and 1/3 of a period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::PeriodicSignal;

/// Default sample count for tabulated waveforms and PRCs.
pub const DEFAULT_RESOLUTION: usize = 1024;

/// Default origin slope of the smoothed inverter.
pub const DEFAULT_GAIN: f64 = 20.0;

const MIN_RESOLUTION: usize = 8;

/// Golden ratio ψ = (1 + √5) / 2.
pub fn psi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Exponential rate γ = 6 ln ψ of the normalised ring.
pub fn gamma() -> f64 {
    6.0 * psi().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingOscillatorConstants {
    pub psi: f64,
    pub gamma: f64,
    /// RC constant for unit natural frequency.
    pub rc: f64,
}

impl RingOscillatorConstants {
    pub fn standard() -> Self {
        let gamma = gamma();
        Self {
            psi: psi(),
            gamma,
            rc: 1.0 / gamma,
        }
    }
}

impl Default for RingOscillatorConstants {
    fn default() -> Self {
        Self::standard()
    }
}

/// One of the three ring nodes. Node 3 is the coupling node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    N1,
    N2,
    N3,
}

impl Node {
    pub const ALL: [Node; 3] = [Node::N1, Node::N2, Node::N3];

    pub fn from_number(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Node::N1),
            2 => Ok(Node::N2),
            3 => Ok(Node::N3),
            _ => Err(Error::Config(format!("node must be 1, 2 or 3, got {n}"))),
        }
    }

    /// Zero-based index into a 3-vector of node voltages.
    pub fn index(self) -> usize {
        match self {
            Node::N1 => 0,
            Node::N2 => 1,
            Node::N3 => 2,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }

    /// Node driving this one through an inverter stage.
    pub fn previous(self) -> Node {
        match self {
            Node::N1 => Node::N3,
            Node::N2 => Node::N1,
            Node::N3 => Node::N2,
        }
    }

    /// Delay of this node's waveform relative to node 1.
    pub fn waveform_delay(self) -> f64 {
        match self {
            Node::N1 => 0.0,
            Node::N2 => 2.0 / 3.0,
            Node::N3 => 1.0 / 3.0,
        }
    }

    /// Delay of this node's PPV relative to node 3's.
    pub fn ppv_delay(self) -> f64 {
        match self {
            Node::N1 => 2.0 / 3.0,
            Node::N2 => 1.0 / 3.0,
            Node::N3 => 0.0,
        }
    }
}

/// Inverter transfer model.
///
/// `response` is the saturating sign-like transfer `f`; a ring stage drives its
/// node toward `-f(v_prev)` (see [`crate::direct`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InverterMode {
    /// `+1` for `v > 0`, `-1` otherwise.
    Ideal,
    /// `tanh(gain * v)`: odd, saturating at ±1, slope `gain` at the origin.
    Smoothed { gain: f64 },
}

impl Default for InverterMode {
    fn default() -> Self {
        InverterMode::Smoothed { gain: DEFAULT_GAIN }
    }
}

impl InverterMode {
    pub fn smoothed(gain: f64) -> Self {
        InverterMode::Smoothed { gain }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InverterMode::Ideal => Ok(()),
            InverterMode::Smoothed { gain } if gain > 0.0 && gain.is_finite() => Ok(()),
            InverterMode::Smoothed { gain } => {
                Err(Error::Config(format!("smoothed inverter gain must be > 0, got {gain}")))
            }
        }
    }

    #[inline]
    pub fn response(&self, v: f64) -> f64 {
        match *self {
            InverterMode::Ideal => {
                if v > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            InverterMode::Smoothed { gain } => (gain * v).tanh(),
        }
    }

    /// Derivative of `response`. Zero almost everywhere for the ideal mode.
    #[inline]
    pub fn slope(&self, v: f64) -> f64 {
        match *self {
            InverterMode::Ideal => 0.0,
            InverterMode::Smoothed { gain } => {
                let t = (gain * v).tanh();
                gain * (1.0 - t * t)
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, InverterMode::Smoothed { .. })
    }
}

/// Checked inverter evaluation.
pub fn inverter_response(v: f64, mode: InverterMode) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("inverter input {v} is not finite")));
    }
    mode.validate()?;
    Ok(mode.response(v))
}

fn node1_voltage(t: f64) -> f64 {
    let (psi, gamma) = (psi(), gamma());
    let t = t.rem_euclid(1.0);
    if t <= 0.5 {
        1.0 - psi * (-gamma * t).exp()
    } else {
        -1.0 + psi * (-gamma * (t - 0.5)).exp()
    }
}

/// Closed-form voltage of `node` at `phase`.
pub fn ring_voltage(node: Node, phase: f64) -> f64 {
    node1_voltage(phase - node.waveform_delay())
}

fn node3_ppv(t: f64) -> f64 {
    let (psi, gamma) = (psi(), gamma());
    let t = t.rem_euclid(1.0);
    let psi3 = psi.powi(3);
    let coeff = (1.0 + psi3) / (gamma * (4.0 - 2.0 * psi3));
    let step = |x: f64| if x >= 0.0 { 1.0 } else { 0.0 };
    let bracket = psi + 2.0 * (-step(t) + (-1.0 + 2.0 / psi) * step(t - 0.5));
    coeff * bracket * (gamma * t).exp()
}

/// Closed-form PPV of `node` at `phase`, one period taken on `[0, 1)` and wrapped.
pub fn ring_ppv(node: Node, phase: f64) -> f64 {
    node3_ppv(phase - node.ppv_delay())
}

/// All three closed-form node voltages at `phase`.
pub fn ring_state(phase: f64) -> [f64; 3] {
    Node::ALL.map(|n| ring_voltage(n, phase))
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    Ok(())
}

pub fn analytic_waveform(node: Node, resolution: usize) -> Result<PeriodicSignal> {
    check_resolution(resolution)?;
    PeriodicSignal::from_fn(resolution, |p| ring_voltage(node, p))
}

pub fn analytic_ppv(node: Node, resolution: usize) -> Result<PeriodicSignal> {
    check_resolution(resolution)?;
    PeriodicSignal::from_fn(resolution, |p| ring_ppv(node, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let c = RingOscillatorConstants::standard();
        assert!((c.psi * c.psi - c.psi - 1.0).abs() < 1e-15);
        assert!(c.gamma > 0.0);
        assert!(((c.gamma / 2.0).exp() - c.psi.powi(3)).abs() < 1e-12);
        assert!((c.rc * c.gamma - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverter_values() {
        assert_eq!(inverter_response(0.5, InverterMode::Ideal).unwrap(), 1.0);
        assert_eq!(inverter_response(-0.2, InverterMode::Ideal).unwrap(), -1.0);
        assert_eq!(inverter_response(0.0, InverterMode::Ideal).unwrap(), -1.0);
        assert_eq!(inverter_response(0.0, InverterMode::smoothed(20.0)).unwrap(), 0.0);
        assert!(inverter_response(f64::NAN, InverterMode::Ideal).is_err());
        assert!(inverter_response(0.1, InverterMode::smoothed(0.0)).is_err());
    }

    #[test]
    fn smoothed_inverter_shape() {
        let m = InverterMode::smoothed(20.0);
        for v in [0.01, 0.1, 0.3, 2.0] {
            assert_eq!(m.response(-v), -m.response(v));
        }
        assert!((m.response(5.0) - 1.0).abs() < 1e-12);
        let h = 1e-6;
        assert!(((m.response(h) - m.response(-h)) / (2.0 * h) - 20.0).abs() < 1e-6);
        assert!((m.slope(0.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn node1_branch_values() {
        let psi = psi();
        assert!((ring_voltage(Node::N1, 0.0) - (1.0 - psi)).abs() < 1e-15);
        assert!((ring_voltage(Node::N1, 0.0) + 0.6180339887).abs() < 1e-9);
        // both branches agree at 1/2 and at the seam
        let g = gamma();
        let first = 1.0 - psi * (-g * 0.5).exp();
        let second = -1.0 + psi;
        assert!((first - second).abs() < 1e-12);
        assert!((ring_voltage(Node::N1, 0.5) - (psi - 1.0)).abs() < 1e-12);
        let end = -1.0 + psi * (-g * 0.5).exp();
        assert!((end - (1.0 - psi)).abs() < 1e-12);
    }

    #[test]
    fn waveform_is_continuous() {
        for p in [0.0, 0.5, 1.0] {
            let l = ring_voltage(Node::N1, p - 1e-13);
            let r = ring_voltage(Node::N1, p + 1e-13);
            assert!((l - r).abs() < 1e-11, "jump at {p}");
        }
    }

    #[test]
    fn nodes_are_shifted_copies() {
        let res = 1024;
        let v1 = analytic_waveform(Node::N1, res).unwrap();
        let v2 = analytic_waveform(Node::N2, res).unwrap();
        let v3 = analytic_waveform(Node::N3, res).unwrap();
        // 1/3 of a period is not on the grid, so compare against the interpolant
        let h = 1.0 / res as f64;
        let bound = gamma() * 1.62 * h * h; // |v''| max times h²/8, generous
        for k in 0..res {
            let p = k as f64 / res as f64;
            assert!((v2.at(p) - v1.at(p - 2.0 / 3.0)).abs() < bound);
            assert!((v3.at(p) - v1.at(p - 1.0 / 3.0)).abs() < bound);
            assert!(v1.at(p).abs() < 1.0);
        }
    }

    #[test]
    fn ppv_structure() {
        let g = gamma();
        // shift relations, evaluated in closed form
        for k in 0..200 {
            let p = k as f64 / 200.0 + 0.0013;
            assert!((ring_ppv(Node::N1, p) - ring_ppv(Node::N3, p - 2.0 / 3.0)).abs() < 1e-12);
            assert!((ring_ppv(Node::N2, p) - ring_ppv(Node::N3, p - 1.0 / 3.0)).abs() < 1e-12);
        }
        // jump at 1/2
        let below = ring_ppv(Node::N3, 0.5 - 1e-12);
        let above = ring_ppv(Node::N3, 0.5);
        assert!((below - above).abs() > 0.5);
        // c e^{γt} on each half: ratio of values is e^{γΔt}
        for (a, b) in [(0.1, 0.3), (0.6, 0.9)] {
            let ratio = ring_ppv(Node::N3, b) / ring_ppv(Node::N3, a);
            assert!((ratio - (g * (b - a)).exp()).abs() < 1e-12);
        }
        let s = analytic_ppv(Node::N3, 64).unwrap();
        let first = s.samples()[0];
        assert!(s.samples().iter().any(|v| (v - first).abs() > 0.1));
    }

    #[test]
    fn rejects_small_resolution() {
        assert!(analytic_waveform(Node::N1, 7).is_err());
        assert!(analytic_ppv(Node::N3, 4).is_err());
        assert!(Node::from_number(4).is_err());
    }
}
