//! Closed-form ring waveforms and PPV, and how a simulated tanh ring
//! approaches them as the inverter gain grows.
//!
//!     cargo run --example analytic_waveform [out.csv]

use std::fs::File;

use ringphase::oracle::closed_form_mismatch;
use ringphase::waveform::{analytic_ppv, analytic_waveform, InverterMode, Node, RingOscillatorConstants};

fn main() -> ringphase::Result<()> {
    let c = RingOscillatorConstants::standard();
    println!("psi = {:.6}, gamma = {:.6}, RC = {:.6}", c.psi, c.gamma, c.rc);

    let v3 = analytic_waveform(Node::N3, 1024)?;
    let ppv = analytic_ppv(Node::N3, 1024)?;
    println!("node 3: v in [{:.4}, {:.4}], PPV peak {:.4}, <PPV v> = {:.4}",
        v3.samples().iter().cloned().fold(f64::INFINITY, f64::min),
        v3.samples().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ppv.peak(),
        v3.samples().iter().zip(ppv.samples()).map(|(a, b)| a * b).sum::<f64>() / 1024.0,
    );

    if let Some(path) = std::env::args().nth(1) {
        ppv.write_csv(File::create(&path)?)?;
        println!("wrote node 3 PPV to {path}");
    }

    println!("\n  gain   period   max|err|  (last of 10 cycles, best phase alignment)");
    for mode in [10.0, 20.0, 30.0, 50.0, 100.0].map(InverterMode::smoothed).into_iter().chain([InverterMode::Ideal]) {
        let m = closed_form_mismatch(mode, 10.0, 1024)?;
        let label = match mode {
            InverterMode::Smoothed { gain } => format!("{gain:>6}"),
            InverterMode::Ideal => " ideal".into(),
        };
        println!("{label}  {:.5}  {:.4}", m.period, m.max_error);
    }
    Ok(())
}
