//! Three ways to get the ring's phase response: closed form, adjoint
//! integration and pulse probing.

use ringphase::direct::RingOscillatorSpec;
use ringphase::prc::{analytic_prc, malkin_prc, prc_rmse, winfree_prc, PrcDiagnostics, PrcResult};
use ringphase::waveform::Node;

fn shift_amplitude(r: &PrcResult) -> f64 {
    match r.diagnostics {
        PrcDiagnostics::Winfree { raw_shift_amplitude, .. } => raw_shift_amplitude,
        _ => f64::NAN,
    }
}

fn main() -> ringphase::Result<()> {
    let osc = RingOscillatorSpec::default();
    let analytic = analytic_prc(Node::N3, 1024)?;
    let peak = analytic.signal.peak();

    let malkin = malkin_prc(&osc, 4, 1024)?;
    if let PrcDiagnostics::Malkin { residual, period, .. } = &malkin.diagnostics {
        println!("adjoint: period {period:.5}, periodicity residual {residual:.2e}");
    }
    let w05 = winfree_prc(&osc, 0.05, 0.01, 128)?;
    let w10 = winfree_prc(&osc, 0.10, 0.01, 128)?;

    for (name, r) in [("malkin", &malkin), ("winfree", &w05)] {
        let a = analytic.signal.align(&r.signal, true);
        println!(
            "{name:>8}: scaled RMSE {:.4} ({:.1}% of peak), fitted scale {:+.3}, unscaled RMSE {:.4}",
            a.rmse,
            100.0 * a.rmse / peak,
            a.scale,
            prc_rmse(&analytic, r, false),
        );
    }
    let (a05, a10) = (shift_amplitude(&w05), shift_amplitude(&w10));
    println!("pulse probing raw max|Z|: A=0.05 -> {a05:.3e}, A=0.1 -> {a10:.3e}, ratio {:.3}", a10 / a05);
    println!("max|Z|/A: {:.4} and {:.4}", a05 / 0.05, a10 / 0.1);
    Ok(())
}
