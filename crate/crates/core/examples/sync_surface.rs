//! Degree of synchronisation over the (λ2, λ3) plane, phase model against
//! direct simulation.
//!
//!     cargo run --release --example sync_surface [grid] [epsilon]

use ringphase::sync::{surface_rmse, sweep_surface, SweepConfig, SweepMethod, SyncSurface};

fn show(s: &SyncSurface) {
    // ' ' = locked ... '#' = far apart
    let ramp = [' ', '.', ':', '-', '=', '+', '*', '#'];
    for row in &s.values {
        let line: String = row
            .iter()
            .map(|v| {
                let d = (1.0 - v).max(0.0);
                let k = if d < 1e-4 { 0 } else { (1 + (d * 100.0) as usize).min(ramp.len() - 1) };
                ramp[k]
            })
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> ringphase::Result<()> {
    let mut args = std::env::args().skip(1);
    let grid: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(9);
    let eps: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.2);

    let mut surfaces = Vec::new();
    for method in [SweepMethod::Analytic, SweepMethod::Malkin, SweepMethod::Winfree, SweepMethod::Direct] {
        let s = sweep_surface(&SweepConfig::new(3, eps, method).with_grid(grid))?;
        println!("{method}:");
        show(&s);
        surfaces.push((method, s));
    }
    let direct = &surfaces[3].1;
    for (method, s) in &surfaces[..3] {
        println!("RMSE {method} vs direct: {:.2e}", surface_rmse(s, direct)?);
    }
    Ok(())
}
