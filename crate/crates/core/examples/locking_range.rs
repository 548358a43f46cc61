//! Share of the (λ2, λ3) grid that frequency-locks, for several coupling
//! strengths and oscillator counts.

use ringphase::sync::{locking_area, sweep_surface, SweepConfig, SweepMethod, DEFAULT_LOCK_THRESHOLD};

fn main() -> ringphase::Result<()> {
    let grid = 9;
    println!("   n    eps   locked share");
    for n in [3, 4, 6, 8] {
        for eps in [0.0, 0.2, 0.4] {
            let s = sweep_surface(&SweepConfig::new(n, eps, SweepMethod::Analytic).with_grid(grid))?;
            println!("{n:>4} {eps:>6}   {:.3}", locking_area(&s, DEFAULT_LOCK_THRESHOLD));
        }
    }
    Ok(())
}
