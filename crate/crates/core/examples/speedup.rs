//! Wall-clock speedup of the phase model over direct simulation as the
//! number of oscillators grows.
//!
//!     cargo run --release --example speedup [trials]

use ringphase::bench::speedup_curve;
use ringphase::prc::PrcMethod;

fn main() -> ringphase::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let reports = speedup_curve(&[2, 3, 4, 8, 16], trials, 60.0, &PrcMethod::ALL)?;
    println!("   n   direct [ms]   analytic   malkin   winfree");
    for r in &reports {
        let s = |m| r.speedup(m).unwrap_or(f64::NAN);
        println!(
            "{:>4}   {:>10.3}   {:>7.1}x  {:>6.1}x  {:>7.1}x",
            r.n,
            1e3 * r.direct.mean,
            s(PrcMethod::Analytic),
            s(PrcMethod::Malkin),
            s(PrcMethod::Winfree)
        );
    }
    Ok(())
}
