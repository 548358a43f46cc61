//! Three detuned rings, λ = [1, 0.95, 1.05], under weak and strong coupling:
//! phase model next to direct simulation.

use ringphase::direct::{integrate, measure_frequencies, random_phases, state_from_phases, CoupledSystemSpec};
use ringphase::phase::{detect_locking, extract_frequencies, integrate_phases, PhaseSystem};
use ringphase::waveform::InverterMode;

fn main() -> ringphase::Result<()> {
    let lambda = [1.0, 0.95, 1.05];
    let phases = random_phases(3, 0);
    for eps in [0.0, 0.2, 0.4] {
        let sys = PhaseSystem::analytic(&lambda, eps)?;
        let traj = integrate_phases(&sys, &phases, sys.default_t_end(), sys.default_dt())?;
        let f = extract_frequencies(&traj, 0.5)?;

        let spec = CoupledSystemSpec::new(&lambda, InverterMode::default(), eps)?;
        let d = integrate(&spec, &state_from_phases(&phases), 200.0, spec.default_dt())?;
        let fd = measure_frequencies(&d, 0.5)?;

        println!("eps = {eps}");
        println!("  phase  {:.4?} locked = {}", f, detect_locking(&f, 1e-3)?);
        println!("  direct {:.4?} locked = {}", fd, detect_locking(&fd, 1e-3)?);
    }
    Ok(())
}
