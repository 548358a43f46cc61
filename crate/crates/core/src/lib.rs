//! Ring-oscillator synchronisation: closed-form waveforms, direct coupled
//! integration, phase response curves and the reduced phase model.

pub mod bench;
pub mod cli;
pub mod direct;
pub mod error;
pub mod ode;
pub mod oracle;
pub mod phase;
pub mod prc;
pub mod record;
pub mod signal;
pub mod sync;
pub mod waveform;

pub use error::{Error, ErrorClass, Result};
pub use signal::{Alignment, PeriodicSignal};
