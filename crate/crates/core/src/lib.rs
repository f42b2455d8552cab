//! Classical model of a quantum particle as a driven damped oscillator
//! ("bouncer") exchanging energy with a Brownian thermal bath ("walker").
//!
//! - [`analytic`]: closed forms for both pictures and their energy balance.
//! - [`bouncer`]: RK4 integration, steady-state fits and work accounting.
//! - [`walker`]: seeded, parallel Langevin ensembles with exact OU stepping.
//! - [`balance`]: bouncer/walker power balance and the entropic cycle.
//! - [`spectrum`]: admissible frequencies and the `(n + 1/2) hbar omega0` ladder.
//! - [`spinfield`]: grid fields, spin vector and current identities.

pub mod analytic;
pub mod balance;
pub mod bouncer;
pub mod error;
pub mod rng;
pub mod spectrum;
pub mod spinfield;
pub mod stats;
pub mod walker;

pub use analytic::{BathParams, DerivedConstants, OscillatorParams};
pub use bouncer::{BouncerState, Drive, Trajectory};
pub use error::{Error, Result};
pub use rng::RNG_FAMILY;
pub use spinfield::{Grid, ScalarField, SpinSign, SpinVector, VectorField};
pub use stats::SeriesWithError;
pub use walker::{EnsembleConfig, Scheme, WalkerEnsemble};
