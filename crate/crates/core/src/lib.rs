//! Behavioral model of an active structural-health-monitoring transceiver
//! and the signal chain around it.
//!
//! * [`dispersion`]: Rayleigh-Lamb S0/A0 dispersion curves.
//! * [`excitation`]: windowed reference burst, differential PWM, LC filter
//!   and the least-squares pulse-width optimizer.
//! * [`synthesizer`]: integer-N PLL loop design and lock-transient simulation.
//! * [`receiver`]: LNA, quadrature mixer, baseband LPF, PGA and auto-zeroing.
//! * [`plate`]: pitch-catch measurement synthesis on a 2-D plate.
//! * [`localization`]: baseline subtraction, envelopes and delay-and-sum imaging.
//! * [`cli`]: the command implementations behind the `shmkit` binary.

// `!(x > 0.0)` is used on purpose so NaN inputs fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod excitation;
pub mod filter;
pub mod keyvalue;
pub mod localization;
pub mod numfmt;
pub mod plate;
pub mod receiver;
pub mod synthesizer;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{IqTrace, SignalTrace};
