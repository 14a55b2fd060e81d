//! Exact arithmetic for the Ostrogradsky-Sierpinski-Pierce expansion.
//!
//! * [`expansion`]: codecs between rationals and digit sequences, partial sums,
//!   cylinder intervals and the shift map.
//! * [`dynamics`]: digit counts, Birkhoff averages and uniform-sample frequency
//!   experiments.
//! * [`measure`]: Lebesgue covers of digit-restricted sets, Hausdorff
//!   alpha-volumes and the measure of the digit-position sets `A_k^i`.
//! * [`eta`]: random series with independent digits, purity classification and
//!   singularity experiments.

pub mod dynamics;
pub mod error;
pub mod eta;
pub mod expansion;
pub mod measure;
pub mod rational;
pub mod rng;

pub use error::{Error, Result};
pub use expansion::{cylinder, encode, evaluate, shift, Cylinder, GSequence, QSequence};
pub use rational::Rational;
