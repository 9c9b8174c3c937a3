//! Simulation and analysis toolkit for a genetic algorithm with ranking
//! selection, single-point crossover, and independent per-bit mutation.
//!
//! The crate exposes three layers:
//!
//! * the population Markov chain itself, driven by an explicit block of
//!   uniform random inputs so that runs with different parameters can be
//!   coupled pathwise (`engine`, with exact small-system cross-checks in
//!   `engine::oracle`);
//! * an auxiliary birth-and-death-like counting chain that bounds the
//!   number of fit individuals from below (`auxchain`);
//! * the asymptotic theory: the critical parameter
//!   `pi = sigma (1-p_C)(1-p_M)^ell`, large-deviation rate functions, the
//!   fixed-point fraction `rho*`, and branching-process bounds (`theory`).
//!
//! `experiments` packages the standard study scenarios behind a JSON run
//! configuration.

pub mod auxchain;
pub mod chromosome;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod theory;
pub mod landscape;
pub mod seed;
pub mod selection;
pub mod variation;

pub use chromosome::{Chromosome, Population};
pub use error::{Error, Result};
pub use landscape::FitnessLandscape;
pub use selection::SelectionScheme;
