//! Engine for heterogeneous multi-population games played by self-interested
//! device owners who repeatedly pick which sensing task (region) to serve.
//!
//! The crate is organized around a few ideas:
//!
//! * [`game`] — the game instance itself: regions with survey routes and
//!   reward pools, device populations with energy/quality parameters, and the
//!   payoff map that turns a social state (one strategy distribution per
//!   population) into per-strategy net payoffs.
//! * [`dynamics`] — revision protocols (pairwise proportional imitation,
//!   pairwise comparison, and per-population convex mixtures of the two) and
//!   the mean-dynamics vector fields they induce on the product of simplices:
//!   replicator, Smith, and hybrid.
//! * [`integrator`] — fixed-step RK4 integration of the mean dynamics with
//!   per-step simplex repair, trajectory recording, and the equal-payoff
//!   convergence criterion.
//! * [`stochastic`] — the finite-population microfoundation: every agent
//!   carries an exponential alarm clock and revises its strategy by a thinned
//!   switch-rate rule. Used as the ground-truth oracle for the mean dynamics.
//! * [`analysis`] — direction-field grids, equilibrium location and
//!   classification, and convergence-time sweeps over protocol mixing weights.
//! * [`generate`] — seeded random scenario sampling within the documented
//!   parameter ranges, for reproducible experiments.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod game;
pub mod generate;
pub mod integrator;
pub mod stochastic;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
