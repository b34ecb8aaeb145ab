use thiserror::Error;

use crate::game::SocialState;

/// Errors produced by scenario construction, dynamics evaluation, and
/// simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario invariant was violated at construction time.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A region index does not exist in the scenario.
    #[error("unknown region index {region}")]
    UnknownRegion { region: usize },

    /// A region was queried for a population whose strategy set does not
    /// contain it.
    #[error("region {region} is not in the strategy set of population {population}")]
    RegionNotInStrategySet { population: usize, region: usize },

    /// A social state failed simplex validation against its scenario.
    #[error("invalid social state: {0}")]
    InvalidState(String),

    /// Hybrid protocol weights were negative or did not sum to one.
    #[error("invalid protocol weights: {0}")]
    InvalidWeights(String),

    /// A conditional switch rate from a strategy to itself was requested.
    #[error("self-switch rate is undefined (population {population}, strategy {strategy})")]
    SelfSwitch { population: usize, strategy: usize },

    /// A configuration value was out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The vector field evaluated to a non-finite value during integration.
    /// Carries the state at which the failure occurred.
    #[error("non-finite vector field at t = {time}")]
    NonFiniteField { time: f64, state: Box<SocialState> },

    /// The observed total switch rate of a revising agent exceeded the
    /// configured bound, so rates can no longer be converted to probabilities.
    #[error(
        "total switch rate {observed} exceeds rate_bound {bound}; \
         raise rate_bound above the worst-case total switch rate for this scenario"
    )]
    RateBoundExceeded { observed: f64, bound: f64 },

    /// An analysis input could not describe any valid point of the state
    /// space.
    #[error("invalid analysis specification: {0}")]
    InvalidAnalysisSpec(String),
}
