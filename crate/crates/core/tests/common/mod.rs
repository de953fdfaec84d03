//! Shared test fixtures.

/// Mean return of uniform random actions on cartpole over 100 episodes,
/// dynamics seed 0, policy seed 0. Frozen from a Monte-Carlo run.
pub const RANDOM_BASELINE: f64 = 74.65500240942896;
