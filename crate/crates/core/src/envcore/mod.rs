//! Self-contained 2D control tasks exposing a POMDP-style contract.
//!
//! Dynamics are pure functions of `(state, action)`; the dynamics seed only
//! selects initial states. Appearance lives entirely in
//! [`crate::visualgen`] and never reaches this module.

mod cartpole;
mod reacher;

pub use cartpole::{CartpoleParams, CartpoleState};
pub use reacher::{ReacherParams, ReacherState};

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Raw simulator sub-steps per episode; every domain's episode lasts this
/// long, so undiscounted returns are bounded by 1000.
pub const SUBSTEPS_PER_EPISODE: u32 = 1000;

/// Default integrator step (seconds).
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainId {
    Cartpole,
    Reacher,
}

impl DomainId {
    pub const ALL: [DomainId; 2] = [DomainId::Cartpole, DomainId::Reacher];

    pub fn name(self) -> &'static str {
        match self {
            DomainId::Cartpole => "cartpole",
            DomainId::Reacher => "reacher",
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            DomainId::Cartpole => 4,
            DomainId::Reacher => 6,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            DomainId::Cartpole => 1,
            DomainId::Reacher => 2,
        }
    }

    pub fn default_frame_skip(self) -> u32 {
        match self {
            DomainId::Cartpole => 8,
            DomainId::Reacher => 4,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartpole" | "cartpole-balance" | "cartpole_balance" => Ok(DomainId::Cartpole),
            "reacher" | "reacher-reach" | "reacher_reach" => Ok(DomainId::Reacher),
            other => Err(Error::config(format!("unknown domain '{other}'"))),
        }
    }
}

/// Physical state of one of the domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhysState {
    Cartpole(CartpoleState),
    Reacher(ReacherState),
}

impl PhysState {
    pub fn domain(&self) -> DomainId {
        match self {
            PhysState::Cartpole(_) => DomainId::Cartpole,
            PhysState::Reacher(_) => DomainId::Reacher,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            PhysState::Cartpole(s) => vec![s.x, s.x_dot, s.theta, s.theta_dot],
            PhysState::Reacher(s) => vec![
                s.theta1,
                s.theta2,
                s.omega1,
                s.omega2,
                s.target[0],
                s.target[1],
            ],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &PhysState) -> bool {
        let (a, b) = (self.to_vec(), other.to_vec());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub domain: DomainId,
    pub dynamics_seed: u64,
    pub frame_skip: u32,
    pub episode_length: u32,
    pub dt: f64,
}

impl EnvConfig {
    pub fn new(domain: DomainId, dynamics_seed: u64) -> Self {
        let frame_skip = domain.default_frame_skip();
        EnvConfig {
            domain,
            dynamics_seed,
            frame_skip,
            episode_length: episode_length_for(frame_skip),
            dt: DEFAULT_DT,
        }
    }

    /// Changes the action repeat and rescales the episode so it still lasts
    /// [`SUBSTEPS_PER_EPISODE`] raw sub-steps (rounded up).
    pub fn with_frame_skip(mut self, frame_skip: u32) -> Self {
        self.frame_skip = frame_skip;
        self.episode_length = episode_length_for(frame_skip);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_skip == 0 {
            return Err(Error::config("frame_skip must be positive"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("episode_length must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt must be a positive finite number"));
        }
        Ok(())
    }
}

fn episode_length_for(frame_skip: u32) -> u32 {
    SUBSTEPS_PER_EPISODE.div_ceil(frame_skip.max(1))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

/// Smooth hinge: 1 inside `[lower, upper]`, Gaussian decay outside, reaching
/// `value_at_margin` at distance `margin` from the nearest bound.
pub fn tolerance(x: f64, lower: f64, upper: f64, margin: f64, value_at_margin: f64) -> f64 {
    if (lower..=upper).contains(&x) {
        return 1.0;
    }
    if margin <= 0.0 {
        return 0.0;
    }
    let d = if x < lower { lower - x } else { x - upper } / margin;
    let scale = (-2.0 * value_at_margin.ln()).sqrt();
    (-0.5 * (d * scale).powi(2)).exp()
}

/// Initial state for episode `episode_index` under `env.dynamics_seed`.
pub fn reset(env: &EnvConfig, episode_index: u64) -> PhysState {
    let mut s = rng::stream(&[tag::RESET, env.domain as u64, env.dynamics_seed, episode_index]);
    match env.domain {
        DomainId::Cartpole => PhysState::Cartpole(CartpoleState::sample(&mut s)),
        DomainId::Reacher => PhysState::Reacher(ReacherState::sample(&mut s)),
    }
}

/// Per-sub-step reward in `[0, 1]`.
pub fn reward(state: &PhysState) -> f64 {
    match state {
        PhysState::Cartpole(s) => s.reward(&CartpoleParams::default()),
        PhysState::Reacher(s) => s.reward(&ReacherParams::default()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub state: PhysState,
    /// Sum of sub-step rewards over the action repeat.
    pub reward: f64,
    /// Whether any action component had to be clamped into `[-1, 1]`.
    pub clamped: bool,
}

/// Applies `action` for `env.frame_skip` sub-steps of semi-implicit Euler.
///
/// Pure: the result depends only on the domain constants, `dt`, the frame
/// skip, the state and the action.
pub fn advance(env: &EnvConfig, state: &PhysState, action: &[f64]) -> Result<Advance> {
    let dim = env.domain.action_dim();
    if action.len() != dim {
        return Err(Error::Shape(format!(
            "{} expects {dim} action components, got {}",
            env.domain,
            action.len()
        )));
    }
    if state.domain() != env.domain {
        return Err(Error::Contract(format!(
            "state of {} fed to a {} environment",
            state.domain(),
            env.domain
        )));
    }
    let mut clamped = false;
    let act: Vec<f64> = action
        .iter()
        .map(|&a| {
            let c = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            if c != a {
                clamped = true;
            }
            c
        })
        .collect();

    let mut state = *state;
    let mut total = 0.0;
    for _ in 0..env.frame_skip {
        state = match state {
            PhysState::Cartpole(s) => {
                let p = CartpoleParams::default();
                let next = s.substep(&p, act[0], env.dt);
                total += next.reward(&p);
                PhysState::Cartpole(next)
            }
            PhysState::Reacher(s) => {
                let p = ReacherParams::default();
                let next = s.substep(&p, [act[0], act[1]], env.dt);
                total += next.reward(&p);
                PhysState::Reacher(next)
            }
        };
    }
    Ok(Advance { state, reward: total, clamped })
}

/// Stateful wrapper tracking the episode timer and clamp warnings.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: PhysState,
    t: u32,
    clamp_warnings: u64,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let state = reset(&config, 0);
        Ok(Env { config, state, t: 0, clamp_warnings: 0 })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &PhysState {
        &self.state
    }

    pub fn elapsed(&self) -> u32 {
        self.t
    }

    /// Number of actions that were clamped since construction.
    pub fn clamp_warnings(&self) -> u64 {
        self.clamp_warnings
    }

    pub fn reset(&mut self, episode_index: u64) -> PhysState {
        self.state = reset(&self.config, episode_index);
        self.t = 0;
        self.state
    }

    /// Returns `(next_state, reward, done)`; `done` only when the timer
    /// reaches the episode length.
    pub fn step(&mut self, action: &[f64]) -> Result<(PhysState, f64, bool)> {
        let out = advance(&self.config, &self.state, action)?;
        if out.clamped {
            self.clamp_warnings += 1;
        }
        self.state = out.state;
        self.t += 1;
        Ok((self.state, out.reward, self.t >= self.config.episode_length))
    }
}

/// Mean undiscounted return of the uniform-random policy over `episodes`
/// episodes, with actions drawn from a stream keyed by `seed`.
pub fn random_policy_return(env: &EnvConfig, episodes: u64, seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut e = Env::new(env.clone())?;
    let mut total = 0.0;
    for ep in 0..episodes {
        e.reset(ep);
        let mut s = rng::stream(&[tag::EVAL, seed, ep]);
        loop {
            let a: Vec<f64> = (0..env.domain.action_dim())
                .map(|_| s.random_range(-1.0..=1.0))
                .collect();
            let (_, r, done) = e.step(&a)?;
            total += r;
            if done {
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}
