use std::collections::HashMap;

use rand::Rng;

use super::{sample_visual_spec, FactorToggles, PixelObservation, Scene, IMAGE_SIZE};
use crate::envcore::{Env, EnvConfig, PhysState};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Where a pixel environment gets its appearance from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecSource {
    /// One visual seed for every episode.
    Fixed { seed: u64, toggles: FactorToggles },
    /// A visual seed drawn from `seeds` at every reset, keyed by
    /// `(stream_seed, episode_index)`.
    FewShot { seeds: Vec<u64>, toggles: FactorToggles, stream_seed: u64 },
}

impl SpecSource {
    pub fn fixed(seed: u64, toggles: FactorToggles) -> Self {
        SpecSource::Fixed { seed, toggles }
    }

    pub fn toggles(&self) -> FactorToggles {
        match self {
            SpecSource::Fixed { toggles, .. } | SpecSource::FewShot { toggles, .. } => *toggles,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SpecSource::FewShot { seeds, .. } if seeds.is_empty() => {
                Err(Error::config("few-shot visual seed set is empty"))
            }
            _ => Ok(()),
        }
    }

    /// Visual seed used for the episode started by reset number `episode_index`.
    pub fn seed_for_episode(&self, episode_index: u64) -> u64 {
        match self {
            SpecSource::Fixed { seed, .. } => *seed,
            SpecSource::FewShot { seeds, stream_seed, .. } => {
                let mut s = rng::stream(&[tag::FEW_SHOT, *stream_seed, episode_index]);
                seeds[s.random_range(0..seeds.len())]
            }
        }
    }
}

/// Pixel POMDP: envcore dynamics observed through the renderer.
#[derive(Debug)]
pub struct PixelEnv {
    env: Env,
    source: SpecSource,
    render_size: usize,
    scenes: HashMap<u64, Scene>,
    visual_seed: u64,
    obs: Option<PixelObservation>,
}

impl PixelEnv {
    pub fn new(config: EnvConfig, source: SpecSource) -> Result<Self> {
        source.validate()?;
        let visual_seed = source.seed_for_episode(0);
        Ok(PixelEnv {
            env: Env::new(config)?,
            source,
            render_size: IMAGE_SIZE,
            scenes: HashMap::new(),
            visual_seed,
            obs: None,
        })
    }

    /// Renders at `size`×`size` instead of 84×84 (100 for `rad_crop`).
    pub fn with_render_size(mut self, size: usize) -> Self {
        self.render_size = size;
        self.scenes.clear();
        self
    }

    pub fn render_size(&self) -> usize {
        self.render_size
    }

    pub fn config(&self) -> &EnvConfig {
        self.env.config()
    }

    pub fn state(&self) -> &PhysState {
        self.env.state()
    }

    pub fn visual_seed(&self) -> u64 {
        self.visual_seed
    }

    pub fn clamp_warnings(&self) -> u64 {
        self.env.clamp_warnings()
    }

    fn frame(&mut self) -> super::Frame {
        let domain = self.env.config().domain;
        let (seed, toggles, size) = (self.visual_seed, self.source.toggles(), self.render_size);
        let scene = self
            .scenes
            .entry(seed)
            .or_insert_with(|| Scene::new(&sample_visual_spec(seed, toggles, domain), size));
        scene.render(self.env.state())
    }

    pub fn reset(&mut self, episode_index: u64) -> PixelObservation {
        self.visual_seed = self.source.seed_for_episode(episode_index);
        self.env.reset(episode_index);
        let obs = PixelObservation::from_first(self.frame());
        self.obs = Some(obs.clone());
        obs
    }

    /// Advances one agent step. Fails if called before the first reset.
    pub fn step(&mut self, action: &[f64]) -> Result<(PixelObservation, f64, bool)> {
        let prev = self
            .obs
            .take()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        let (_, reward, done) = self.env.step(action)?;
        let obs = prev.pushed(self.frame());
        self.obs = Some(obs.clone());
        Ok((obs, reward, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envcore::DomainId;

    #[test]
    fn fixed_zero_shape_and_initial_stack() {
        let mut env = PixelEnv::new(
            EnvConfig::new(DomainId::Cartpole, 1),
            SpecSource::fixed(0, FactorToggles::all()),
        )
        .unwrap();
        let obs = env.reset(0);
        assert_eq!((obs.width(), obs.height(), obs.channels()), (84, 84, 9));
        assert!(obs.frames().iter().all(|f| f == &obs.frames()[0]));
        let (next, r, done) = env.step(&[0.5]).unwrap();
        assert!(!done && (0.0..=8.0).contains(&r));
        assert_eq!(next.frames()[1], obs.frames()[2]);
    }

    #[test]
    fn few_shot_sequence_is_reproducible() {
        let src = SpecSource::FewShot { seeds: vec![3, 5], toggles: FactorToggles::all(), stream_seed: 11 };
        let run = || {
            let mut env = PixelEnv::new(EnvConfig::new(DomainId::Reacher, 2), src.clone()).unwrap();
            (0..4)
                .map(|i| {
                    env.reset(i);
                    env.visual_seed()
                })
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|s| *s == 3 || *s == 5));
    }

    #[test]
    fn empty_seed_set_is_config_error() {
        let src = SpecSource::FewShot { seeds: vec![], toggles: FactorToggles::all(), stream_seed: 0 };
        let err = PixelEnv::new(EnvConfig::new(DomainId::Cartpole, 0), src).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn step_before_reset_fails() {
        let mut env = PixelEnv::new(
            EnvConfig::new(DomainId::Cartpole, 0),
            SpecSource::fixed(0, FactorToggles::all()),
        )
        .unwrap();
        assert!(env.step(&[0.0]).is_err());
    }
}
