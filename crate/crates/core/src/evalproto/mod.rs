//! Zero-shot generalization measurements: returns under visual-seed
//! distributions, generalization error, factor-isolation sweeps, encoder
//! output variance and attention maps.

mod analysis;
mod report;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use analysis::{attention_map, encoder_variance_analysis, AttentionMap, LatentEncoder, ATTENTION_ALPHA};
pub use report::{ColumnSummary, EpisodeRecord, EvalReport, TRAIN_COLUMN};

use crate::envcore::{DomainId, EnvConfig};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::visualgen::{Factor, FactorToggles, PixelEnv, PixelObservation, SpecSource, IMAGE_SIZE};

/// Anything that maps observations to actions.
pub trait Policy {
    /// Called before each episode with a per-episode key.
    fn begin_episode(&mut self, _key: u64) {}
    fn act(&mut self, obs: &PixelObservation) -> Result<Vec<f64>>;
}

/// Uniform random actions, reseeded at every episode.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    action_dim: usize,
    seed: u64,
    stream: rng::Stream,
}

impl RandomPolicy {
    pub fn new(action_dim: usize, seed: u64) -> Self {
        RandomPolicy { action_dim, seed, stream: rng::stream(&[tag::EVAL, seed]) }
    }
}

impl Policy for RandomPolicy {
    fn begin_episode(&mut self, key: u64) {
        self.stream = rng::stream(&[tag::EVAL, self.seed, key]);
    }

    fn act(&mut self, _obs: &PixelObservation) -> Result<Vec<f64>> {
        Ok((0..self.action_dim).map(|_| self.stream.random_range(-1.0..=1.0)).collect())
    }
}

/// Appearance and dynamics of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub visual_seed: u64,
    pub dynamics_seed: u64,
    pub toggles: FactorToggles,
}

impl EpisodeSpec {
    fn key(&self) -> u64 {
        let bits = Factor::ALL
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, f)| acc | (u64::from(self.toggles.get(*f)) << i));
        rng::mix_key(&[self.visual_seed, self.dynamics_seed, bits])
    }
}

pub trait EnvFactory {
    fn make(&self, episode: &EpisodeSpec) -> Result<PixelEnv>;
}

/// Builds pixel environments for one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardEnvFactory {
    pub domain: DomainId,
    pub frame_skip: Option<u32>,
    pub render_size: usize,
}

impl StandardEnvFactory {
    pub fn new(domain: DomainId) -> Self {
        StandardEnvFactory { domain, frame_skip: None, render_size: IMAGE_SIZE }
    }

    pub fn with_frame_skip(mut self, frame_skip: Option<u32>) -> Self {
        self.frame_skip = frame_skip;
        self
    }

    pub fn with_render_size(mut self, size: usize) -> Self {
        self.render_size = size;
        self
    }
}

impl EnvFactory for StandardEnvFactory {
    fn make(&self, ep: &EpisodeSpec) -> Result<PixelEnv> {
        let mut cfg = EnvConfig::new(self.domain, ep.dynamics_seed);
        if let Some(fs) = self.frame_skip {
            cfg = cfg.with_frame_skip(fs);
        }
        Ok(PixelEnv::new(cfg, SpecSource::fixed(ep.visual_seed, ep.toggles))?.with_render_size(self.render_size))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub returns: Vec<f64>,
    pub mean: f64,
}

/// Runs one full episode per spec and returns undiscounted returns.
pub fn evaluate_policy(policy: &mut dyn Policy, factory: &dyn EnvFactory, episodes: &[EpisodeSpec]) -> Result<EvalOutcome> {
    if episodes.is_empty() {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let mut returns = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let mut env = factory.make(ep)?;
        policy.begin_episode(ep.key());
        let mut obs = env.reset(0);
        let mut total = 0.0;
        loop {
            let a = policy.act(&obs)?;
            let (next, r, done) = env.step(&a)?;
            total += r;
            obs = next;
            if done {
                break;
            }
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(EvalOutcome { returns, mean })
}

/// `(train − mean(test)) / train`; `None` when undefined.
pub fn generalization_error(train_return: f64, test_returns: &[f64]) -> Option<f64> {
    if train_return == 0.0 || test_returns.is_empty() {
        return None;
    }
    let mean = test_returns.iter().sum::<f64>() / test_returns.len() as f64;
    Some((train_return - mean) / train_return)
}

/// Dynamics seed of training-environment episode `i`.
pub fn train_dynamics_seed(i: u64) -> u64 {
    10_000 + i
}

/// Dynamics seed `j` paired with the `v`-th test visual seed.
pub fn test_dynamics_seed(v: u64, j: u64, per_visual: u64) -> u64 {
    20_000 + v * per_visual + j
}

/// One column of a factor sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepColumn {
    None,
    Only(Factor),
    All,
}

impl SweepColumn {
    pub fn label(&self) -> String {
        match self {
            SweepColumn::None => "None".into(),
            SweepColumn::Only(f) => f.label().into(),
            SweepColumn::All => "All".into(),
        }
    }

    pub fn toggles(&self) -> FactorToggles {
        match self {
            SweepColumn::None => FactorToggles::none(),
            SweepColumn::Only(f) => FactorToggles::only(*f),
            SweepColumn::All => FactorToggles::all(),
        }
    }

    /// `None`, every factor applicable to `domain` in sweep order, then `All`.
    pub fn standard(domain: DomainId) -> Vec<SweepColumn> {
        let mut v = vec![SweepColumn::None];
        v.extend(Factor::SWEEP_ORDER.into_iter().filter(|f| f.applies_to(domain)).map(SweepColumn::Only));
        v.push(SweepColumn::All);
        v
    }
}

impl std::str::FromStr for SweepColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "None" | "none" => Ok(SweepColumn::None),
            "All" | "all" => Ok(SweepColumn::All),
            other => Factor::ALL
                .into_iter()
                .find(|f| f.label().eq_ignore_ascii_case(other) || f.name() == other)
                .map(SweepColumn::Only)
                .ok_or_else(|| Error::config(format!("unknown sweep column '{other}'"))),
        }
    }
}

/// Grid sizes of an evaluation. Visual seeds are `1..=n_test_visual_seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConditions {
    pub n_train_dynamics_seeds: u64,
    pub n_test_visual_seeds: u64,
    pub n_test_dynamics_per_visual: u64,
    /// Restricts the sweep to these columns; `None` means all applicable.
    pub columns: Option<Vec<SweepColumn>>,
    pub frame_skip: Option<u32>,
    pub render_size: usize,
}

impl Default for EvalConditions {
    fn default() -> Self {
        EvalConditions {
            n_train_dynamics_seeds: 100,
            n_test_visual_seeds: 100,
            n_test_dynamics_per_visual: 3,
            columns: None,
            frame_skip: None,
            render_size: IMAGE_SIZE,
        }
    }
}

impl EvalConditions {
    pub fn validate(&self) -> Result<()> {
        if self.n_train_dynamics_seeds == 0 || self.n_test_visual_seeds == 0 || self.n_test_dynamics_per_visual == 0 {
            return Err(Error::config("evaluation grid sizes must be positive"));
        }
        Ok(())
    }

    pub fn train_episodes(&self) -> Vec<EpisodeSpec> {
        (0..self.n_train_dynamics_seeds)
            .map(|i| EpisodeSpec { visual_seed: 0, dynamics_seed: train_dynamics_seed(i), toggles: FactorToggles::all() })
            .collect()
    }

    /// The visual × dynamics grid of one column; `None` keeps visual seed 0.
    pub fn column_episodes(&self, column: SweepColumn) -> Vec<EpisodeSpec> {
        let n = self.n_test_dynamics_per_visual;
        let mut out = Vec::new();
        for v in 0..self.n_test_visual_seeds {
            for j in 0..n {
                out.push(EpisodeSpec {
                    visual_seed: if column == SweepColumn::None { 0 } else { v + 1 },
                    dynamics_seed: test_dynamics_seed(v, j, n),
                    toggles: column.toggles(),
                });
            }
        }
        out
    }
}

/// Evaluates on the training environment and on every sweep column.
/// Columns for factors that do not apply to `domain` are skipped with a note.
pub fn factor_sweep(policy: &mut dyn Policy, domain: DomainId, method: &str, conditions: &EvalConditions) -> Result<EvalReport> {
    conditions.validate()?;
    let factory = StandardEnvFactory::new(domain)
        .with_frame_skip(conditions.frame_skip)
        .with_render_size(conditions.render_size);
    let mut report = EvalReport::new(method, domain);
    let train_eps = conditions.train_episodes();
    let train = evaluate_policy(policy, &factory, &train_eps)?;
    report.push_column(TRAIN_COLUMN, &train_eps, &train.returns);
    let columns = conditions.columns.clone().unwrap_or_else(|| SweepColumn::standard(domain));
    for col in columns {
        if let SweepColumn::Only(f) = col {
            if !f.applies_to(domain) {
                report.notes.push(format!("{} omitted: not applicable to {domain}", f.label()));
                continue;
            }
        }
        let eps = conditions.column_episodes(col);
        let out = evaluate_policy(policy, &factory, &eps)?;
        report.push_column(&col.label(), &eps, &out.returns);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_pairs() {
        let e = generalization_error(919.3, &[28.0]).unwrap();
        assert!((e * 100.0 - 97.0).abs() < 0.05);
        assert_eq!(generalization_error(5.0, &[5.0, 5.0]), Some(0.0));
        assert_eq!(generalization_error(0.0, &[1.0]), None);
    }

    #[test]
    fn column_count_is_applicable_factors_plus_two() {
        assert_eq!(SweepColumn::standard(DomainId::Cartpole).len(), 6 + 2);
        assert_eq!(SweepColumn::standard(DomainId::Reacher).len(), 7 + 2);
        for c in SweepColumn::standard(DomainId::Reacher) {
            assert_eq!(c.label().parse::<SweepColumn>().unwrap(), c);
        }
    }

    #[test]
    fn none_column_uses_canonical_appearance() {
        let c = EvalConditions { n_test_visual_seeds: 3, n_test_dynamics_per_visual: 2, ..Default::default() };
        let eps = c.column_episodes(SweepColumn::None);
        assert_eq!(eps.len(), 6);
        assert!(eps.iter().all(|e| e.visual_seed == 0));
        let floor = c.column_episodes(SweepColumn::Only(Factor::Floor));
        assert_eq!(floor.iter().map(|e| e.visual_seed).collect::<Vec<_>>(), vec![1, 1, 2, 2, 3, 3]);
        assert_eq!(
            floor.iter().map(|e| e.dynamics_seed).collect::<Vec<_>>(),
            eps.iter().map(|e| e.dynamics_seed).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_grid_rejected() {
        let c = EvalConditions { n_test_visual_seeds: 0, ..Default::default() };
        assert!(c.validate().unwrap_err().is_config());
    }
}
