//! Flat `key=value` run configuration shared by every command.
//!
//! Settings resolve in order: preset, config file, then `--set` overrides.
//! The resolved form lists every key, so feeding it back reproduces the run.

use std::path::{Path, PathBuf};

use vgbench::agent::{AgentConfig, TrainSettings};
use vgbench::envcore::DomainId;
use vgbench::evalproto::{EvalConditions, SweepColumn};
use vgbench::visualgen::{Factor, FactorToggles};

use crate::error::{CliError, CliResult};

/// File name of the resolved configuration written next to every output.
pub const RESOLVED_FILE: &str = "config.resolved";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainId,
    pub preset: String,
    pub agent: AgentConfig,
    pub global_seed: u64,
    /// Defaults to the global seed.
    pub dynamics_seed: Option<u64>,
    pub visual_seed: u64,
    pub toggles: FactorToggles,
    pub frame_skip: Option<u32>,
    /// Defaults to the domain's standard run length.
    pub training_steps: Option<u64>,
    pub eval_interval: u64,
    pub eval_episodes: u64,
    /// Intermediate checkpoints every this many steps; 0 keeps only the final one.
    pub checkpoint_interval: u64,
    pub log_interval: u64,
    pub log_wall_time: bool,
    pub method: String,
    pub n_train_dynamics_seeds: u64,
    pub n_test_visual_seeds: u64,
    pub n_test_dynamics_per_visual: u64,
    pub columns: Option<Vec<SweepColumn>>,
    pub gallery_seeds: Vec<u64>,
    pub analysis_factor: Factor,
    pub analysis_renderings: usize,
    pub attention_layer: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainId::Cartpole,
            preset: "full".into(),
            agent: AgentConfig::default(),
            global_seed: 1,
            dynamics_seed: None,
            visual_seed: 0,
            toggles: FactorToggles::all(),
            frame_skip: None,
            training_steps: None,
            eval_interval: 10_000,
            eval_episodes: 10,
            checkpoint_interval: 0,
            log_interval: 1_000,
            log_wall_time: true,
            method: "sac_aug".into(),
            n_train_dynamics_seeds: 100,
            n_test_visual_seeds: 100,
            n_test_dynamics_per_visual: 3,
            columns: None,
            gallery_seeds: (0..10).collect(),
            analysis_factor: Factor::Floor,
            analysis_renderings: 100,
            attention_layer: 0,
            output_dir: PathBuf::from("runs"),
        }
    }
}

/// Standard training length of a domain in agent steps.
pub fn default_training_steps(domain: DomainId) -> u64 {
    match domain {
        DomainId::Cartpole => 50_000,
        DomainId::Reacher => 100_000,
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.trim().parse().map_err(|_| CliError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_auto<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<Option<T>> {
    if value.trim() == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_seed_list(value: &str) -> CliResult<Vec<u64>> {
    let v = value.trim();
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (parse("seeds", a)?, parse("seeds", b.trim_start_matches('='))?);
        if b < a {
            return Err(CliError::Config(format!("empty seed range '{value}'")));
        }
        return Ok((a..=b).collect());
    }
    let seeds = v.split(',').map(|s| parse("seeds", s)).collect::<CliResult<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

fn seed_list_text(seeds: &[u64]) -> String {
    let contiguous = seeds.windows(2).all(|w| w[1] == w[0] + 1);
    match (seeds.first(), seeds.last()) {
        (Some(a), Some(b)) if contiguous && seeds.len() > 1 => format!("{a}..{b}"),
        _ => seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    }
}

fn auto_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".into(), T::to_string)
}

impl RunConfig {
    /// Resolves `key=value` pairs on top of the defaults. A `preset` key is
    /// applied first wherever it appears.
    pub fn from_pairs(pairs: &[(String, String)]) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        if let Some((_, p)) = pairs.iter().rev().find(|(k, _)| k == "preset") {
            cfg.agent = AgentConfig::preset(p.trim())?;
            cfg.preset = p.trim().to_string();
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "domain" => self.domain = value.trim().parse()?,
            "task" => {
                let domain = value.trim().split('-').next().unwrap_or_default();
                self.domain = domain.parse()?;
            }
            "global_seed" => self.global_seed = parse(key, value)?,
            "dynamics_seed" => self.dynamics_seed = parse_auto(key, value)?,
            "visual_seed" => self.visual_seed = parse(key, value)?,
            "toggles" => self.toggles = value.parse()?,
            "frame_skip" => self.frame_skip = parse_auto(key, value)?,
            "training_steps" => self.training_steps = parse_auto(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "log_interval" => self.log_interval = parse(key, value)?,
            "log_wall_time" => self.log_wall_time = parse(key, value)?,
            "method" => self.method = value.trim().to_string(),
            "n_train_dynamics_seeds" => self.n_train_dynamics_seeds = parse(key, value)?,
            "n_test_visual_seeds" => self.n_test_visual_seeds = parse(key, value)?,
            "n_test_dynamics_per_visual" => self.n_test_dynamics_per_visual = parse(key, value)?,
            "columns" => {
                self.columns = match value.trim() {
                    "auto" => None,
                    list => Some(list.split(',').map(str::parse).collect::<Result<_, _>>()?),
                }
            }
            "gallery_seeds" => self.gallery_seeds = parse_seed_list(value)?,
            "analysis_factor" => self.analysis_factor = value.trim().parse()?,
            "analysis_renderings" => self.analysis_renderings = parse(key, value)?,
            "attention_layer" => self.attention_layer = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "preset" => {
                return Err(CliError::Config("preset must be resolved through RunConfig::from_pairs".into()));
            }
            other => self.agent.set(other, value)?,
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.agent.validate()?;
        self.env_settings().env_config().validate()?;
        if self.method.is_empty() || self.method.contains(',') {
            return Err(CliError::Config("method label must be non-empty and free of commas".into()));
        }
        Ok(())
    }

    pub fn training_steps(&self) -> u64 {
        self.training_steps.unwrap_or_else(|| default_training_steps(self.domain))
    }

    /// Training schedule and environment of this run.
    pub fn env_settings(&self) -> TrainSettings {
        let mut s = TrainSettings::new(self.domain, self.global_seed, self.training_steps());
        s.dynamics_seed = self.dynamics_seed.unwrap_or(self.global_seed);
        s.visual_seed = self.visual_seed;
        s.toggles = self.toggles;
        s.frame_skip = self.frame_skip;
        s.eval_interval = self.eval_interval;
        s.eval_episodes = self.eval_episodes;
        s.log_interval = self.log_interval;
        s.log_wall_time = self.log_wall_time;
        s
    }

    pub fn eval_conditions(&self, render_size: usize) -> EvalConditions {
        EvalConditions {
            n_train_dynamics_seeds: self.n_train_dynamics_seeds,
            n_test_visual_seeds: self.n_test_visual_seeds,
            n_test_dynamics_per_visual: self.n_test_dynamics_per_visual,
            columns: self.columns.clone(),
            frame_skip: self.frame_skip,
            render_size,
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = vec![
            ("domain".into(), self.domain.to_string()),
            ("preset".into(), self.preset.clone()),
            ("global_seed".into(), self.global_seed.to_string()),
            ("dynamics_seed".into(), auto_text(&self.dynamics_seed)),
            ("visual_seed".into(), self.visual_seed.to_string()),
            ("toggles".into(), self.toggles.to_string()),
            ("frame_skip".into(), auto_text(&self.frame_skip)),
            ("training_steps".into(), auto_text(&self.training_steps)),
            ("eval_interval".into(), self.eval_interval.to_string()),
            ("eval_episodes".into(), self.eval_episodes.to_string()),
            ("checkpoint_interval".into(), self.checkpoint_interval.to_string()),
            ("log_interval".into(), self.log_interval.to_string()),
            ("log_wall_time".into(), self.log_wall_time.to_string()),
            ("method".into(), self.method.clone()),
            ("n_train_dynamics_seeds".into(), self.n_train_dynamics_seeds.to_string()),
            ("n_test_visual_seeds".into(), self.n_test_visual_seeds.to_string()),
            ("n_test_dynamics_per_visual".into(), self.n_test_dynamics_per_visual.to_string()),
            (
                "columns".into(),
                self.columns.as_ref().map_or("auto".into(), |c| {
                    c.iter().map(|c| c.label()).collect::<Vec<_>>().join(",")
                }),
            ),
            ("gallery_seeds".into(), seed_list_text(&self.gallery_seeds)),
            ("analysis_factor".into(), self.analysis_factor.name().into()),
            ("analysis_renderings".into(), self.analysis_renderings.to_string()),
            ("attention_layer".into(), self.attention_layer.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
        ];
        v.extend(self.agent.to_pairs().into_iter().map(|(k, val)| (k.to_string(), val)));
        v
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write_resolved(&self, dir: &Path) -> CliResult<()> {
        std::fs::write(dir.join(RESOLVED_FILE), self.to_text())?;
        Ok(())
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(String, String)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_assignment)
        .collect()
}

pub fn parse_assignment(s: &str) -> CliResult<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, got '{s}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[&str]) -> Vec<(String, String)> {
        items.iter().map(|s| parse_assignment(s).unwrap()).collect()
    }

    #[test]
    fn resolved_text_round_trips() {
        let cfg = RunConfig::from_pairs(&pairs(&[
            "beta=0.5",
            "preset=desk",
            "pipeline=cj,drq",
            "gallery_seeds=3,5,9",
            "columns=None,Floor,All",
            "task=reacher-easy",
        ]))
        .unwrap();
        assert_eq!(cfg.agent.batch_size, AgentConfig::desk().batch_size);
        assert_eq!(cfg.agent.beta, 0.5);
        assert_eq!(cfg.domain, DomainId::Reacher);
        let again = RunConfig::from_pairs(&parse_pairs(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
    }

    #[test]
    fn defaults_follow_the_domain() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.training_steps(), 50_000);
        assert_eq!(cfg.env_settings().env_config().frame_skip, 8);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for bad in ["pipeline=warp", "beta=2", "no_such_key=1", "domain=walker", "gallery_seeds=5..2"] {
            let err = RunConfig::from_pairs(&pairs(&[bad])).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }
}
