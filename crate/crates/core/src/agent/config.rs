use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugPipeline;
use crate::error::{Error, Result};
use crate::nn::EncoderConfig;
use crate::visualgen::{FRAME_STACK, IMAGE_SIZE};

/// Hyperparameters of pixel SAC with augmentation.
///
/// [`AgentConfig::default`] holds the full-size settings. [`AgentConfig::desk`]
/// keeps every algorithmic constant but shrinks the networks and batch so a
/// 5,000-step run fits in minutes on one CPU core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: u64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub encoder_lr: f64,
    pub alpha_lr: f64,
    pub init_alpha: f64,
    /// `None` means `−action_dim`.
    pub target_entropy: Option<f64>,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub encoder_tau: f64,
    pub critic_tau: f64,
    pub update_delay: u64,
    pub updates_per_step: u64,
    pub beta: f64,
    pub lambda: f64,
    pub pipeline: AugPipeline,
    pub filters: usize,
    pub conv_strides: Vec<usize>,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            batch_size: 256,
            buffer_capacity: 100_000,
            warmup_steps: 1_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            encoder_lr: 1e-3,
            alpha_lr: 1e-4,
            init_alpha: 0.1,
            target_entropy: None,
            log_std_min: -10.0,
            log_std_max: 2.0,
            encoder_tau: 0.05,
            critic_tau: 0.01,
            update_delay: 2,
            updates_per_step: 1,
            beta: 0.9,
            lambda: 1e-5,
            pipeline: AugPipeline::new(vec![crate::augment::AugKind::Drq]),
            filters: 32,
            conv_strides: vec![2, 1, 1, 1],
            hidden_dim: 1024,
            latent_dim: 50,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(format!("invalid value '{value}' for {key}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

impl AgentConfig {
    /// Reduced network and batch sizes for single-core runs. Short runs also
    /// get a shorter warmup and faster critic targets.
    pub fn desk() -> Self {
        AgentConfig {
            batch_size: 32,
            warmup_steps: 250,
            critic_tau: 0.05,
            filters: 16,
            conv_strides: vec![2, 2, 1, 1],
            hidden_dim: 256,
            ..AgentConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" | "default" => Ok(AgentConfig::default()),
            "desk" => Ok(AgentConfig::desk()),
            other => Err(Error::config(format!("unknown agent preset '{other}' (expected full or desk)"))),
        }
    }

    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            in_channels: 3 * FRAME_STACK,
            image_size: IMAGE_SIZE,
            filters: self.filters,
            strides: self.conv_strides.clone(),
            kernel: 3,
            latent_dim: self.latent_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if !(0.0..=1.0).contains(&self.beta) {
            return fail(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.update_delay == 0 {
            return fail("batch_size, buffer_capacity and update_delay must be positive".into());
        }
        if !(self.log_std_min < self.log_std_max) {
            return fail("log_std_min must be below log_std_max".into());
        }
        if !(self.init_alpha > 0.0) {
            return fail("init_alpha must be positive".into());
        }
        for (k, tau) in [("encoder_tau", self.encoder_tau), ("critic_tau", self.critic_tau)] {
            if !(0.0..=1.0).contains(&tau) {
                return fail(format!("{k} must lie in [0, 1]"));
            }
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive".into());
        }
        self.encoder_config().validate()
    }

    /// Flat `key=value` view; every key is accepted back by [`AgentConfig::set`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let strides: Vec<String> = self.conv_strides.iter().map(|s| s.to_string()).collect();
        vec![
            ("gamma", self.gamma.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("warmup_steps", self.warmup_steps.to_string()),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("encoder_lr", self.encoder_lr.to_string()),
            ("alpha_lr", self.alpha_lr.to_string()),
            ("init_alpha", self.init_alpha.to_string()),
            ("target_entropy", self.target_entropy.map_or("auto".into(), |v| v.to_string())),
            ("log_std_min", self.log_std_min.to_string()),
            ("log_std_max", self.log_std_max.to_string()),
            ("encoder_tau", self.encoder_tau.to_string()),
            ("critic_tau", self.critic_tau.to_string()),
            ("update_delay", self.update_delay.to_string()),
            ("updates_per_step", self.updates_per_step.to_string()),
            ("beta", self.beta.to_string()),
            ("lambda", self.lambda.to_string()),
            ("pipeline", self.pipeline.to_string()),
            ("filters", self.filters.to_string()),
            ("conv_strides", strides.join(",")),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
        ]
    }

    pub const KEYS: [&'static str; 23] = [
        "gamma",
        "batch_size",
        "buffer_capacity",
        "warmup_steps",
        "actor_lr",
        "critic_lr",
        "encoder_lr",
        "alpha_lr",
        "init_alpha",
        "target_entropy",
        "log_std_min",
        "log_std_max",
        "encoder_tau",
        "critic_tau",
        "update_delay",
        "updates_per_step",
        "beta",
        "lambda",
        "pipeline",
        "filters",
        "conv_strides",
        "hidden_dim",
        "latent_dim",
    ];

    /// Sets one field from its text form. Unknown keys are config errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "gamma" => self.gamma = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = parse(key, value)?,
            "actor_lr" => self.actor_lr = parse(key, value)?,
            "critic_lr" => self.critic_lr = parse(key, value)?,
            "encoder_lr" => self.encoder_lr = parse(key, value)?,
            "alpha_lr" => self.alpha_lr = parse(key, value)?,
            "init_alpha" => self.init_alpha = parse(key, value)?,
            "target_entropy" => {
                self.target_entropy = if value.trim() == "auto" { None } else { Some(parse(key, value)?) }
            }
            "log_std_min" => self.log_std_min = parse(key, value)?,
            "log_std_max" => self.log_std_max = parse(key, value)?,
            "encoder_tau" => self.encoder_tau = parse(key, value)?,
            "critic_tau" => self.critic_tau = parse(key, value)?,
            "update_delay" => self.update_delay = parse(key, value)?,
            "updates_per_step" => self.updates_per_step = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "pipeline" => self.pipeline = value.parse()?,
            "filters" => self.filters = parse(key, value)?,
            "conv_strides" => self.conv_strides = parse_list(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            other => return Err(Error::config(format!("unknown agent setting '{other}'"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = AgentConfig::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value, got '{line}'")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
