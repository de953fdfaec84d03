use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sac::{self, RegTarget, SacNets};
use super::{AgentConfig, ReplayBuffer, Transition};
use crate::augment::{augment_pair, mix_mask, AugSeed};
use crate::envcore::{DomainId, EnvConfig};
use crate::error::{Error, Result};
use crate::evalproto::{evaluate_policy, EpisodeSpec, Policy, StandardEnvFactory};
use crate::nn::{Adam, Params, ScalarParam};
use crate::rng::{self, tag, Stream};
use crate::visualgen::{FactorToggles, PixelEnv, PixelObservation, SpecSource, HIGHRES_SIZE, IMAGE_SIZE};

/// Purposes of the per-step training streams.
mod purpose {
    pub const RANDOM_ACTION: u64 = 0;
    pub const POLICY_NOISE: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const TARGET_NOISE: u64 = 3;
    pub const ACTOR_NOISE: u64 = 4;
}

fn normals(s: &mut Stream, len: usize) -> Vec<f32> {
    (0..len).map(|_| s.sample::<f64, _>(StandardNormal) as f32).collect()
}

fn to_network_size(o: &PixelObservation) -> PixelObservation {
    if o.width() == IMAGE_SIZE && o.height() == IMAGE_SIZE {
        o.clone()
    } else {
        o.center_crop(IMAGE_SIZE)
    }
}

fn planar(obs: &[&PixelObservation]) -> Vec<f32> {
    let per = obs.first().map_or(0, |o| o.width() * o.height() * o.channels());
    let mut out = vec![0.0f32; per * obs.len()];
    for (chunk, o) in out.chunks_exact_mut(per.max(1)).zip(obs) {
        o.write_planar(chunk);
    }
    out
}

/// Scalars produced by one gradient update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub reg_loss: f64,
    pub q_mean: f64,
    pub actor_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub alpha: f64,
}

/// Networks, optimizers and update counters.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub nets: SacNets<f32>,
    pub opt_encoder: Adam<f32>,
    pub opt_actor: Adam<f32>,
    pub opt_critic: Adam<f32>,
    pub opt_alpha: Adam<f32>,
    pub grad_steps: u64,
    pub actor_updates: u64,
    pub env_steps: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, action_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(&[tag::INIT, seed]);
        let hidden = [config.hidden_dim, config.hidden_dim];
        let nets = SacNets::new(
            config.encoder_config(),
            &hidden,
            action_dim,
            (config.log_std_min, config.log_std_max),
            config.init_alpha,
            &mut r,
        )?;
        Ok(Agent {
            opt_encoder: Adam::new(&nets.encoder, config.encoder_lr),
            opt_actor: Adam::new(&nets.actor, config.actor_lr),
            opt_critic: Adam::new(&nets.critics, config.critic_lr),
            opt_alpha: Adam::new(&ScalarParam(nets.log_alpha), config.alpha_lr),
            config,
            nets,
            grad_steps: 0,
            actor_updates: 0,
            env_steps: 0,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.nets.action_dim
    }

    /// Side length observations should be rendered at for this agent.
    pub fn render_size(&self) -> usize {
        if self.config.pipeline.needs_highres() {
            HIGHRES_SIZE
        } else {
            IMAGE_SIZE
        }
    }

    /// Latent codes of observations, center-cropped to network size first.
    pub fn encode(&self, obs: &[PixelObservation]) -> Result<Vec<f32>> {
        let cropped: Vec<PixelObservation> = obs.iter().map(to_network_size).collect();
        let refs: Vec<&PixelObservation> = cropped.iter().collect();
        self.nets.encoder.encode(&planar(&refs), obs.len())
    }

    /// Deterministic `tanh(mean)` action, or a sample when `eps` is given.
    pub fn act(&self, obs: &PixelObservation, eps: Option<&[f32]>) -> Result<Vec<f64>> {
        let z = self.encode(std::slice::from_ref(obs))?;
        let out = self.nets.actor.forward(&z, 1).out;
        let a = match eps {
            None => sac::deterministic_action(&out, 1, self.action_dim()),
            Some(e) => sac::policy_sample(&out, e, 1, self.action_dim(), self.nets.log_std_range).action,
        };
        Ok(a.into_iter().map(|v| v as f64).collect())
    }

    /// One critic/encoder update, plus actor, temperature and target updates
    /// every `update_delay` gradient steps.
    pub fn update(&mut self, batch: &[Transition], step: u64, global_seed: u64, round: u64) -> Result<UpdateStats> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::Contract("empty training batch".into()));
        }
        let cfg = &self.config;
        let pipeline = &cfg.pipeline;
        let mask = if pipeline.is_empty() {
            vec![false; n]
        } else {
            mix_mask(n, cfg.beta, AugSeed::new(global_seed, step, round, 0))?
        };
        let mut obs_mix = Vec::with_capacity(n);
        let mut next_mix = Vec::with_capacity(n);
        let mut clean_aug_rows = Vec::new();
        for (b, t) in batch.iter().enumerate() {
            let (co, cn) = (to_network_size(&t.obs), to_network_size(&t.next_obs));
            if mask[b] {
                let seed = AugSeed::new(global_seed, step, (round << 32) | b as u64, 0);
                let (ao, an) = augment_pair(&t.obs, &t.next_obs, pipeline, seed)?;
                obs_mix.push(to_network_size(&ao));
                next_mix.push(to_network_size(&an));
                clean_aug_rows.push(co);
            } else {
                obs_mix.push(co);
                next_mix.push(cn);
            }
        }
        let obs_t = planar(&obs_mix.iter().collect::<Vec<_>>());
        let next_t = planar(&next_mix.iter().collect::<Vec<_>>());
        let ad = self.nets.action_dim;
        let action: Vec<f32> = batch.iter().flat_map(|t| t.action.iter().map(|v| *v as f32)).collect();
        let reward: Vec<f32> = batch.iter().map(|t| t.reward as f32).collect();
        if action.len() != n * ad {
            return Err(Error::Shape("transition action width does not match the agent".into()));
        }

        let l = self.nets.latent_dim();
        let mut clean_latent = vec![0.0f32; n * l];
        if !clean_aug_rows.is_empty() && cfg.lambda > 0.0 {
            let z = self.nets.encoder.encode(&planar(&clean_aug_rows.iter().collect::<Vec<_>>()), clean_aug_rows.len())?;
            for (k, b) in (0..n).filter(|b| mask[*b]).enumerate() {
                clean_latent[b * l..(b + 1) * l].copy_from_slice(&z[k * l..(k + 1) * l]);
            }
        }

        let mut s_target = rng::stream(&[tag::TRAIN, global_seed, step, purpose::TARGET_NOISE, round]);
        let eps_t = normals(&mut s_target, n * ad);
        let y = sac::critic_target(&self.nets, &next_t, &reward, &eps_t, cfg.gamma, n)?;
        let reg = (cfg.lambda > 0.0).then_some(RegTarget { clean_latent: &clean_latent, mask: &mask, lambda: cfg.lambda });
        let (g, _) = sac::critic_loss(&self.nets, &obs_t, &action, &y, reg, n)?;
        self.opt_critic.step(&mut self.nets.critics, &g.critics);
        self.opt_encoder.step(&mut self.nets.encoder, &g.encoder);
        self.grad_steps += 1;

        let mut stats = UpdateStats {
            critic_loss: g.critic_loss,
            reg_loss: g.reg_loss,
            q_mean: g.q_mean,
            alpha: self.nets.alpha() as f64,
            ..UpdateStats::default()
        };
        if self.grad_steps.is_multiple_of(self.config.update_delay) {
            let z = self.nets.encoder.encode(&obs_t, n)?;
            let mut s_actor = rng::stream(&[tag::TRAIN, global_seed, step, purpose::ACTOR_NOISE, round]);
            let eps_a = normals(&mut s_actor, n * ad);
            let ag = sac::actor_loss(&self.nets, &z, &eps_a, n);
            self.opt_actor.step(&mut self.nets.actor, &ag.actor);
            let te = self.config.target_entropy_for(ad);
            let (al, dla) = sac::alpha_loss(self.nets.log_alpha, &ag.sample.log_prob, te);
            let mut la = ScalarParam(self.nets.log_alpha);
            self.opt_alpha.step(&mut la, &ScalarParam(dla));
            self.nets.log_alpha = la.0;
            sac::polyak_targets(&mut self.nets, self.config.critic_tau, self.config.encoder_tau);
            self.actor_updates += 1;
            let mean_lp = ag.sample.log_prob.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
            stats.actor_loss = Some(ag.loss);
            stats.alpha_loss = Some(al);
            stats.entropy = Some(-mean_lp);
            stats.alpha = self.nets.alpha() as f64;
        }
        if !self.nets.encoder.all_finite() || !self.nets.actor.all_finite() {
            return Err(Error::Contract(format!("non-finite parameters after gradient step {}", self.grad_steps)));
        }
        Ok(stats)
    }
}

impl Policy for Agent {
    fn act(&mut self, obs: &PixelObservation) -> Result<Vec<f64>> {
        Agent::act(self, obs, None)
    }
}

/// Environment and schedule of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub domain: DomainId,
    pub dynamics_seed: u64,
    pub visual_seed: u64,
    pub toggles: FactorToggles,
    pub frame_skip: Option<u32>,
    pub global_seed: u64,
    pub training_steps: u64,
    /// Evaluate every this many env steps; 0 disables.
    pub eval_interval: u64,
    pub eval_episodes: u64,
    /// Emit averaged update statistics every this many env steps.
    pub log_interval: u64,
    pub log_wall_time: bool,
}

impl TrainSettings {
    pub fn new(domain: DomainId, global_seed: u64, training_steps: u64) -> Self {
        TrainSettings {
            domain,
            dynamics_seed: global_seed,
            visual_seed: 0,
            toggles: FactorToggles::all(),
            frame_skip: None,
            global_seed,
            training_steps,
            eval_interval: 0,
            eval_episodes: 5,
            log_interval: 100,
            log_wall_time: true,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        let c = EnvConfig::new(self.domain, self.dynamics_seed);
        match self.frame_skip {
            Some(fs) => c.with_frame_skip(fs),
            None => c,
        }
    }
}

/// One line of the metrics log: an event name, the env step, optional wall
/// time in seconds, and named scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub event: String,
    pub step: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

impl MetricsRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Debug, Default, Clone)]
struct Accumulator {
    count: u64,
    sums: BTreeMap<&'static str, (f64, u64)>,
}

impl Accumulator {
    fn add(&mut self, key: &'static str, v: Option<f64>) {
        if let Some(v) = v {
            let e = self.sums.entry(key).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }

    fn push(&mut self, s: &UpdateStats) {
        self.count += 1;
        self.add("critic_loss", Some(s.critic_loss));
        self.add("reg_loss", Some(s.reg_loss));
        self.add("q_mean", Some(s.q_mean));
        self.add("actor_loss", s.actor_loss);
        self.add("alpha_loss", s.alpha_loss);
        self.add("entropy", s.entropy);
        self.add("alpha", Some(s.alpha));
    }

    fn drain(&mut self) -> BTreeMap<String, f64> {
        let mut m: BTreeMap<String, f64> =
            self.sums.iter().map(|(k, (s, c))| (k.to_string(), s / *c as f64)).collect();
        m.insert("updates".into(), self.count as f64);
        *self = Accumulator::default();
        m
    }
}

/// Drives environment interaction, replay and updates step by step.
#[derive(Debug)]
pub struct Trainer {
    settings: TrainSettings,
    agent: Agent,
    buffer: ReplayBuffer,
    env: PixelEnv,
    obs: PixelObservation,
    episode_index: u64,
    episode_return: f64,
    step: u64,
    start: Instant,
    acc: Accumulator,
}

impl Trainer {
    pub fn new(settings: TrainSettings, config: AgentConfig) -> Result<Self> {
        let agent = Agent::new(config, settings.domain.action_dim(), settings.global_seed)?;
        Self::with_agent(settings, agent)
    }

    pub fn with_agent(settings: TrainSettings, agent: Agent) -> Result<Self> {
        if settings.training_steps == 0 {
            return Err(Error::config("training_steps must be positive"));
        }
        if agent.action_dim() != settings.domain.action_dim() {
            return Err(Error::config("agent action width does not match the domain"));
        }
        let source = SpecSource::fixed(settings.visual_seed, settings.toggles);
        let mut env = PixelEnv::new(settings.env_config(), source)?.with_render_size(agent.render_size());
        let obs = env.reset(0);
        Ok(Trainer {
            buffer: ReplayBuffer::new(agent.config.buffer_capacity)?,
            settings,
            agent,
            env,
            obs,
            episode_index: 0,
            episode_return: 0.0,
            step: 0,
            start: Instant::now(),
            acc: Accumulator::default(),
        })
    }

    pub fn settings(&self) -> &TrainSettings {
        &self.settings
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Env steps taken so far.
    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.settings.training_steps
    }

    fn record(&self, event: &str, values: BTreeMap<String, f64>) -> MetricsRecord {
        MetricsRecord {
            event: event.into(),
            step: self.step,
            wall_time: self.settings.log_wall_time.then(|| self.start.elapsed().as_secs_f64()),
            values,
        }
    }

    /// Deterministic evaluation on the training appearance over the first
    /// `eval_episodes` training dynamics seeds.
    pub fn evaluate(&mut self) -> Result<f64> {
        let factory = StandardEnvFactory::new(self.settings.domain)
            .with_frame_skip(self.settings.frame_skip)
            .with_render_size(self.agent.render_size());
        let eps: Vec<EpisodeSpec> = (0..self.settings.eval_episodes)
            .map(|i| EpisodeSpec {
                visual_seed: self.settings.visual_seed,
                dynamics_seed: crate::evalproto::train_dynamics_seed(i),
                toggles: self.settings.toggles,
            })
            .collect();
        Ok(evaluate_policy(&mut self.agent, &factory, &eps)?.mean)
    }

    /// Takes one env step and any due updates; returns the records emitted.
    pub fn step(&mut self) -> Result<Vec<MetricsRecord>> {
        if self.is_done() {
            return Err(Error::Contract("training already finished".into()));
        }
        let (s, seed) = (self.step, self.settings.global_seed);
        let ad = self.agent.action_dim();
        let action: Vec<f64> = if s < self.agent.config.warmup_steps {
            let mut r = rng::stream(&[tag::TRAIN, seed, s, purpose::RANDOM_ACTION]);
            (0..ad).map(|_| r.random_range(-1.0..=1.0)).collect()
        } else {
            let mut r = rng::stream(&[tag::TRAIN, seed, s, purpose::POLICY_NOISE]);
            let eps = normals(&mut r, ad);
            self.agent.act(&self.obs, Some(&eps))?
        };
        let (next, reward, done) = self.env.step(&action)?;
        self.buffer.push(Transition { obs: self.obs.clone(), action, reward, next_obs: next.clone() });
        self.episode_return += reward;
        self.agent.env_steps += 1;
        self.step += 1;
        let mut out = Vec::new();
        if done {
            let mut v = BTreeMap::new();
            v.insert("episode".into(), self.episode_index as f64);
            v.insert("return".into(), self.episode_return);
            out.push(self.record("episode", v));
            self.episode_index += 1;
            self.episode_return = 0.0;
            self.obs = self.env.reset(self.episode_index);
        } else {
            self.obs = next;
        }

        let batch_size = self.agent.config.batch_size;
        if s >= self.agent.config.warmup_steps && self.buffer.len() >= batch_size {
            for round in 0..self.agent.config.updates_per_step {
                let mut r = rng::stream(&[tag::TRAIN, seed, s, purpose::SAMPLE, round]);
                let batch = self.buffer.sample(batch_size, &mut r)?;
                let st = self.agent.update(&batch, s, seed, round)?;
                self.acc.push(&st);
            }
        }
        let li = self.settings.log_interval;
        if li > 0 && self.step.is_multiple_of(li) && self.acc.count > 0 {
            let v = self.acc.drain();
            out.push(self.record("train", v));
        }
        let ei = self.settings.eval_interval;
        if ei > 0 && self.step.is_multiple_of(ei) {
            let mean = self.evaluate()?;
            let mut v = BTreeMap::new();
            v.insert("return".into(), mean);
            out.push(self.record("eval", v));
        }
        Ok(out)
    }

    /// Runs to completion, passing every record to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&MetricsRecord) -> Result<()>) -> Result<()> {
        while !self.is_done() {
            for r in self.step()? {
                sink(&r)?;
            }
        }
        Ok(())
    }
}
