//! Seedable image augmentations.
//!
//! Every random choice of one transform application comes from a stream
//! keyed by [`AugSeed`]. Parameters are drawn once and applied to each of
//! the three stacked frames, and [`augment_pair`] reuses them for `o` and
//! `o'` at every pipeline stage.

mod ops;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use ops::{identity_kernel, rad_output_size, renormalize, sample_params, AugParams, JitterStrengths};

use crate::error::{Error, Result};
use crate::rng::{self, tag, Stream};
use crate::visualgen::PixelObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    RadCrop,
    CutoutColor,
    Drq,
    DrqNoNoise,
    LargeDrq,
    LargeDrqNoNoise,
    Translate,
    LargeTranslate,
    Rotate,
    Vflip,
    Window,
    ColorJitter,
    NetworkRand,
}

impl AugKind {
    pub const ALL: [AugKind; 13] = [
        AugKind::RadCrop,
        AugKind::CutoutColor,
        AugKind::Drq,
        AugKind::DrqNoNoise,
        AugKind::LargeDrq,
        AugKind::LargeDrqNoNoise,
        AugKind::Translate,
        AugKind::LargeTranslate,
        AugKind::Rotate,
        AugKind::Vflip,
        AugKind::Window,
        AugKind::ColorJitter,
        AugKind::NetworkRand,
    ];

    /// The eleven crop, occlusion and orientation transforms compared
    /// head-to-head by the augmentation sweep.
    pub const GEOMETRIC: [AugKind; 11] = [
        AugKind::RadCrop,
        AugKind::CutoutColor,
        AugKind::Drq,
        AugKind::DrqNoNoise,
        AugKind::LargeDrq,
        AugKind::LargeDrqNoNoise,
        AugKind::Translate,
        AugKind::LargeTranslate,
        AugKind::Rotate,
        AugKind::Vflip,
        AugKind::Window,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugKind::RadCrop => "rad_crop",
            AugKind::CutoutColor => "cutout_color",
            AugKind::Drq => "drq",
            AugKind::DrqNoNoise => "drq_no_noise",
            AugKind::LargeDrq => "large_drq",
            AugKind::LargeDrqNoNoise => "large_drq_no_noise",
            AugKind::Translate => "translate",
            AugKind::LargeTranslate => "large_translate",
            AugKind::Rotate => "rotate",
            AugKind::Vflip => "vflip",
            AugKind::Window => "window",
            AugKind::ColorJitter => "color_jitter",
            AugKind::NetworkRand => "network_rand",
        }
    }

    pub fn is_geometric(self) -> bool {
        !matches!(self, AugKind::ColorJitter | AugKind::NetworkRand)
    }

    /// Pad width of the pad-and-crop and translate kinds, 0 otherwise.
    pub fn pad(self) -> usize {
        match self {
            AugKind::Drq | AugKind::DrqNoNoise | AugKind::Translate => 4,
            AugKind::LargeDrq | AugKind::LargeDrqNoNoise | AugKind::LargeTranslate => 12,
            _ => 0,
        }
    }

    pub fn has_noise(self) -> bool {
        matches!(self, AugKind::Drq | AugKind::LargeDrq)
    }
}

impl fmt::Display for AugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "cj" => Some(AugKind::ColorJitter),
            "nr" => Some(AugKind::NetworkRand),
            "rad" => Some(AugKind::RadCrop),
            _ => None,
        };
        alias
            .or_else(|| AugKind::ALL.into_iter().find(|k| k.name() == s))
            .ok_or_else(|| Error::config(format!("unknown augmentation '{s}'")))
    }
}

/// Ordered augmentation stages, written as a comma list such as `cj,drq`.
/// The empty string and `none` denote no augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AugPipeline {
    pub stages: Vec<AugKind>,
}

impl AugPipeline {
    pub fn new(stages: Vec<AugKind>) -> Self {
        AugPipeline { stages }
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Whether observations must be rendered large and center-cropped for
    /// the clean path.
    pub fn needs_highres(&self) -> bool {
        self.stages.contains(&AugKind::RadCrop)
    }
}

impl FromStr for AugPipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none") {
            return Ok(AugPipeline::default());
        }
        let stages = t.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        if stages.iter().filter(|k| **k == AugKind::RadCrop).count() > 1 {
            return Err(Error::config("rad_crop may appear at most once in a pipeline"));
        }
        Ok(AugPipeline { stages })
    }
}

impl fmt::Display for AugPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stages.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = self.stages.iter().map(|k| k.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Key of one transform application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugSeed {
    pub global_seed: u64,
    pub train_step: u64,
    pub batch_index: u64,
    pub stage_index: u64,
}

impl AugSeed {
    pub fn new(global_seed: u64, train_step: u64, batch_index: u64, stage_index: u64) -> Self {
        AugSeed { global_seed, train_step, batch_index, stage_index }
    }

    pub fn with_stage(self, stage_index: u64) -> Self {
        AugSeed { stage_index, ..self }
    }
}

pub fn derive_stream(seed: AugSeed) -> Stream {
    rng::stream(&[tag::AUGMENT, seed.global_seed, seed.train_step, seed.batch_index, seed.stage_index])
}

/// Draws the parameters `kind` uses for a stack of the given side lengths.
pub fn draw_params(kind: AugKind, seed: AugSeed, h: usize, w: usize, jitter: JitterStrengths) -> AugParams {
    sample_params(kind, &mut derive_stream(seed), h, w, jitter)
}

fn check_shape(kind: AugKind, stack: &PixelObservation) -> Result<()> {
    let (h, w) = (stack.height(), stack.width());
    let pad_ok = h > 0 && w > 0;
    let ok = match kind {
        AugKind::Rotate => pad_ok && h == w,
        AugKind::RadCrop => pad_ok && rad_output_size(h.min(w)) >= 1,
        _ => pad_ok,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!("{kind} cannot be applied to a {w}x{h} stack")))
    }
}

/// Applies explicit parameters to every frame of the stack.
pub fn apply_params(params: &AugParams, stack: &PixelObservation) -> PixelObservation {
    stack.map_frames(|_, f| params.apply(f))
}

/// Applies any kind with its default strengths.
pub fn apply(kind: AugKind, stack: &PixelObservation, seed: AugSeed) -> Result<PixelObservation> {
    check_shape(kind, stack)?;
    let p = draw_params(kind, seed, stack.height(), stack.width(), JitterStrengths::default());
    Ok(apply_params(&p, stack))
}

/// Geometric transforms only; color kinds are a contract violation here.
pub fn apply_geometric(kind: AugKind, stack: &PixelObservation, seed: AugSeed) -> Result<PixelObservation> {
    if !kind.is_geometric() {
        return Err(Error::Contract(format!("{kind} is not a geometric augmentation")));
    }
    apply(kind, stack, seed)
}

pub fn color_jitter(stack: &PixelObservation, seed: AugSeed, strengths: JitterStrengths) -> PixelObservation {
    let p = draw_params(AugKind::ColorJitter, seed, stack.height(), stack.width(), strengths);
    apply_params(&p, stack)
}

pub fn network_randomization(stack: &PixelObservation, seed: AugSeed) -> PixelObservation {
    let p = draw_params(AugKind::NetworkRand, seed, stack.height(), stack.width(), JitterStrengths::default());
    apply_params(&p, stack)
}

/// One logged transform application.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub stage: usize,
    /// 0 for `o`, 1 for `o'`.
    pub which: usize,
    pub frame: usize,
    pub params: AugParams,
}

/// Runs `pipeline` on `(o, o')`, drawing each stage's parameters once from
/// `seed.with_stage(stage)` and applying them to both observations.
pub fn augment_pair(
    o: &PixelObservation,
    o_next: &PixelObservation,
    pipeline: &AugPipeline,
    seed: AugSeed,
) -> Result<(PixelObservation, PixelObservation)> {
    augment_pair_with(o, o_next, pipeline, seed, JitterStrengths::default(), None)
}

/// [`augment_pair`] that also records the parameters applied to every frame.
pub fn augment_pair_traced(
    o: &PixelObservation,
    o_next: &PixelObservation,
    pipeline: &AugPipeline,
    seed: AugSeed,
) -> Result<(PixelObservation, PixelObservation, Vec<TraceEntry>)> {
    let mut trace = Vec::new();
    let (a, b) = augment_pair_with(o, o_next, pipeline, seed, JitterStrengths::default(), Some(&mut trace))?;
    Ok((a, b, trace))
}

pub fn augment_pair_with(
    o: &PixelObservation,
    o_next: &PixelObservation,
    pipeline: &AugPipeline,
    seed: AugSeed,
    jitter: JitterStrengths,
    mut trace: Option<&mut Vec<TraceEntry>>,
) -> Result<(PixelObservation, PixelObservation)> {
    if (o.width(), o.height()) != (o_next.width(), o_next.height()) {
        return Err(Error::Shape("o and o' differ in size".into()));
    }
    let (mut a, mut b) = (o.clone(), o_next.clone());
    for (stage, &kind) in pipeline.stages.iter().enumerate() {
        check_shape(kind, &a)?;
        let params = draw_params(kind, seed.with_stage(stage as u64), a.height(), a.width(), jitter);
        let mut run = |which: usize, stack: &PixelObservation| {
            stack.map_frames(|frame, f| {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceEntry { stage, which, frame, params: params.clone() });
                }
                params.apply(f)
            })
        };
        a = run(0, &a);
        b = run(1, &b);
    }
    Ok((a, b))
}

/// Number of augmented samples in a mixed batch of size `batch`.
pub fn mix_count(beta: f64, batch: usize) -> usize {
    (beta * batch as f64).round() as usize
}

/// Marks the `round(β·B)` batch positions that take the augmented sample.
pub fn mix_mask(batch: usize, beta: f64, seed: AugSeed) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!("beta must lie in [0, 1], got {beta}")));
    }
    let k = mix_count(beta, batch);
    let mut mask = vec![false; batch];
    let mut s = rng::stream(&[tag::MIX, seed.global_seed, seed.train_step, seed.batch_index, seed.stage_index]);
    for i in index::sample(&mut s, batch, k) {
        mask[i] = true;
    }
    Ok(mask)
}

/// Takes `round(β·B)` samples from `augmented` and the rest from `clean`.
pub fn mix_batch<X: Clone>(clean: &[X], augmented: &[X], beta: f64, seed: AugSeed) -> Result<Vec<X>> {
    if clean.len() != augmented.len() {
        return Err(Error::Shape(format!(
            "clean batch has {} samples, augmented batch {}",
            clean.len(),
            augmented.len()
        )));
    }
    let mask = mix_mask(clean.len(), beta, seed)?;
    Ok(mask
        .iter()
        .enumerate()
        .map(|(i, &m)| if m { augmented[i].clone() } else { clean[i].clone() })
        .collect())
}
