//! Per-kind parameter draws and their pixel-level application.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AugKind;
use crate::rng::Stream;
use crate::visualgen::Frame;

/// Side of a `rad_crop` output for an input of side `size` (100 → 84).
pub fn rad_output_size(size: usize) -> usize {
    (size * 84 + 50) / 100
}

/// Inclusive range scaled from 84-pixel units to side `size`.
fn scaled_range(size: usize, lo: usize, hi: usize) -> (usize, usize) {
    let s = |v: usize| ((v * size + 42) / 84).clamp(1, size);
    (s(lo), s(hi))
}

pub const WINDOW_RANGE: (usize, usize) = (48, 72);
pub const CUTOUT_RANGE: (usize, usize) = (12, 24);

/// Color jitter magnitudes. Each factor is drawn from `[1 − s, 1 + s]`;
/// hue is shifted by a fraction of a turn in `[−hue, hue]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterStrengths {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Default for JitterStrengths {
    fn default() -> Self {
        JitterStrengths { brightness: 0.4, contrast: 0.4, saturation: 0.4, hue: 0.5 }
    }
}

impl JitterStrengths {
    pub const ZERO: JitterStrengths = JitterStrengths { brightness: 0.0, contrast: 0.0, saturation: 0.0, hue: 0.0 };
}

/// Every random choice of one transform application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AugParams {
    /// Replicate-pad by `pad`, crop at `(oy, ox)` in `[0, 2·pad]`, then add
    /// the optional per-pixel noise in 1/255 steps.
    PadCrop { pad: usize, oy: usize, ox: usize, noise: Option<Vec<i8>> },
    RadCrop { oy: usize, ox: usize, out: usize },
    /// Shift by `(sy, sx)` with uncovered pixels set to `fill`.
    Translate { sy: i64, sx: i64, fill: [u8; 3] },
    /// Clockwise quarter turns.
    Rotate { quarter_turns: u8 },
    Vflip { flip: bool },
    /// Rectangle kept visible; everything else becomes 0.
    Window { y0: usize, x0: usize, h: usize, w: usize },
    Cutout { y0: usize, x0: usize, h: usize, w: usize, color: [u8; 3] },
    ColorJitter { brightness: f64, contrast: f64, saturation: f64, hue: f64 },
    /// 3→3 channel 3×3 kernel, `weights[((o * 3 + i) * 3 + ky) * 3 + kx]`.
    NetworkRand { weights: Vec<f64> },
}

fn color<R: Rng>(rng: &mut R) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn factor<R: Rng>(rng: &mut R, s: f64) -> f64 {
    if s > 0.0 {
        rng.random_range((1.0 - s).max(0.0)..=1.0 + s)
    } else {
        1.0
    }
}

/// Draws the parameters of `kind` for an `h × w` image.
pub fn sample_params(kind: AugKind, rng: &mut Stream, h: usize, w: usize, jitter: JitterStrengths) -> AugParams {
    match kind {
        AugKind::Drq | AugKind::DrqNoNoise | AugKind::LargeDrq | AugKind::LargeDrqNoNoise => {
            let pad = kind.pad();
            let oy = rng.random_range(0..=2 * pad);
            let ox = rng.random_range(0..=2 * pad);
            let noise = kind.has_noise().then(|| {
                (0..h * w * 3).map(|_| rng.random_range(-1.0f64..1.0).round() as i8).collect()
            });
            AugParams::PadCrop { pad, oy, ox, noise }
        }
        AugKind::RadCrop => {
            let out = rad_output_size(h.min(w));
            AugParams::RadCrop { oy: rng.random_range(0..=h - out), ox: rng.random_range(0..=w - out), out }
        }
        AugKind::Translate | AugKind::LargeTranslate => {
            let p = kind.pad() as i64;
            let sy = rng.random_range(-p..=p);
            let sx = rng.random_range(-p..=p);
            AugParams::Translate { sy, sx, fill: color(rng) }
        }
        AugKind::Rotate => AugParams::Rotate { quarter_turns: rng.random_range(0..4) },
        AugKind::Vflip => AugParams::Vflip { flip: rng.random_bool(0.5) },
        AugKind::Window => {
            let (lo, hi) = scaled_range(h.min(w), WINDOW_RANGE.0, WINDOW_RANGE.1);
            let (wh, ww) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
            let (y0, x0) = (rng.random_range(0..=h - wh), rng.random_range(0..=w - ww));
            AugParams::Window { y0, x0, h: wh, w: ww }
        }
        AugKind::CutoutColor => {
            let (lo, hi) = scaled_range(h.min(w), CUTOUT_RANGE.0, CUTOUT_RANGE.1);
            let (ch, cw) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
            let (y0, x0) = (rng.random_range(0..=h - ch), rng.random_range(0..=w - cw));
            AugParams::Cutout { y0, x0, h: ch, w: cw, color: color(rng) }
        }
        AugKind::ColorJitter => AugParams::ColorJitter {
            brightness: factor(rng, jitter.brightness),
            contrast: factor(rng, jitter.contrast),
            saturation: factor(rng, jitter.saturation),
            hue: if jitter.hue > 0.0 { rng.random_range(-jitter.hue..=jitter.hue) } else { 0.0 },
        },
        AugKind::NetworkRand => {
            let std = (2.0f64 / (27.0 + 27.0)).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            AugParams::NetworkRand { weights: (0..81).map(|_| normal.sample(rng)).collect() }
        }
    }
}

impl AugParams {
    /// Parameters that leave every image unchanged, where such values exist.
    pub fn identity(kind: AugKind, h: usize, w: usize) -> Option<AugParams> {
        Some(match kind {
            AugKind::Drq | AugKind::DrqNoNoise | AugKind::LargeDrq | AugKind::LargeDrqNoNoise => {
                let pad = kind.pad();
                AugParams::PadCrop { pad, oy: pad, ox: pad, noise: None }
            }
            AugKind::Translate | AugKind::LargeTranslate => AugParams::Translate { sy: 0, sx: 0, fill: [0; 3] },
            AugKind::Rotate => AugParams::Rotate { quarter_turns: 0 },
            AugKind::Vflip => AugParams::Vflip { flip: false },
            AugKind::Window => AugParams::Window { y0: 0, x0: 0, h, w },
            AugKind::CutoutColor => AugParams::Cutout { y0: 0, x0: 0, h: 0, w: 0, color: [0; 3] },
            AugKind::ColorJitter => AugParams::ColorJitter { brightness: 1.0, contrast: 1.0, saturation: 1.0, hue: 0.0 },
            AugKind::RadCrop | AugKind::NetworkRand => return None,
        })
    }

    pub fn apply(&self, f: &Frame) -> Frame {
        let (h, w) = (f.height(), f.width());
        match self {
            AugParams::PadCrop { pad, oy, ox, noise } => {
                let mut out = Frame::new(w, h);
                let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
                for y in 0..h {
                    let sy = clampi(y as isize + *oy as isize - *pad as isize, h);
                    for x in 0..w {
                        let sx = clampi(x as isize + *ox as isize - *pad as isize, w);
                        out.put_pixel(x, y, f.pixel(sx, sy));
                    }
                }
                if let Some(noise) = noise {
                    for (v, n) in out.data_mut().iter_mut().zip(noise) {
                        *v = (*v as i16 + *n as i16).clamp(0, 255) as u8;
                    }
                }
                out
            }
            AugParams::RadCrop { oy, ox, out } => f.crop(*ox, *oy, *out, *out),
            AugParams::Translate { sy, sx, fill } => {
                let mut out = Frame::filled(w, h, *fill);
                for y in 0..h as i64 {
                    for x in 0..w as i64 {
                        let (ty, tx) = (y + sy, x + sx);
                        if (0..h as i64).contains(&ty) && (0..w as i64).contains(&tx) {
                            out.put_pixel(tx as usize, ty as usize, f.pixel(x as usize, y as usize));
                        }
                    }
                }
                out
            }
            AugParams::Rotate { quarter_turns } => {
                let mut cur = f.clone();
                for _ in 0..*quarter_turns % 4 {
                    cur = rotate_cw(&cur);
                }
                cur
            }
            AugParams::Vflip { flip } => {
                if !flip {
                    return f.clone();
                }
                let mut out = Frame::new(w, h);
                for y in 0..h {
                    for x in 0..w {
                        out.put_pixel(x, y, f.pixel(w - 1 - x, h - 1 - y));
                    }
                }
                out
            }
            AugParams::Window { y0, x0, h: wh, w: ww } => {
                let mut out = Frame::new(w, h);
                for y in *y0..(*y0 + *wh).min(h) {
                    for x in *x0..(*x0 + *ww).min(w) {
                        out.put_pixel(x, y, f.pixel(x, y));
                    }
                }
                out
            }
            AugParams::Cutout { y0, x0, h: ch, w: cw, color } => {
                let mut out = f.clone();
                for y in *y0..(*y0 + *ch).min(h) {
                    for x in *x0..(*x0 + *cw).min(w) {
                        out.put_pixel(x, y, *color);
                    }
                }
                out
            }
            AugParams::ColorJitter { brightness, contrast, saturation, hue } => {
                jitter(f, *brightness, *contrast, *saturation, *hue)
            }
            AugParams::NetworkRand { weights } => random_conv(f, weights),
        }
    }
}

/// 90° clockwise: `out(y, x) = in(H − 1 − x, y)`.
fn rotate_cw(f: &Frame) -> Frame {
    let (h, w) = (f.height(), f.width());
    let mut out = Frame::new(h, w);
    for y in 0..w {
        for x in 0..h {
            out.put_pixel(x, y, f.pixel(y, h - 1 - x));
        }
    }
    out
}

fn gray(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

fn rgb_to_hsv(p: [f64; 3]) -> [f64; 3] {
    let max = p[0].max(p[1]).max(p[2]);
    let min = p[0].min(p[1]).min(p[2]);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == p[0] {
        ((p[1] - p[2]) / d).rem_euclid(6.0) / 6.0
    } else if max == p[1] {
        ((p[2] - p[0]) / d + 2.0) / 6.0
    } else {
        ((p[0] - p[1]) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Brightness, contrast, saturation, then hue; identity factors are skipped
/// so neutral parameters reproduce the input exactly.
fn jitter(f: &Frame, b: f64, c: f64, s: f64, hue: f64) -> Frame {
    let n = f.width() * f.height();
    let mut px: Vec<[f64; 3]> = f
        .data()
        .chunks_exact(3)
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    if b != 1.0 {
        for p in &mut px {
            *p = p.map(|v| (v * b).clamp(0.0, 1.0));
        }
    }
    if c != 1.0 {
        let mean = px.iter().map(|p| gray(*p)).sum::<f64>() / n as f64;
        for p in &mut px {
            *p = p.map(|v| (c * v + (1.0 - c) * mean).clamp(0.0, 1.0));
        }
    }
    if s != 1.0 {
        for p in &mut px {
            let g = gray(*p);
            *p = p.map(|v| (s * v + (1.0 - s) * g).clamp(0.0, 1.0));
        }
    }
    if hue != 0.0 {
        for p in &mut px {
            let mut hsv = rgb_to_hsv(*p);
            hsv[0] += hue;
            *p = hsv_to_rgb(hsv).map(|v| v.clamp(0.0, 1.0));
        }
    }
    let data = px.iter().flat_map(|p| p.map(|v| (v * 255.0).round() as u8)).collect();
    Frame::from_raw(f.width(), f.height(), data).expect("same dimensions")
}

/// Zero-padded 3×3 convolution followed by min-max rescaling to 0..=255.
/// A constant response maps to 0.
fn random_conv(f: &Frame, weights: &[f64]) -> Frame {
    let (h, w) = (f.height(), f.width());
    let mut resp = vec![0.0f64; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for o in 0..3 {
                let mut acc = 0.0;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        for i in 0..3 {
                            let v = f.get(sx as usize, sy as usize, i) as f64 / 255.0;
                            acc += weights[((o * 3 + i) * 3 + ky) * 3 + kx] * v;
                        }
                    }
                }
                resp[(y * w + x) * 3 + o] = acc;
            }
        }
    }
    let (lo, hi) = resp.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    let data = if hi > lo {
        resp.iter().map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8).collect()
    } else {
        vec![0; resp.len()]
    };
    Frame::from_raw(w, h, data).expect("same dimensions")
}

/// Kernel that copies each channel through unchanged.
pub fn identity_kernel() -> Vec<f64> {
    let mut k = vec![0.0; 81];
    for c in 0..3 {
        k[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
    }
    k
}

/// Min-max rescaling of a frame over all of its channel values.
pub fn renormalize(f: &Frame) -> Frame {
    random_conv(f, &identity_kernel())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(h: usize, w: usize) -> Frame {
        let data = (0..h * w * 3).map(|i| (i * 7 % 251) as u8).collect();
        Frame::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn rotate_four_times_is_identity_and_once_is_clockwise() {
        let f = toy(5, 5);
        let r = AugParams::Rotate { quarter_turns: 1 }.apply(&f);
        // Top-left after a clockwise turn comes from bottom-left.
        assert_eq!(r.pixel(0, 0), f.pixel(0, 4));
        assert_eq!(r.pixel(4, 0), f.pixel(0, 0));
        let mut cur = f.clone();
        for _ in 0..4 {
            cur = AugParams::Rotate { quarter_turns: 1 }.apply(&cur);
        }
        assert_eq!(cur, f);
    }

    #[test]
    fn hsv_round_trip() {
        for p in [[0.2, 0.4, 0.9], [1.0, 0.0, 0.0], [0.5, 0.5, 0.5], [0.1, 0.9, 0.3]] {
            let q = hsv_to_rgb(rgb_to_hsv(p));
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_params_are_identities() {
        let f = toy(6, 6);
        for kind in AugKind::ALL {
            if let Some(p) = AugParams::identity(kind, 6, 6) {
                assert_eq!(p.apply(&f), f, "{kind}");
            }
        }
    }

    #[test]
    fn scaled_ranges() {
        assert_eq!(scaled_range(84, 48, 72), (48, 72));
        assert_eq!(scaled_range(6, 48, 72), (3, 5));
        assert_eq!(scaled_range(6, 12, 24), (1, 2));
        assert_eq!(rad_output_size(100), 84);
    }
}
