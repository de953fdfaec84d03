//! Procedural, resolution-independent texture families used for floors and
//! backgrounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Rgb;
use crate::error::{Error, Result};
use crate::rng::{mix_key, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureFamily {
    Checkerboard,
    Stripes,
    ValueNoise,
    LinearGradient,
    RadialGradient,
}

impl TextureFamily {
    pub const ALL: [TextureFamily; 5] = [
        TextureFamily::Checkerboard,
        TextureFamily::Stripes,
        TextureFamily::ValueNoise,
        TextureFamily::LinearGradient,
        TextureFamily::RadialGradient,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::config(format!("unknown texture family id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            TextureFamily::Checkerboard => "checkerboard",
            TextureFamily::Stripes => "stripes",
            TextureFamily::ValueNoise => "value_noise",
            TextureFamily::LinearGradient => "linear_gradient",
            TextureFamily::RadialGradient => "radial_gradient",
        }
    }
}

impl fmt::Display for TextureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TextureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown texture family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    /// Cell size / half-period, in output pixels at 84×84.
    pub scale: f64,
    /// Orientation of the pattern (radians).
    pub angle: f64,
    /// Lattice seed for value noise; ignored by the other families.
    pub seed: u64,
    /// Number of noise octaves (value noise only).
    pub octaves: u32,
}

/// A two-color procedural pattern, sampled at continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub family: TextureFamily,
    pub params: TextureParams,
    pub colors: [Rgb; 2],
}

/// Builds a floor texture from a numeric family id.
pub fn make_floor_texture(family_id: u8, params: TextureParams, colors: [Rgb; 2]) -> Result<Texture> {
    Texture::new(TextureFamily::from_id(family_id)?, params, colors)
}

/// Builds a background pattern from a numeric pattern id.
pub fn make_background(pattern_id: u8, params: TextureParams, palette: [Rgb; 2]) -> Result<Texture> {
    Texture::new(TextureFamily::from_id(pattern_id)?, params, palette)
}

impl Texture {
    pub fn new(family: TextureFamily, params: TextureParams, colors: [Rgb; 2]) -> Result<Self> {
        if !(params.scale.is_finite() && params.scale > 0.0) {
            return Err(Error::config(format!("texture scale must be positive, got {}", params.scale)));
        }
        if family == TextureFamily::ValueNoise && params.octaves == 0 {
            return Err(Error::config("value noise needs at least one octave"));
        }
        Ok(Texture { family, params, colors })
    }

    /// Blend weight of the second palette color at `(u, v)`, in `[0, 1]`.
    pub fn weight(&self, u: f64, v: f64) -> f64 {
        let p = &self.params;
        let (s, c) = p.angle.sin_cos();
        let ru = c * u + s * v;
        let rv = -s * u + c * v;
        match self.family {
            TextureFamily::Checkerboard => {
                let i = (ru / p.scale).floor() as i64 + (rv / p.scale).floor() as i64;
                i.rem_euclid(2) as f64
            }
            TextureFamily::Stripes => ((ru / p.scale).floor() as i64).rem_euclid(2) as f64,
            TextureFamily::ValueNoise => fractal_noise(p.seed, ru / p.scale, rv / p.scale, p.octaves),
            TextureFamily::LinearGradient => triangle(ru / (4.0 * p.scale)),
            TextureFamily::RadialGradient => triangle(ru.hypot(rv) / (4.0 * p.scale)),
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> Rgb {
        let t = self.weight(u, v);
        let [a, b] = self.colors;
        [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
    }

    /// Rasterizes the pattern at pixel centers, origin at the image center.
    pub fn to_image(&self, width: usize, height: usize) -> super::Frame {
        let mut f = super::Frame::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let u = x as f64 + 0.5 - width as f64 / 2.0;
                let v = height as f64 / 2.0 - (y as f64 + 0.5);
                let c = self.sample(u, v);
                f.put_pixel(x, y, c.map(|ch| (ch.clamp(0.0, 1.0) * 255.0).round() as u8));
            }
        }
        f
    }
}

/// Periodic ramp 0 → 1 → 0 with unit period.
fn triangle(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    1.0 - (2.0 * f - 1.0).abs()
}

fn lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let h = mix_key(&[tag::TEXTURE, seed, octave as u64, ix as u64, iy as u64]);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(seed: u64, octave: u32, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (tx, ty) = (smooth(x - x0), smooth(y - y0));
    let a = lattice(seed, octave, ix, iy);
    let b = lattice(seed, octave, ix + 1, iy);
    let c = lattice(seed, octave, ix, iy + 1);
    let d = lattice(seed, octave, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

fn fractal_noise(seed: u64, x: f64, y: f64, octaves: u32) -> f64 {
    let mut total = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0;
    for o in 0..octaves {
        total += amp * value_noise(seed, o, x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    total / norm
}
