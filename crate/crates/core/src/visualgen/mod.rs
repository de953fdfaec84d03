//! Visual-seed driven appearance randomization and rendering.
//!
//! A visual seed `k` selects every appearance factor through its own
//! pseudo-random stream keyed by `(k, factor)`, so switching one factor on
//! or off never perturbs the values drawn for another. Seed 0 is reserved
//! for the canonical look.

mod frame;
mod pixel_env;
mod render;
mod texture;

pub use frame::{Frame, PixelObservation, FRAME_STACK, HIGHRES_SIZE, IMAGE_SIZE};
pub use pixel_env::{PixelEnv, SpecSource};
pub use render::{gallery, gallery_state, render, render_highres, render_sized, Scene};
pub use texture::{make_background, make_floor_texture, Texture, TextureFamily, TextureParams};

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envcore::DomainId;
use crate::error::{Error, Result};
use crate::rng::{self, tag, Stream};

pub type Rgb = [f64; 3];

/// Camera translation bound, as a fraction of the frame side.
pub const CAMERA_SHIFT_RANGE: (f64, f64) = (-0.06, 0.06);
/// Camera roll bound (radians).
pub const CAMERA_ROTATION_RANGE: (f64, f64) = (-0.09, 0.09);
pub const CAMERA_ZOOM_RANGE: (f64, f64) = (0.92, 1.08);
pub const BRIGHTNESS_RANGE: (f64, f64) = (0.7, 1.3);
pub const SHADING_RANGE: (f64, f64) = (0.0, 0.4);
pub const REFLECTANCE_RANGE: (f64, f64) = (0.0, 0.3);
pub const FLOOR_SCALE_RANGE: (f64, f64) = (3.0, 12.0);
pub const BACKGROUND_SCALE_RANGE: (f64, f64) = (4.0, 24.0);
pub const MAX_OCTAVES: u32 = 3;

/// One independently toggleable appearance factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Floor = 1,
    Background = 2,
    BodyColor = 3,
    TargetColor = 4,
    Camera = 5,
    Light = 6,
    Reflectance = 7,
}

impl Factor {
    pub const ALL: [Factor; 7] = [
        Factor::Floor,
        Factor::Background,
        Factor::BodyColor,
        Factor::TargetColor,
        Factor::Camera,
        Factor::Light,
        Factor::Reflectance,
    ];

    /// Column order used by factor sweeps.
    pub const SWEEP_ORDER: [Factor; 7] = [
        Factor::Light,
        Factor::Camera,
        Factor::BodyColor,
        Factor::TargetColor,
        Factor::Floor,
        Factor::Background,
        Factor::Reflectance,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::Floor => "floor",
            Factor::Background => "background",
            Factor::BodyColor => "body_color",
            Factor::TargetColor => "target_color",
            Factor::Camera => "camera",
            Factor::Light => "light",
            Factor::Reflectance => "reflectance",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Factor::Floor => "Floor",
            Factor::Background => "Background",
            Factor::BodyColor => "Body Color",
            Factor::TargetColor => "Target Color",
            Factor::Camera => "Camera",
            Factor::Light => "Light",
            Factor::Reflectance => "Reflectance",
        }
    }

    pub fn applies_to(self, domain: DomainId) -> bool {
        !(self == Factor::TargetColor && domain == DomainId::Cartpole)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Factor::ALL
            .iter()
            .copied()
            .find(|f| f.name() == key || (key == "lighting" && *f == Factor::Light))
            .ok_or_else(|| Error::config(format!("unknown visual factor '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FactorToggles {
    pub light: bool,
    pub camera: bool,
    pub body_color: bool,
    pub target_color: bool,
    pub floor: bool,
    pub background: bool,
    pub reflectance: bool,
}

impl FactorToggles {
    pub fn all() -> Self {
        FactorToggles {
            light: true,
            camera: true,
            body_color: true,
            target_color: true,
            floor: true,
            background: true,
            reflectance: true,
        }
    }

    pub fn none() -> Self {
        FactorToggles::default()
    }

    pub fn only(factor: Factor) -> Self {
        let mut t = FactorToggles::none();
        t.set(factor, true);
        t
    }

    pub fn get(&self, factor: Factor) -> bool {
        match factor {
            Factor::Floor => self.floor,
            Factor::Background => self.background,
            Factor::BodyColor => self.body_color,
            Factor::TargetColor => self.target_color,
            Factor::Camera => self.camera,
            Factor::Light => self.light,
            Factor::Reflectance => self.reflectance,
        }
    }

    pub fn set(&mut self, factor: Factor, on: bool) {
        let slot = match factor {
            Factor::Floor => &mut self.floor,
            Factor::Background => &mut self.background,
            Factor::BodyColor => &mut self.body_color,
            Factor::TargetColor => &mut self.target_color,
            Factor::Camera => &mut self.camera,
            Factor::Light => &mut self.light,
            Factor::Reflectance => &mut self.reflectance,
        };
        *slot = on;
    }

    pub fn with(mut self, factor: Factor, on: bool) -> Self {
        self.set(factor, on);
        self
    }

    /// Drops factors that do not exist in `domain`.
    pub fn masked(mut self, domain: DomainId) -> Self {
        for f in Factor::ALL {
            if !f.applies_to(domain) {
                self.set(f, false);
            }
        }
        self
    }

    pub fn enabled(&self) -> Vec<Factor> {
        Factor::ALL.into_iter().filter(|f| self.get(*f)).collect()
    }
}

impl fmt::Display for FactorToggles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = self.enabled();
        if on.is_empty() {
            return f.write_str("none");
        }
        if on.len() == Factor::ALL.len() {
            return f.write_str("all");
        }
        let names: Vec<&str> = on.iter().map(|x| x.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FactorToggles {
    type Err = Error;

    /// `all`, `none`, or a comma-separated list of factor names.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(FactorToggles::all()),
            "none" | "" => Ok(FactorToggles::none()),
            list => list
                .split(',')
                .try_fold(FactorToggles::none(), |t, name| Ok(t.with(name.parse()?, true))),
        }
    }
}

/// Similarity transform from scene coordinates to screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Shift as a fraction of the 84-pixel frame, `(x, y)` with y up.
    pub translate: [f64; 2],
    pub rotation: f64,
    pub zoom: f64,
}

impl Camera {
    pub const IDENTITY: Camera = Camera { translate: [0.0, 0.0], rotation: 0.0, zoom: 1.0 };

    pub fn to_screen(&self, q: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let side = IMAGE_SIZE as f64;
        [
            self.zoom * (c * q[0] - s * q[1]) + self.translate[0] * side,
            self.zoom * (s * q[0] + c * q[1]) + self.translate[1] * side,
        ]
    }

    pub fn from_screen(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let side = IMAGE_SIZE as f64;
        let x = (p[0] - self.translate[0] * side) / self.zoom;
        let y = (p[1] - self.translate[1] * side) / self.zoom;
        [c * x + s * y, -s * x + c * y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    /// Global multiplier on every rendered color.
    pub brightness: f64,
    /// Strength of the directional gradient across each body.
    pub shading: f64,
    /// Direction the light comes from (radians, counter-clockwise from +x).
    pub direction: f64,
}

/// Concrete values of every appearance factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub floor: Texture,
    pub background: Texture,
    pub body_color: Rgb,
    pub target_color: Rgb,
    pub camera: Camera,
    pub lighting: Lighting,
    pub reflectance: f64,
}

impl Appearance {
    /// The seed-0 look for `domain`.
    pub fn canonical(domain: DomainId) -> Self {
        let floor = Texture {
            family: TextureFamily::Checkerboard,
            params: TextureParams { scale: 6.0, angle: 0.0, seed: 0, octaves: 1 },
            colors: [[0.20, 0.30, 0.40], [0.12, 0.19, 0.27]],
        };
        let background = match domain {
            DomainId::Cartpole => Texture {
                family: TextureFamily::LinearGradient,
                params: TextureParams { scale: 24.0, angle: FRAC_PI_2, seed: 0, octaves: 1 },
                colors: [[0.45, 0.62, 0.80], [0.16, 0.24, 0.36]],
            },
            DomainId::Reacher => Texture {
                family: TextureFamily::LinearGradient,
                params: TextureParams { scale: 24.0, angle: FRAC_PI_2, seed: 0, octaves: 1 },
                colors: [[0.30, 0.35, 0.40], [0.10, 0.12, 0.15]],
            },
        };
        Appearance {
            floor,
            background,
            body_color: [0.70, 0.50, 0.30],
            target_color: [0.90, 0.20, 0.20],
            camera: Camera::IDENTITY,
            lighting: Lighting { brightness: 1.0, shading: 0.2, direction: 0.75 * PI },
            reflectance: 0.1,
        }
    }

    /// One `key=value` token per factor, for gallery manifests.
    pub fn describe(&self) -> String {
        let rgb = |c: Rgb| format!("{:.4}/{:.4}/{:.4}", c[0], c[1], c[2]);
        let tex = |t: &Texture| {
            format!(
                "{}(scale={:.4},angle={:.4},seed={},octaves={},c0={},c1={})",
                t.family,
                t.params.scale,
                t.params.angle,
                t.params.seed,
                t.params.octaves,
                rgb(t.colors[0]),
                rgb(t.colors[1])
            )
        };
        format!(
            "floor={} background={} body_color={} target_color={} camera=(dx={:.4},dy={:.4},rot={:.4},zoom={:.4}) light=(brightness={:.4},shading={:.4},direction={:.4}) reflectance={:.4}",
            tex(&self.floor),
            tex(&self.background),
            rgb(self.body_color),
            rgb(self.target_color),
            self.camera.translate[0],
            self.camera.translate[1],
            self.camera.rotation,
            self.camera.zoom,
            self.lighting.brightness,
            self.lighting.shading,
            self.lighting.direction,
            self.reflectance
        )
    }
}

/// Appearance selected by a visual seed, together with the seed and the
/// (domain-masked) toggles that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualSpec {
    pub visual_seed: u64,
    pub domain: DomainId,
    pub toggles: FactorToggles,
    pub appearance: Appearance,
}

impl VisualSpec {
    pub fn canonical(domain: DomainId) -> Self {
        VisualSpec {
            visual_seed: 0,
            domain,
            toggles: FactorToggles::none(),
            appearance: Appearance::canonical(domain),
        }
    }
}

fn factor_stream(k: u64, factor: Factor) -> Stream {
    rng::stream(&[tag::VISUAL, k, factor.id()])
}

fn uniform(s: &mut Stream, range: (f64, f64)) -> f64 {
    s.random_range(range.0..=range.1)
}

fn random_rgb(s: &mut Stream) -> Rgb {
    [s.random_range(0.0..=1.0), s.random_range(0.0..=1.0), s.random_range(0.0..=1.0)]
}

fn random_texture(s: &mut Stream, scale: (f64, f64)) -> Texture {
    let family = TextureFamily::ALL[s.random_range(0..TextureFamily::ALL.len())];
    let params = TextureParams {
        scale: uniform(s, scale),
        angle: s.random_range(0.0..PI),
        seed: s.random(),
        octaves: s.random_range(1..=MAX_OCTAVES),
    };
    let colors = [random_rgb(s), random_rgb(s)];
    Texture { family, params, colors }
}

/// Draws the appearance for visual seed `k`.
///
/// Factors switched off (or not applicable to `domain`) keep their
/// canonical values, and `k = 0` is canonical whatever the toggles say.
pub fn sample_visual_spec(k: u64, toggles: FactorToggles, domain: DomainId) -> VisualSpec {
    let toggles = toggles.masked(domain);
    let mut a = Appearance::canonical(domain);
    if k != 0 {
        for factor in toggles.enabled() {
            let s = &mut factor_stream(k, factor);
            match factor {
                Factor::Floor => a.floor = random_texture(s, FLOOR_SCALE_RANGE),
                Factor::Background => a.background = random_texture(s, BACKGROUND_SCALE_RANGE),
                Factor::BodyColor => a.body_color = random_rgb(s),
                Factor::TargetColor => a.target_color = random_rgb(s),
                Factor::Camera => {
                    a.camera = Camera {
                        translate: [uniform(s, CAMERA_SHIFT_RANGE), uniform(s, CAMERA_SHIFT_RANGE)],
                        rotation: uniform(s, CAMERA_ROTATION_RANGE),
                        zoom: uniform(s, CAMERA_ZOOM_RANGE),
                    }
                }
                Factor::Light => {
                    a.lighting = Lighting {
                        brightness: uniform(s, BRIGHTNESS_RANGE),
                        shading: uniform(s, SHADING_RANGE),
                        direction: s.random_range(-PI..PI),
                    }
                }
                Factor::Reflectance => a.reflectance = uniform(s, REFLECTANCE_RANGE),
            }
        }
    }
    VisualSpec { visual_seed: k, domain, toggles, appearance: a }
}
