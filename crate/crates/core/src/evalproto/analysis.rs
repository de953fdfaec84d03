use crate::agent::Agent;
use crate::envcore::{DomainId, PhysState};
use crate::error::{Error, Result};
use crate::nn::{Encoder, Scalar};
use crate::visualgen::{render_sized, sample_visual_spec, Factor, FactorToggles, Frame, PixelObservation, IMAGE_SIZE};

/// Heat weight used when blending an attention map over the observation.
pub const ATTENTION_ALPHA: f64 = 0.5;

/// Anything that maps an observation to a latent vector.
pub trait LatentEncoder {
    fn latent(&self, obs: &PixelObservation) -> Result<Vec<f64>>;

    /// Side length observations should be rendered at.
    fn render_size(&self) -> usize {
        IMAGE_SIZE
    }
}

impl LatentEncoder for Agent {
    fn latent(&self, obs: &PixelObservation) -> Result<Vec<f64>> {
        Ok(self.encode(std::slice::from_ref(obs))?.into_iter().map(f64::from).collect())
    }

    fn render_size(&self) -> usize {
        Agent::render_size(self)
    }
}

/// Sorted per-dimension latent std under `n_renderings` visual seeds that vary
/// only `factor`, averaged elementwise across encoders.
pub fn encoder_variance_analysis(
    encoders: &[&dyn LatentEncoder],
    state: &PhysState,
    factor: Factor,
    n_renderings: usize,
) -> Result<Vec<f64>> {
    if n_renderings < 2 {
        return Err(Error::config(format!("variance analysis needs at least 2 renderings, got {n_renderings}")));
    }
    if encoders.is_empty() {
        return Err(Error::config("variance analysis needs at least one encoder"));
    }
    let domain: DomainId = state.domain();
    let toggles = FactorToggles::only(factor);
    let observe = |k: u64, size: usize| {
        PixelObservation::from_first(render_sized(state, &sample_visual_spec(k, toggles, domain), size))
    };
    let mut mean: Option<Vec<f64>> = None;
    for enc in encoders {
        let size = enc.render_size();
        let latents = (1..=n_renderings as u64)
            .map(|k| enc.latent(&observe(k, size)))
            .collect::<Result<Vec<_>>>()?;
        let stds = sorted_std(&latents)?;
        match &mut mean {
            None => mean = Some(stds),
            Some(m) if m.len() == stds.len() => m.iter_mut().zip(&stds).for_each(|(a, b)| *a += b),
            Some(m) => {
                return Err(Error::Shape(format!("encoders disagree on latent width ({} vs {})", m.len(), stds.len())))
            }
        }
    }
    let mut mean = mean.unwrap();
    let k = encoders.len() as f64;
    mean.iter_mut().for_each(|v| *v /= k);
    Ok(mean)
}

fn sorted_std(latents: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = latents[0].len();
    if latents.iter().any(|z| z.len() != d) {
        return Err(Error::Shape("encoder returned latents of varying width".into()));
    }
    let n = latents.len() as f64;
    let mut stds: Vec<f64> = (0..d)
        .map(|j| {
            let mu = latents.iter().map(|z| z[j]).sum::<f64>() / n;
            (latents.iter().map(|z| (z[j] - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect();
    stds.sort_by(f64::total_cmp);
    Ok(stds)
}

/// Channel-averaged conv activation of one layer, resized to the frame.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub size: usize,
    /// Row-major `size × size`, min-max normalized to `[0, 1]`.
    pub heat: Vec<f64>,
    /// Latest frame of the observation with the heat map blended in red.
    pub overlay: Frame,
}

impl AttentionMap {
    /// Pixel `(x, y)` with the highest heat.
    pub fn argmax(&self) -> (usize, usize) {
        let i = (0..self.heat.len()).fold(0, |best, i| if self.heat[i] > self.heat[best] { i } else { best });
        (i % self.size, i / self.size)
    }
}

/// Attention of conv layer `layer` (0-based) for `obs`.
pub fn attention_map<T: Scalar>(encoder: &Encoder<T>, obs: &PixelObservation, layer: usize) -> Result<AttentionMap> {
    let n_layers = encoder.convs.len();
    if layer >= n_layers {
        return Err(Error::config(format!("layer {layer} out of range, encoder has {n_layers} conv layers")));
    }
    let size = encoder.config.image_size;
    let obs = if obs.width() > size { obs.center_crop(size) } else { obs.clone() };
    if obs.width() != size || obs.height() != size {
        return Err(Error::Shape(format!("attention needs {size}px observations, got {}px", obs.width())));
    }
    let cache = encoder.forward(&obs.to_planar::<T>(), 1)?;
    let (act, _) = cache.conv_activation(layer).expect("layer checked above");
    let side = encoder.config.spatial_sizes()[layer + 1];
    let channels = encoder.config.filters;
    let plane = side * side;
    let avg: Vec<f64> = (0..plane)
        .map(|p| (0..channels).map(|c| act[c * plane + p].as_f64()).sum::<f64>() / channels as f64)
        .collect();

    let mut heat = bilinear_resize(&avg, side, size);
    let (lo, hi) = heat.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    heat.iter_mut().for_each(|v| *v = if range > 0.0 { (*v - lo) / range } else { 0.0 });

    let mut overlay = obs.last().clone();
    for y in 0..size {
        for x in 0..size {
            let h = heat[y * size + x] * ATTENTION_ALPHA;
            let px = overlay.pixel(x, y);
            let heat_rgb = [255.0, 0.0, 0.0];
            let mut out = [0u8; 3];
            for c in 0..3 {
                out[c] = ((1.0 - h) * px[c] as f64 + h * heat_rgb[c]).round().clamp(0.0, 255.0) as u8;
            }
            overlay.put_pixel(x, y, out);
        }
    }
    Ok(AttentionMap { size, heat, overlay })
}

/// Half-pixel-centered bilinear resampling of a square grid.
fn bilinear_resize(src: &[f64], from: usize, to: usize) -> Vec<f64> {
    let scale = from as f64 / to as f64;
    let coord = |i: usize| {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (from - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(from - 1), s - i0 as f64)
    };
    let mut out = Vec::with_capacity(to * to);
    for y in 0..to {
        let (y0, y1, fy) = coord(y);
        for x in 0..to {
            let (x0, x1, fx) = coord(x);
            let top = src[y0 * from + x0] * (1.0 - fx) + src[y0 * from + x1] * fx;
            let bot = src[y1 * from + x0] * (1.0 - fx) + src[y1 * from + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}
