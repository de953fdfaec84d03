use rand::Rng;

use super::{relu_, relu_backward_, Conv2d, LayerNorm, LayerNormCache, Linear, Params, Scalar};

/// Shape of the convolutional encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub image_size: usize,
    pub filters: usize,
    /// One entry per conv layer.
    pub strides: Vec<usize>,
    pub kernel: usize,
    pub latent_dim: usize,
}

impl EncoderConfig {
    /// Conv output side lengths, input first.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.image_size];
        for &s in &self.strides {
            let last = *sizes.last().unwrap();
            if last < self.kernel {
                return sizes;
            }
            sizes.push((last - self.kernel) / s + 1);
        }
        sizes
    }

    pub fn validate(&self) -> crate::Result<()> {
        let sizes = self.spatial_sizes();
        if self.strides.is_empty() || sizes.len() != self.strides.len() + 1 {
            return Err(crate::Error::config(format!(
                "encoder with strides {:?} and kernel {} does not fit a {}px image",
                self.strides, self.kernel, self.image_size
            )));
        }
        if self.filters == 0 || self.latent_dim == 0 || self.strides.contains(&0) {
            return Err(crate::Error::config("encoder filters, strides and latent_dim must be positive"));
        }
        Ok(())
    }

    pub fn flat_dim(&self) -> usize {
        let s = *self.spatial_sizes().last().unwrap();
        self.filters * s * s
    }
}

/// Conv stack with ReLU, then a linear projection, layer norm and tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub config: EncoderConfig,
    pub convs: Vec<Conv2d<T>>,
    pub fc: Linear<T>,
    pub ln: LayerNorm<T>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    pub n: usize,
    /// `acts[0]` is the input; `acts[i + 1]` the ReLU output of conv `i`.
    pub acts: Vec<Vec<T>>,
    ln_cache: LayerNormCache<T>,
    /// Latent codes, `n × latent_dim`.
    pub out: Vec<T>,
}

impl<T: Scalar> EncoderCache<T> {
    /// Activation grid of conv layer `layer` as `(data, channels, side)`.
    pub fn conv_activation(&self, layer: usize) -> Option<(&[T], usize)> {
        self.acts.get(layer + 1).map(|a| (a.as_slice(), a.len() / self.n.max(1)))
    }
}

impl<T: Scalar> Encoder<T> {
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> crate::Result<Self> {
        config.validate()?;
        let mut convs = Vec::with_capacity(config.strides.len());
        let mut in_ch = config.in_channels;
        for &s in &config.strides {
            convs.push(Conv2d::new(in_ch, config.filters, config.kernel, s, rng));
            in_ch = config.filters;
        }
        let fc = Linear::new(config.flat_dim(), config.latent_dim, rng);
        let ln = LayerNorm::new(config.latent_dim);
        Ok(Encoder { config, convs, fc, ln })
    }

    pub fn zeros_like(&self) -> Self {
        Encoder {
            config: self.config.clone(),
            convs: self.convs.iter().map(Conv2d::zeros_like).collect(),
            fc: self.fc.zeros_like(),
            ln: self.ln.zeros_like(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn input_len(&self) -> usize {
        self.config.in_channels * self.config.image_size * self.config.image_size
    }

    pub fn forward(&self, x: &[T], n: usize) -> crate::Result<EncoderCache<T>> {
        if x.len() != n * self.input_len() {
            return Err(crate::Error::Shape(format!(
                "encoder expects {n}x{} inputs, got {} values",
                self.input_len(),
                x.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.convs.len() + 1);
        acts.push(x.to_vec());
        let mut side = self.config.image_size;
        for conv in &self.convs {
            let (mut y, ho, _) = conv.forward(acts.last().unwrap(), n, side, side);
            relu_(&mut y);
            acts.push(y);
            side = ho;
        }
        let pre = self.fc.forward(acts.last().unwrap(), n);
        let (mut out, ln_cache) = self.ln.forward(&pre, n);
        for v in &mut out {
            *v = v.tanh();
        }
        Ok(EncoderCache { n, acts, ln_cache, out })
    }

    pub fn encode(&self, x: &[T], n: usize) -> crate::Result<Vec<T>> {
        Ok(self.forward(x, n)?.out)
    }

    /// Accumulates parameter gradients for `dlatent` into `grad`.
    pub fn backward(&self, cache: &EncoderCache<T>, dlatent: &[T], grad: &mut Self) {
        let n = cache.n;
        let dtanh: Vec<T> = dlatent
            .iter()
            .zip(&cache.out)
            .map(|(d, y)| *d * (T::one() - *y * *y))
            .collect();
        let dpre = self.ln.backward(&cache.ln_cache, &dtanh, n, Some(&mut grad.ln));
        let flat = cache.acts.last().unwrap();
        let mut d = self.fc.backward(flat, &dpre, n, Some(&mut grad.fc), true).unwrap();
        let sizes = self.config.spatial_sizes();
        for i in (0..self.convs.len()).rev() {
            relu_backward_(&cache.acts[i + 1], &mut d);
            let side = sizes[i];
            match self.convs[i].backward(&cache.acts[i], &d, n, side, side, Some(&mut grad.convs[i]), i > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }
}

impl<T: Scalar> Params<T> for Encoder<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = self.convs.iter().flat_map(|c| c.tensors()).collect();
        v.extend(self.fc.tensors());
        v.extend(self.ln.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = self.convs.iter_mut().flat_map(|c| c.tensors_mut()).collect();
        v.extend(self.fc.tensors_mut());
        v.extend(self.ln.tensors_mut());
        v
    }
}
