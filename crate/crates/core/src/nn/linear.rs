use rand::Rng;

use super::{matmul, relu_, relu_backward_, uniform_init, Params, Scalar};

/// Fully connected layer, `y = x·Wᵀ + b` with `W` stored `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Linear {
            in_dim,
            out_dim,
            w: uniform_init(rng, in_dim * out_dim, in_dim),
            b: uniform_init(rng, out_dim, in_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            w: vec![T::zero(); self.w.len()],
            b: vec![T::zero(); self.b.len()],
        }
    }

    pub fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        let mut y = Vec::with_capacity(n * self.out_dim);
        for _ in 0..n {
            y.extend_from_slice(&self.b);
        }
        matmul(false, true, n, self.in_dim, self.out_dim, T::one(), x, &self.w, T::one(), &mut y);
        y
    }

    /// Accumulates parameter gradients into `grad` (when given) and returns
    /// the input gradient when `want_dx`.
    pub fn backward(&self, x: &[T], dy: &[T], n: usize, grad: Option<&mut Self>, want_dx: bool) -> Option<Vec<T>> {
        if let Some(g) = grad {
            matmul(true, false, self.out_dim, n, self.in_dim, T::one(), dy, x, T::one(), &mut g.w);
            for row in dy.chunks_exact(self.out_dim) {
                for (gb, d) in g.b.iter_mut().zip(row) {
                    *gb += *d;
                }
            }
        }
        want_dx.then(|| {
            let mut dx = vec![T::zero(); n * self.in_dim];
            matmul(false, false, n, self.out_dim, self.in_dim, T::one(), dy, &self.w, T::zero(), &mut dx);
            dx
        })
    }
}

impl<T: Scalar> Params<T> for Linear<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![&self.w, &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.w, &mut self.b]
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalization with learned gain and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub dim: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        LayerNorm { dim, gamma: vec![T::one(); dim], beta: vec![T::zero(); dim] }
    }

    pub fn zeros_like(&self) -> Self {
        LayerNorm { dim: self.dim, gamma: vec![T::zero(); self.dim], beta: vec![T::zero(); self.dim] }
    }

    pub fn forward(&self, x: &[T], n: usize) -> (Vec<T>, LayerNormCache<T>) {
        let d = self.dim;
        let inv_d = T::from_f64(1.0 / d as f64);
        let eps = T::from_f64(LAYER_NORM_EPS);
        let mut y = vec![T::zero(); n * d];
        let mut xhat = vec![T::zero(); n * d];
        let mut inv_std = vec![T::zero(); n];
        for r in 0..n {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() * inv_d;
            let is = T::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                y[r * d + j] = h * self.gamma[j] + self.beta[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache<T>, dy: &[T], n: usize, grad: Option<&mut Self>) -> Vec<T> {
        let d = self.dim;
        if let Some(g) = grad {
            for r in 0..n {
                for j in 0..d {
                    g.gamma[j] += dy[r * d + j] * cache.xhat[r * d + j];
                    g.beta[j] += dy[r * d + j];
                }
            }
        }
        let dt = T::from_f64(d as f64);
        let mut dx = vec![T::zero(); n * d];
        for r in 0..n {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let dxhat: Vec<T> = (0..d).map(|j| dy[r * d + j] * self.gamma[j]).collect();
            let s1: T = dxhat.iter().copied().sum();
            let s2: T = dxhat.iter().zip(xh).map(|(a, b)| *a * *b).sum();
            let k = cache.inv_std[r] / dt;
            for j in 0..d {
                dx[r * d + j] = k * (dt * dxhat[j] - s1 - xh[j] * s2);
            }
        }
        dx
    }
}

impl<T: Scalar> Params<T> for LayerNorm<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![&self.gamma, &self.beta]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Linear layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

/// Inputs seen by every layer during a forward pass, plus the output.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub inputs: Vec<Vec<T>>,
    pub out: Vec<T>,
    pub n: usize,
}

impl<T: Scalar> Mlp<T> {
    /// `dims = [in, hidden.., out]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        Mlp { layers: dims.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect() }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp { layers: self.layers.iter().map(Linear::zeros_like).collect() }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, x: &[T], n: usize) -> MlpCache<T> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = layer.forward(&h, n);
            if i + 1 < self.layers.len() {
                relu_(&mut next);
            }
            inputs.push(h);
            h = next;
        }
        MlpCache { inputs, out: h, n }
    }

    pub fn backward(&self, cache: &MlpCache<T>, dout: &[T], mut grad: Option<&mut Self>, want_dx: bool) -> Option<Vec<T>> {
        let mut d = dout.to_vec();
        for i in (0..self.layers.len()).rev() {
            let need = want_dx || i > 0;
            let g = grad.as_deref_mut().map(|g| &mut g.layers[i]);
            match self.layers[i].backward(&cache.inputs[i], &d, cache.n, g, need) {
                Some(mut dx) if i > 0 => {
                    relu_backward_(&cache.inputs[i], &mut dx);
                    d = dx;
                }
                other => return other,
            }
        }
        None
    }
}

impl<T: Scalar> Params<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}
