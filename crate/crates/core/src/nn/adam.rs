use super::{Params, Scalar};

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<P: Params<T> + ?Sized>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step<P: Params<T> + ?Sized>(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (c1, c2) = (T::from_f64(1.0 - self.beta1), T::from_f64(1.0 - self.beta2));
        let step = T::from_f64(self.lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(self.eps);
        let gs = grads.tensors();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), g.len(), "adam: gradient shape mismatch");
            for i in 0..p.len() {
                m[i] = b1 * m[i] + c1 * g[i];
                v[i] = b2 * v[i] + c2 * g[i] * g[i];
                p[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
            }
        }
    }
}

/// A single trainable scalar, such as the log temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarParam<T>(pub T);

impl<T: Scalar> Params<T> for ScalarParam<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![std::slice::from_ref(&self.0)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![std::slice::from_mut(&mut self.0)]
    }
}
