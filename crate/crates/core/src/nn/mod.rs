//! Minimal dense and convolutional layers with hand-written backward passes.
//!
//! Layers are generic over [`Scalar`] so training runs in `f32` while
//! gradient checks run the very same code in `f64`. Activations are batched
//! row-major buffers; image batches are `[n, channels, height, width]`.

mod adam;
mod conv;
mod encoder;
mod linear;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;

pub use adam::{Adam, ScalarParam};
pub use conv::Conv2d;
pub use encoder::{Encoder, EncoderCache, EncoderConfig};
pub use linear::{LayerNorm, LayerNormCache, Linear, Mlp, MlpCache};

/// Floating-point element type of a network.
pub trait Scalar:
    Float + Debug + Default + Send + Sync + 'static + AddAssign + SubAssign + MulAssign + DivAssign + Sum
{
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `C = alpha * A * B + beta * C` on strided matrices.
    ///
    /// # Safety
    /// Pointers and strides must describe valid, non-overlapping matrices of
    /// the given shapes.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Row-major `C (m×n) = alpha·op(A)·op(B) + beta·C`, where `op(A)` is `m×k`.
///
/// With `ta`, `a` is stored as `k×m`; with `tb`, `b` is stored as `n×k`.
/// When `beta` is zero, `c` is overwritten without being read.
#[allow(clippy::too_many_arguments)]
pub fn matmul<T: Scalar>(
    ta: bool,
    tb: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "matmul: A has {} elements, expected {m}x{k}", a.len());
    assert_eq!(b.len(), k * n, "matmul: B has {} elements, expected {k}x{n}", b.len());
    assert_eq!(c.len(), m * n, "matmul: C has {} elements, expected {m}x{n}", c.len());
    if m == 0 || n == 0 {
        return;
    }
    // matrixmultiply packs a column-major B slowly. Either transpose B, or
    // when B is the large operand, form Cᵀ = Bᵀ·Aᵀ from row-major pieces.
    let transposed;
    let (b, tb) = if tb && m > 2 {
        if m * k + m * n < k * n {
            let at_owned;
            let at = if ta {
                a
            } else {
                at_owned = transpose(a, m, k);
                &at_owned
            };
            let mut ct = vec![T::zero(); n * m];
            matmul(false, false, n, k, m, alpha, b, at, T::zero(), &mut ct);
            for i in 0..m {
                for (j, cv) in c[i * n..(i + 1) * n].iter_mut().enumerate() {
                    let v = ct[j * m + i];
                    *cv = if beta == T::zero() { v } else { beta * *cv + v };
                }
            }
            return;
        }
        transposed = transpose(b, n, k);
        (transposed.as_slice(), false)
    } else {
        (b, tb)
    };
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths checked above; strides address exactly those buffers.
    unsafe {
        T::gemm_raw(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Row-major `rows × cols` to `cols × rows`, blocked for cache reuse.
pub(crate) fn transpose<T: Copy>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    const BLOCK: usize = 32;
    let mut out = x.to_vec();
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    out[c * rows + r] = x[r * cols + c];
                }
            }
        }
    }
    out
}

/// Uniform draw in `[-bound, bound)`, the default init for layers with the
/// given fan-in.
pub(crate) fn uniform_init<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect()
}

/// A set of parameter tensors visited in a fixed order.
///
/// Gradients use the same type as the parameters, so optimizers and target
/// updates zip the two visit orders.
pub trait Params<T: Scalar> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zero_(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    fn flat(&self) -> Vec<T> {
        self.tensors().concat()
    }

    fn set_flat(&mut self, values: &[T]) -> crate::Result<()> {
        if values.len() != self.num_params() {
            return Err(crate::Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    /// `self ← (1 − tau)·self + tau·online`, elementwise.
    fn polyak_from(&mut self, online: &Self, tau: f64) {
        let (tau_t, keep) = (T::from_f64(tau), T::from_f64(1.0 - tau));
        for (t, o) in self.tensors_mut().into_iter().zip(online.tensors()) {
            assert_eq!(t.len(), o.len(), "polyak: shape mismatch");
            for (x, y) in t.iter_mut().zip(o) {
                *x = keep * *x + tau_t * *y;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

impl<T: Scalar, P: Params<T>, const N: usize> Params<T> for [P; N] {
    fn tensors(&self) -> Vec<&[T]> {
        self.iter().flat_map(|p| p.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.iter_mut().flat_map(|p| p.tensors_mut()).collect()
    }
}

pub(crate) fn relu_<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` wherever the ReLU output `act` was not positive.
pub(crate) fn relu_backward_<T: Scalar>(act: &[T], grad: &mut [T]) {
    for (g, a) in grad.iter_mut().zip(act) {
        if *a <= T::zero() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(ta: bool, tb: bool, m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    let av = if ta { a[p * m + i] } else { a[i * k + p] };
                    let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                    c[i * n + j] += av * bv;
                }
            }
        }
        c
    }

    #[test]
    fn matmul_matches_naive_for_all_transposes() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        for ta in [false, true] {
            for tb in [false, true] {
                let mut c = vec![f64::NAN; m * n];
                matmul(ta, tb, m, k, n, 1.0, &a, &b, 0.0, &mut c);
                let want = naive(ta, tb, m, k, n, &a, &b);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn polyak_extremes_and_lag() {
        let online = Linear::<f64> { in_dim: 1, out_dim: 1, w: vec![1.0], b: vec![1.0] };
        let mut target = Linear::<f64> { in_dim: 1, out_dim: 1, w: vec![0.0], b: vec![0.0] };
        target.polyak_from(&online, 0.05);
        assert_eq!(target.w[0], 0.05);
        let before = target.clone();
        target.polyak_from(&online, 0.0);
        assert_eq!(target, before);
        target.polyak_from(&online, 1.0);
        assert_eq!(target, online);
    }
}
