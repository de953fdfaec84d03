use rand::Rng;

use super::{matmul, uniform_init, Params, Scalar};

/// Square-kernel 2D convolution without padding, via im2col and GEMM.
/// Weights are stored `out_ch × (in_ch · k · k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, k: usize, stride: usize, rng: &mut R) -> Self {
        let fan_in = in_ch * k * k;
        Conv2d {
            in_ch,
            out_ch,
            k,
            stride,
            w: uniform_init(rng, out_ch * fan_in, fan_in),
            b: uniform_init(rng, out_ch, fan_in),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Conv2d { w: vec![T::zero(); self.w.len()], b: vec![T::zero(); self.b.len()], ..*self }
    }

    pub fn out_size(&self, size: usize) -> usize {
        assert!(size >= self.k, "conv input {size} smaller than kernel {}", self.k);
        (size - self.k) / self.stride + 1
    }

    fn col_rows(&self) -> usize {
        self.in_ch * self.k * self.k
    }

    fn im2col(&self, x: &[T], h: usize, w: usize, col: &mut [T]) {
        let (ho, wo) = (self.out_size(h), self.out_size(w));
        let p = ho * wo;
        for c in 0..self.in_ch {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = &mut col[((c * self.k + ky) * self.k + kx) * p..][..p];
                    for oy in 0..ho {
                        let src = &plane[(oy * self.stride + ky) * w + kx..];
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        if self.stride == 1 {
                            dst.copy_from_slice(&src[..wo]);
                        } else if self.stride == 2 && src.len() >= 2 * wo {
                            for (d, pair) in dst.iter_mut().zip(src[..2 * wo].chunks_exact(2)) {
                                *d = pair[0];
                            }
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d = src[ox * self.stride];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Patch-major im2col: row `oy·wo + ox` holds the receptive field of that
    /// output position, ordered like a weight row.
    fn im2col_t(&self, x: &[T], h: usize, w: usize, col: &mut [T]) {
        // A literal kernel size lets the short row copies compile to moves.
        if self.k == 3 {
            self.im2col_t_k(3, x, h, w, col)
        } else {
            self.im2col_t_k(self.k, x, h, w, col)
        }
    }

    #[inline(always)]
    fn im2col_t_k(&self, k: usize, x: &[T], h: usize, w: usize, col: &mut [T]) {
        let (ho, wo, rows) = (self.out_size(h), self.out_size(w), self.col_rows());
        for oy in 0..ho {
            for ox in 0..wo {
                let dst = &mut col[(oy * wo + ox) * rows..][..rows];
                for c in 0..self.in_ch {
                    for ky in 0..k {
                        let src = c * h * w + (oy * self.stride + ky) * w + ox * self.stride;
                        dst[(c * k + ky) * k..][..k].copy_from_slice(&x[src..src + k]);
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col_t`].
    fn col2im_t(&self, col: &[T], h: usize, w: usize, dx: &mut [T]) {
        if self.k == 3 {
            self.col2im_t_k(3, col, h, w, dx)
        } else {
            self.col2im_t_k(self.k, col, h, w, dx)
        }
    }

    #[inline(always)]
    fn col2im_t_k(&self, k: usize, col: &[T], h: usize, w: usize, dx: &mut [T]) {
        let (ho, wo, rows) = (self.out_size(h), self.out_size(w), self.col_rows());
        for oy in 0..ho {
            for ox in 0..wo {
                let src = &col[(oy * wo + ox) * rows..][..rows];
                for c in 0..self.in_ch {
                    for ky in 0..k {
                        let dst = c * h * w + (oy * self.stride + ky) * w + ox * self.stride;
                        for (d, v) in dx[dst..dst + k].iter_mut().zip(&src[(c * k + ky) * k..][..k]) {
                            *d += *v;
                        }
                    }
                }
            }
        }
    }

    /// Returns the `[n, out_ch, ho, wo]` output and its spatial size.
    pub fn forward(&self, x: &[T], n: usize, h: usize, w: usize) -> (Vec<T>, usize, usize) {
        assert_eq!(x.len(), n * self.in_ch * h * w, "conv input shape");
        let (ho, wo) = (self.out_size(h), self.out_size(w));
        let p = ho * wo;
        let mut col = vec![T::zero(); self.col_rows() * p];
        let mut y = vec![T::zero(); n * self.out_ch * p];
        for s in 0..n {
            self.im2col(&x[s * self.in_ch * h * w..(s + 1) * self.in_ch * h * w], h, w, &mut col);
            let ys = &mut y[s * self.out_ch * p..(s + 1) * self.out_ch * p];
            for (o, chunk) in ys.chunks_exact_mut(p).enumerate() {
                chunk.fill(self.b[o]);
            }
            matmul(false, false, self.out_ch, self.col_rows(), p, T::one(), &self.w, &col, T::one(), ys);
        }
        (y, ho, wo)
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `want_dx`.
    pub fn backward(
        &self,
        x: &[T],
        dy: &[T],
        n: usize,
        h: usize,
        w: usize,
        mut grad: Option<&mut Self>,
        want_dx: bool,
    ) -> Option<Vec<T>> {
        let (ho, wo) = (self.out_size(h), self.out_size(w));
        let p = ho * wo;
        let rows = self.col_rows();
        // Patch-major layout keeps both GEMMs free of a transposed B operand.
        let mut col = vec![T::zero(); p * rows];
        let mut dcol = vec![T::zero(); p * rows];
        let mut dx = want_dx.then(|| vec![T::zero(); x.len()]);
        for s in 0..n {
            let xs = &x[s * self.in_ch * h * w..(s + 1) * self.in_ch * h * w];
            let dys = &dy[s * self.out_ch * p..(s + 1) * self.out_ch * p];
            if let Some(g) = grad.as_deref_mut() {
                self.im2col_t(xs, h, w, &mut col);
                matmul(false, false, self.out_ch, p, rows, T::one(), dys, &col, T::one(), &mut g.w);
                for (o, chunk) in dys.chunks_exact(p).enumerate() {
                    g.b[o] += chunk.iter().copied().sum::<T>();
                }
            }
            if let Some(dx) = dx.as_mut() {
                matmul(true, false, p, self.out_ch, rows, T::one(), dys, &self.w, T::zero(), &mut dcol);
                self.col2im_t(&dcol, h, w, &mut dx[s * self.in_ch * h * w..(s + 1) * self.in_ch * h * w]);
            }
        }
        dx
    }
}

impl<T: Scalar> Params<T> for Conv2d<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![&self.w, &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.w, &mut self.b]
    }
}
