//! Strided 2D convolution and its transpose, lowered to sgemm through im2col.

use rand::Rng;

use super::{Module, Param, Tensor};

/// Output length of a strided convolution along one axis.
pub fn conv_out(len: usize, k: usize, s: usize, p: usize) -> usize {
    assert!(
        len + 2 * p >= k,
        "kernel {k} larger than padded input {len}+2*{p}"
    );
    (len + 2 * p - k) / s + 1
}

#[derive(Debug, Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    ho: usize,
    wo: usize,
}

/// cols[(c,ki,kj), (oi,oj)] = x[c, oi*s-p+ki, oj*s-p+kj] (zero outside).
fn im2col(x: &[f32], g: Geom, cols: &mut [f32]) {
    let Geom {
        c,
        h,
        w,
        k,
        s,
        p,
        ho,
        wo,
    } = g;
    let ncol = ho * wo;
    debug_assert_eq!(cols.len(), c * k * k * ncol);
    for ch in 0..c {
        let xc = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let dst = &mut cols[row * ncol..(row + 1) * ncol];
                for oi in 0..ho {
                    let ii = (oi * s + ki) as isize - p as isize;
                    let drow = &mut dst[oi * wo..(oi + 1) * wo];
                    if ii < 0 || ii >= h as isize {
                        drow.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let xrow = &xc[ii as usize * w..(ii as usize + 1) * w];
                    for (oj, d) in drow.iter_mut().enumerate() {
                        let jj = (oj * s + kj) as isize - p as isize;
                        *d = if jj < 0 || jj >= w as isize {
                            0.0
                        } else {
                            xrow[jj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add the adjoint of [`im2col`] into `x`.
fn col2im(cols: &[f32], g: Geom, x: &mut [f32]) {
    let Geom {
        c,
        h,
        w,
        k,
        s,
        p,
        ho,
        wo,
    } = g;
    let ncol = ho * wo;
    for ch in 0..c {
        let xc = &mut x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &cols[row * ncol..(row + 1) * ncol];
                for oi in 0..ho {
                    let ii = (oi * s + ki) as isize - p as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let xrow = &mut xc[ii as usize * w..(ii as usize + 1) * w];
                    let srow = &src[oi * wo..(oi + 1) * wo];
                    for (oj, v) in srow.iter().enumerate() {
                        let jj = (oj * s + kj) as isize - p as isize;
                        if jj >= 0 && jj < w as isize {
                            xrow[jj as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`, row-major with explicit transposes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    ta: bool,
    b: &[f32],
    tb: bool,
    beta: f32,
    c: &mut [f32],
) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths checked above; strides describe row-major m×k, k×n, m×n layouts.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    /// `[out_c, in_c*k*k]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        s: usize,
        p: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_c * k * k;
        Conv2d {
            in_c,
            out_c,
            k,
            s,
            p,
            weight: Param::he_normal(out_c * fan_in, fan_in, rng),
            bias: Param::zeros(out_c),
            input: None,
        }
    }

    fn geom(&self, x: &Tensor) -> Geom {
        let ho = conv_out(x.h, self.k, self.s, self.p);
        let wo = conv_out(x.w, self.k, self.s, self.p);
        Geom {
            c: self.in_c,
            h: x.h,
            w: x.w,
            k: self.k,
            s: self.s,
            p: self.p,
            ho,
            wo,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.in_c, "conv2d input channels");
        let g = self.geom(x);
        let ckk = self.in_c * self.k * self.k;
        let ncol = g.ho * g.wo;
        let mut cols = vec![0.0; ckk * ncol];
        let mut y = Tensor::zeros(x.n, self.out_c, g.ho, g.wo);
        for i in 0..x.n {
            im2col(x.sample(i), g, &mut cols);
            let yi = y.sample_mut(i);
            for (o, b) in self.bias.value.iter().enumerate() {
                yi[o * ncol..(o + 1) * ncol]
                    .iter_mut()
                    .for_each(|v| *v = *b);
            }
            gemm(
                self.out_c,
                ckk,
                ncol,
                &self.weight.value,
                false,
                &cols,
                false,
                1.0,
                yi,
            );
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward(x);
        self.input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self
            .input
            .take()
            .expect("conv2d backward without forward_train");
        let g = self.geom(&x);
        let ckk = self.in_c * self.k * self.k;
        let ncol = g.ho * g.wo;
        let mut cols = vec![0.0; ckk * ncol];
        let mut dcols = vec![0.0; ckk * ncol];
        let mut dx = x.zeros_like();
        for i in 0..x.n {
            let dyi = dy.sample(i);
            im2col(x.sample(i), g, &mut cols);
            gemm(
                self.out_c,
                ncol,
                ckk,
                dyi,
                false,
                &cols,
                true,
                1.0,
                &mut self.weight.grad,
            );
            for o in 0..self.out_c {
                self.bias.grad[o] += dyi[o * ncol..(o + 1) * ncol].iter().sum::<f32>();
            }
            gemm(
                ckk,
                self.out_c,
                ncol,
                &self.weight.value,
                true,
                dyi,
                false,
                0.0,
                &mut dcols,
            );
            col2im(&dcols, g, dx.sample_mut(i));
        }
        dx
    }
}

impl Module for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Transposed convolution: the adjoint of [`Conv2d`]'s input map, plus bias.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    /// `[in_c, out_c*k*k]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl ConvTranspose2d {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        s: usize,
        p: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_c * k * k / (s * s)).max(1);
        ConvTranspose2d {
            in_c,
            out_c,
            k,
            s,
            p,
            weight: Param::he_normal(in_c * out_c * k * k, fan_in, rng),
            bias: Param::zeros(out_c),
            input: None,
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len - 1) * self.s + self.k - 2 * self.p
    }

    fn geom(&self, x: &Tensor) -> Geom {
        let h = self.out_len(x.h);
        let w = self.out_len(x.w);
        Geom {
            c: self.out_c,
            h,
            w,
            k: self.k,
            s: self.s,
            p: self.p,
            ho: x.h,
            wo: x.w,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.in_c, "conv_transpose2d input channels");
        let g = self.geom(x);
        let okk = self.out_c * self.k * self.k;
        let ncol = x.h * x.w;
        let mut cols = vec![0.0; okk * ncol];
        let mut y = Tensor::zeros(x.n, self.out_c, g.h, g.w);
        let plane = g.h * g.w;
        for i in 0..x.n {
            gemm(
                okk,
                self.in_c,
                ncol,
                &self.weight.value,
                true,
                x.sample(i),
                false,
                0.0,
                &mut cols,
            );
            let yi = y.sample_mut(i);
            col2im(&cols, g, yi);
            for (o, b) in self.bias.value.iter().enumerate() {
                yi[o * plane..(o + 1) * plane]
                    .iter_mut()
                    .for_each(|v| *v += *b);
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward(x);
        self.input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self
            .input
            .take()
            .expect("conv_transpose2d backward without forward_train");
        let g = self.geom(&x);
        let okk = self.out_c * self.k * self.k;
        let ncol = x.h * x.w;
        let plane = g.h * g.w;
        let mut dcols = vec![0.0; okk * ncol];
        let mut dx = x.zeros_like();
        for i in 0..x.n {
            let dyi = dy.sample(i);
            im2col(dyi, g, &mut dcols);
            gemm(
                self.in_c,
                okk,
                ncol,
                &self.weight.value,
                false,
                &dcols,
                false,
                0.0,
                dx.sample_mut(i),
            );
            gemm(
                self.in_c,
                ncol,
                okk,
                x.sample(i),
                false,
                &dcols,
                true,
                1.0,
                &mut self.weight.grad,
            );
            for o in 0..self.out_c {
                self.bias.grad[o] += dyi[o * plane..(o + 1) * plane].iter().sum::<f32>();
            }
        }
        dx
    }
}

impl Module for ConvTranspose2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
