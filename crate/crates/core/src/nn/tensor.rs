use serde::{Deserialize, Serialize};

/// Dense NCHW `f32` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(
            data.len(),
            n * c * h * w,
            "tensor data length does not match shape"
        );
        Tensor { n, c, h, w, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(self.n, self.c, self.h, self.w)
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f32] {
        let s = self.sample_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn channel(&self, i: usize, ch: usize) -> &[f32] {
        let p = self.plane();
        let off = i * self.sample_len() + ch * p;
        &self.data[off..off + p]
    }

    pub fn channel_mut(&mut self, i: usize, ch: usize) -> &mut [f32] {
        let p = self.plane();
        let off = i * self.sample_len() + ch * p;
        &mut self.data[off..off + p]
    }

    /// Stack single-sample tensors into a batch.
    pub fn stack(items: &[&Tensor]) -> Self {
        let first = items.first().expect("stack of zero tensors");
        let mut data = Vec::with_capacity(items.len() * first.sample_len());
        for t in items {
            assert_eq!((t.c, t.h, t.w), (first.c, first.h, first.w));
            data.extend_from_slice(&t.data);
        }
        let n = items.iter().map(|t| t.n).sum();
        Tensor {
            n,
            c: first.c,
            h: first.h,
            w: first.w,
            data,
        }
    }

    /// Copy out sample `i` as a batch of one.
    pub fn take(&self, i: usize) -> Tensor {
        Tensor::from_vec(1, self.c, self.h, self.w, self.sample(i).to_vec())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Default for Tensor {
    fn default() -> Self {
        Tensor::zeros(0, 0, 0, 0)
    }
}

/// Concatenate along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(
        (a.n, a.h, a.w),
        (b.n, b.h, b.w),
        "concat: batch/spatial mismatch"
    );
    let mut out = Tensor::zeros(a.n, a.c + b.c, a.h, a.w);
    let sa = a.sample_len();
    for i in 0..a.n {
        let dst = out.sample_mut(i);
        dst[..sa].copy_from_slice(a.sample(i));
        dst[sa..].copy_from_slice(b.sample(i));
    }
    out
}

/// Inverse of [`concat_channels`]: split `d` into its first `ca` channels and the rest.
pub fn split_channels(d: &Tensor, ca: usize) -> (Tensor, Tensor) {
    let cb = d.c - ca;
    let mut a = Tensor::zeros(d.n, ca, d.h, d.w);
    let mut b = Tensor::zeros(d.n, cb, d.h, d.w);
    let sa = a.sample_len();
    for i in 0..d.n {
        let src = d.sample(i);
        a.sample_mut(i).copy_from_slice(&src[..sa]);
        b.sample_mut(i).copy_from_slice(&src[sa..]);
    }
    (a, b)
}

pub fn add_assign(dst: &mut Tensor, src: &Tensor) {
    assert!(dst.same_shape(src));
    dst.data
        .iter_mut()
        .zip(&src.data)
        .for_each(|(d, s)| *d += s);
}
