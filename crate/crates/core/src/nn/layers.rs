use rand::Rng;

use super::conv::gemm;
use super::{Module, Param, Tensor};

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
    cache: Option<(Tensor, Vec<f32>)>,
}

impl BatchNorm2d {
    pub fn new(c: usize) -> Self {
        BatchNorm2d {
            gamma: Param::filled(c, 1.0),
            beta: Param::zeros(c),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    /// Inference: normalize with running statistics.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        for ch in 0..x.c {
            let inv = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let (g, b, m) = (
                self.gamma.value[ch],
                self.beta.value[ch],
                self.running_mean[ch],
            );
            for i in 0..x.n {
                y.channel_mut(i, ch)
                    .iter_mut()
                    .for_each(|v| *v = (*v - m) * inv * g + b);
            }
        }
        y
    }

    /// Training: normalize with batch statistics and update the running estimates.
    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let count = (x.n * x.plane()) as f64;
        let mut xhat = x.clone();
        let mut y = x.clone();
        let mut inv_std = vec![0.0; x.c];
        for ch in 0..x.c {
            let (mut sum, mut sq) = (0.0f64, 0.0f64);
            for i in 0..x.n {
                for &v in x.channel(i, ch) {
                    sum += v as f64;
                    sq += (v as f64) * (v as f64);
                }
            }
            let mean = sum / count;
            let var = (sq / count - mean * mean).max(0.0);
            let inv = 1.0 / (var + self.eps as f64).sqrt();
            inv_std[ch] = inv as f32;
            let unbiased = if count > 1.0 {
                var * count / (count - 1.0)
            } else {
                var
            };
            self.running_mean[ch] =
                (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean as f32;
            self.running_var[ch] =
                (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased as f32;
            let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
            for i in 0..x.n {
                let xh = xhat.channel_mut(i, ch);
                xh.iter_mut()
                    .for_each(|v| *v = ((*v as f64 - mean) * inv) as f32);
                let yc = y.channel_mut(i, ch);
                yc.iter_mut()
                    .zip(xh.iter())
                    .for_each(|(o, h)| *o = h * g + b);
            }
        }
        self.cache = Some((xhat, inv_std));
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let (xhat, inv_std) = self
            .cache
            .take()
            .expect("batchnorm backward without forward_train");
        let count = (dy.n * dy.plane()) as f32;
        let mut dx = dy.zeros_like();
        for ch in 0..dy.c {
            let g = self.gamma.value[ch];
            let (mut sum_dy, mut sum_dy_xhat) = (0.0f32, 0.0f32);
            for i in 0..dy.n {
                for (d, h) in dy.channel(i, ch).iter().zip(xhat.channel(i, ch)) {
                    sum_dy += d;
                    sum_dy_xhat += d * h;
                }
            }
            self.gamma.grad[ch] += sum_dy_xhat;
            self.beta.grad[ch] += sum_dy;
            let k = g * inv_std[ch] / count;
            for i in 0..dy.n {
                let d = dy.channel(i, ch);
                let h = xhat.channel(i, ch);
                let out = dx.channel_mut(i, ch);
                for t in 0..out.len() {
                    out[t] = k * (count * d[t] - sum_dy - h[t] * sum_dy_xhat);
                }
            }
        }
        dx
    }
}

impl Module for BatchNorm2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&Vec<f32>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

/// Pointwise activations. `slope` is only used by `LeakyRelu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f32),
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::LeakyRelu(a) => {
                if v > 0.0 {
                    v
                } else {
                    a * v
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => sigmoid(v),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn grad(self, x: f32, y: f32) -> f32 {
        match self {
            Activation::Relu => (x > 0.0) as u8 as f32,
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct Act {
    pub kind: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Act {
    pub fn new(kind: Activation) -> Self {
        Act { kind, cache: None }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.map(|v| self.kind.apply(v))
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = self.forward(x);
        self.cache = Some((x.clone(), y.clone()));
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let (x, y) = self
            .cache
            .take()
            .expect("activation backward without forward_train");
        let mut dx = dy.clone();
        for t in 0..dx.data.len() {
            dx.data[t] *= self.kind.grad(x.data[t], y.data[t]);
        }
        dx
    }
}

/// Inverted dropout; identity outside training.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f32,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f32) -> Self {
        Dropout { rate, mask: None }
    }

    pub fn forward_train(&mut self, x: &Tensor, rng: &mut impl Rng) -> Tensor {
        if self.rate <= 0.0 {
            self.mask = Some(vec![1.0; x.data.len()]);
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f32> = (0..x.data.len())
            .map(|_| {
                if rng.random::<f32>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let mut y = x.clone();
        y.data.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let mask = self
            .mask
            .take()
            .expect("dropout backward without forward_train");
        let mut dx = dy.clone();
        dx.data.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        dx
    }
}

/// 2×2 max pooling with stride 2 (odd trailing rows/cols dropped).
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<(Tensor, Vec<usize>)>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        MaxPool2::default()
    }

    fn run(x: &Tensor) -> (Tensor, Vec<usize>) {
        let (ho, wo) = (x.h / 2, x.w / 2);
        let mut y = Tensor::zeros(x.n, x.c, ho, wo);
        let mut arg = vec![0usize; y.data.len()];
        let mut t = 0;
        for i in 0..x.n {
            for ch in 0..x.c {
                let base = (i * x.c + ch) * x.plane();
                let src = x.channel(i, ch);
                for oi in 0..ho {
                    for oj in 0..wo {
                        let mut best = (2 * oi) * x.w + 2 * oj;
                        for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = (2 * oi + di) * x.w + 2 * oj + dj;
                            if src[idx] > src[best] {
                                best = idx;
                            }
                        }
                        y.data[t] = src[best];
                        arg[t] = base + best;
                        t += 1;
                    }
                }
            }
        }
        (y, arg)
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        Self::run(x).0
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let (y, arg) = Self::run(x);
        self.cache = Some((x.zeros_like(), arg));
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let (mut dx, arg) = self
            .cache
            .take()
            .expect("maxpool backward without forward_train");
        for (g, &a) in dy.data.iter().zip(&arg) {
            dx.data[a] += g;
        }
        dx
    }
}

/// Fully connected layer on flattened samples; output shape `[n, out, 1, 1]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub inp: usize,
    pub out: usize,
    /// `[out, inp]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Linear {
    pub fn new(inp: usize, out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            inp,
            out,
            weight: Param::he_normal(inp * out, inp, rng),
            bias: Param::zeros(out),
            input: None,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.sample_len(), self.inp, "linear input size");
        let mut y = Tensor::zeros(x.n, self.out, 1, 1);
        for i in 0..x.n {
            y.sample_mut(i).copy_from_slice(&self.bias.value);
        }
        gemm(
            x.n,
            self.inp,
            self.out,
            &x.data,
            false,
            &self.weight.value,
            true,
            1.0,
            &mut y.data,
        );
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
            .expect("linear backward without forward_train");
        for i in 0..x.n {
            self.bias
                .grad
                .iter_mut()
                .zip(dy.sample(i))
                .for_each(|(g, d)| *g += d);
        }
        gemm(
            self.out,
            x.n,
            self.inp,
            &dy.data,
            true,
            &x.data,
            false,
            1.0,
            &mut self.weight.grad,
        );
        let mut dx = x.zeros_like();
        gemm(
            x.n,
            self.out,
            self.inp,
            &dy.data,
            false,
            &self.weight.value,
            false,
            0.0,
            &mut dx.data,
        );
        dx
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
