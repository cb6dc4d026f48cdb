use rand::Rng;

use super::{
    Act, BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, Linear, MaxPool2, Module, Param, Tensor,
};

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv2d),
    ConvT(ConvTranspose2d),
    Bn(BatchNorm2d),
    Act(Act),
    Dropout(Dropout),
    Pool(MaxPool2),
    Linear(Linear),
}

/// Layers applied in order; the unit every network here is assembled from.
#[derive(Debug, Clone, Default)]
pub struct Seq {
    pub layers: Vec<Layer>,
}

impl Seq {
    pub fn new() -> Self {
        Seq::default()
    }

    pub fn push(mut self, layer: Layer) -> Self {
        self.layers.push(layer);
        self
    }

    /// Inference pass: running batch-norm statistics, dropout disabled.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv(l) => l.forward(&h),
                Layer::ConvT(l) => l.forward(&h),
                Layer::Bn(l) => l.forward(&h),
                Layer::Act(l) => l.forward(&h),
                Layer::Dropout(_) => h,
                Layer::Pool(l) => l.forward(&h),
                Layer::Linear(l) => l.forward(&h),
            };
        }
        h
    }

    pub fn forward_train(&mut self, x: &Tensor, rng: &mut impl Rng) -> Tensor {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv(l) => l.forward_train(&h),
                Layer::ConvT(l) => l.forward_train(&h),
                Layer::Bn(l) => l.forward_train(&h),
                Layer::Act(l) => l.forward_train(&h),
                Layer::Dropout(l) => l.forward_train(&h, rng),
                Layer::Pool(l) => l.forward_train(&h),
                Layer::Linear(l) => l.forward_train(&h),
            };
        }
        h
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let mut d = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            d = match layer {
                Layer::Conv(l) => l.backward(&d),
                Layer::ConvT(l) => l.backward(&d),
                Layer::Bn(l) => l.backward(&d),
                Layer::Act(l) => l.backward(&d),
                Layer::Dropout(l) => l.backward(&d),
                Layer::Pool(l) => l.backward(&d),
                Layer::Linear(l) => l.backward(&d),
            };
        }
        d
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Bn(_)))
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Dropout(_)))
    }
}

impl Module for Seq {
    fn params(&self) -> Vec<&Param> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Conv(l) => l.params(),
                Layer::ConvT(l) => l.params(),
                Layer::Bn(l) => l.params(),
                Layer::Linear(l) => l.params(),
                _ => Vec::new(),
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                Layer::Conv(l) => l.params_mut(),
                Layer::ConvT(l) => l.params_mut(),
                Layer::Bn(l) => l.params_mut(),
                Layer::Linear(l) => l.params_mut(),
                _ => Vec::new(),
            })
            .collect()
    }

    fn buffers(&self) -> Vec<&Vec<f32>> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Bn(l) => l.buffers(),
                _ => Vec::new(),
            })
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                Layer::Bn(l) => l.buffers_mut(),
                _ => Vec::new(),
            })
            .collect()
    }
}

/// Implements [`Module`] for a struct by chaining the listed [`Seq`]-like fields.
#[macro_export]
macro_rules! impl_module_fields {
    ($ty:ty, $($field:ident),+) => {
        impl $crate::nn::Module for $ty {
            fn params(&self) -> Vec<&$crate::nn::Param> {
                let mut v = Vec::new();
                $(v.extend(self.$field.iter().flat_map(|m| $crate::nn::Module::params(m)));)+
                v
            }
            fn params_mut(&mut self) -> Vec<&mut $crate::nn::Param> {
                let mut v = Vec::new();
                $(v.extend(self.$field.iter_mut().flat_map(|m| $crate::nn::Module::params_mut(m)));)+
                v
            }
            fn buffers(&self) -> Vec<&Vec<f32>> {
                let mut v = Vec::new();
                $(v.extend(self.$field.iter().flat_map(|m| $crate::nn::Module::buffers(m)));)+
                v
            }
            fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
                let mut v = Vec::new();
                $(v.extend(self.$field.iter_mut().flat_map(|m| $crate::nn::Module::buffers_mut(m)));)+
                v
            }
        }
    };
}

/// Implements [`Module`] for a struct by forwarding to one field.
#[macro_export]
macro_rules! delegate_module {
    ($ty:ty, $field:ident) => {
        impl $crate::nn::Module for $ty {
            fn params(&self) -> Vec<&$crate::nn::Param> {
                $crate::nn::Module::params(&self.$field)
            }
            fn params_mut(&mut self) -> Vec<&mut $crate::nn::Param> {
                $crate::nn::Module::params_mut(&mut self.$field)
            }
            fn buffers(&self) -> Vec<&Vec<f32>> {
                $crate::nn::Module::buffers(&self.$field)
            }
            fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
                $crate::nn::Module::buffers_mut(&mut self.$field)
            }
        }
    };
}
