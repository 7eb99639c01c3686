use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Shape of an LSTM encoder plus linear head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LstmDims {
    /// Features per input step (`D_in`).
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Forecast horizons (`T_p`).
    pub lead: usize,
    /// Target series per horizon (`K`).
    pub outputs: usize,
}

impl LstmDims {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 || self.input == 0 || self.lead == 0 || self.outputs == 0 {
            return Err(Error::Config(format!("all LSTM dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Width of the head output, `T_p * K`.
    pub fn head_out(&self) -> usize {
        self.lead * self.outputs
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 { self.input } else { self.hidden }
    }
}

/// One LSTM layer. Gate blocks are packed in the order input, forget,
/// cell candidate, output (`i, f, g, o`).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams<T> {
    /// `4H x D`
    pub w_x: Array2<T>,
    /// `4H x H`
    pub w_h: Array2<T>,
    /// `4H`
    pub b: Array1<T>,
}

impl<T: Scalar> LstmLayerParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayerParams {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_x.ncols()
    }
}

/// All trainable weights. Gradients and Adam moments use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub dims: LstmDims,
    pub layers: Vec<LstmLayerParams<T>>,
    /// `(T_p * K) x H`
    pub head_w: Array2<T>,
    /// `T_p * K`
    pub head_b: Array1<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(dims: LstmDims) -> Result<Self> {
        dims.validate()?;
        Ok(LstmParams {
            dims,
            layers: (0..dims.layers).map(|l| LstmLayerParams::zeros(dims.layer_input(l), dims.hidden)).collect(),
            head_w: Array2::zeros((dims.head_out(), dims.hidden)),
            head_b: Array1::zeros(dims.head_out()),
        })
    }

    /// Every weight and bias drawn i.i.d. from `U[-1/sqrt(H), 1/sqrt(H)]`,
    /// in declaration order, from a ChaCha8 stream seeded with `seed`.
    pub fn init(dims: LstmDims, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        let bound = 1.0 / (dims.hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::from_f64_lossy(dist.sample(&mut rng));
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims).expect("dims already validated")
    }

    /// Named flat views of every tensor, in serialization order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layers.{l}.w_x"), layer.w_x.as_slice().expect("standard layout")));
            out.push((format!("layers.{l}.w_h"), layer.w_h.as_slice().expect("standard layout")));
            out.push((format!("layers.{l}.b"), layer.b.as_slice().expect("standard layout")));
        }
        out.push(("head_w".into(), self.head_w.as_slice().expect("standard layout")));
        out.push(("head_b".into(), self.head_b.as_slice().expect("standard layout")));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{l}.w_x"), layer.w_x.as_slice_mut().expect("standard layout")));
            out.push((format!("layers.{l}.w_h"), layer.w_h.as_slice_mut().expect("standard layout")));
            out.push((format!("layers.{l}.b"), layer.b.as_slice_mut().expect("standard layout")));
        }
        out.push(("head_w".into(), self.head_w.as_slice_mut().expect("standard layout")));
        out.push(("head_b".into(), self.head_b.as_slice_mut().expect("standard layout")));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> LstmParams<U> {
        let c2 = |a: &Array2<T>| a.mapv(|v| U::from_f64_lossy(v.to_f64_lossy()));
        let c1 = |a: &Array1<T>| a.mapv(|v| U::from_f64_lossy(v.to_f64_lossy()));
        LstmParams {
            dims: self.dims,
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayerParams { w_x: c2(&l.w_x), w_h: c2(&l.w_h), b: c1(&l.b) })
                .collect(),
            head_w: c2(&self.head_w),
            head_b: c1(&self.head_b),
        }
    }

    /// Checks that tensor shapes agree with `dims`.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        d.validate()?;
        if self.layers.len() != d.layers {
            return Err(Error::Shape(format!("{} layers, dims say {}", self.layers.len(), d.layers)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let want = (4 * d.hidden, d.layer_input(l));
            if layer.w_x.dim() != want || layer.w_h.dim() != (4 * d.hidden, d.hidden) || layer.b.len() != 4 * d.hidden {
                return Err(Error::Shape(format!("layer {l} tensors inconsistent with {d:?}")));
            }
        }
        if self.head_w.dim() != (d.head_out(), d.hidden) || self.head_b.len() != d.head_out() {
            return Err(Error::Shape(format!("head tensors inconsistent with {d:?}")));
        }
        Ok(())
    }

    /// Order-sensitive hash of the raw parameter bits.
    pub(crate) fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, t) in self.tensors() {
            for v in t {
                h ^= v.to_f64_lossy().to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
