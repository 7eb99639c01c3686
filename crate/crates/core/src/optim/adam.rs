use num_traits::{Float, One};

use crate::nn::LstmParams;
use crate::{Error, Result, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// A set of named flat tensors that an optimizer can update in place.
pub trait Parameters: Clone {
    type Elem: Scalar;

    fn tensors(&self) -> Vec<(String, &[Self::Elem])>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut [Self::Elem])>;
    fn zeros_like(&self) -> Self;
}

impl<T: Scalar> Parameters for LstmParams<T> {
    type Elem = T;

    fn tensors(&self) -> Vec<(String, &[T])> {
        LstmParams::tensors(self)
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        LstmParams::tensors_mut(self)
    }

    fn zeros_like(&self) -> Self {
        LstmParams::zeros_like(self)
    }
}

/// A single flat tensor named `param`.
impl<T: Scalar> Parameters for Vec<T> {
    type Elem = T;

    fn tensors(&self) -> Vec<(String, &[T])> {
        vec![("param".into(), self.as_slice())]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        vec![("param".into(), self.as_mut_slice())]
    }

    fn zeros_like(&self) -> Self {
        vec![T::zero(); self.len()]
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    pub step: u64,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }
}

/// One Adam update with coupled L2 weight decay:
///
/// ```text
/// g <- g + wd * p
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
///
/// The step counter `t` is incremented before bias correction. Parameters
/// are left untouched if any gradient is non-finite.
pub fn adam_step<P: Parameters>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState<P>,
    lr: P::Elem,
    weight_decay: P::Elem,
) -> Result<()> {
    let g_tensors = grads.tensors();
    for (name, g) in &g_tensors {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    let c = |v: f64| P::Elem::from_f64_lossy(v);
    let (b1, b2, eps) = (c(BETA1), c(BETA2), c(EPSILON));
    let one = P::Elem::one();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);

    let p_tensors = params.tensors_mut();
    let m_tensors = state.m.tensors_mut();
    let v_tensors = state.v.tensors_mut();
    for (((_, p), (_, g)), ((_, m), (_, v))) in
        p_tensors.into_iter().zip(g_tensors).zip(m_tensors.into_iter().zip(v_tensors))
    {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let g = g + weight_decay * *p;
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
