use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{LstmLayerParams, LstmParams};
use crate::dataset::WindowItem;
use crate::{Error, Result, Scalar};

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// One LSTM step for a single sample:
///
/// ```text
/// [a_i; a_f; a_g; a_o] = W_x x + W_h h + b
/// c' = sigmoid(a_f) * c + sigmoid(a_i) * tanh(a_g)
/// h' = sigmoid(a_o) * tanh(c')
/// ```
pub fn cell_forward<T: Scalar>(
    x: ArrayView1<T>,
    h: ArrayView1<T>,
    c: ArrayView1<T>,
    p: &LstmLayerParams<T>,
) -> Result<(Array1<T>, Array1<T>)> {
    let hid = p.hidden();
    if x.len() != p.input() || h.len() != hid || c.len() != hid {
        return Err(Error::Shape(format!(
            "cell expects x[{}], h[{hid}], c[{hid}]; got x[{}], h[{}], c[{}]",
            p.input(),
            x.len(),
            h.len(),
            c.len()
        )));
    }
    let a = p.w_x.dot(&x) + p.w_h.dot(&h) + &p.b;
    let mut c_next = Array1::zeros(hid);
    let mut h_next = Array1::zeros(hid);
    for j in 0..hid {
        let i = sigmoid(a[j]);
        let f = sigmoid(a[hid + j]);
        let g = a[2 * hid + j].tanh();
        let o = sigmoid(a[3 * hid + j]);
        c_next[j] = f * c[j] + i * g;
        h_next[j] = o * c_next[j].tanh();
    }
    Ok((h_next, c_next))
}

/// Per-layer activations for one batch, kept for backpropagation.
#[derive(Clone, Debug)]
struct LayerCache<T> {
    /// Layer input at each step, `B x D_l`.
    inputs: Vec<Array2<T>>,
    /// Activated gates `[i, f, g, o]` at each step, `B x 4H`.
    gates: Vec<Array2<T>>,
    /// Cell state after each step, `B x H`.
    cells: Vec<Array2<T>>,
    /// `tanh` of the cell state after each step.
    tanh_cells: Vec<Array2<T>>,
    /// Hidden state after each step.
    hidden: Vec<Array2<T>>,
}

/// Activations from a forward pass, consumed by [`backward_batch`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    fingerprint: u64,
    batch: usize,
    layers: Vec<LayerCache<T>>,
}

impl<T> ForwardCache<T> {
    pub fn steps(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs.len())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Regroups per-sample `S x D` windows into per-step `B x D` matrices.
pub fn stack_steps<T: Scalar>(inputs: &[ArrayView2<T>]) -> Result<Vec<Array2<T>>> {
    let first = inputs.first().ok_or(Error::Empty("batch"))?;
    let (steps, d) = first.dim();
    if let Some(bad) = inputs.iter().find(|x| x.dim() != (steps, d)) {
        return Err(Error::Shape(format!("batch mixes {:?} and {:?} windows", (steps, d), bad.dim())));
    }
    Ok((0..steps)
        .map(|t| {
            let mut m = Array2::zeros((inputs.len(), d));
            for (b, x) in inputs.iter().enumerate() {
                m.row_mut(b).assign(&x.row(t));
            }
            m
        })
        .collect())
}

pub fn stack_items<T: Scalar>(items: &[&WindowItem<T>]) -> Result<Vec<Array2<T>>> {
    stack_steps(&items.iter().map(|i| i.input.view()).collect::<Vec<_>>())
}

/// Runs a batch through the stacked LSTM from zero state and applies the
/// head to the top layer's final hidden state.
///
/// `steps[t]` is `B x D_in`. Returns `B x (T_p * K)` with the forecast for
/// horizon `h`, target `k` at column `h * K + k`.
pub fn forward_batch<T: Scalar>(steps: &[Array2<T>], p: &LstmParams<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
    let d = p.dims;
    let first = steps.first().ok_or(Error::Empty("input sequence"))?;
    let batch = first.nrows();
    if let Some(bad) = steps.iter().find(|x| x.dim() != (batch, d.input)) {
        return Err(Error::Shape(format!("input step {:?}, model expects {:?}", bad.dim(), (batch, d.input))));
    }
    let hid = d.hidden;
    let mut layers = Vec::with_capacity(d.layers);
    let mut layer_in: Vec<Array2<T>> = steps.to_vec();
    for lp in &p.layers {
        let mut cache = LayerCache {
            inputs: layer_in,
            gates: Vec::with_capacity(steps.len()),
            cells: Vec::with_capacity(steps.len()),
            tanh_cells: Vec::with_capacity(steps.len()),
            hidden: Vec::with_capacity(steps.len()),
        };
        let w_x_t = lp.w_x.t();
        let w_h_t = lp.w_h.t();
        for t in 0..cache.inputs.len() {
            let mut a = cache.inputs[t].dot(&w_x_t);
            if t > 0 {
                a += &cache.hidden[t - 1].dot(&w_h_t);
            }
            a += &lp.b;
            a.slice_mut(s![.., 0..2 * hid]).mapv_inplace(sigmoid);
            a.slice_mut(s![.., 2 * hid..3 * hid]).mapv_inplace(T::tanh);
            a.slice_mut(s![.., 3 * hid..]).mapv_inplace(sigmoid);

            let mut c = &a.slice(s![.., 0..hid]) * &a.slice(s![.., 2 * hid..3 * hid]);
            if t > 0 {
                c += &(&a.slice(s![.., hid..2 * hid]) * &cache.cells[t - 1]);
            }
            let tc = c.mapv(T::tanh);
            let h = &a.slice(s![.., 3 * hid..]) * &tc;
            cache.gates.push(a);
            cache.cells.push(c);
            cache.tanh_cells.push(tc);
            cache.hidden.push(h);
        }
        layer_in = cache.hidden.clone();
        layers.push(cache);
    }
    let top = layers.last().unwrap().hidden.last().unwrap();
    let out = top.dot(&p.head_w.t()) + &p.head_b;
    Ok((out, ForwardCache { fingerprint: p.fingerprint(), batch, layers }))
}

/// Single-window forward pass: `(T_h + 1) x D_in` in, `T_p x K` out.
pub fn forward<T: Scalar>(input: ArrayView2<T>, p: &LstmParams<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
    let (out, cache) = forward_batch(&stack_steps(&[input])?, p)?;
    let pred = out
        .into_shape_with_order((p.dims.lead, p.dims.outputs))
        .expect("head width is lead * outputs");
    Ok((pred, cache))
}

/// Forecasts for many windows, `B x (T_p * K)`, computed in chunks without
/// keeping activations.
pub fn predict_items<T: Scalar>(items: &[WindowItem<T>], p: &LstmParams<T>) -> Result<Array2<T>> {
    const CHUNK: usize = 1024;
    let mut out = Array2::zeros((items.len(), p.dims.head_out()));
    for (k, chunk) in items.chunks(CHUNK).enumerate() {
        let refs: Vec<&WindowItem<T>> = chunk.iter().collect();
        let (pred, _) = forward_batch(&stack_items(&refs)?, p)?;
        out.slice_mut(s![k * CHUNK..k * CHUNK + chunk.len(), ..]).assign(&pred);
    }
    Ok(out)
}

/// Exact gradients of a scalar loss with respect to every parameter, given
/// `grad_out = dloss/dout` of shape `B x (T_p * K)`. Gradients are summed
/// over the batch.
pub fn backward_batch<T: Scalar>(
    cache: &ForwardCache<T>,
    grad_out: ArrayView2<T>,
    p: &LstmParams<T>,
) -> Result<LstmParams<T>> {
    let d = p.dims;
    if cache.fingerprint != p.fingerprint() || cache.layers.len() != d.layers {
        return Err(Error::Shape("forward cache was produced with different parameters".into()));
    }
    if grad_out.dim() != (cache.batch, d.head_out()) {
        return Err(Error::Shape(format!(
            "output gradient {:?}, expected {:?}",
            grad_out.dim(),
            (cache.batch, d.head_out())
        )));
    }
    let hid = d.hidden;
    let steps = cache.steps();
    let mut g = p.zeros_like();

    let top = cache.layers.last().unwrap().hidden.last().unwrap();
    g.head_w = grad_out.t().dot(top);
    g.head_b = grad_out.sum_axis(Axis(0));

    // Gradient flowing into each layer's hidden output at each step.
    let mut dh_ext: Vec<Option<Array2<T>>> = vec![None; steps];
    dh_ext[steps - 1] = Some(grad_out.dot(&p.head_w));

    for l in (0..d.layers).rev() {
        let lc = &cache.layers[l];
        let lp = &p.layers[l];
        let gl = &mut g.layers[l];
        let mut dh_next: Option<Array2<T>> = None;
        let mut dc_next: Option<Array2<T>> = None;
        let mut dx: Vec<Option<Array2<T>>> = vec![None; steps];

        for t in (0..steps).rev() {
            let mut dh = match (dh_ext[t].take(), dh_next.take()) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => Array2::zeros((cache.batch, hid)),
            };
            let gates = &lc.gates[t];
            let i = gates.slice(s![.., 0..hid]);
            let f = gates.slice(s![.., hid..2 * hid]);
            let gg = gates.slice(s![.., 2 * hid..3 * hid]);
            let o = gates.slice(s![.., 3 * hid..]);
            let tc = &lc.tanh_cells[t];

            // dc = dc_next + dh * o * (1 - tanh(c)^2)
            let mut dc = dc_next.take().unwrap_or_else(|| Array2::zeros((cache.batch, hid)));
            Zip::from(&mut dc).and(&dh).and(&o).and(tc).for_each(|dc, &dh, &o, &tc| {
                *dc += dh * o * (T::one() - tc * tc);
            });

            let mut da = Array2::<T>::zeros((cache.batch, 4 * hid));
            {
                let (mut da_if, mut da_go) = da.view_mut().split_at(Axis(1), 2 * hid);
                let (mut da_i, mut da_f) = da_if.view_mut().split_at(Axis(1), hid);
                let (mut da_g, mut da_o) = da_go.view_mut().split_at(Axis(1), hid);
                Zip::from(&mut da_i).and(&dc).and(&i).and(&gg).for_each(|d, &dc, &i, &g| {
                    *d = dc * g * i * (T::one() - i);
                });
                if t > 0 {
                    let c_prev = &lc.cells[t - 1];
                    Zip::from(&mut da_f).and(&dc).and(&f).and(c_prev).for_each(|d, &dc, &f, &cp| {
                        *d = dc * cp * f * (T::one() - f);
                    });
                }
                Zip::from(&mut da_g).and(&dc).and(&i).and(&gg).for_each(|d, &dc, &i, &g| {
                    *d = dc * i * (T::one() - g * g);
                });
                Zip::from(&mut da_o).and(&dh).and(tc).and(&o).for_each(|d, &dh, &tc, &o| {
                    *d = dh * tc * o * (T::one() - o);
                });
            }
            // Cell gradient carried to step t-1 through the forget gate.
            Zip::from(&mut dc).and(&f).for_each(|dc, &f| *dc *= f);
            dc_next = Some(dc);

            gl.w_x += &da.t().dot(&lc.inputs[t]);
            gl.b += &da.sum_axis(Axis(0));
            if t > 0 {
                gl.w_h += &da.t().dot(&lc.hidden[t - 1]);
                dh = da.dot(&lp.w_h);
                dh_next = Some(dh);
            }
            if l > 0 {
                dx[t] = Some(da.dot(&lp.w_x));
            }
        }
        dh_ext = dx;
    }
    Ok(g)
}

/// Single-window backward pass for a `T_p x K` prediction gradient.
pub fn backward<T: Scalar>(cache: &ForwardCache<T>, grad_pred: ArrayView2<T>, p: &LstmParams<T>) -> Result<LstmParams<T>> {
    if grad_pred.dim() != (p.dims.lead, p.dims.outputs) {
        return Err(Error::Shape(format!(
            "prediction gradient {:?}, expected {:?}",
            grad_pred.dim(),
            (p.dims.lead, p.dims.outputs)
        )));
    }
    let flat = grad_pred.to_owned().into_shape_with_order((1, p.dims.head_out())).expect("flatten");
    backward_batch(cache, flat.view(), p)
}
