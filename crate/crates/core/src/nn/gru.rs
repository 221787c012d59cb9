//! Gated recurrent unit.
//!
//! ```text
//! z  = σ(Wz·x + Uz·h + bz)
//! r  = σ(Wr·x + Ur·h + br)
//! ñ  = tanh(Wn·x + Un·(r⊙h) + bn)
//! h' = (1 − z)⊙ñ + z⊙h
//! ```
//!
//! Weights are stacked gate-major: `w` is `3h × input`, `u` is `3h × h`, `b`
//! is `3h`, each in the order z, r, n.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{axpy, gemv_acc, gemv_t_acc, ger_acc, sigmoid, tanh};
use crate::{Error, Result};

/// Owned parameters of one GRU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl GruLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: vec![0.0; 3 * hidden_dim * input_dim],
            u: vec![0.0; 3 * hidden_dim * hidden_dim],
            b: vec![0.0; 3 * hidden_dim],
        }
    }

    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        3 * hidden_dim * (input_dim + hidden_dim + 1)
    }

    pub fn view(&self) -> GruView<'_> {
        GruView { input: self.input_dim, hidden: self.hidden_dim, w: &self.w, u: &self.u, b: &self.b }
    }
}

/// One step of the cell.
pub fn gru_cell_forward(params: &GruLayerParams, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if params.w.len() != 3 * params.hidden_dim * params.input_dim
        || params.u.len() != 3 * params.hidden_dim * params.hidden_dim
        || params.b.len() != 3 * params.hidden_dim
    {
        return Err(Error::InvalidArgument("inconsistent GRU parameter shapes".into()));
    }
    if x.len() != params.input_dim {
        return Err(Error::Shape { expected: params.input_dim, got: x.len() });
    }
    if h.len() != params.hidden_dim {
        return Err(Error::Shape { expected: params.hidden_dim, got: h.len() });
    }
    let cache = forward_seq(&params.view(), x, h, 1);
    Ok(cache.output(0).to_vec())
}

#[derive(Debug, Clone, Copy)]
pub struct GruView<'a> {
    pub input: usize,
    pub hidden: usize,
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

impl<'a> GruView<'a> {
    pub fn from_flat(input: usize, hidden: usize, flat: &'a [f64]) -> Self {
        let (w, rest) = flat.split_at(3 * hidden * input);
        let (u, b) = rest.split_at(3 * hidden * hidden);
        debug_assert_eq!(b.len(), 3 * hidden);
        Self { input, hidden, w, u, b }
    }
}

pub struct GruGrad<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

impl<'a> GruGrad<'a> {
    pub fn from_flat(input: usize, hidden: usize, flat: &'a mut [f64]) -> Self {
        let (w, rest) = flat.split_at_mut(3 * hidden * input);
        let (u, b) = rest.split_at_mut(3 * hidden * hidden);
        Self { w, u, b }
    }
}

/// Activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruCache {
    steps: usize,
    input: usize,
    hidden: usize,
    xs: Vec<f64>,
    /// `steps + 1` hidden states, starting with the initial one.
    hs: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

impl GruCache {
    pub fn output(&self, t: usize) -> &[f64] {
        &self.hs[(t + 1) * self.hidden..(t + 2) * self.hidden]
    }

    /// Hidden states after each step, `steps × hidden`.
    pub fn outputs(&self) -> &[f64] {
        &self.hs[self.hidden..]
    }
}

pub fn forward_seq(v: &GruView<'_>, xs: &[f64], h0: &[f64], steps: usize) -> GruCache {
    let (inp, hid) = (v.input, v.hidden);
    debug_assert_eq!(xs.len(), steps * inp);
    let mut c = GruCache {
        steps,
        input: inp,
        hidden: hid,
        xs: xs.to_vec(),
        hs: vec![0.0; (steps + 1) * hid],
        z: vec![0.0; steps * hid],
        r: vec![0.0; steps * hid],
        n: vec![0.0; steps * hid],
        rh: vec![0.0; steps * hid],
    };
    c.hs[..hid].copy_from_slice(h0);
    let mut a = vec![0.0; 3 * hid];
    for t in 0..steps {
        let x = &xs[t * inp..(t + 1) * inp];
        a.copy_from_slice(v.b);
        gemv_acc(v.w, x, &mut a);
        let (hp, rest) = c.hs[t * hid..].split_at_mut(hid);
        let hnew = &mut rest[..hid];
        gemv_acc(&v.u[..2 * hid * hid], hp, &mut a[..2 * hid]);
        let z = &mut c.z[t * hid..(t + 1) * hid];
        let r = &mut c.r[t * hid..(t + 1) * hid];
        let rh = &mut c.rh[t * hid..(t + 1) * hid];
        for j in 0..hid {
            z[j] = sigmoid(a[j]);
            r[j] = sigmoid(a[hid + j]);
            rh[j] = r[j] * hp[j];
        }
        gemv_acc(&v.u[2 * hid * hid..], rh, &mut a[2 * hid..]);
        let n = &mut c.n[t * hid..(t + 1) * hid];
        for j in 0..hid {
            n[j] = tanh(a[2 * hid + j]);
            hnew[j] = (1.0 - z[j]) * n[j] + z[j] * hp[j];
        }
    }
    c
}

/// Backpropagates `d_out` (gradient w.r.t. every step's output, `steps ×
/// hidden`) through the sequence. Parameter gradients accumulate into `g`;
/// returns the input gradient when `want_dx` is set.
pub fn backward_seq(v: &GruView<'_>, c: &GruCache, d_out: &[f64], g: &mut GruGrad<'_>, want_dx: bool) -> Vec<f64> {
    let (inp, hid, steps) = (c.input, c.hidden, c.steps);
    debug_assert_eq!(d_out.len(), steps * hid);
    let mut dx = if want_dx { vec![0.0; steps * inp] } else { Vec::new() };
    let mut carry = vec![0.0; hid];
    let mut dh = vec![0.0; hid];
    let mut dhp = vec![0.0; hid];
    let mut da = vec![0.0; 3 * hid];
    let mut drh = vec![0.0; hid];
    let (uzr, un) = v.u.split_at(2 * hid * hid);
    for t in (0..steps).rev() {
        let x = &c.xs[t * inp..(t + 1) * inp];
        let hp = &c.hs[t * hid..(t + 1) * hid];
        let z = &c.z[t * hid..(t + 1) * hid];
        let r = &c.r[t * hid..(t + 1) * hid];
        let n = &c.n[t * hid..(t + 1) * hid];
        let rh = &c.rh[t * hid..(t + 1) * hid];
        for j in 0..hid {
            dh[j] = d_out[t * hid + j] + carry[j];
            let dn = dh[j] * (1.0 - z[j]);
            let dz = dh[j] * (hp[j] - n[j]);
            dhp[j] = dh[j] * z[j];
            da[2 * hid + j] = dn * (1.0 - n[j] * n[j]);
            da[j] = dz * z[j] * (1.0 - z[j]);
        }
        let dan = &da[2 * hid..];
        // candidate path
        ger_acc(&mut g.u[2 * hid * hid..], dan, rh);
        drh.iter_mut().for_each(|v| *v = 0.0);
        gemv_t_acc(un, dan, &mut drh);
        for j in 0..hid {
            let dr = drh[j] * hp[j];
            dhp[j] += drh[j] * r[j];
            da[hid + j] = dr * r[j] * (1.0 - r[j]);
        }
        // all three gates see x through W and the bias
        ger_acc(g.w, &da, x);
        axpy(1.0, &da, g.b);
        if want_dx {
            gemv_t_acc(v.w, &da, &mut dx[t * inp..(t + 1) * inp]);
        }
        // z and r see h directly
        ger_acc(&mut g.u[..2 * hid * hid], &da[..2 * hid], hp);
        gemv_t_acc(uzr, &da[..2 * hid], &mut dhp);
        core::mem::swap(&mut carry, &mut dhp);
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rng::{seeded, uniform};

    fn exp_sig(x: f64) -> f64 {
        1.0 / (1.0 + libm::exp(-x))
    }

    /// Scalar re-implementation written directly from the cell equations.
    fn scalar_cell(p: &GruLayerParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let (ni, nh) = (p.input_dim, p.hidden_dim);
        let wa = |gate: usize, j: usize, k: usize| p.w[(gate * nh + j) * ni + k];
        let ua = |gate: usize, j: usize, k: usize| p.u[(gate * nh + j) * nh + k];
        let mut z = vec![0.0; nh];
        let mut r = vec![0.0; nh];
        for j in 0..nh {
            let mut sz = p.b[j];
            let mut sr = p.b[nh + j];
            for k in 0..ni {
                sz += wa(0, j, k) * x[k];
                sr += wa(1, j, k) * x[k];
            }
            for k in 0..nh {
                sz += ua(0, j, k) * h[k];
                sr += ua(1, j, k) * h[k];
            }
            z[j] = exp_sig(sz);
            r[j] = exp_sig(sr);
        }
        let mut out = vec![0.0; nh];
        for j in 0..nh {
            let mut sn = p.b[2 * nh + j];
            for k in 0..ni {
                sn += wa(2, j, k) * x[k];
            }
            for k in 0..nh {
                sn += ua(2, j, k) * (r[k] * h[k]);
            }
            let n = libm::tanh(sn);
            out[j] = (1.0 - z[j]) * n + z[j] * h[j];
        }
        out
    }

    #[test]
    fn zero_params_fixed_points() {
        let p = GruLayerParams::zeros(1, 1);
        assert_eq!(gru_cell_forward(&p, &[0.3], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(gru_cell_forward(&p, &[0.3], &[1.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn shape_errors() {
        let p = GruLayerParams::zeros(2, 3);
        assert!(gru_cell_forward(&p, &[0.0], &[0.0; 3]).is_err());
        assert!(gru_cell_forward(&p, &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = seeded(11);
        for (ni, nh) in [(1, 1), (3, 5), (7, 4), (12, 9)] {
            let mut p = GruLayerParams::zeros(ni, nh);
            for v in p.w.iter_mut().chain(p.u.iter_mut()).chain(p.b.iter_mut()) {
                *v = uniform(&mut rng, -1.5, 1.5);
            }
            let x: Vec<f64> = (0..ni).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let h: Vec<f64> = (0..nh).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let fast = gru_cell_forward(&p, &x, &h).unwrap();
            let slow = scalar_cell(&p, &x, &h);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }
}
