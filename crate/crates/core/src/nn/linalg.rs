//! Dense row-major kernels used by the network layers.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y += M x` for `M` with `y.len()` rows and `x.len()` columns.
#[inline]
pub fn gemv_acc(m: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), cols * y.len());
    for (yi, row) in y.iter_mut().zip(m.chunks_exact(cols)) {
        *yi += dot(row, x);
    }
}

/// `x += Mᵀ y` for `M` with `y.len()` rows and `x.len()` columns.
#[inline]
pub fn gemv_t_acc(m: &[f64], y: &[f64], x: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), cols * y.len());
    for (&yi, row) in y.iter().zip(m.chunks_exact(cols)) {
        if yi != 0.0 {
            axpy(yi, row, x);
        }
    }
}

/// `G += a bᵀ`
#[inline]
pub fn ger_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    debug_assert_eq!(g.len(), cols * a.len());
    for (&ai, row) in a.iter().zip(g.chunks_exact_mut(cols)) {
        if ai != 0.0 {
            axpy(ai, b, row);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}
