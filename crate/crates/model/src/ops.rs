//! Row-wise kernels shared by the forward and backward passes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

pub struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub rstd: Array1<f64>,
}

pub fn layer_norm(
    x: &Array2<f64>,
    gain: ArrayView1<f64>,
    bias: ArrayView1<f64>,
    eps: f64,
) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.outer_iter_mut().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *r = 1.0 / (var + eps).sqrt();
        let s = *r;
        row.mapv_inplace(|v| v * s);
    }
    let mut y = xhat.clone();
    for mut row in y.outer_iter_mut() {
        Zip::from(&mut row)
            .and(&gain)
            .and(&bias)
            .for_each(|v, &g, &b| *v = *v * g + b);
    }
    (y, LayerNormCache { xhat, rstd })
}

/// Returns dx; accumulates into the gain and bias gradients when given.
pub fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    gain: ArrayView1<f64>,
    grads: Option<(ArrayViewMut2<f64>, ArrayViewMut2<f64>)>,
) -> Array2<f64> {
    if let Some((mut dg, mut db)) = grads {
        let mut dg = dg.row_mut(0);
        let mut db = db.row_mut(0);
        dg += &(dy * &cache.xhat).sum_axis(Axis(0));
        db += &dy.sum_axis(Axis(0));
    }
    let d = dy.ncols() as f64;
    let mut dx = dy * &gain;
    for ((mut row, xh), &rstd) in dx
        .outer_iter_mut()
        .zip(cache.xhat.outer_iter())
        .zip(cache.rstd.iter())
    {
        let mean_d = row.sum() / d;
        let mean_dx = row.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
        Zip::from(&mut row)
            .and(&xh)
            .for_each(|v, &h| *v = rstd * (*v - mean_d - h * mean_dx));
    }
    dx
}

pub fn gelu(u: &Array2<f64>) -> Array2<f64> {
    u.mapv(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh()))
}

pub fn gelu_backward(u: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut out = dy.clone();
    Zip::from(&mut out).and(u).for_each(|g, &x| {
        let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
        let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x);
        *g *= 0.5 * (1.0 + t) + 0.5 * x * dt;
    });
    out
}

/// In-place row softmax that ignores `-inf` entries.
pub fn softmax_rows(mut s: ArrayViewMut2<f64>) {
    for mut row in s.outer_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.mapv_inplace(|v| v / z);
    }
}

/// log-sum-exp of a row.
pub fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `a @ b^T` for views.
pub fn matmul_t(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    a.dot(&b.t())
}
