//! Row-major dense kernels used by the encoder's forward and backward passes.

/// `out[m x n] = a[m x k] * b[n x k]^T`
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let col = &b[j * k..(j + 1) * k];
            out[i * n + j] = dot(row, col);
        }
    }
    out
}

/// `out[m x n] = a[m x k] * b[k x n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            axpy(orow, s, &b[p * n..(p + 1) * n]);
        }
    }
    out
}

/// `out[k x n] += a[m x k]^T * b[m x n]`
pub(crate) fn matmul_at_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            axpy(&mut out[p * n..(p + 1) * n], s, brow);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn add_assign(y: &mut [f64], x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

pub(crate) const LN_EPS: f64 = 1e-12;

/// Per-row normalization statistics kept for the backward pass.
pub(crate) struct LnCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], rows: usize, d: usize) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * gain[j] + bias[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns `dx`; accumulates into `dgain` / `dbias` when they are non-empty.
pub(crate) fn layer_norm_backward(
    dy: &[f64],
    cache: &LnCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    rows: usize,
    d: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * d];
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        if !dgain.is_empty() {
            for j in 0..d {
                dgain[j] += dyr[j] * xh[j];
            }
        }
        if !dbias.is_empty() {
            add_assign(dbias, dyr);
        }
        for j in 0..d {
            dxhat[j] = dyr[j] * gain[j];
        }
        let m1 = dxhat.iter().sum::<f64>() / d as f64;
        let m2 = dot(&dxhat, xh) / d as f64;
        for j in 0..d {
            dx[r * d + j] = cache.rstd[r] * (dxhat[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

/// tanh approximation of GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Given softmax output `p` and upstream `dp`, returns the input gradient.
pub(crate) fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let s = dot(p, dp);
    p.iter().zip(dp).map(|(pi, dpi)| pi * (dpi - s)).collect()
}
