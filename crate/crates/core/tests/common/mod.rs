#![allow(dead_code)]

//! Independent reference computations for the integration tests. Nothing
//! here calls the library's linear algebra.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| normal(rng))
}

/// Box-Muller, so the oracle does not share a sampler with the library.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn dot_w(w: ArrayView1<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += w[k] * a[k] * b[k];
    }
    s
}

pub fn norm2(a: ArrayView1<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frob(a: ArrayView3<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `([C q] q)_i = sum_jk C_ijk q_j q_k`
pub fn quad_action(c: ArrayView3<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let (r, _, _) = c.dim();
    let mut out = Array1::zeros(r);
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                out[i] += c[[i, j, k]] * a[j] * b[k];
            }
        }
    }
    out
}

pub fn mat_vec(m: ArrayView2<'_, f64>, v: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = Array1::zeros(m.nrows());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i] += m[[i, j]] * v[j];
        }
    }
    out
}

/// Composite trapezoid.
pub fn trapz(t: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 1..t.len() {
        s += 0.5 * (t[k] - t[k - 1]) * (v[k] + v[k - 1]);
    }
    s
}

/// Largest eigenvalue of a small symmetric matrix by power iteration on a
/// shifted copy (`shift` must exceed the spectral radius).
pub fn lambda_max_power(m: ArrayView2<'_, f64>, shift: f64) -> f64 {
    let n = m.nrows();
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..20000 {
        let mut w = mat_vec(m, v.view());
        w += &(&v * shift);
        let nw = norm2(w.view());
        let next = nw - shift;
        v = w / nw;
        if (next - lam).abs() < 1e-15 * shift {
            lam = next;
            break;
        }
        lam = next;
    }
    lam
}

/// `(1/s) sum_j |z_j - zbar|^2_W`
pub fn mean_energy(states: ArrayView2<'_, f64>, zbar: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> f64 {
    let s = states.nrows();
    let mut total = 0.0;
    for j in 0..s {
        let d = &states.row(j) - &zbar;
        total += dot_w(w, d.view(), d.view());
    }
    total / s as f64
}

/// Random tensor with Frobenius norm `target`.
pub fn random_tensor(rng: &mut ChaCha8Rng, r: usize, target: f64) -> Array3<f64> {
    let mut c = Array3::from_shape_fn((r, r, r), |_| normal(rng));
    let f = frob(c.view());
    c.mapv_inplace(|x| x * target / f);
    c
}

pub fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let g = Array2::from_shape_fn((n, n), |_| normal(rng));
    (&g - &g.t()) * 0.5
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
