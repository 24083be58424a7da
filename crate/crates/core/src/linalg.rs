//! Small dense kernels: the symmetric Jacobi eigensolver, weighted inner
//! products and quadratic tensor actions.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayView3, Axis};

use crate::error::{Result, RomError};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Array2<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const OFFDIAG_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over every off-diagonal pair with a plane rotation until the
/// off-diagonal Frobenius norm drops below `1e-13 * ||K||_F`. Each returned
/// eigenvector is normalized so that its largest-magnitude component is
/// positive (ties go to the first such component), making the output
/// reproducible.
pub fn eig_sym(k: ArrayView2<'_, f64>) -> Result<SymmetricEigen> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(RomError::DimensionMismatch {
            context: "eig_sym (square)",
            expected: n,
            got: k.ncols(),
        });
    }
    crate::error::check_finite("eig_sym input", k.iter())?;
    let frob = frobenius(k);
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((k[[i, j]] - k[[j, i]]).abs());
        }
    }
    if asym > SYMMETRY_TOL * frob.max(1.0) {
        return Err(RomError::NotSymmetric(asym));
    }

    let mut a = k.to_owned();
    // symmetrize exactly so the rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let target = OFFDIAG_TOL * frob;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(a.view()) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if off_diagonal_norm(a.view()) > target {
        log::warn!("Jacobi sweeps exhausted before reaching the off-diagonal tolerance");
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        fix_sign(&mut col);
        vectors.column_mut(dst).assign(&col);
    }
    Ok(SymmetricEigen { values, vectors })
}

fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = c * akp - s * akq;
        a[[k, q]] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = c * apk - s * aqk;
        a[[q, k]] = s * apk + c * aqk;
    }
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

fn fix_sign(col: &mut Array1<f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0_f64;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !col.is_empty() && col[best] < 0.0 {
        col.mapv_inplace(|x| -x);
    }
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius3(a: ArrayView3<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal_norm(a: ArrayView2<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), x) in a.indexed_iter() {
        if i != j {
            acc += x * x;
        }
    }
    acc.sqrt()
}

/// Largest eigenvalue of the symmetric part `(A + A*)/2`.
pub fn lambda_max_sym(a: ArrayView2<'_, f64>) -> Result<f64> {
    let sym = symmetric_part(a);
    let eig = eig_sym(sym.view())?;
    Ok(eig.values[0])
}

pub fn symmetric_part(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut s = a.to_owned();
    s += &a.t();
    s *= 0.5;
    s
}

/// `sum_k w_k f_k g_k`
pub fn weighted_dot(w: ArrayView1<'_, f64>, f: ArrayView1<'_, f64>, g: ArrayView1<'_, f64>) -> f64 {
    w.iter().zip(f.iter()).zip(g.iter()).map(|((w, f), g)| w * f * g).sum()
}

pub fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Bilinear tensor action `out_i = sum_{j,k} c_ijk a_j b_k`.
///
/// With `a == b` this is the quadratic term `[C q] q`.
pub fn tensor_action(c: ArrayView3<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let (n, m, p) = c.dim();
    debug_assert_eq!(m, a.len());
    debug_assert_eq!(p, b.len());
    let c = c.as_standard_layout();
    let flat = c.view().into_shape_with_order((n * m, p)).expect("standard layout");
    let cb = flat.dot(&b).into_shape_with_order((n, m)).expect("contiguous");
    cb.dot(&a)
}

/// Column-stacked matrix from a list of vectors.
pub fn columns(cols: &[Array1<f64>]) -> Array2<f64> {
    let n = cols.first().map_or(0, |c| c.len());
    let mut m = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).assign(c);
    }
    m
}

pub fn row_sums(a: ArrayView2<'_, f64>) -> Array1<f64> {
    a.sum_axis(Axis(1))
}
