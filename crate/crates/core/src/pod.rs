//! Proper orthogonal decomposition by the method of snapshots.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result, RomError};
use crate::io;
use crate::linalg::{eig_sym, weighted_dot};
use crate::truth::SnapshotSet;

/// Modes with `lambda_i / lambda_1` below this are never retained.
pub const RANK_CUTOFF: f64 = 1e-12;

/// W-orthonormal POD modes with their eigenvalues and base state.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `n x r`, one mode per column.
    pub modes: Array2<f64>,
    /// Retained POD eigenvalues. Descending within each block.
    pub eigenvalues: Array1<f64>,
    /// Every eigenvalue of the correlation matrix (per block, concatenated).
    pub spectrum: Array1<f64>,
    pub base_state: Array1<f64>,
    pub weights: Array1<f64>,
    /// `(r_v, r_T)` for block-separated bases.
    pub blocks: Option<(usize, usize)>,
    pub subtract_mean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSidecar {
    pub r: usize,
    pub r_v: Option<usize>,
    #[serde(rename = "r_T")]
    pub r_t: Option<usize>,
    pub lambdas: Vec<f64>,
    pub subtract_mean: bool,
    pub base_state_file: String,
    #[serde(default)]
    pub spectrum: Vec<f64>,
}

/// `K_ij = (1/s) <z_i - zbar, z_j - zbar>_H`.
pub fn correlation_matrix(snapshots: &SnapshotSet, base_state: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
    check_len("base state", snapshots.dim(), base_state.len())?;
    let centered = &snapshots.states - &base_state.insert_axis(Axis(0));
    let weighted = &centered * &snapshots.weights.view().insert_axis(Axis(0));
    let s = snapshots.len() as f64;
    let mut k = weighted.dot(&centered.t()) / s;
    let m = k.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (k[[i, j]] + k[[j, i]]);
            k[[i, j]] = avg;
            k[[j, i]] = avg;
        }
    }
    Ok(k)
}

fn snapshot_mean(snapshots: &SnapshotSet) -> Array1<f64> {
    snapshots.states.mean_axis(Axis(0)).expect("at least one snapshot")
}

/// Number of eigenvalues passing the relative cutoff.
pub fn effective_rank(eigenvalues: ArrayView1<'_, f64>) -> usize {
    let Some(&first) = eigenvalues.first() else { return 0 };
    if !(first > 0.0) {
        return 0;
    }
    eigenvalues.iter().take_while(|&&l| l > 0.0 && l / first >= RANK_CUTOFF).count()
}

/// Computes `r` POD modes of the snapshot set.
///
/// With `subtract_mean` the temporal snapshot mean is used as base state,
/// otherwise the base state is zero.
pub fn compute_basis(snapshots: &SnapshotSet, r: usize, subtract_mean: bool) -> Result<PodBasis> {
    let n = snapshots.dim();
    let base = if subtract_mean { snapshot_mean(snapshots) } else { Array1::zeros(n) };
    let k = correlation_matrix(snapshots, base.view())?;
    let eig = eig_sym(k.view())?;
    let rank = effective_rank(eig.values.view());
    if r == 0 || r > rank {
        return Err(RomError::RankDeficient { requested: r, effective: rank });
    }

    let centered = &snapshots.states - &base.view().insert_axis(Axis(0));
    let s = snapshots.len() as f64;
    let mut modes = Array2::zeros((n, r));
    for i in 0..r {
        let v = eig.vectors.column(i);
        let phi = centered.t().dot(&v) / (s * eig.values[i]).sqrt();
        modes.column_mut(i).assign(&phi);
    }
    reorthonormalize(&mut modes, snapshots.weights.view());

    Ok(PodBasis {
        modes,
        eigenvalues: eig.values.slice(s![..r]).to_owned(),
        spectrum: eig.values.mapv(|l| l.max(0.0)),
        base_state: base,
        weights: snapshots.weights.clone(),
        blocks: None,
        subtract_mean,
    })
}

/// One modified Gram-Schmidt pass in the weighted inner product; removes the
/// rounding drift of the snapshot combination for weakly energetic modes.
fn reorthonormalize(modes: &mut Array2<f64>, w: ArrayView1<'_, f64>) {
    let r = modes.ncols();
    for i in 0..r {
        for j in 0..i {
            let proj = weighted_dot(w, modes.column(i), modes.column(j));
            let prev = modes.column(j).to_owned();
            modes.column_mut(i).scaled_add(-proj, &prev);
        }
        let nrm = weighted_dot(w, modes.column(i), modes.column(i)).sqrt();
        modes.column_mut(i).mapv_inplace(|x| x / nrm);
    }
}

/// Separate POD of the two variable blocks, embedded with zero padding so
/// the first `r_v` modes live on block 0 and the next `r_t` on block 1.
pub fn compute_basis_blocked(snapshots: &SnapshotSet, r_v: usize, r_t: usize, subtract_mean: bool) -> Result<PodBasis> {
    let ranges = snapshots.block_ranges();
    if ranges.len() != 2 {
        return Err(invalid(
            "blocks",
            format!("blocked POD needs exactly two blocks, snapshot set declares {}", snapshots.blocks.len()),
        ));
    }
    let n = snapshots.dim();
    let mut modes = Array2::zeros((n, r_v + r_t));
    let mut eigenvalues = Vec::with_capacity(r_v + r_t);
    let mut spectrum = Vec::new();
    let mut base = Array1::zeros(n);
    let mut col = 0;
    for (&(lo, hi), r) in ranges.iter().zip([r_v, r_t]) {
        let sub = SnapshotSet::new(
            snapshots.states.slice(s![.., lo..hi]).to_owned(),
            snapshots.times.clone(),
            snapshots.weights.slice(s![lo..hi]).to_owned(),
            Vec::new(),
        )?;
        let b = compute_basis(&sub, r, subtract_mean)?;
        modes.slice_mut(s![lo..hi, col..col + r]).assign(&b.modes);
        base.slice_mut(s![lo..hi]).assign(&b.base_state);
        eigenvalues.extend(b.eigenvalues.iter().copied());
        spectrum.extend(b.spectrum.iter().copied());
        col += r;
    }
    Ok(PodBasis {
        modes,
        eigenvalues: Array1::from(eigenvalues),
        spectrum: Array1::from(spectrum),
        base_state: base,
        weights: snapshots.weights.clone(),
        blocks: Some((r_v, r_t)),
        subtract_mean,
    })
}

impl PodBasis {
    /// Wraps explicit modes (e.g. an analytic basis). Checks orthonormality.
    pub fn from_modes(modes: Array2<f64>, base_state: Array1<f64>, weights: Array1<f64>) -> Result<Self> {
        let (n, r) = modes.dim();
        check_len("base state", n, base_state.len())?;
        check_len("weights", n, weights.len())?;
        let basis = Self {
            eigenvalues: Array1::zeros(r),
            spectrum: Array1::zeros(r),
            modes,
            base_state,
            weights,
            blocks: None,
            subtract_mean: false,
        };
        let err = basis.orthonormality_error();
        if err > 1e-10 {
            return Err(invalid("modes", format!("not W-orthonormal (max error {err:e})")));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn mode(&self, i: usize) -> ArrayView1<'_, f64> {
        self.modes.column(i)
    }

    pub fn inner(&self, f: ArrayView1<'_, f64>, g: ArrayView1<'_, f64>) -> f64 {
        weighted_dot(self.weights.view(), f, g)
    }

    /// `q_i = <z - zbar, phi_i>_H`
    pub fn project(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len("project", self.dim(), z.len())?;
        let centered = (&z - &self.base_state) * &self.weights;
        Ok(self.modes.t().dot(&centered))
    }

    /// `zbar + sum_i q_i phi_i`
    pub fn reconstruct(&self, q: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len("reconstruct", self.rank(), q.len())?;
        Ok(&self.base_state + &self.modes.dot(&q))
    }

    /// Projects every row of `states`.
    pub fn project_rows(&self, states: &Array2<f64>) -> Result<Array2<f64>> {
        check_len("project", self.dim(), states.ncols())?;
        let centered = (states - &self.base_state.view().insert_axis(Axis(0))) * self.weights.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.modes))
    }

    pub fn reconstruct_rows(&self, coeffs: &Array2<f64>) -> Result<Array2<f64>> {
        check_len("reconstruct", self.rank(), coeffs.ncols())?;
        Ok(coeffs.dot(&self.modes.t()) + self.base_state.view().insert_axis(Axis(0)))
    }

    /// `max_ij |<phi_i, phi_j>_H - delta_ij|`
    pub fn orthonormality_error(&self) -> f64 {
        let weighted = &self.modes * &self.weights.view().insert_axis(Axis(1));
        let gram = self.modes.t().dot(&weighted);
        gram.indexed_iter()
            .map(|((i, j), g)| (g - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Sum of the eigenvalues that were not retained.
    pub fn discarded_energy(&self) -> f64 {
        self.spectrum.sum() - self.eigenvalues.sum()
    }

    pub fn describe(&self) -> String {
        match self.blocks {
            Some((rv, rt)) => format!("pod(r_v={rv},r_T={rt},subtract_mean={})", self.subtract_mean),
            None => format!("pod(r={},subtract_mean={})", self.rank(), self.subtract_mean),
        }
    }

    /// Writes `<stem>.csv` (`mode_i` columns), `<stem>_base_state.csv` and
    /// the `<stem>.json` sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let header: Vec<String> = (0..self.rank()).map(|i| format!("mode_{i}")).collect();
        io::write_table(dir.join(format!("{stem}.csv")), &header, self.modes.rows().into_iter().map(|r| r.to_vec()))?;
        let base_file = format!("{stem}_base_state.csv");
        io::write_table(dir.join(&base_file), &["base_state".to_owned()], self.base_state.iter().map(|&x| vec![x]))?;
        let meta = BasisSidecar {
            r: self.rank(),
            r_v: self.blocks.map(|b| b.0),
            r_t: self.blocks.map(|b| b.1),
            lambdas: self.eigenvalues.to_vec(),
            subtract_mean: self.subtract_mean,
            base_state_file: base_file,
            spectrum: self.spectrum.to_vec(),
        };
        io::write_json(dir.join(format!("{stem}.json")), &meta)
    }

    /// Loads a basis written by [`PodBasis::save`]; the weights are not part
    /// of the basis files and come from the snapshot sidecar.
    pub fn load(dir: &Path, stem: &str, weights: Array1<f64>) -> Result<Self> {
        let meta: BasisSidecar = io::read_json(dir.join(format!("{stem}.json")))?;
        let (header, rows) = io::read_table(dir.join(format!("{stem}.csv")))?;
        check_len("basis columns", meta.r, header.len())?;
        let n = rows.len();
        let mut modes = Array2::zeros((n, meta.r));
        for (k, row) in rows.iter().enumerate() {
            for (i, x) in row.iter().enumerate() {
                modes[[k, i]] = *x;
            }
        }
        let (_, base_rows) = io::read_table(dir.join(&meta.base_state_file))?;
        let base_state = Array1::from_iter(base_rows.iter().map(|r| r[0]));
        check_len("base state rows", n, base_state.len())?;
        check_len("weights", n, weights.len())?;
        let blocks = match (meta.r_v, meta.r_t) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        Ok(Self {
            modes,
            eigenvalues: Array1::from(meta.lambdas),
            spectrum: Array1::from(meta.spectrum),
            base_state,
            weights,
            blocks,
            subtract_mean: meta.subtract_mean,
        })
    }
}
