//! Desk-scale full-order models: a periodic viscous Burgers finite-difference
//! solver and a synthetic quadratic system with the block structure of a
//! Boussinesq Galerkin model.

use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, invalid, Result, RomError};
use crate::io;
use crate::linalg::{frobenius, tensor_action};
use crate::ode::{rk4, BlowUpGuard, Trajectory};

/// Dense coefficients of `dz/dt = e + L z + mu D z + [C z] z`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoefficients {
    pub e: Array1<f64>,
    pub l: Array2<f64>,
    pub d: Array2<f64>,
    pub c: Array3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthKind {
    /// Uniform periodic grid of `n` points on `[0, 1)`.
    Burgers1D,
    SyntheticQuadratic(Box<QuadraticCoefficients>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthModel {
    pub kind: TruthKind,
    pub n: usize,
    /// Nominal viscosity; `1/Re` for Burgers.
    pub viscosity: f64,
    /// Quadrature weights of the discrete inner product.
    pub weights: Array1<f64>,
    /// Start offsets of the variable blocks (empty for a single block).
    pub blocks: Vec<usize>,
}

impl TruthModel {
    pub fn burgers(n: usize, viscosity: f64) -> Result<Self> {
        if n < 8 {
            return Err(invalid("n", format!("Burgers grid needs at least 8 points, got {n}")));
        }
        if !(viscosity > 0.0) {
            return Err(invalid("viscosity", "must be positive"));
        }
        Ok(Self {
            kind: TruthKind::Burgers1D,
            n,
            viscosity,
            weights: Array1::from_elem(n, 1.0 / n as f64),
            blocks: Vec::new(),
        })
    }

    pub fn with_viscosity(mut self, viscosity: f64) -> Self {
        self.viscosity = viscosity;
        self
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        validate_blocks(&blocks, self.n)?;
        self.blocks = blocks;
        Ok(self)
    }

    /// Grid spacing for Burgers, `None` otherwise.
    pub fn grid_spacing(&self) -> Option<f64> {
        match self.kind {
            TruthKind::Burgers1D => Some(1.0 / self.n as f64),
            TruthKind::SyntheticQuadratic(_) => None,
        }
    }

    /// Grid point coordinates `x_k = k h` (Burgers) or indices.
    pub fn grid(&self) -> Array1<f64> {
        let h = self.grid_spacing().unwrap_or(1.0);
        Array1::from_iter((0..self.n).map(|k| k as f64 * h))
    }

    pub fn constant_term(&self) -> Array1<f64> {
        match &self.kind {
            TruthKind::Burgers1D => Array1::zeros(self.n),
            TruthKind::SyntheticQuadratic(c) => c.e.clone(),
        }
    }

    /// Linear part that does not scale with viscosity.
    pub fn linear_term(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        match &self.kind {
            TruthKind::Burgers1D => Array1::zeros(self.n),
            TruthKind::SyntheticQuadratic(c) => c.l.dot(&v),
        }
    }

    /// Operator multiplied by the viscosity: `u_xx` or `D_n v`.
    pub fn viscous_term(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        match &self.kind {
            TruthKind::Burgers1D => periodic_laplacian(v),
            TruthKind::SyntheticQuadratic(c) => c.d.dot(&v),
        }
    }

    /// Bilinear form `B(a, b)` with `B(z, z)` the quadratic part of the model.
    pub fn quadratic_term(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
        match &self.kind {
            TruthKind::Burgers1D => skew_convection(a, b),
            TruthKind::SyntheticQuadratic(c) => tensor_action(c.c.view(), a, b),
        }
    }

    pub fn rhs(&self, z: ArrayView1<'_, f64>, mu: f64) -> Result<Array1<f64>> {
        check_len("truth rhs", self.n, z.len())?;
        check_finite("truth state", z.iter())?;
        let mut out = self.constant_term();
        out += &self.linear_term(z);
        out.scaled_add(mu, &self.viscous_term(z));
        out += &self.quadratic_term(z, z);
        Ok(out)
    }

    /// Keeps every `stride`-th state of `trajectory` together with this
    /// model's quadrature weights and block layout.
    pub fn collect_snapshots(&self, trajectory: &Trajectory, stride: usize) -> Result<SnapshotSet> {
        if stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if trajectory.is_empty() {
            return Err(invalid("trajectory", "empty trajectory"));
        }
        check_len("snapshot dimension", self.n, trajectory.dim())?;
        let sub = trajectory.subsample(stride);
        SnapshotSet::new(sub.states, sub.times, self.weights.clone(), self.blocks.clone())
    }
}

fn validate_blocks(blocks: &[usize], n: usize) -> Result<()> {
    if blocks.is_empty() {
        return Ok(());
    }
    if blocks[0] != 0 {
        return Err(invalid("blocks", "first block must start at offset 0"));
    }
    if blocks.windows(2).any(|w| w[1] <= w[0]) || *blocks.last().unwrap() >= n {
        return Err(invalid("blocks", format!("offsets {blocks:?} must increase within 0..{n}")));
    }
    Ok(())
}

/// Second-order central `u_xx` with periodic wraparound.
pub fn periodic_laplacian(u: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = u.len();
    let inv_h2 = (n * n) as f64;
    Array1::from_iter((0..n).map(|k| {
        let left = u[(k + n - 1) % n];
        let right = u[(k + 1) % n];
        (right - 2.0 * u[k] + left) * inv_h2
    }))
}

fn central_diff(f: &Array1<f64>, k: usize, inv_2h: f64) -> f64 {
    let n = f.len();
    (f[(k + 1) % n] - f[(k + n - 1) % n]) * inv_2h
}

/// Symmetric bilinear convection operator of the skew-symmetric form.
///
/// `B(u, u) = -(1/3) (u u_x + (u^2)_x)`, discretized centrally, so that
/// `sum_k u_k B(u, u)_k = 0` holds exactly on the periodic grid.
pub fn skew_convection(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = a.len();
    let inv_2h = n as f64 / 2.0;
    let a = a.to_owned();
    let b = b.to_owned();
    let ab = &a * &b;
    Array1::from_iter((0..n).map(|k| {
        let advective = a[k] * central_diff(&b, k, inv_2h) + b[k] * central_diff(&a, k, inv_2h);
        let conservative = central_diff(&ab, k, inv_2h);
        -advective / 6.0 - conservative / 3.0
    }))
}

/// `mu u_xx - u u_x` on the periodic unit interval with `h = 1/n`.
pub fn burgers_rhs(u: ArrayView1<'_, f64>, mu: f64) -> Result<Array1<f64>> {
    if u.len() < 8 {
        return Err(invalid("u", format!("need at least 8 grid points, got {}", u.len())));
    }
    check_finite("burgers state", u.iter())?;
    let mut out = skew_convection(u, u);
    out.scaled_add(mu, &periodic_laplacian(u));
    Ok(out)
}

/// Builds a synthetic full-order quadratic system with energy-conserving
/// convection, a skew linear coupling and diagonal damping `-diag(spectrum)`.
///
/// The model is fully determined by `(n, seed, spectrum)`.
pub fn make_synthetic(n: usize, seed: u64, spectrum: &[f64]) -> Result<TruthModel> {
    if n < 4 {
        return Err(invalid("n", format!("need n >= 4, got {n}")));
    }
    check_len("spectrum", n, spectrum.len())?;
    if spectrum.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(invalid("spectrum", "entries must be positive and finite"));
    }
    if spectrum.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("spectrum", "must be strictly decreasing"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let g = Array3::from_shape_simple_fn((n, n, n), || {
        let x: f64 = StandardNormal.sample(&mut rng);
        x * scale
    });
    let mut c = Array3::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[[i, j, k]] = 0.5 * (g[[i, j, k]] - g[[j, i, k]]);
            }
        }
    }

    let raw = Array2::from_shape_simple_fn((n, n), || {
        let x: f64 = StandardNormal.sample(&mut rng);
        x
    });
    let mut l = (&raw - &raw.t()) * 0.5;
    let fro = frobenius(l.view());
    l /= fro;

    let d = Array2::from_diag(&Array1::from_iter(spectrum.iter().map(|s| -s)));
    Ok(TruthModel {
        kind: TruthKind::SyntheticQuadratic(Box::new(QuadraticCoefficients { e: Array1::zeros(n), l, d, c })),
        n,
        viscosity: 1.0,
        weights: Array1::ones(n),
        blocks: Vec::new(),
    })
}

/// Integrates the truth model with fixed-step RK4.
pub fn simulate(model: &TruthModel, z0: ArrayView1<'_, f64>, mu: f64, t_f: f64, dt: f64) -> Result<Trajectory> {
    check_len("initial state", model.n, z0.len())?;
    if !(mu > 0.0) {
        return Err(invalid("mu", "must be positive"));
    }
    if let Some(h) = model.grid_spacing() {
        let umax = z0.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let diffusive = 0.5 * h * h / mu;
        let limit = if umax > 0.0 { diffusive.min(0.5 * h / umax) } else { diffusive };
        if dt > limit {
            return Err(invalid("dt", format!("{dt} exceeds the explicit stability limit {limit:e}")));
        }
    }
    rk4(|z| model.rhs(z, mu), z0, t_f, dt, BlowUpGuard::NON_FINITE_ONLY)
}

/// Time-ordered state samples plus the inner-product weights
/// `<f, g>_H = sum_k W_k f_k g_k`. Row `j` of `states` is snapshot `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub states: Array2<f64>,
    pub times: Vec<f64>,
    pub weights: Array1<f64>,
    pub blocks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub n: usize,
    pub s: usize,
    pub h: f64,
    pub weights: String,
    pub blocks: Vec<usize>,
}

impl SnapshotSet {
    pub fn new(states: Array2<f64>, times: Vec<f64>, weights: Array1<f64>, blocks: Vec<usize>) -> Result<Self> {
        let (s, n) = states.dim();
        if s == 0 {
            return Err(invalid("states", "need at least one snapshot"));
        }
        check_len("snapshot times", s, times.len())?;
        check_len("snapshot weights", n, weights.len())?;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(invalid("weights", "must be positive"));
        }
        check_finite("snapshots", states.iter())?;
        validate_blocks(&blocks, n)?;
        Ok(Self {
            states,
            times,
            weights,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn as_trajectory(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.clone(),
        }
    }

    /// `(start, end)` index ranges of the variable blocks.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        block_ranges(&self.blocks, self.dim())
    }

    /// Writes `<stem>.csv` (`t,x_0,...`) and the `<stem>.json` sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_trajectory(dir.join(format!("{stem}.csv")), &self.as_trajectory(), "x")?;
        let h = self.weights[0];
        if self.weights.iter().any(|&w| w != h) {
            return Err(invalid("weights", "only uniform weights can be persisted"));
        }
        let meta = SnapshotSidecar {
            n: self.dim(),
            s: self.len(),
            h,
            weights: "uniform".into(),
            blocks: self.blocks.clone(),
        };
        io::write_json(dir.join(format!("{stem}.json")), &meta)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let meta: SnapshotSidecar = io::read_json(dir.join(format!("{stem}.json")))?;
        if meta.weights != "uniform" {
            return Err(RomError::Format {
                path: format!("{stem}.json"),
                reason: format!("unsupported weights {:?}", meta.weights),
            });
        }
        let traj = io::read_trajectory(dir.join(format!("{stem}.csv")))?;
        check_len("snapshot file columns", meta.n, traj.dim())?;
        check_len("snapshot file rows", meta.s, traj.len())?;
        Self::new(traj.states, traj.times, Array1::from_elem(meta.n, meta.h), meta.blocks)
    }
}

pub(crate) fn block_ranges(blocks: &[usize], n: usize) -> Vec<(usize, usize)> {
    if blocks.is_empty() {
        return vec![(0, n)];
    }
    blocks
        .iter()
        .enumerate()
        .map(|(i, &start)| (start, blocks.get(i + 1).copied().unwrap_or(n)))
        .collect()
}
