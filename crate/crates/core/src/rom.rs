//! Quadratic Galerkin ROMs, the robust nonlinear closure and the
//! Lyapunov diagnostics of the stabilized model.

use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, invalid, Result, RomError};
use crate::io;
use crate::linalg::{lambda_max_sym, norm, tensor_action};
use crate::ode::{rk4, rk4_until_blow_up, BlowUpGuard, Trajectory};
use crate::pod::PodBasis;
use crate::truth::TruthModel;

/// Trajectories whose norm exceeds this are declared unstable.
pub const BLOW_UP_NORM: f64 = 1e8;

/// `dq/dt = e + L q + mu D q + [C q] q`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRom {
    e: Array1<f64>,
    l: Array2<f64>,
    d: Array2<f64>,
    c: Array3<f64>,
    mu: f64,
    basis_ref: String,
    lambda_max_d: f64,
    max_diag_d: f64,
}

impl QuadraticRom {
    /// Validates shapes and the negative definiteness of `D`.
    pub fn new(e: Array1<f64>, l: Array2<f64>, d: Array2<f64>, c: Array3<f64>, mu: f64, basis_ref: impl Into<String>) -> Result<Self> {
        let r = e.len();
        check_len("ROM L rows", r, l.nrows())?;
        check_len("ROM L cols", r, l.ncols())?;
        check_len("ROM D rows", r, d.nrows())?;
        check_len("ROM D cols", r, d.ncols())?;
        let (c0, c1, c2) = c.dim();
        check_len("ROM C dim 0", r, c0)?;
        check_len("ROM C dim 1", r, c1)?;
        check_len("ROM C dim 2", r, c2)?;
        if !(mu > 0.0) {
            return Err(invalid("mu", "nominal viscosity must be positive"));
        }
        check_finite("ROM coefficients", e.iter().chain(l.iter()).chain(d.iter()).chain(c.iter()))?;
        let lambda_max_d = lambda_max_sym(d.view())?;
        if !(lambda_max_d < 0.0) {
            return Err(RomError::IndefiniteDamping(lambda_max_d));
        }
        let max_diag_d = d.diag().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            e,
            l,
            d,
            c,
            mu,
            basis_ref: basis_ref.into(),
            lambda_max_d,
            max_diag_d,
        })
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }
    pub fn e(&self) -> &Array1<f64> {
        &self.e
    }
    pub fn l(&self) -> &Array2<f64> {
        &self.l
    }
    pub fn d(&self) -> &Array2<f64> {
        &self.d
    }
    pub fn c(&self) -> &Array3<f64> {
        &self.c
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn basis_ref(&self) -> &str {
        &self.basis_ref
    }
    /// Largest eigenvalue of `(D + D*)/2`.
    pub fn lambda_max_d(&self) -> f64 {
        self.lambda_max_d
    }
    /// `max_i d_ii`
    pub fn max_diag_d(&self) -> f64 {
        self.max_diag_d
    }

    /// Same model with the convection tensor replaced, e.g. by `C + dC`.
    pub fn with_tensor(&self, c: Array3<f64>) -> Result<Self> {
        if c.dim() != self.c.dim() {
            return Err(invalid("c", "tensor shape differs from the ROM"));
        }
        let mut out = self.clone();
        out.c = c;
        Ok(out)
    }

    fn check_state(&self, q: ArrayView1<'_, f64>) -> Result<()> {
        check_len("ROM state", self.dim(), q.len())?;
        check_finite("ROM state", q.iter())
    }

    /// Everything but the damping: `e + L q + [C q] q`.
    pub fn f_tilde(&self, q: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_state(q)?;
        let mut out = self.e.clone();
        out += &self.l.dot(&q);
        out += &tensor_action(self.c.view(), q, q);
        Ok(out)
    }

    /// POD-ROM-G right-hand side.
    pub fn rhs_nominal(&self, q: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mut out = self.f_tilde(q)?;
        out.scaled_add(self.mu, &self.d.dot(&q));
        Ok(out)
    }

    /// `H(q) = mu_nl f(q) diag(d_11, ..., d_rr) q`
    pub fn closure_h(&self, cfg: &ClosureConfig, q: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_state(q)?;
        cfg.validate()?;
        let amp = cfg.mu_nl * cfg.bound(q);
        Ok(Array1::from_iter(self.d.diag().iter().zip(q.iter()).map(|(d, x)| amp * d * x)))
    }

    /// `F~(q) + (mu + mu_e) D q + H(q)`
    pub fn rhs_stabilized(&self, cfg: &ClosureConfig, q: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mu_cl = self.closure_viscosity(cfg)?;
        let mut out = self.f_tilde(q)?;
        out.scaled_add(mu_cl, &self.d.dot(&q));
        out += &self.closure_h(cfg, q)?;
        Ok(out)
    }

    pub fn closure_viscosity(&self, cfg: &ClosureConfig) -> Result<f64> {
        let mu_cl = self.mu + cfg.mu_e;
        if !(mu_cl > 0.0) {
            return Err(invalid("mu_e", format!("mu + mu_e = {mu_cl:e} must stay positive")));
        }
        Ok(mu_cl)
    }

    /// `m(q) = mu_cl lambda_max(D) |q| / f(q) + mu_nl |q| max d_ii + 1`.
    ///
    /// `q` lies in the invariant set iff `m(q) >= 0`. The origin is assigned
    /// to the set with margin `+inf`.
    pub fn invariant_set_margin(&self, cfg: &ClosureConfig, q: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_state(q)?;
        cfg.validate()?;
        let mu_cl = self.closure_viscosity(cfg)?;
        let nq = norm(q);
        if nq == 0.0 {
            return Ok(f64::INFINITY);
        }
        let f = cfg.bound(q);
        Ok(mu_cl * self.lambda_max_d * nq / f + cfg.mu_nl * nq * self.max_diag_d + 1.0)
    }

    /// Upper bound on `dV/dt` for `V = |q|^2 / 2`, i.e. `|q| f(q) m(q)`.
    pub fn lyapunov_bound(&self, cfg: &ClosureConfig, q: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_state(q)?;
        cfg.validate()?;
        let mu_cl = self.closure_viscosity(cfg)?;
        let nq = norm(q);
        let f = cfg.bound(q);
        Ok(nq * f + mu_cl * self.lambda_max_d * nq * nq + cfg.mu_nl * f * nq * nq * self.max_diag_d)
    }

    /// `dV/dt = q . rhs_stabilized(q)`
    pub fn lyapunov_derivative(&self, cfg: &ClosureConfig, q: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(q.dot(&self.rhs_stabilized(cfg, q)?))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = RomFile {
            r: self.dim(),
            mu: self.mu,
            e: self.e.to_vec(),
            l: self.l.rows().into_iter().map(|r| r.to_vec()).collect(),
            d: self.d.rows().into_iter().map(|r| r.to_vec()).collect(),
            c: self.c.outer_iter().map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect()).collect(),
            basis_ref: self.basis_ref.clone(),
        };
        io::write_json(path, &file)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f: RomFile = io::read_json(path)?;
        let r = f.r;
        let bad = |what: &str| RomError::Format {
            path: path.display().to_string(),
            reason: format!("{what} is not conformable with r = {r}"),
        };
        if f.e.len() != r || f.l.len() != r || f.d.len() != r || f.c.len() != r {
            return Err(bad("coefficient"));
        }
        let mat = |rows: &[Vec<f64>]| -> Result<Array2<f64>> {
            if rows.iter().any(|row| row.len() != r) {
                return Err(bad("matrix"));
            }
            Ok(Array2::from_shape_fn((r, r), |(i, j)| rows[i][j]))
        };
        if f.c.iter().any(|m| m.len() != r || m.iter().any(|row| row.len() != r)) {
            return Err(bad("tensor"));
        }
        let c = Array3::from_shape_fn((r, r, r), |(i, j, k)| f.c[i][j][k]);
        Self::new(Array1::from(f.e.clone()), mat(&f.l)?, mat(&f.d)?, c, f.mu, f.basis_ref)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RomFile {
    r: usize,
    mu: f64,
    e: Vec<f64>,
    #[serde(rename = "L")]
    l: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    basis_ref: String,
}

/// Bound function `f(q) >= |F~(q)|` used by the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `c_max |q|^2`
    QuadraticOnly,
    /// `l_max |q| + c_max |q|^2`
    AffinePlusQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub mu_e: f64,
    pub mu_nl: f64,
    pub c_max: f64,
    #[serde(default)]
    pub l_max: f64,
    pub bound_kind: BoundKind,
}

impl ClosureConfig {
    pub fn new(mu_e: f64, mu_nl: f64, c_max: f64) -> Self {
        Self {
            mu_e,
            mu_nl,
            c_max,
            l_max: 0.0,
            bound_kind: BoundKind::QuadraticOnly,
        }
    }

    pub fn with_affine_bound(mut self, l_max: f64) -> Self {
        self.l_max = l_max;
        self.bound_kind = BoundKind::AffinePlusQuadratic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_e.is_finite() {
            return Err(invalid("mu_e", "must be finite"));
        }
        if !(self.mu_nl >= 0.0) || !self.mu_nl.is_finite() {
            return Err(invalid("mu_nl", format!("must be non-negative, got {}", self.mu_nl)));
        }
        if !(self.c_max > 0.0) || !self.c_max.is_finite() {
            return Err(invalid("c_max", "must be positive"));
        }
        if !(self.l_max >= 0.0) || !self.l_max.is_finite() {
            return Err(invalid("l_max", "must be non-negative"));
        }
        Ok(())
    }

    /// Evaluates `f(q)`.
    pub fn bound(&self, q: ArrayView1<'_, f64>) -> f64 {
        let nq = norm(q);
        match self.bound_kind {
            BoundKind::QuadraticOnly => self.c_max * nq * nq,
            BoundKind::AffinePlusQuadratic => self.l_max * nq + self.c_max * nq * nq,
        }
    }
}

/// Galerkin projection of the truth model onto the basis.
///
/// Expanding `F(zbar + Phi q)` by powers of `q` gives the constant term `e`,
/// the linear terms `L` (non-viscous, including the base-state convection)
/// and `D` (viscous), and the tensor `C`. The viscous part of the base
/// state is evaluated at the nominal viscosity and folded into `e`.
pub fn assemble(model: &TruthModel, basis: &PodBasis) -> Result<QuadraticRom> {
    check_len("basis dimension", model.n, basis.dim())?;
    let r = basis.rank();
    let zbar = basis.base_state.view();
    let w = &basis.weights;
    let project = |f: &Array1<f64>| -> Array1<f64> { basis.modes.t().dot(&(f * w)) };

    let mut constant = model.constant_term();
    constant += &model.linear_term(zbar);
    constant.scaled_add(model.viscosity, &model.viscous_term(zbar));
    constant += &model.quadratic_term(zbar, zbar);
    let e = project(&constant);

    let mut l = Array2::zeros((r, r));
    let mut d = Array2::zeros((r, r));
    let mut c = Array3::zeros((r, r, r));
    let modes: Vec<_> = (0..r).map(|j| basis.mode(j)).collect();
    for (j, phi_j) in modes.iter().enumerate() {
        let mut lin = model.linear_term(*phi_j);
        lin += &model.quadratic_term(zbar, *phi_j);
        lin += &model.quadratic_term(*phi_j, zbar);
        l.column_mut(j).assign(&project(&lin));
        d.column_mut(j).assign(&project(&model.viscous_term(*phi_j)));
        for (k, phi_k) in modes.iter().enumerate() {
            let quad = model.quadratic_term(*phi_j, *phi_k);
            let col = project(&quad);
            for i in 0..r {
                c[[i, j, k]] = col[i];
            }
        }
    }
    QuadraticRom::new(e, l, d, c, model.viscosity, basis.describe())
}

/// RK4 integration of the nominal (`closure = None`) or stabilized ROM.
///
/// Fails with [`RomError::BlowUp`] once `|q|` exceeds [`BLOW_UP_NORM`] or
/// becomes non-finite.
pub fn integrate_rom(rom: &QuadraticRom, closure: Option<&ClosureConfig>, q0: ArrayView1<'_, f64>, t_f: f64, dt: f64) -> Result<Trajectory> {
    check_len("ROM initial state", rom.dim(), q0.len())?;
    let guard = BlowUpGuard { norm_limit: BLOW_UP_NORM };
    match closure {
        None => rk4(|q| rom.rhs_nominal(q), q0, t_f, dt, guard),
        Some(cfg) => {
            cfg.validate()?;
            rom.closure_viscosity(cfg)?;
            rk4(|q| rom.rhs_stabilized(cfg, q), q0, t_f, dt, guard)
        }
    }
}

/// Like [`integrate_rom`] but returns the samples up to a blow-up together
/// with its time instead of failing.
pub fn integrate_rom_until_blow_up(
    rom: &QuadraticRom,
    closure: Option<&ClosureConfig>,
    q0: ArrayView1<'_, f64>,
    t_f: f64,
    dt: f64,
) -> Result<(Trajectory, Option<f64>)> {
    check_len("ROM initial state", rom.dim(), q0.len())?;
    let guard = BlowUpGuard { norm_limit: BLOW_UP_NORM };
    match closure {
        None => rk4_until_blow_up(|q| rom.rhs_nominal(q), q0, t_f, dt, guard),
        Some(cfg) => {
            cfg.validate()?;
            rom.closure_viscosity(cfg)?;
            rk4_until_blow_up(|q| rom.rhs_stabilized(cfg, q), q0, t_f, dt, guard)
        }
    }
}
