//! Python bindings: truth models, POD, Galerkin ROMs with the stabilizing
//! closure, extremum-seeking tuning and the experiment pipeline.

use std::path::PathBuf;

use numpy::{IntoPyArray, PyArray1, PyArray2, PyArray3, PyReadonlyArray1, PyReadonlyArray2, PyReadonlyArray3};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use romstab::mes::{self, Evaluation, MesConfig, StopRule};
use romstab::pipeline::{self, ExperimentConfig};
use romstab::rom::{self, BoundKind, ClosureConfig};
use romstab::{ode, pod, truth, RomError};

fn py_err(e: RomError) -> PyErr {
    match e {
        RomError::Io(_) | RomError::MissingArtifact(_) | RomError::MissingArtifacts(_) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for romstab::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

type TrajectoryArrays<'py> = (Bound<'py, PyArray1<f64>>, Bound<'py, PyArray2<f64>>);

fn trajectory_arrays(py: Python<'_>, traj: ode::Trajectory) -> TrajectoryArrays<'_> {
    (traj.times.into_pyarray(py), traj.states.into_pyarray(py))
}

fn bound_kind(name: &str) -> PyResult<BoundKind> {
    match name {
        "quadratic_only" => Ok(BoundKind::QuadraticOnly),
        "affine_plus_quadratic" => Ok(BoundKind::AffinePlusQuadratic),
        other => Err(PyValueError::new_err(format!(
            "bound_kind must be 'quadratic_only' or 'affine_plus_quadratic', got {other:?}"
        ))),
    }
}

/// Full-order quadratic model `dz/dt = e + L z + mu D z + [C z] z`.
#[pyclass(name = "TruthModel", module = "romstab", skip_from_py_object)]
#[derive(Clone)]
struct PyTruthModel {
    inner: truth::TruthModel,
}

#[pymethods]
impl PyTruthModel {
    /// Periodic Burgers equation on `n` points of [0, 1).
    #[staticmethod]
    fn burgers(n: usize, mu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: truth::TruthModel::burgers(n, mu).py()?,
        })
    }

    /// Seeded synthetic system with `D = -diag(spectrum)`.
    #[staticmethod]
    #[pyo3(signature = (n, seed, spectrum, mu = 1.0, blocks = None))]
    fn synthetic(n: usize, seed: u64, spectrum: Vec<f64>, mu: f64, blocks: Option<Vec<usize>>) -> PyResult<Self> {
        let model = truth::make_synthetic(n, seed, &spectrum).py()?.with_viscosity(mu);
        let model = match blocks {
            Some(b) => model.with_blocks(b).py()?,
            None => model,
        };
        Ok(Self { inner: model })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn viscosity(&self) -> f64 {
        self.inner.viscosity
    }

    #[getter]
    fn weights<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.weights.clone().into_pyarray(py)
    }

    #[getter]
    fn grid<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.grid().into_pyarray(py)
    }

    #[pyo3(signature = (z, mu = None))]
    fn rhs<'py>(&self, py: Python<'py>, z: PyReadonlyArray1<'py, f64>, mu: Option<f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let mu = mu.unwrap_or(self.inner.viscosity);
        Ok(self.inner.rhs(z.as_array(), mu).py()?.into_pyarray(py))
    }

    /// RK4 trajectory; returns `(times, states)` with one state per row.
    #[pyo3(signature = (z0, t_f, dt, mu = None))]
    fn simulate<'py>(&self, py: Python<'py>, z0: PyReadonlyArray1<'py, f64>, t_f: f64, dt: f64, mu: Option<f64>) -> PyResult<TrajectoryArrays<'py>> {
        let mu = mu.unwrap_or(self.inner.viscosity);
        let traj = truth::simulate(&self.inner, z0.as_array(), mu, t_f, dt).py()?;
        Ok(trajectory_arrays(py, traj))
    }

    fn __repr__(&self) -> String {
        format!("TruthModel(n={}, viscosity={:e})", self.inner.n, self.inner.viscosity)
    }
}

/// Weighted POD basis with an optional base state.
#[pyclass(name = "PodBasis", module = "romstab", skip_from_py_object)]
#[derive(Clone)]
struct PyPodBasis {
    inner: pod::PodBasis,
}

#[pymethods]
impl PyPodBasis {
    /// Method of snapshots on `states` (one snapshot per row). Pass `r_v`
    /// and `r_t` together with two `blocks` for a blocked basis.
    #[staticmethod]
    #[pyo3(signature = (states, weights, r = None, subtract_mean = false, blocks = None, r_v = None, r_t = None))]
    fn compute(
        states: PyReadonlyArray2<'_, f64>,
        weights: PyReadonlyArray1<'_, f64>,
        r: Option<usize>,
        subtract_mean: bool,
        blocks: Option<Vec<usize>>,
        r_v: Option<usize>,
        r_t: Option<usize>,
    ) -> PyResult<Self> {
        let states = states.as_array().to_owned();
        let times = (0..states.nrows()).map(|i| i as f64).collect();
        let snaps = truth::SnapshotSet::new(states, times, weights.as_array().to_owned(), blocks.unwrap_or_default()).py()?;
        let inner = match (r, r_v, r_t) {
            (Some(r), None, None) => pod::compute_basis(&snaps, r, subtract_mean).py()?,
            (None, Some(rv), Some(rt)) => pod::compute_basis_blocked(&snaps, rv, rt, subtract_mean).py()?,
            _ => return Err(PyValueError::new_err("give either r or both r_v and r_t")),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn modes<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.modes.clone().into_pyarray(py)
    }

    #[getter]
    fn eigenvalues<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.eigenvalues.clone().into_pyarray(py)
    }

    #[getter]
    fn spectrum<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.spectrum.clone().into_pyarray(py)
    }

    #[getter]
    fn base_state<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.base_state.clone().into_pyarray(py)
    }

    fn project<'py>(&self, py: Python<'py>, z: PyReadonlyArray1<'py, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        Ok(self.inner.project(z.as_array()).py()?.into_pyarray(py))
    }

    fn reconstruct<'py>(&self, py: Python<'py>, q: PyReadonlyArray1<'py, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        Ok(self.inner.reconstruct(q.as_array()).py()?.into_pyarray(py))
    }

    fn orthonormality_error(&self) -> f64 {
        self.inner.orthonormality_error()
    }

    fn discarded_energy(&self) -> f64 {
        self.inner.discarded_energy()
    }

    fn __repr__(&self) -> String {
        format!("PodBasis({})", self.inner.describe())
    }
}

/// Closure amplitudes and nonlinearity bound.
#[pyclass(name = "ClosureConfig", module = "romstab", from_py_object)]
#[derive(Clone)]
struct PyClosureConfig {
    inner: ClosureConfig,
}

#[pymethods]
impl PyClosureConfig {
    #[new]
    #[pyo3(signature = (mu_e, mu_nl, c_max = 10.0, l_max = 0.0, bound_kind = "quadratic_only"))]
    fn new(mu_e: f64, mu_nl: f64, c_max: f64, l_max: f64, bound_kind: &str) -> PyResult<Self> {
        let inner = ClosureConfig {
            mu_e,
            mu_nl,
            c_max,
            l_max,
            bound_kind: self::bound_kind(bound_kind)?,
        };
        inner.validate().py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn mu_e(&self) -> f64 {
        self.inner.mu_e
    }

    #[getter]
    fn mu_nl(&self) -> f64 {
        self.inner.mu_nl
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "ClosureConfig(mu_e={:e}, mu_nl={:e}, c_max={}, l_max={}, bound_kind={:?})",
            c.mu_e, c.mu_nl, c.c_max, c.l_max, c.bound_kind
        )
    }
}

/// Galerkin ROM `dq/dt = e + L q + mu D q + [C q] q`.
#[pyclass(name = "QuadraticRom", module = "romstab", skip_from_py_object)]
#[derive(Clone)]
struct PyQuadraticRom {
    inner: rom::QuadraticRom,
}

#[pymethods]
impl PyQuadraticRom {
    #[staticmethod]
    fn assemble(model: &PyTruthModel, basis: &PyPodBasis) -> PyResult<Self> {
        Ok(Self {
            inner: rom::assemble(&model.inner, &basis.inner).py()?,
        })
    }

    #[staticmethod]
    fn from_coefficients(
        e: PyReadonlyArray1<'_, f64>,
        l: PyReadonlyArray2<'_, f64>,
        d: PyReadonlyArray2<'_, f64>,
        c: PyReadonlyArray3<'_, f64>,
        mu: f64,
    ) -> PyResult<Self> {
        let inner = rom::QuadraticRom::new(
            e.as_array().to_owned(),
            l.as_array().to_owned(),
            d.as_array().to_owned(),
            c.as_array().to_owned(),
            mu,
            "python",
        )
        .py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: rom::QuadraticRom::load_json(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_json(&path).py()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn e<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.inner.e().clone().into_pyarray(py)
    }

    #[getter]
    fn l<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.l().clone().into_pyarray(py)
    }

    #[getter]
    fn d<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.d().clone().into_pyarray(py)
    }

    #[getter]
    fn c<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray3<f64>> {
        self.inner.c().clone().into_pyarray(py)
    }

    /// Nominal right-hand side, or the stabilized one when `closure` is given.
    #[pyo3(signature = (q, closure = None))]
    fn rhs<'py>(&self, py: Python<'py>, q: PyReadonlyArray1<'py, f64>, closure: Option<PyClosureConfig>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let out = match closure {
            Some(cfg) => self.inner.rhs_stabilized(&cfg.inner, q.as_array()),
            None => self.inner.rhs_nominal(q.as_array()),
        };
        Ok(out.py()?.into_pyarray(py))
    }

    #[pyo3(signature = (q0, t_f, dt, closure = None))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        q0: PyReadonlyArray1<'py, f64>,
        t_f: f64,
        dt: f64,
        closure: Option<PyClosureConfig>,
    ) -> PyResult<TrajectoryArrays<'py>> {
        let cfg = closure.map(|c| c.inner);
        let traj = rom::integrate_rom(&self.inner, cfg.as_ref(), q0.as_array(), t_f, dt).py()?;
        Ok(trajectory_arrays(py, traj))
    }

    fn invariant_set_margin(&self, closure: &PyClosureConfig, q: PyReadonlyArray1<'_, f64>) -> PyResult<f64> {
        self.inner.invariant_set_margin(&closure.inner, q.as_array()).py()
    }

    fn lyapunov_bound(&self, closure: &PyClosureConfig, q: PyReadonlyArray1<'_, f64>) -> PyResult<f64> {
        self.inner.lyapunov_bound(&closure.inner, q.as_array()).py()
    }

    fn lyapunov_derivative(&self, closure: &PyClosureConfig, q: PyReadonlyArray1<'_, f64>) -> PyResult<f64> {
        self.inner.lyapunov_derivative(&closure.inner, q.as_array()).py()
    }

    fn __repr__(&self) -> String {
        format!("QuadraticRom(dim={}, mu={:e})", self.inner.dim(), self.inner.mu())
    }
}

/// `int |q_true - q_rom|^2 dt` over a shared time grid.
#[pyfunction]
fn cost_q(times: Vec<f64>, truth: PyReadonlyArray2<'_, f64>, rom: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    let a = ode::Trajectory::new(times.clone(), truth.as_array().to_owned()).py()?;
    let b = ode::Trajectory::new(times, rom.as_array().to_owned()).py()?;
    mes::cost_q(&a, &b).py()
}

/// Extremum-seeking minimization of a Python callable `objective(params)`.
///
/// The callable returns a float, or `None` for an unstable evaluation
/// (charged the penalty cost). Returns a dict with `best`, `best_q`,
/// `iterations` and `trace` (a list of `(k, params, q)`).
#[pyfunction]
#[pyo3(signature = (objective, a, omega, dt = 0.05, scale = None, k_max = 200, y0 = None, plateau_window = 0))]
#[allow(clippy::too_many_arguments)]
fn extremum_seek<'py>(
    py: Python<'py>,
    objective: Bound<'py, PyAny>,
    a: Vec<f64>,
    omega: Vec<f64>,
    dt: f64,
    scale: Option<Vec<f64>>,
    k_max: usize,
    y0: Option<Vec<f64>>,
    plateau_window: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = a.len();
    let cfg = MesConfig {
        a,
        omega,
        dt,
        scale: scale.unwrap_or_else(|| vec![1.0; p]),
        k_max,
        q_penalty: mes::DEFAULT_Q_PENALTY,
        y0: y0.unwrap_or_default(),
    };
    let stop = if plateau_window == 0 {
        StopRule::MaxIterations
    } else {
        StopRule::Plateau {
            window: plateau_window,
            rel_tol: 1e-4,
        }
    };
    let mut py_error = None;
    let result = mes::tune_with(&cfg, stop, |params| {
        if py_error.is_some() {
            return Ok(Evaluation::unstable(params.to_vec(), None));
        }
        match objective.call1((params.to_vec(),)).and_then(|v| v.extract::<Option<f64>>()) {
            Ok(Some(q)) if q.is_finite() => Ok(Evaluation::stable(params.to_vec(), q)),
            Ok(_) => Ok(Evaluation::unstable(params.to_vec(), None)),
            Err(e) => {
                py_error = Some(e);
                Ok(Evaluation::unstable(params.to_vec(), None))
            }
        }
    });
    if let Some(e) = py_error {
        return Err(e);
    }
    let result = result.py()?;
    let out = PyDict::new(py);
    out.set_item("best", result.best)?;
    out.set_item("best_q", result.best_q)?;
    out.set_item("iterations", result.iterations)?;
    let trace: Vec<(usize, Vec<f64>, f64)> = result.trace.records.into_iter().map(|r| (r.iter, r.params, r.q)).collect();
    out.set_item("trace", trace)?;
    Ok(out)
}

/// Skew-symmetric Burgers right-hand side on a periodic grid.
#[pyfunction]
fn burgers_rhs<'py>(py: Python<'py>, u: PyReadonlyArray1<'py, f64>, mu: f64) -> PyResult<Bound<'py, PyArray1<f64>>> {
    Ok(truth::burgers_rhs(u.as_array(), mu).py()?.into_pyarray(py))
}

/// JSON text of a named experiment preset.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::preset(name).py()?;
    serde_json::to_string_pretty(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the full pipeline from a preset name or a JSON config file and
/// returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (out, preset = None, config = None, seed = None))]
fn run_pipeline<'py>(py: Python<'py>, out: PathBuf, preset: Option<&str>, config: Option<PathBuf>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = match (preset, config) {
        (Some(name), None) => ExperimentConfig::preset(name).py()?,
        (None, Some(path)) => ExperimentConfig::load(&path).py()?,
        _ => return Err(PyValueError::new_err("give exactly one of preset or config")),
    };
    if let Some(seed) = seed {
        cfg.truth.seed = seed;
    }
    let summary = py.detach(|| pipeline::run_pipeline(&cfg, &out)).py()?;
    let text = serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Writes the plot-ready CSVs for a completed run; returns their paths.
#[pyfunction]
fn report(run_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    pipeline::report(&run_dir).py()
}

#[pymodule(name = "romstab")]
fn romstab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTruthModel>()?;
    m.add_class::<PyPodBasis>()?;
    m.add_class::<PyClosureConfig>()?;
    m.add_class::<PyQuadraticRom>()?;
    m.add_function(wrap_pyfunction!(burgers_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(cost_q, m)?)?;
    m.add_function(wrap_pyfunction!(extremum_seek, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add("PRESETS", pipeline::PRESETS.to_vec())?;
    Ok(())
}
