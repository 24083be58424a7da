//! Reproducible end-to-end experiments: simulate, POD, ROM assembly,
//! closure tuning and plot-ready reporting.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, RomError};
use crate::io;
use crate::mes::{self, CostTrace, MesConfig, RomTuningProblem, StopRule};
use crate::ode::Trajectory;
use crate::pod::{compute_basis, compute_basis_blocked, PodBasis};
use crate::rom::{assemble, integrate_rom_until_blow_up, BoundKind, ClosureConfig, QuadraticRom};
use crate::truth::{make_synthetic, simulate, SnapshotSet, TruthModel};

/// Quiet-room Rayleigh-Benard parameters.
pub const QUIET_ROOM: Dimensionless = Dimensionless {
    re: 4.964e4,
    pr: 0.712,
    gr: 7.369e7,
};

pub const PRESETS: [&str; 2] = ["burgers-small", "boussinesq-structured"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub re: f64,
    pub pr: f64,
    pub gr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Viscosity {
    Mu {
        mu: f64,
    },
    /// Only `mu = 1/Re` enters the surrogate models.
    Dimensionless(Dimensionless),
}

impl Viscosity {
    pub fn mu(&self) -> f64 {
        match self {
            Viscosity::Mu { mu } => *mu,
            Viscosity::Dimensionless(d) => 1.0 / d.re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Burgers1d,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `A sin(2 pi x)`
    Sine,
    /// `A (sin(2 pi x) + 0.5 cos(4 pi x))`
    SinePair,
    /// Seeded Gaussian vector rescaled to Euclidean norm `A`.
    Random,
    /// Synthetic models only: like `Random`, with component `i` weighted by
    /// `sqrt(spectrum_min / spectrum_i)` so energy sits in weakly damped
    /// coordinates.
    ModalRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub model: ModelKind,
    pub n: usize,
    pub viscosity: Viscosity,
    pub t_f: f64,
    pub dt: f64,
    pub z0: InitialState,
    pub z0_amplitude: f64,
    pub seed: u64,
    /// Synthetic damping spectrum, geometric from `[max, min]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_v: Option<usize>,
    #[serde(default, rename = "r_T", skip_serializing_if = "Option::is_none")]
    pub r_t: Option<usize>,
    pub subtract_mean: bool,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureSettings {
    pub c_max: f64,
    #[serde(default)]
    pub l_max: f64,
    pub bound_kind: BoundKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSettings {
    /// Plateau window in iterations; 0 runs all `k_max` iterations.
    pub window: usize,
    pub rel_tol: f64,
}

impl StopSettings {
    pub fn rule(&self) -> StopRule {
        if self.window == 0 {
            StopRule::MaxIterations
        } else {
            StopRule::Plateau {
                window: self.window,
                rel_tol: self.rel_tol,
            }
        }
    }
}

impl Default for StopSettings {
    fn default() -> Self {
        Self { window: 50, rel_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub truth: TruthConfig,
    pub pod: PodConfig,
    pub closure: ClosureSettings,
    pub mes: MesConfig,
    #[serde(default)]
    pub stop: StopSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "burgers-small" => Ok(Self::burgers_small()),
            "boussinesq-structured" => Ok(Self::boussinesq_structured()),
            other => Err(invalid("preset", format!("unknown preset {other:?}; available: {}", PRESETS.join(", ")))),
        }
    }

    /// Under-resolved Burgers ROM (r = 4): a steepening two-harmonic wave
    /// whose nominal ROM misses the shock dissipation.
    pub fn burgers_small() -> Self {
        Self {
            name: "burgers-small".into(),
            truth: TruthConfig {
                model: ModelKind::Burgers1d,
                n: 256,
                viscosity: Viscosity::Mu { mu: 0.005 },
                t_f: 1.0,
                dt: 2.5e-4,
                z0: InitialState::SinePair,
                z0_amplitude: 2.5,
                seed: 0,
                spectrum: None,
                blocks: Vec::new(),
            },
            pod: PodConfig {
                r: Some(4),
                r_v: None,
                r_t: None,
                subtract_mean: false,
                stride: 80,
            },
            closure: ClosureSettings {
                c_max: 10.0,
                l_max: 100.0,
                bound_kind: BoundKind::AffinePlusQuadratic,
            },
            mes: MesConfig {
                scale: vec![0.03, 3e-3],
                k_max: 400,
                ..MesConfig::reference()
            },
            stop: StopSettings::default(),
            output_dir: None,
        }
    }

    /// Synthetic two-block quadratic system with 8 + 8 POD modes and the
    /// reference extremum-seeking operating point.
    pub fn boussinesq_structured() -> Self {
        Self {
            name: "boussinesq-structured".into(),
            truth: TruthConfig {
                model: ModelKind::Synthetic,
                n: 64,
                viscosity: Viscosity::Dimensionless(QUIET_ROOM),
                t_f: 78.0,
                dt: 0.0195,
                z0: InitialState::ModalRandom,
                z0_amplitude: 5.0,
                seed: 7,
                spectrum: Some([5e3, 0.5]),
                blocks: vec![0, 32],
            },
            pod: PodConfig {
                r: None,
                r_v: Some(8),
                r_t: Some(8),
                subtract_mean: true,
                stride: 40,
            },
            closure: ClosureSettings {
                c_max: 10.0,
                l_max: 0.0,
                bound_kind: BoundKind::QuadraticOnly,
            },
            // mu = 1/Re is tiny, so the eddy-viscosity dither is expressed
            // in units comparable to mu rather than O(1)
            mes: MesConfig {
                scale: vec![3e-5, 1e-6],
                ..MesConfig::reference()
            },
            stop: StopSettings::default(),
            output_dir: None,
        }
    }

    /// Rejects out-of-range fields, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let t = &self.truth;
        let field = |name: &'static str, ok: bool, why: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(invalid(name, why.to_owned()))
            }
        };
        match t.model {
            ModelKind::Burgers1d => field("truth.n", t.n >= 8, "Burgers needs n >= 8")?,
            ModelKind::Synthetic => {
                field("truth.n", t.n >= 4, "synthetic model needs n >= 4")?;
                let ok = matches!(t.spectrum, Some([hi, lo]) if hi > lo && lo > 0.0 && hi.is_finite());
                field("truth.spectrum", ok, "synthetic model needs a spectrum [max, min] with max > min > 0")?;
            }
        }
        field(
            "truth.z0",
            t.z0 != InitialState::ModalRandom || t.model == ModelKind::Synthetic,
            "modal-random needs the synthetic model",
        )?;
        let mu = t.viscosity.mu();
        field("truth.viscosity", mu > 0.0 && mu.is_finite(), "viscosity must be positive")?;
        if let Viscosity::Dimensionless(d) = t.viscosity {
            field("truth.viscosity.pr", d.pr > 0.0, "Pr must be positive")?;
            field("truth.viscosity.gr", d.gr > 0.0, "Gr must be positive")?;
        }
        field("truth.t_f", t.t_f > 0.0 && t.t_f.is_finite(), "must be positive")?;
        field("truth.dt", t.dt > 0.0 && t.dt < t.t_f, "must be positive and below t_f")?;
        field("truth.z0_amplitude", t.z0_amplitude > 0.0 && t.z0_amplitude.is_finite(), "must be positive")?;
        if !t.blocks.is_empty() {
            let ok = t.blocks[0] == 0 && t.blocks.windows(2).all(|w| w[1] > w[0]) && *t.blocks.last().unwrap() < t.n;
            field("truth.blocks", ok, "offsets must start at 0 and increase below n")?;
        }

        let p = &self.pod;
        field("pod.stride", p.stride >= 1, "must be at least 1")?;
        match (p.r, p.r_v, p.r_t) {
            (Some(r), None, None) => field("pod.r", r >= 1, "must be at least 1")?,
            (None, Some(rv), Some(rt)) => {
                field("pod.r_v", rv >= 1, "must be at least 1")?;
                field("pod.r_T", rt >= 1, "must be at least 1")?;
                field("truth.blocks", t.blocks.len() == 2, "blocked POD needs exactly two blocks")?;
            }
            _ => return Err(invalid("pod.r", "set either r or both r_v and r_T")),
        }
        let c = &self.closure;
        field("closure.c_max", c.c_max > 0.0 && c.c_max.is_finite(), "must be positive")?;
        field("closure.l_max", c.l_max >= 0.0 && c.l_max.is_finite(), "must be non-negative")?;
        if self.mes.len() != 2 {
            return Err(invalid("mes.a", "the closure tuner has exactly two parameters (mu_e, mu_nl)"));
        }
        self.mes.validate().map_err(|e| match e {
            RomError::InvalidArgument { name, reason } => invalid(mes_field(name), reason),
            other => other,
        })?;
        field("stop.rel_tol", self.stop.rel_tol >= 0.0, "must be non-negative")?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn truth_model(&self) -> Result<TruthModel> {
        let t = &self.truth;
        let mu = t.viscosity.mu();
        let model = match t.model {
            ModelKind::Burgers1d => TruthModel::burgers(t.n, mu)?,
            ModelKind::Synthetic => {
                let [hi, lo] = t.spectrum.ok_or_else(|| invalid("truth.spectrum", "missing"))?;
                let spectrum = geometric(hi, lo, t.n);
                make_synthetic(t.n, t.seed, &spectrum)?.with_viscosity(mu)
            }
        };
        model.with_blocks(t.blocks.clone())
    }

    pub fn initial_state(&self, model: &TruthModel) -> Array1<f64> {
        let t = &self.truth;
        let amp = t.z0_amplitude;
        let x = model.grid();
        match t.z0 {
            InitialState::Sine => x.mapv(|x| amp * (2.0 * PI * x).sin()),
            InitialState::SinePair => x.mapv(|x| amp * ((2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos())),
            InitialState::Random | InitialState::ModalRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(t.seed ^ 0x5eed_0000_0000_0001);
                let mut v = Array1::from_shape_simple_fn(t.n, || {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    s
                });
                if let (InitialState::ModalRandom, Some([hi, lo])) = (t.z0, t.spectrum) {
                    for (x, lam) in v.iter_mut().zip(geometric(hi, lo, t.n)) {
                        *x *= (lo / lam).sqrt();
                    }
                }
                let nrm = v.dot(&v).sqrt();
                v * (amp / nrm)
            }
        }
    }
}

fn mes_field(name: &'static str) -> &'static str {
    match name {
        "a" => "mes.a",
        "omega" => "mes.omega",
        "dt" => "mes.dt",
        "scale" => "mes.scale",
        "k_max" => "mes.k_max",
        "q_penalty" => "mes.q_penalty",
        "y0" => "mes.y0",
        other => other,
    }
}

fn geometric(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let ratio = (lo / hi).ln() / (n.max(2) - 1) as f64;
    (0..n).map(|k| hi * (ratio * k as f64).exp()).collect()
}

/// Headline numbers of a run; serialized as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub r: usize,
    #[serde(rename = "Q_nominal")]
    pub q_nominal: f64,
    #[serde(rename = "Q_tuned")]
    pub q_tuned: f64,
    pub improvement_ratio: f64,
    pub mu_opt: [f64; 2],
    pub nominal_stable: bool,
    pub nominal_blow_up_time: Option<f64>,
    pub tuned_stable: bool,
    pub tuner_iterations: usize,
    pub orthonormality_error: f64,
    pub subtract_mean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageStatus>,
    pub failed_stage: Option<String>,
}

pub const SNAPSHOTS: &str = "snapshots";
pub const BASIS: &str = "basis";
pub const ROM_FILE: &str = "rom.json";
pub const TRUTH_COEFFS: &str = "truth_coefficients.csv";
pub const ROM_NOMINAL: &str = "rom_nominal.csv";
pub const ROM_TUNED: &str = "rom_tuned.csv";
pub const ERROR_NOMINAL: &str = "error_trace_nominal.csv";
pub const ERROR_TUNED: &str = "error_trace_tuned.csv";
pub const TRACE: &str = "tuner_trace.csv";
pub const TUNER_CONFIG: &str = "tuner.json";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "MANIFEST.json";
pub const CONFIG: &str = "config.json";

/// Runs the truth model and stores its snapshots.
pub fn stage_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SnapshotSet> {
    let model = cfg.truth_model()?;
    let z0 = cfg.initial_state(&model);
    log::info!("simulating {:?} truth model, n = {}", cfg.truth.model, model.n);
    let traj = simulate(&model, z0.view(), model.viscosity, cfg.truth.t_f, cfg.truth.dt)?;
    let snaps = model.collect_snapshots(&traj, cfg.pod.stride)?;
    snaps.save(out, SNAPSHOTS)?;
    Ok(snaps)
}

pub fn stage_pod(cfg: &ExperimentConfig, out: &Path, snaps: &SnapshotSet) -> Result<PodBasis> {
    let p = &cfg.pod;
    let basis = match (p.r, p.r_v, p.r_t) {
        (Some(r), _, _) => compute_basis(snaps, r, p.subtract_mean)?,
        (None, Some(rv), Some(rt)) => compute_basis_blocked(snaps, rv, rt, p.subtract_mean)?,
        _ => return Err(invalid("pod.r", "set either r or both r_v and r_T")),
    };
    log::info!("POD basis {} with orthonormality error {:e}", basis.describe(), basis.orthonormality_error());
    basis.save(out, BASIS)?;
    Ok(basis)
}

pub fn stage_rom(cfg: &ExperimentConfig, out: &Path, basis: &PodBasis) -> Result<QuadraticRom> {
    let model = cfg.truth_model()?;
    let rom = assemble(&model, basis)?;
    rom.save_json(&out.join(ROM_FILE))?;
    Ok(rom)
}

/// Result of the tuning stage.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub summary: Summary,
    pub trace: CostTrace,
}

pub fn stage_tune(cfg: &ExperimentConfig, out: &Path, snaps: &SnapshotSet, basis: &PodBasis, rom: &QuadraticRom) -> Result<TuneOutcome> {
    let truth = Trajectory::new(snaps.times.clone(), basis.project_rows(&snaps.states)?)?;
    io::write_trajectory(out.join(TRUTH_COEFFS), &truth, "q")?;
    io::write_json(out.join(TUNER_CONFIG), &cfg.mes)?;
    let problem = RomTuningProblem {
        rom,
        truth: &truth,
        dt: cfg.truth.dt,
        stride: cfg.pod.stride,
        c_max: cfg.closure.c_max,
        l_max: cfg.closure.l_max,
        bound_kind: cfg.closure.bound_kind,
    };

    let nominal = problem.evaluate_nominal()?;
    let (nominal_traj, nominal_blow_up) = rom_run(&problem, None)?;
    io::write_trajectory(out.join(ROM_NOMINAL), &nominal_traj, "q")?;
    write_error_trace(&out.join(ERROR_NOMINAL), &truth, &nominal_traj)?;

    let result = mes::tune(&problem, &cfg.mes, cfg.stop.rule())?;
    result.trace.save_csv(&out.join(TRACE))?;
    let tuned_cfg = problem.closure(&result.best);
    let (tuned_traj, tuned_blow_up) = rom_run(&problem, Some(&tuned_cfg))?;
    io::write_trajectory(out.join(ROM_TUNED), &tuned_traj, "q")?;
    write_error_trace(&out.join(ERROR_TUNED), &truth, &tuned_traj)?;

    let q_nominal = if nominal.stable { nominal.cost } else { cfg.mes.q_penalty };
    let summary = Summary {
        name: cfg.name.clone(),
        r: basis.rank(),
        q_nominal,
        q_tuned: result.best_q,
        improvement_ratio: q_nominal / result.best_q,
        mu_opt: [tuned_cfg.mu_e, tuned_cfg.mu_nl],
        nominal_stable: nominal.stable && mes::lagrange_stability_check(&nominal_traj),
        nominal_blow_up_time: nominal_blow_up,
        tuned_stable: tuned_blow_up.is_none() && mes::lagrange_stability_check(&tuned_traj),
        tuner_iterations: result.iterations,
        orthonormality_error: basis.orthonormality_error(),
        subtract_mean: basis.subtract_mean,
    };
    Ok(TuneOutcome { summary, trace: result.trace })
}

fn rom_run(problem: &RomTuningProblem<'_>, closure: Option<&ClosureConfig>) -> Result<(Trajectory, Option<f64>)> {
    let t_f = *problem.truth.times.last().expect("non-empty truth");
    let (traj, blow_up) = integrate_rom_until_blow_up(problem.rom, closure, problem.truth.state(0), t_f, problem.dt)?;
    Ok((traj.subsample(problem.stride), blow_up))
}

/// `t,error_sq` with `error_sq = |q_true(t) - q_rom(t)|^2` over the samples
/// the ROM reached.
fn write_error_trace(path: &Path, truth: &Trajectory, rom: &Trajectory) -> Result<()> {
    let rows = rom.times.iter().enumerate().map(|(j, &t)| {
        let d = &truth.state(j) - &rom.state(j);
        vec![t, d.dot(&d)]
    });
    io::write_table(path, &["t".to_owned(), "error_sq".to_owned()], rows)
}

/// Runs every stage, writing artifacts and a MANIFEST into `out`.
///
/// A failing stage leaves the earlier artifacts in place and is named in
/// the manifest and in the returned [`RomError::Stage`].
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out)?;
    let mut manifest = Manifest::default();
    let result = run_stages(cfg, out, &mut manifest);
    if let Err(RomError::Stage { stage, source }) = &result {
        manifest.stages.push(StageStatus {
            stage: (*stage).to_owned(),
            status: "failed".into(),
            error: Some(source.to_string()),
        });
        manifest.failed_stage = Some((*stage).to_owned());
    }
    io::write_json(out.join(MANIFEST), &manifest)?;
    result
}

fn run_stages(cfg: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Summary> {
    fn stage<T>(name: &'static str, manifest: &mut Manifest, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let value = f().map_err(|e| RomError::Stage {
            stage: name,
            source: Box::new(e),
        })?;
        manifest.stages.push(StageStatus {
            stage: name.to_owned(),
            status: "ok".into(),
            error: None,
        });
        Ok(value)
    }
    stage("config", manifest, || {
        cfg.validate()?;
        cfg.save(&out.join(CONFIG))
    })?;
    let snaps = stage("simulate", manifest, || stage_simulate(cfg, out))?;
    let basis = stage("pod", manifest, || stage_pod(cfg, out, &snaps))?;
    let rom = stage("rom", manifest, || stage_rom(cfg, out, &basis))?;
    let outcome = stage("tune", manifest, || stage_tune(cfg, out, &snaps, &basis, &rom))?;
    stage("summary", manifest, || io::write_json(out.join(SUMMARY), &outcome.summary))?;
    Ok(outcome.summary)
}

/// Loads the artifacts a later stage needs from a run directory.
pub fn load_snapshots(out: &Path) -> Result<SnapshotSet> {
    SnapshotSet::load(out, SNAPSHOTS)
}

pub fn load_basis(out: &Path, snaps: &SnapshotSet) -> Result<PodBasis> {
    PodBasis::load(out, BASIS, snaps.weights.clone())
}

pub fn load_rom(out: &Path) -> Result<QuadraticRom> {
    QuadraticRom::load_json(&out.join(ROM_FILE))
}

pub const REPORT_FILES: [&str; 5] = [
    "cost_vs_iter.csv",
    "mu_e_vs_iter.csv",
    "mu_nl_vs_iter.csv",
    "error_nominal.csv",
    "error_tuned.csv",
];

/// Emits plot-ready CSVs into `<run>/report/`:
///
/// * `cost_vs_iter.csv`: `k,Q`, one row per tuner evaluation (row 0 is the
///   starting point)
/// * `mu_e_vs_iter.csv`: `k,mu_e_hat`
/// * `mu_nl_vs_iter.csv`: `k,mu_nl_hat`
/// * `error_nominal.csv`, `error_tuned.csv`: `t,error_sq,energy`, the
///   squared coefficient error and its running time integral
pub fn report(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let needed = [TRACE, ERROR_NOMINAL, ERROR_TUNED];
    let missing: Vec<String> = needed.iter().filter(|f| !run_dir.join(f).exists()).map(|f| (*f).to_owned()).collect();
    if !missing.is_empty() {
        return Err(RomError::MissingArtifacts(missing));
    }
    let dir = run_dir.join("report");
    fs::create_dir_all(&dir)?;
    let trace = CostTrace::load_csv(&run_dir.join(TRACE))?;
    let col = |stem: &str, header: &str, f: &dyn Fn(&mes::CostRecord) -> f64| -> Result<PathBuf> {
        let path = dir.join(format!("{stem}_vs_iter.csv"));
        let rows = trace.records.iter().map(|r| vec![r.iter as f64, f(r)]);
        io::write_table(&path, &["k".to_owned(), header.to_owned()], rows)?;
        Ok(path)
    };
    let mut written = vec![
        col("cost", "Q", &|r| r.q)?,
        col("mu_e", "mu_e_hat", &|r| r.params[0])?,
        col("mu_nl", "mu_nl_hat", &|r| r.params.get(1).copied().unwrap_or(0.0))?,
    ];
    for (src, dst) in [(ERROR_NOMINAL, "error_nominal.csv"), (ERROR_TUNED, "error_tuned.csv")] {
        let (_, rows) = io::read_table(run_dir.join(src))?;
        let mut energy = 0.0;
        let mut out_rows = Vec::with_capacity(rows.len());
        for (j, row) in rows.iter().enumerate() {
            if j > 0 {
                let prev = &rows[j - 1];
                energy += 0.5 * (row[0] - prev[0]) * (row[1] + prev[1]);
            }
            out_rows.push(vec![row[0], row[1], energy]);
        }
        let path = dir.join(dst);
        io::write_table(&path, &["t".to_owned(), "error_sq".to_owned(), "energy".to_owned()], out_rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Time integral of the squared error in an emitted error CSV.
pub fn error_energy(path: &Path) -> Result<f64> {
    let (_, rows) = io::read_table(path)?;
    Ok(rows.last().map_or(0.0, |r| r[2]))
}

/// Coefficient-space trajectories stacked row-wise.
pub fn stack_rows(rows: &[Array1<f64>]) -> Array2<f64> {
    let dim = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j])
}
