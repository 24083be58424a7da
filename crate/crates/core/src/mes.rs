//! Multi-parametric extremum seeking for the closure amplitudes.
//!
//! Each parameter `i` carries an integrator state `y_i` and a sinusoidal
//! dither of amplitude `a_i` and frequency `omega_i`:
//!
//! ```text
//! y_i(k+1)  = y_i(k) + a_i dt sin(omega_i k dt + pi/2) Q(mu(k))
//! mu_i(k+1) = y_i(k+1) + a_i sin(omega_i (k+1) dt - pi/2)
//! ```
//!
//! Parameters evolve in internal units; the physical value is
//! `scale_i * mu_i`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result, RomError};
use crate::io::fmt_f64;
use crate::linalg::norm;
use crate::ode::Trajectory;
use crate::rom::{integrate_rom, BoundKind, ClosureConfig, QuadraticRom, BLOW_UP_NORM};

/// Cost assigned to evaluations whose ROM trajectory blew up.
pub const DEFAULT_Q_PENALTY: f64 = 1e12;

/// Tuner configuration, persisted as `{a, omega, dt, scale, k_max, q_penalty}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesConfig {
    /// Dither amplitudes in internal units.
    pub a: Vec<f64>,
    /// Dither frequencies (rad/s).
    pub omega: Vec<f64>,
    /// Learning step.
    pub dt: f64,
    /// Internal-to-physical parameter scales.
    pub scale: Vec<f64>,
    pub k_max: usize,
    #[serde(default = "default_penalty")]
    pub q_penalty: f64,
    /// Initial integrator states; zero when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y0: Vec<f64>,
}

fn default_penalty() -> f64 {
    DEFAULT_Q_PENALTY
}

impl MesConfig {
    /// Two-parameter `(mu_e, mu_nl)` tuner at the reference operating point:
    /// `a = (0.08, 1e-7)` physical, `omega = (10, 50)` rad/s.
    pub fn reference() -> Self {
        Self {
            a: vec![0.08, 0.1],
            omega: vec![10.0, 50.0],
            dt: 0.05,
            scale: vec![1.0, 1e-6],
            k_max: 200,
            q_penalty: DEFAULT_Q_PENALTY,
            y0: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        if self.y0.is_empty() {
            vec![0.0; self.len()]
        } else {
            self.y0.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.a.len();
        if p == 0 {
            return Err(invalid("a", "need at least one parameter"));
        }
        check_len("omega", p, self.omega.len())?;
        check_len("scale", p, self.scale.len())?;
        if !self.y0.is_empty() {
            check_len("y0", p, self.y0.len())?;
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.a.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(invalid("a", "amplitudes must be positive"));
        }
        if self.scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(invalid("scale", "scales must be positive"));
        }
        for (i, &w) in self.omega.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(invalid("omega", "frequencies must be positive"));
            }
            if w * self.dt >= PI {
                return Err(invalid("omega", format!("omega[{i}] * dt = {} is not below pi", w * self.dt)));
            }
            if self.omega[..i].contains(&w) {
                return Err(invalid("omega", "frequencies must be pairwise distinct"));
            }
        }
        if self.k_max == 0 {
            return Err(invalid("k_max", "must be at least 1"));
        }
        if !(self.q_penalty > 0.0) || !self.q_penalty.is_finite() {
            return Err(invalid("q_penalty", "must be positive and finite"));
        }
        if self.y0.iter().any(|y| !y.is_finite()) {
            return Err(invalid("y0", "must be finite"));
        }
        Ok(())
    }

    /// Number of learning steps in one period of the slowest dither.
    pub fn slowest_period_steps(&self) -> usize {
        let w_min = self.omega.iter().copied().fold(f64::INFINITY, f64::min);
        ((2.0 * PI / (w_min * self.dt)).round() as usize).max(1)
    }
}

/// Sampled frequency folded into `[0, pi]`.
fn folded(w: f64, dt: f64) -> f64 {
    let x = (w * dt).rem_euclid(2.0 * PI);
    if x > PI {
        2.0 * PI - x
    } else {
        x
    }
}

/// True when the sampled frequencies `omega_i`, `omega_i +- omega_j` and
/// `2 omega_i` are all distinct and non-zero (separation `min_gap` rad/step).
pub fn is_non_resonant(omega: &[f64], dt: f64, min_gap: f64) -> bool {
    let mut tones = Vec::new();
    for (i, &wi) in omega.iter().enumerate() {
        tones.push(folded(wi, dt));
        tones.push(folded(2.0 * wi, dt));
        for &wj in &omega[i + 1..] {
            tones.push(folded(wi + wj, dt));
            tones.push(folded((wi - wj).abs(), dt));
        }
    }
    if tones.iter().any(|&t| t < min_gap) {
        return false;
    }
    tones.sort_by(f64::total_cmp);
    tones.windows(2).all(|w| w[1] - w[0] >= min_gap)
}

/// Picks `p` frequencies at or above `base` that satisfy
/// [`is_non_resonant`] with `omega dt < pi`.
pub fn select_frequencies(p: usize, base: f64, dt: f64) -> Result<Vec<f64>> {
    let limit = PI / dt;
    let min_gap = 0.02;
    let mut chosen: Vec<f64> = Vec::with_capacity(p);
    let mut candidate = base;
    let step = base * 0.1;
    while chosen.len() < p {
        if candidate >= limit {
            return Err(invalid("omega", format!("cannot fit {p} non-resonant frequencies below pi/dt = {limit}")));
        }
        let mut trial = chosen.clone();
        trial.push(candidate);
        if is_non_resonant(&trial, dt, min_gap) {
            chosen = trial;
        }
        candidate += step;
    }
    Ok(chosen)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesRecord {
    pub k: usize,
    pub mu_hat: Vec<f64>,
    pub q: f64,
}

/// Discrete extremum-seeking state.
#[derive(Debug, Clone, PartialEq)]
pub struct MesState {
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
    pub dt: f64,
    pub k: usize,
    pub mu_hat: Vec<f64>,
    pub scale: Vec<f64>,
    pub trace: Vec<MesRecord>,
}

impl MesState {
    pub fn new(cfg: &MesConfig) -> Result<Self> {
        cfg.validate()?;
        let y = cfg.initial_state();
        let mut state = Self {
            y,
            a: cfg.a.clone(),
            omega: cfg.omega.clone(),
            dt: cfg.dt,
            k: 0,
            mu_hat: Vec::new(),
            scale: cfg.scale.clone(),
            trace: Vec::new(),
        };
        state.mu_hat = (0..state.y.len()).map(|i| state.y[i] + state.dither(i, 0)).collect();
        Ok(state)
    }

    /// `a_i sin(omega_i k dt - pi/2)`
    pub fn dither(&self, i: usize, k: usize) -> f64 {
        self.a[i] * (self.omega[i] * k as f64 * self.dt - FRAC_PI_2).sin()
    }

    /// One learning iteration driven by the cost `q` measured at `mu_hat(k)`.
    pub fn step(&mut self, q: f64) -> Result<()> {
        if !q.is_finite() {
            return Err(RomError::NonFinite("extremum-seeking cost"));
        }
        self.trace.push(MesRecord {
            k: self.k,
            mu_hat: self.mu_hat.clone(),
            q,
        });
        let t = self.k as f64 * self.dt;
        for i in 0..self.y.len() {
            self.y[i] += self.a[i] * self.dt * (self.omega[i] * t + FRAC_PI_2).sin() * q;
        }
        self.k += 1;
        for i in 0..self.y.len() {
            self.mu_hat[i] = self.y[i] + self.dither(i, self.k);
        }
        Ok(())
    }

    /// `scale_i * mu_hat_i`
    pub fn physical(&self) -> Vec<f64> {
        self.mu_hat.iter().zip(&self.scale).map(|(m, s)| m * s).collect()
    }
}

/// `int_0^{t_f} |q_true(t) - q_rom(t)|^2 dt` by the composite trapezoid rule.
///
/// Both trajectories must share the same time grid. In an orthonormal basis
/// this equals the field-space error integral of the reconstructions.
pub fn cost_q(truth_projected: &Trajectory, rom: &Trajectory) -> Result<f64> {
    check_len("cost trajectory length", truth_projected.len(), rom.len())?;
    check_len("cost trajectory dimension", truth_projected.dim(), rom.dim())?;
    for (a, b) in truth_projected.times.iter().zip(&rom.times) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(RomError::GridMismatch(format!("{a} vs {b}")));
        }
    }
    let err: Vec<f64> = truth_projected
        .states
        .rows()
        .into_iter()
        .zip(rom.states.rows())
        .map(|(a, b)| {
            let d = &a - &b;
            d.dot(&d)
        })
        .collect();
    Ok(trapezoid(&truth_projected.times, &err))
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Bounded and finite throughout.
pub fn lagrange_stability_check(trajectory: &Trajectory) -> bool {
    trajectory
        .states
        .rows()
        .into_iter()
        .all(|row| row.iter().all(|x| x.is_finite()) && norm(row) < BLOW_UP_NORM)
}

/// Outcome of one cost evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Physical parameters actually used (after any clamping).
    pub params: Vec<f64>,
    pub cost: f64,
    pub stable: bool,
    pub blow_up_time: Option<f64>,
}

impl Evaluation {
    pub fn stable(params: Vec<f64>, cost: f64) -> Self {
        Self {
            params,
            cost,
            stable: true,
            blow_up_time: None,
        }
    }

    pub fn unstable(params: Vec<f64>, blow_up_time: Option<f64>) -> Self {
        Self {
            params,
            cost: f64::INFINITY,
            stable: false,
            blow_up_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRecord {
    /// 0 for the undithered starting point, `k + 1` for learning step `k`.
    pub iter: usize,
    pub params: Vec<f64>,
    /// Cost fed to the learner (the penalty for unstable evaluations).
    pub q: f64,
    pub stable: bool,
    pub blow_up_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostTrace {
    pub records: Vec<CostRecord>,
}

impl CostTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.q).collect()
    }

    /// Mean cost over the `window` records ending at `iter` (inclusive).
    pub fn windowed_mean(&self, iter: usize, window: usize) -> f64 {
        let end = (iter + 1).min(self.len());
        let start = end.saturating_sub(window.max(1));
        let slice = &self.records[start..end];
        slice.iter().map(|r| r.q).sum::<f64>() / slice.len() as f64
    }

    pub fn best(&self) -> Option<&CostRecord> {
        self.records.iter().filter(|r| r.stable).min_by(|a, b| a.q.total_cmp(&b.q))
    }

    /// Writes `k,mu_e_hat,mu_nl_hat,Q,stable` (generic `mu_<i>_hat`
    /// columns when there are not exactly two parameters).
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let p = self.records.first().map_or(2, |r| r.params.len());
        let mut header = vec!["k".to_owned()];
        if p == 2 {
            header.extend(["mu_e_hat".to_owned(), "mu_nl_hat".to_owned()]);
        } else {
            header.extend((0..p).map(|i| format!("mu_{i}_hat")));
        }
        header.extend(["Q".to_owned(), "stable".to_owned()]);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string()];
            row.extend(r.params.iter().map(|x| fmt_f64(*x)));
            row.push(fmt_f64(r.q));
            row.push(r.stable.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(RomError::MissingArtifact(path.to_path_buf()));
        }
        let bad = |reason: String| RomError::Format {
            path: path.display().to_string(),
            reason,
        };
        let mut r = csv::Reader::from_path(path)?;
        let width = r.headers()?.len();
        if width < 4 {
            return Err(bad("trace needs k, parameters, Q and stable columns".into()));
        }
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let iter = rec[0].parse::<usize>().map_err(|e| bad(e.to_string()))?;
            let params = (1..width - 2).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
            let q = num(&rec[width - 2])?;
            let stable = rec[width - 1].parse::<bool>().map_err(|e| bad(e.to_string()))?;
            records.push(CostRecord {
                iter,
                params,
                q,
                stable,
                blow_up_time: None,
            });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    MaxIterations,
    /// Stop when the mean cost over the last `window` iterations changes by
    /// less than `rel_tol` relative to the preceding window.
    Plateau {
        window: usize,
        rel_tol: f64,
    },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Plateau { window: 50, rel_tol: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    /// Parameters of the cheapest stable evaluation.
    pub best: Vec<f64>,
    pub best_q: f64,
    pub trace: CostTrace,
    /// Learning steps actually taken.
    pub iterations: usize,
    pub state: MesState,
}

/// Runs the extremum-seeking loop on an arbitrary objective.
///
/// The undithered starting point (`scale * y0`) is evaluated first and kept
/// as record 0, so the returned optimum is never worse than the start.
pub fn tune_with<F>(cfg: &MesConfig, stop: StopRule, mut objective: F) -> Result<TuneResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let mut state = MesState::new(cfg)?;
    let mut trace = CostTrace::default();
    let start: Vec<f64> = cfg.initial_state().iter().zip(&cfg.scale).map(|(y, s)| y * s).collect();
    let push = |trace: &mut CostTrace, iter: usize, ev: Evaluation| -> f64 {
        let q = if ev.stable && ev.cost.is_finite() { ev.cost } else { cfg.q_penalty };
        trace.records.push(CostRecord {
            iter,
            params: ev.params,
            q,
            stable: ev.stable,
            blow_up_time: ev.blow_up_time,
        });
        q
    };
    let ev = objective(&start)?;
    push(&mut trace, 0, ev);

    let mut iterations = 0;
    for k in 0..cfg.k_max {
        let ev = objective(&state.physical())?;
        let q = push(&mut trace, k + 1, ev);
        state.step(q)?;
        iterations = k + 1;
        if let StopRule::Plateau { window, rel_tol } = stop {
            let costs = &trace.records[1..];
            if costs.len() >= 2 * window {
                let n = costs.len();
                let recent = costs[n - window..].iter().map(|r| r.q).sum::<f64>() / window as f64;
                let before = costs[n - 2 * window..n - window].iter().map(|r| r.q).sum::<f64>() / window as f64;
                if (recent - before).abs() < rel_tol * before.abs() {
                    log::info!("tuner plateaued after {iterations} iterations");
                    break;
                }
            }
        }
    }
    let best = trace.best().ok_or(RomError::AllUnstable)?.clone();
    Ok(TuneResult {
        best: best.params,
        best_q: best.q,
        trace,
        iterations,
        state,
    })
}

/// Closure-amplitude tuning against a projected truth trajectory.
#[derive(Debug, Clone)]
pub struct RomTuningProblem<'a> {
    pub rom: &'a QuadraticRom,
    /// Truth projected onto the basis, sampled every `stride` ROM steps.
    pub truth: &'a Trajectory,
    /// ROM integration step.
    pub dt: f64,
    pub stride: usize,
    pub c_max: f64,
    pub l_max: f64,
    pub bound_kind: BoundKind,
}

impl RomTuningProblem<'_> {
    /// Physical `(mu_e, mu_nl)` actually applied: `mu + mu_e` is kept at or
    /// above `1e-3 mu` and `mu_nl` at or above zero.
    pub fn effective_params(&self, params: &[f64]) -> [f64; 2] {
        let mu = self.rom.mu();
        let mu_e = params[0].max(-mu + 1e-3 * mu);
        let mu_nl = params.get(1).copied().unwrap_or(0.0).max(0.0);
        [mu_e, mu_nl]
    }

    pub fn closure(&self, params: &[f64]) -> ClosureConfig {
        let [mu_e, mu_nl] = self.effective_params(params);
        ClosureConfig {
            mu_e,
            mu_nl,
            c_max: self.c_max,
            l_max: self.l_max,
            bound_kind: self.bound_kind,
        }
    }

    /// ROM trajectory on the truth sample grid. `closure = None` integrates
    /// the nominal model.
    pub fn rom_trajectory(&self, closure: Option<&ClosureConfig>) -> Result<Trajectory> {
        let t_f = *self.truth.times.last().ok_or_else(|| invalid("truth", "empty trajectory"))?;
        let q0 = self.truth.state(0);
        let full = integrate_rom(self.rom, closure, q0, t_f, self.dt)?;
        Ok(full.subsample(self.stride))
    }

    fn evaluate_with(&self, params: Vec<f64>, closure: Option<&ClosureConfig>) -> Result<Evaluation> {
        match self.rom_trajectory(closure) {
            Ok(traj) => Ok(Evaluation::stable(params, cost_q(self.truth, &traj)?)),
            Err(RomError::BlowUp { time }) => Ok(Evaluation::unstable(params, Some(time))),
            Err(e) => Err(e),
        }
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let cfg = self.closure(params);
        self.evaluate_with(vec![cfg.mu_e, cfg.mu_nl], Some(&cfg))
    }

    pub fn evaluate_nominal(&self) -> Result<Evaluation> {
        self.evaluate_with(vec![0.0, 0.0], None)
    }
}

/// Tunes `(mu_e, mu_nl)` for `problem`.
pub fn tune(problem: &RomTuningProblem<'_>, cfg: &MesConfig, stop: StopRule) -> Result<TuneResult> {
    check_len("tuned parameters", 2, cfg.len())?;
    tune_with(cfg, stop, |p| problem.evaluate(p))
}

/// Central finite-difference estimate of `|grad Q|` at `point`; a local
/// Lipschitz diagnostic for the cost.
pub fn gradient_norm_estimate<F>(mut objective: F, point: &[f64], steps: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_len("finite-difference steps", point.len(), steps.len())?;
    let mut acc = 0.0;
    for i in 0..point.len() {
        let mut hi = point.to_vec();
        let mut lo = point.to_vec();
        hi[i] += steps[i];
        lo[i] -= steps[i];
        let g = (objective(&hi)? - objective(&lo)?) / (2.0 * steps[i]);
        acc += g * g;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn cfg() -> MesConfig {
        MesConfig::reference()
    }

    #[test]
    fn zero_cost_keeps_integrators_still() {
        let mut s = MesState::new(&cfg()).unwrap();
        for _ in 0..500 {
            s.step(0.0).unwrap();
            assert_eq!(s.y, vec![0.0, 0.0]);
            for i in 0..2 {
                assert!(s.mu_hat[i].abs() <= s.a[i] + 1e-15);
            }
        }
        let max0 = s.trace.iter().map(|r| r.mu_hat[0].abs()).fold(0.0, f64::max);
        assert!((max0 - 0.08).abs() < 1e-3);
    }

    #[test]
    fn first_step_hand_value() {
        let mut s = MesState::new(&cfg()).unwrap();
        s.step(3.0).unwrap();
        assert!((s.y[0] - 0.08 * 0.05 * 3.0).abs() < 1e-15);
        assert!((s.y[1] - 0.1 * 0.05 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_identity_holds() {
        let mut s = MesState::new(&cfg()).unwrap();
        for k in 0..300 {
            let q = ((k as f64) * 0.37).sin().abs() * 2.0;
            s.step(q).unwrap();
            for i in 0..2 {
                let expect = s.y[i] + s.a[i] * (s.omega[i] * s.k as f64 * s.dt - FRAC_PI_2).sin();
                assert_eq!(s.mu_hat[i], expect);
            }
        }
    }

    #[test]
    fn reference_point_values() {
        let c = MesConfig::reference();
        assert_eq!(c.a[0], 0.08);
        assert_eq!(c.omega, vec![10.0, 50.0]);
        assert!((c.a[1] * c.scale[1] - 1e-7).abs() < 1e-22);
        assert!(c.validate().is_ok());
        assert!(is_non_resonant(&c.omega, c.dt, 0.02));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = cfg();
        c.omega = vec![10.0, 10.0];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.dt = 0.1; // 50 * 0.1 > pi
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.a[1] = 0.0;
        assert!(c.validate().is_err());
        let mut s = MesState::new(&cfg()).unwrap();
        assert!(s.step(f64::NAN).is_err());
    }

    #[test]
    fn selected_frequencies_are_non_resonant() {
        let w = select_frequencies(4, 5.0, 0.05).unwrap();
        assert_eq!(w.len(), 4);
        assert!(is_non_resonant(&w, 0.05, 0.02));
        assert!(w.iter().all(|x| x * 0.05 < PI));
    }

    fn traj(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Trajectory {
        let dim = rows[0].len();
        let states = Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j]);
        Trajectory::new(times, states).unwrap()
    }

    #[test]
    fn cost_examples() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let a = traj(t.clone(), vec![vec![0.3, -0.2]; 11]);
        assert_eq!(cost_q(&a, &a).unwrap(), 0.0);
        let b = traj(t.clone(), vec![vec![0.3 + 0.6, -0.2 + 0.8]; 11]);
        assert!((cost_q(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let shifted = traj(t.iter().map(|x| x + 0.5).collect(), vec![vec![0.0, 0.0]; 11]);
        assert!(matches!(cost_q(&a, &shifted), Err(RomError::GridMismatch(_))));
    }

    #[test]
    fn stability_flags() {
        let t = vec![0.0, 1.0];
        assert!(lagrange_stability_check(&traj(t.clone(), vec![vec![0.0]; 2])));
        assert!(!lagrange_stability_check(&traj(t.clone(), vec![vec![0.0], vec![f64::NAN]])));
        assert!(!lagrange_stability_check(&traj(t, vec![vec![0.0], vec![2e8]])));
    }

    #[test]
    fn tune_keeps_start_point_and_counts_rows() {
        let mut c = cfg();
        c.k_max = 30;
        let res = tune_with(&c, StopRule::MaxIterations, |p| Ok(Evaluation::stable(p.to_vec(), (p[0] - 0.2).powi(2) + 1.0))).unwrap();
        assert_eq!(res.trace.len(), 31);
        assert_eq!(res.trace.records[0].params, vec![0.0, 0.0]);
        assert!(res.best_q <= res.trace.records[0].q);
    }

    #[test]
    fn all_unstable_is_an_error() {
        let mut c = cfg();
        c.k_max = 5;
        let res = tune_with(&c, StopRule::MaxIterations, |p| Ok(Evaluation::unstable(p.to_vec(), Some(0.1))));
        assert!(matches!(res, Err(RomError::AllUnstable)));
    }

    #[test]
    fn unstable_evaluations_get_the_penalty() {
        let mut c = cfg();
        c.k_max = 3;
        c.q_penalty = 123.0;
        let mut calls = 0;
        let res = tune_with(&c, StopRule::MaxIterations, |p| {
            calls += 1;
            Ok(if calls == 2 {
                Evaluation::unstable(p.to_vec(), Some(0.5))
            } else {
                Evaluation::stable(p.to_vec(), 1.0)
            })
        })
        .unwrap();
        assert_eq!(res.trace.records[1].q, 123.0);
        assert!(!res.trace.records[1].stable);
        assert_eq!(res.best_q, 1.0);
    }

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg();
        c.k_max = 10;
        let res = tune_with(&c, StopRule::MaxIterations, |p| Ok(Evaluation::stable(p.to_vec(), p[0].powi(2)))).unwrap();
        let path = dir.path().join("trace.csv");
        res.trace.save_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,mu_e_hat,mu_nl_hat,Q,stable\n"));
        assert_eq!(CostTrace::load_csv(&path).unwrap(), res.trace);
    }

    #[test]
    fn gradient_estimate_of_quadratic() {
        let g = gradient_norm_estimate(|p| Ok(p[0] * p[0] + 3.0 * p[1]), &[2.0, 0.0], &[1e-4, 1e-4]).unwrap();
        assert!((g - 5.0).abs() < 1e-6);
    }
}
