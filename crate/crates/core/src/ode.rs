//! Fixed-step classical Runge-Kutta integration with blow-up detection.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{invalid, Result, RomError};

/// Time-stamped states; row `j` of `states` is the state at `times[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Array2<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Array2<f64>) -> Result<Self> {
        if times.len() != states.nrows() {
            return Err(RomError::DimensionMismatch {
                context: "trajectory rows",
                expected: times.len(),
                got: states.nrows(),
            });
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, j: usize) -> ArrayView1<'_, f64> {
        self.states.row(j)
    }

    /// Every `stride`-th sample, starting with the first.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let idx: Vec<usize> = (0..self.len()).step_by(stride.max(1)).collect();
        let mut states = Array2::zeros((idx.len(), self.dim()));
        for (row, &j) in idx.iter().enumerate() {
            states.row_mut(row).assign(&self.states.row(j));
        }
        Trajectory {
            times: idx.iter().map(|&j| self.times[j]).collect(),
            states,
        }
    }
}

/// Stop criterion for runaway solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUpGuard {
    /// States with Euclidean norm above this are treated as blown up.
    pub norm_limit: f64,
}

impl BlowUpGuard {
    pub const NON_FINITE_ONLY: BlowUpGuard = BlowUpGuard { norm_limit: f64::INFINITY };
}

/// Integrates `dz/dt = rhs(z)` from `t = 0` to `t_f` with step `dt`.
///
/// Samples are returned at `k * dt` for every whole step plus a final
/// partial step landing exactly on `t_f` when `t_f` is not a multiple of `dt`.
pub fn rk4<F>(rhs: F, z0: ArrayView1<'_, f64>, t_f: f64, dt: f64, guard: BlowUpGuard) -> Result<Trajectory>
where
    F: FnMut(ArrayView1<'_, f64>) -> Result<Array1<f64>>,
{
    match rk4_until_blow_up(rhs, z0, t_f, dt, guard)? {
        (traj, None) => Ok(traj),
        (_, Some(time)) => Err(RomError::BlowUp { time }),
    }
}

/// Like [`rk4`] but a blow-up ends the run early instead of failing: the
/// samples before the first failing step are returned with its time.
pub fn rk4_until_blow_up<F>(mut rhs: F, z0: ArrayView1<'_, f64>, t_f: f64, dt: f64, guard: BlowUpGuard) -> Result<(Trajectory, Option<f64>)>
where
    F: FnMut(ArrayView1<'_, f64>) -> Result<Array1<f64>>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
    }
    if !(t_f > 0.0 && t_f.is_finite()) {
        return Err(invalid("t_f", format!("must be positive and finite, got {t_f}")));
    }
    crate::error::check_finite("initial state", z0.iter())?;

    let times = time_grid(t_f, dt);
    let mut states = Array2::zeros((times.len(), z0.len()));
    states.row_mut(0).assign(&z0);
    let mut z = z0.to_owned();
    for j in 1..times.len() {
        let h = times[j] - times[j - 1];
        let step = (|| -> Result<Array1<f64>> {
            let k1 = rhs(z.view())?;
            let k2 = rhs((&z + &(&k1 * (0.5 * h))).view())?;
            let k3 = rhs((&z + &(&k2 * (0.5 * h))).view())?;
            let k4 = rhs((&z + &(&k3 * h)).view())?;
            Ok(&z + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * (h / 6.0)))
        })();
        let next = match step {
            Ok(next) => next,
            // intermediate stages can overflow before the state itself does
            Err(RomError::NonFinite(_)) => Array1::from_elem(z.len(), f64::NAN),
            Err(e) => return Err(e),
        };
        let finite = next.iter().all(|x| x.is_finite());
        if !finite || crate::linalg::norm(next.view()) > guard.norm_limit {
            let kept = Trajectory::new(times[..j].to_vec(), states.slice(ndarray::s![..j, ..]).to_owned())?;
            return Ok((kept, Some(times[j])));
        }
        z = next;
        states.row_mut(j).assign(&z);
    }
    Ok((Trajectory::new(times, states)?, None))
}

/// `0, dt, 2 dt, ..., t_f`; the last interval may be shorter than `dt`.
pub fn time_grid(t_f: f64, dt: f64) -> Vec<f64> {
    let ratio = t_f / dt;
    let whole = (ratio + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=whole).map(|k| k as f64 * dt).collect();
    let last = *times.last().expect("non-empty");
    if (t_f - last).abs() <= 1e-9 * dt {
        *times.last_mut().expect("non-empty") = t_f;
    } else if last < t_f {
        times.push(t_f);
    }
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn grid_ends_on_horizon() {
        let g = time_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = time_grid(1.0, 0.01);
        assert_eq!(g.len(), 101);
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn exponential_decay_fourth_order() {
        let rhs = |z: ArrayView1<f64>| Ok(z.mapv(|x| -x));
        let err = |dt: f64| {
            let traj = rk4(rhs, array![1.0].view(), 1.0, dt, BlowUpGuard::NON_FINITE_ONLY).unwrap();
            (traj.states[[traj.len() - 1, 0]] - (-1.0_f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn detects_finite_time_blow_up() {
        // dz/dt = z^2 from z = 1 escapes at t = 1
        let rhs = |z: ArrayView1<f64>| Ok(z.mapv(|x| x * x));
        let res = rk4(rhs, array![1.0].view(), 2.0, 1e-3, BlowUpGuard { norm_limit: 1e8 });
        match res {
            Err(RomError::BlowUp { time }) => assert!(time > 0.9 && time < 1.01, "t = {time}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
