//! Explicit ODE integration: forward Euler, classic RK4, and an adaptive
//! Dormand-Prince 5(4) pair. All systems here are autonomous, so right-hand
//! sides take only the state.
//!
//! A right-hand-side failure mid-run (for example leaving the tabulated
//! region) does not tear down the run: stepping stops cleanly and the
//! partial trajectory is returned together with the cause.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Which space the rows of a trajectory live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Latent,
    Ambient,
}

/// Time stamps plus state rows.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Array2<f64>,
    pub space: Space,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, i: usize) -> ArrayView1<'_, f64> {
        self.states.row(i)
    }

    pub fn last_state(&self) -> ArrayView1<'_, f64> {
        self.states.row(self.len() - 1)
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Fixed-step forward Euler.
    Euler { h: f64 },
    /// Fixed-step classic fourth-order Runge-Kutta.
    Rk4 { h: f64 },
    /// Adaptive Dormand-Prince 5(4) with absolute/relative error control.
    Rk45 { atol: f64, rtol: f64 },
}

impl Method {
    fn validate(&self) -> Result<()> {
        match *self {
            Method::Euler { h } | Method::Rk4 { h } => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "step size must be positive and finite, got {h}"
                    )));
                }
            }
            Method::Rk45 { atol, rtol } => {
                if !(atol.is_finite() && atol > 0.0 && rtol.is_finite() && rtol > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "tolerances must be positive and finite, got atol={atol} rtol={rtol}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Step counters for an integration run.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

impl IntegrationStats {
    /// Accepted plus rejected step attempts.
    pub fn steps_total(&self) -> usize {
        self.steps_accepted + self.steps_rejected
    }
}

/// Result of an integration run. `abort` carries the cause when stepping
/// stopped before reaching the requested end time.
#[derive(Debug)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub stats: IntegrationStats,
    pub abort: Option<Error>,
}

impl Integration {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

const MAX_STEPS: usize = 5_000_000;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Integrate from `y0` over `[0, t_end]`, recording every accepted step.
pub fn integrate<F>(mut rhs: F, y0: &ArrayView1<f64>, t_end: f64, method: &Method) -> Result<Integration>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    run(&mut rhs, y0, t_end, method, None)
}

/// Integrate and record the state exactly at the given times.
///
/// `times` must be strictly increasing; `times[0]` is the initial time where
/// the state equals `y0`. Fixed-step methods subdivide each interval evenly
/// with steps no larger than `h`; the adaptive method clamps steps so record
/// times are hit exactly.
pub fn integrate_at<F>(
    mut rhs: F,
    y0: &ArrayView1<f64>,
    times: &[f64],
    method: &Method,
) -> Result<Integration>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    if times.is_empty() {
        return Err(Error::InvalidConfig("empty record-time grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "record times must be strictly increasing".into(),
        ));
    }
    let t_end = times[times.len() - 1] - times[0];
    run(&mut rhs, y0, t_end, method, Some(times))
}

fn run<F>(
    rhs: &mut F,
    y0: &ArrayView1<f64>,
    t_end: f64,
    method: &Method,
    record_at: Option<&[f64]>,
) -> Result<Integration>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    method.validate()?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "t_end must be non-negative and finite, got {t_end}"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "initial condition contains non-finite entries".into(),
        ));
    }

    let t0 = record_at.map_or(0.0, |r| r[0]);
    let mut recorder = Recorder::new(y0.to_owned(), t0, record_at);
    let mut stats = IntegrationStats::default();

    let abort = if t_end > 0.0 {
        match method {
            Method::Euler { h } => {
                fixed_steps(rhs, &mut recorder, t_end, *h, &mut stats, 1, euler_step)
            }
            Method::Rk4 { h } => {
                fixed_steps(rhs, &mut recorder, t_end, *h, &mut stats, 4, rk4_step)
            }
            Method::Rk45 { atol, rtol } => {
                adaptive_steps(rhs, &mut recorder, t_end, *atol, *rtol, &mut stats)
            }
        }
    } else {
        None
    };

    Ok(Integration {
        trajectory: recorder.finish(),
        stats,
        abort,
    })
}

/// Collects accepted states, either densely or at a fixed grid of times.
struct Recorder {
    times: Vec<f64>,
    rows: Vec<Array1<f64>>,
    /// Remaining record times (absolute), when recording on a grid.
    grid: Option<Vec<f64>>,
    next_grid: usize,
    t0: f64,
}

impl Recorder {
    fn new(y0: Array1<f64>, t0: f64, record_at: Option<&[f64]>) -> Self {
        Self {
            times: vec![t0],
            rows: vec![y0],
            grid: record_at.map(|r| r.to_vec()),
            next_grid: 1,
            t0,
        }
    }

    /// Relative offsets (from t0) this run must land on exactly, in order.
    /// Dense runs return None and may step freely.
    fn next_target(&self, t_end: f64) -> f64 {
        match &self.grid {
            Some(g) if self.next_grid < g.len() => g[self.next_grid] - self.t0,
            _ => t_end,
        }
    }

    fn record(&mut self, t_rel: f64, y: &Array1<f64>) {
        match &self.grid {
            Some(g) => {
                if self.next_grid < g.len() {
                    let target = g[self.next_grid] - self.t0;
                    if (t_rel - target).abs() <= 1e-9 * target.abs().max(1.0) {
                        self.times.push(g[self.next_grid]);
                        self.rows.push(y.clone());
                        self.next_grid += 1;
                    }
                }
            }
            None => {
                self.times.push(self.t0 + t_rel);
                self.rows.push(y.clone());
            }
        }
    }

    fn finish(self) -> Trajectory {
        let dim = self.rows[0].len();
        let mut states = Array2::<f64>::zeros((self.rows.len(), dim));
        for (mut row, src) in states.axis_iter_mut(Axis(0)).zip(self.rows.iter()) {
            row.assign(src);
        }
        Trajectory {
            times: self.times,
            states,
            space: Space::Latent,
        }
    }
}

fn euler_step<F>(rhs: &mut F, y: &Array1<f64>, h: f64) -> Result<Array1<f64>>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    let f = rhs(&y.view())?;
    Ok(y + &(f * h))
}

fn rk4_step<F>(rhs: &mut F, y: &Array1<f64>, h: f64) -> Result<Array1<f64>>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    let k1 = rhs(&y.view())?;
    let k2 = rhs(&(y + &(&k1 * (h / 2.0))).view())?;
    let k3 = rhs(&(y + &(&k2 * (h / 2.0))).view())?;
    let k4 = rhs(&(y + &(&k3 * h)).view())?;
    Ok(y + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
}

fn fixed_steps<F, S>(
    rhs: &mut F,
    recorder: &mut Recorder,
    t_end: f64,
    h: f64,
    stats: &mut IntegrationStats,
    evals_per_step: usize,
    step: S,
) -> Option<Error>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
    S: Fn(&mut F, &Array1<f64>, f64) -> Result<Array1<f64>>,
{
    let mut t = 0.0;
    let mut y = recorder.rows[0].clone();
    while t < t_end - 1e-12 * t_end.max(1.0) {
        // Land exactly on the next record target (or the end): subdivide the
        // remaining stretch into equal steps of at most h.
        let target = recorder.next_target(t_end).min(t_end);
        let span = target - t;
        let n_sub = ((span / h) - 1e-9).ceil().max(1.0) as usize;
        let h_sub = span / n_sub as f64;
        for i in 0..n_sub {
            match step(rhs, &y, h_sub) {
                Ok(next) => {
                    if next.iter().any(|v| !v.is_finite()) {
                        return Some(Error::NumericalDegeneracy(
                            "state became non-finite during fixed-step integration".into(),
                        ));
                    }
                    y = next;
                }
                Err(e) => return Some(e),
            }
            stats.steps_accepted += 1;
            stats.rhs_evals += evals_per_step;
            if stats.steps_accepted > MAX_STEPS {
                return Some(Error::NumericalDegeneracy(format!(
                    "exceeded {MAX_STEPS} steps"
                )));
            }
            let t_now = if i + 1 == n_sub {
                target
            } else {
                t + (i + 1) as f64 * h_sub
            };
            recorder.record(t_now, &y);
        }
        t = target;
    }
    None
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn adaptive_steps<F>(
    rhs: &mut F,
    recorder: &mut Recorder,
    t_end: f64,
    atol: f64,
    rtol: f64,
    stats: &mut IntegrationStats,
) -> Option<Error>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    let mut t = 0.0;
    let mut y = recorder.rows[0].clone();

    let f0 = match rhs(&y.view()) {
        Ok(f) => f,
        Err(e) => return Some(e),
    };
    stats.rhs_evals += 1;
    let mut h = initial_step(&y, &f0, t_end, atol, rtol);

    while t < t_end - 1e-12 * t_end.max(1.0) {
        let target = recorder.next_target(t_end).min(t_end);
        let mut h_try = h.min(target - t);
        let landing = h_try >= target - t - 1e-14 * target.abs().max(1.0);
        if landing {
            h_try = target - t;
        }

        let attempt = dopri_attempt(rhs, &y, h_try, stats);
        let (y5, err) = match attempt {
            Ok(v) => v,
            Err(e) => return Some(e),
        };
        if y5.iter().any(|v| !v.is_finite()) {
            return Some(Error::NumericalDegeneracy(
                "state became non-finite during adaptive integration".into(),
            ));
        }

        let norm = error_norm(&y, &y5, &err, atol, rtol);
        if norm <= 1.0 {
            stats.steps_accepted += 1;
            y = y5;
            t = if landing { target } else { t + h_try };
            recorder.record(t, &y);
        } else {
            stats.steps_rejected += 1;
        }

        let factor = if norm == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        h = (h_try * factor).max(f64::MIN_POSITIVE);
        if h < 1e-14 * t_end {
            return Some(Error::NumericalDegeneracy(
                "adaptive step size underflowed".into(),
            ));
        }
        if stats.steps_total() > MAX_STEPS {
            return Some(Error::NumericalDegeneracy(format!(
                "exceeded {MAX_STEPS} steps"
            )));
        }
    }
    None
}

/// One Dormand-Prince attempt: returns the 5th-order state and the embedded
/// error estimate.
fn dopri_attempt<F>(
    rhs: &mut F,
    y: &Array1<f64>,
    h: f64,
    stats: &mut IntegrationStats,
) -> Result<(Array1<f64>, Array1<f64>)>
where
    F: FnMut(&ArrayView1<f64>) -> Result<Array1<f64>>,
{
    let k1 = rhs(&y.view())?;
    let k2 = rhs(&(y + &(&k1 * (A2[0] * h))).view())?;
    let k3 = rhs(&(y + &(&k1 * (A3[0] * h)) + &(&k2 * (A3[1] * h))).view())?;
    let k4 = rhs(
        &(y + &(&k1 * (A4[0] * h)) + &(&k2 * (A4[1] * h)) + &(&k3 * (A4[2] * h))).view(),
    )?;
    let k5 = rhs(
        &(y + &(&k1 * (A5[0] * h))
            + &(&k2 * (A5[1] * h))
            + &(&k3 * (A5[2] * h))
            + &(&k4 * (A5[3] * h)))
            .view(),
    )?;
    let k6 = rhs(
        &(y + &(&k1 * (A6[0] * h))
            + &(&k2 * (A6[1] * h))
            + &(&k3 * (A6[2] * h))
            + &(&k4 * (A6[3] * h))
            + &(&k5 * (A6[4] * h)))
            .view(),
    )?;

    let y5 = y
        + &(&k1 * (B5[0] * h))
        + &(&k3 * (B5[2] * h))
        + &(&k4 * (B5[3] * h))
        + &(&k5 * (B5[4] * h))
        + &(&k6 * (B5[5] * h));
    let k7 = rhs(&y5.view())?;
    stats.rhs_evals += 7;

    // err = y5 - y4 = h * sum (b5 - b4) k
    let err = &k1 * ((B5[0] - B4[0]) * h)
        + &k3 * ((B5[2] - B4[2]) * h)
        + &k4 * ((B5[3] - B4[3]) * h)
        + &k5 * ((B5[4] - B4[4]) * h)
        + &k6 * ((B5[5] - B4[5]) * h)
        + &k7 * (-B4[6] * h);
    Ok((y5, err))
}

fn error_norm(
    y_old: &Array1<f64>,
    y_new: &Array1<f64>,
    err: &Array1<f64>,
    atol: f64,
    rtol: f64,
) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y_old.iter().zip(y_new.iter()))
        .map(|(&e, (&a, &b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step(y: &Array1<f64>, f: &Array1<f64>, t_end: f64, atol: f64, rtol: f64) -> f64 {
    let sc: Vec<f64> = y.iter().map(|&v| atol + rtol * v.abs()).collect();
    let d0 = (y
        .iter()
        .zip(sc.iter())
        .map(|(&v, &s)| (v / s) * (v / s))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    let d1 = (f
        .iter()
        .zip(sc.iter())
        .map(|(&v, &s)| (v / s) * (v / s))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0.min(t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn decay(y: &ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(-y.to_owned())
    }

    #[test]
    fn zero_rhs_gives_constant_trajectory() {
        let y0 = array![1.5, -2.0];
        let out = integrate(
            |y: &ArrayView1<f64>| Ok(Array1::zeros(y.len())),
            &y0.view(),
            1.0,
            &Method::Rk4 { h: 0.1 },
        )
        .unwrap();
        assert!(out.completed());
        for row in out.trajectory.states.axis_iter(Axis(0)) {
            assert_eq!(row[0], 1.5);
            assert_eq!(row[1], -2.0);
        }
    }

    #[test]
    fn euler_single_step_is_exact_formula() {
        let y0 = array![2.0, -1.0];
        let h = 0.37;
        let out = integrate(decay, &y0.view(), h, &Method::Euler { h }).unwrap();
        assert_eq!(out.trajectory.len(), 2);
        // phi_1 = phi_0 + h * rhs(phi_0), bit-exact
        assert_eq!(out.trajectory.states[[1, 0]], 2.0 + h * (-2.0));
        assert_eq!(out.trajectory.states[[1, 1]], -1.0 + h * 1.0);
    }

    #[test]
    fn rk4_matches_exponential_oracle() {
        let y0 = array![1.0, -0.5];
        let out = integrate(decay, &y0.view(), 1.0, &Method::Rk4 { h: 0.01 }).unwrap();
        let last = out.trajectory.last_state();
        let expect = (-1.0f64).exp();
        assert_abs_diff_eq!(last[0], expect, epsilon = 1e-8);
        assert_abs_diff_eq!(last[1], -0.5 * expect, epsilon = 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let y0 = array![1.0];
        let exact = (-1.0f64).exp();
        let err_h = {
            let out = integrate(decay, &y0.view(), 1.0, &Method::Rk4 { h: 0.1 }).unwrap();
            (out.trajectory.last_state()[0] - exact).abs()
        };
        let err_h2 = {
            let out = integrate(decay, &y0.view(), 1.0, &Method::Rk4 { h: 0.05 }).unwrap();
            (out.trajectory.last_state()[0] - exact).abs()
        };
        assert!(
            err_h / err_h2 >= 12.0,
            "halving h improved error only {}x",
            err_h / err_h2
        );
    }

    #[test]
    fn rk45_matches_exponential_oracle() {
        let y0 = array![3.0];
        let out = integrate(
            decay,
            &y0.view(),
            2.0,
            &Method::Rk45 {
                atol: 1e-10,
                rtol: 1e-10,
            },
        )
        .unwrap();
        assert!(out.completed());
        assert_abs_diff_eq!(
            out.trajectory.last_state()[0],
            3.0 * (-2.0f64).exp(),
            epsilon = 1e-8
        );
        assert!(out.stats.steps_accepted > 0);
    }

    #[test]
    fn zero_length_run_returns_initial_condition() {
        let y0 = array![0.3, 0.4];
        let out = integrate(decay, &y0.view(), 0.0, &Method::Rk4 { h: 0.1 }).unwrap();
        assert_eq!(out.trajectory.len(), 1);
        assert_eq!(out.trajectory.times[0], 0.0);
        assert_eq!(out.trajectory.state(0)[0], 0.3);
    }

    #[test]
    fn integrate_at_hits_record_times_exactly() {
        let y0 = array![1.0];
        let times = [0.0, 0.3, 0.55, 1.0];
        for method in [
            Method::Euler { h: 0.01 },
            Method::Rk4 { h: 0.07 },
            Method::Rk45 {
                atol: 1e-9,
                rtol: 1e-9,
            },
        ] {
            let out = integrate_at(decay, &y0.view(), &times, &method).unwrap();
            assert_eq!(out.trajectory.times, times.to_vec());
            // y(t) = e^-t at each record time, up to the method's accuracy
            for (i, &t) in times.iter().enumerate() {
                let tol = match method {
                    Method::Euler { .. } => 5e-3,
                    _ => 1e-6,
                };
                assert_abs_diff_eq!(out.trajectory.states[[i, 0]], (-t).exp(), epsilon = tol);
            }
        }
    }

    #[test]
    fn rhs_failure_returns_partial_trajectory_with_cause() {
        let y0 = array![0.0];
        let out = integrate(
            |y: &ArrayView1<f64>| {
                if y[0] > 0.5 {
                    Err(Error::LeftManifold)
                } else {
                    Ok(Array1::ones(1))
                }
            },
            &y0.view(),
            2.0,
            &Method::Rk4 { h: 0.1 },
        )
        .unwrap();
        assert!(!out.completed());
        assert!(matches!(out.abort, Some(Error::LeftManifold)));
        let last_t = *out.trajectory.times.last().unwrap();
        assert!(last_t > 0.3 && last_t < 0.7, "stopped at t = {last_t}");
    }

    #[test]
    fn invalid_step_rejected() {
        let y0 = array![1.0];
        assert!(matches!(
            integrate(decay, &y0.view(), 1.0, &Method::Euler { h: 0.0 }),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            integrate(
                decay,
                &y0.view(),
                1.0,
                &Method::Rk45 {
                    atol: -1.0,
                    rtol: 1e-6
                }
            ),
            Err(Error::InvalidConfig(_))
        ));
    }
}
