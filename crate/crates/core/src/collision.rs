//! Two-mass collision model with a delayed control input.
//!
//! A near-massless fingertip `m_f` hits a rigid object and stops (plastic
//! impact). The finger mass `m_r` keeps moving into a spring of stiffness `k`.
//! After the latency `t_l` the actuator applies a constant force
//! `control_sign * f_in` to the finger mass. The collision ends when the finger
//! displacement returns to zero.
//!
//! The displacement for `t >= t_l` is the unforced sinusoid plus the step
//! response to the control force:
//!
//! ```text
//! x(t) = (v0/w) sin(w t) + (u/k) (1 - cos(w (t - t_l))),   u = control_sign * f_in
//! ```
//!
//! which is algebraically the same as writing it in terms of the state
//! `(x_l, v_l)` at `t_l`. Integrating `k x(t)` over the collision and adding the
//! plastic term gives the total impulse
//!
//! ```text
//! I = m_f v0 + m_r v0 (1 - cos(w t_f)) + u (t_f - t_l - sin(w (t_f - t_l)) / w)
//! ```
//!
//! The control term carries the *signed* input `u`; with a retracting input
//! (`control_sign = -1`) it reduces the impulse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

use crate::numfmt::sig9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("invalid collision parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("initial velocity must be positive for an impulse computation")]
    NoApproachVelocity,
    #[error("displacement did not return to zero within {horizon_s} s; the control input prevents release")]
    NoRelease { horizon_s: f64 },
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
}

/// Direction of the control force relative to the penetration direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlSign {
    /// Force pushes the finger mass back out of the contact.
    Retract,
    /// Force drives the finger mass further into the contact.
    Press,
}

impl ControlSign {
    pub fn factor(self) -> f64 {
        match self {
            ControlSign::Retract => -1.0,
            ControlSign::Press => 1.0,
        }
    }
}

impl Default for ControlSign {
    fn default() -> Self {
        ControlSign::Retract
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    /// Fingertip mass (kg).
    pub m_f: f64,
    /// Effective finger mass (kg).
    pub m_r: f64,
    /// Lumped stiffness (N/m).
    pub k: f64,
    /// Approach velocity (m/s).
    pub v0: f64,
    /// System latency (s).
    pub t_l: f64,
    /// Control force magnitude (N).
    pub f_in: f64,
    #[serde(default)]
    pub control_sign: ControlSign,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl CollisionParams {
    /// Nominal fingertip parameters: 5 g tip, 100 g finger, 1500 N/m, 0.15 m/s,
    /// 7 ms latency, 10 N control force.
    pub fn nominal() -> Self {
        Self {
            m_f: 0.005,
            m_r: 0.1,
            k: 1500.0,
            v0: 0.15,
            t_l: 0.007,
            f_in: 10.0,
            control_sign: ControlSign::Retract,
        }
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let check = |name, value: f64, ok: bool| {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(CollisionError::InvalidParam { name, value })
            }
        };
        check("m_f", self.m_f, self.m_f >= 0.0)?;
        check("m_r", self.m_r, self.m_r > 0.0)?;
        check("k", self.k, self.k > 0.0)?;
        check("v0", self.v0, self.v0 >= 0.0)?;
        check("t_l", self.t_l, self.t_l >= 0.0)?;
        check("f_in", self.f_in, self.f_in >= 0.0)?;
        let w = self.omega0();
        check("omega0", w, w > 0.0)
    }

    /// Natural frequency `sqrt(k / m_r)` (rad/s).
    pub fn omega0(&self) -> f64 {
        (self.k / self.m_r).sqrt()
    }

    /// Duration of the unforced rebound, `pi / omega0`.
    pub fn half_period(&self) -> f64 {
        PI / self.omega0()
    }

    /// Signed control force.
    pub fn control_force(&self) -> f64 {
        self.control_sign.factor() * self.f_in
    }

    /// True when the control input can act before the unforced collision ends.
    pub fn control_acts(&self) -> bool {
        self.f_in != 0.0 && self.t_l < self.half_period()
    }
}

/// Options for the end-time search.
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Search horizon after `t_l`, in natural periods.
    pub horizon_periods: f64,
    /// Scan step as a fraction of the half period.
    pub scan_divisions: usize,
    /// Bisection tolerance (s).
    pub tol_s: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            horizon_periods: 10.0,
            scan_divisions: 200,
            tol_s: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionResult {
    pub t_f: f64,
    pub total_impulse: f64,
    pub natural_impulse: f64,
    pub eta: f64,
    /// Set when eta falls outside [0, 1]; the value itself is never clamped.
    pub eta_out_of_range: bool,
    pub trajectory: Option<Vec<TrajectorySample>>,
}

fn displacement_unchecked(p: &CollisionParams, t: f64) -> f64 {
    let w = p.omega0();
    let free = p.v0 / w * (w * t).sin();
    if t < p.t_l || p.f_in == 0.0 {
        return free;
    }
    // Equivalent to (x_l - u/k) cos(w tt) + (v_l/w) sin(w tt) + u/k with tt = t - t_l.
    let tt = t - p.t_l;
    let x_l = p.v0 / w * (w * p.t_l).sin();
    let v_l = p.v0 * (w * p.t_l).cos();
    let u_k = p.control_force() / p.k;
    (x_l - u_k) * (w * tt).cos() + v_l / w * (w * tt).sin() + u_k
}

/// Finger-mass displacement `x(t)` (m), penetration positive.
///
/// Evaluated from the closed form; times past `t_f` follow the same expression.
pub fn displacement(params: &CollisionParams, t: f64) -> Result<f64, CollisionError> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(CollisionError::InvalidTime(t));
    }
    Ok(displacement_unchecked(params, t))
}

/// Spring force on the finger mass, `-k x(t)` (N).
pub fn force_on_finger(params: &CollisionParams, t: f64) -> Result<f64, CollisionError> {
    Ok(-params.k * displacement(params, t)?)
}

pub fn collision_end_time(params: &CollisionParams) -> Result<f64, CollisionError> {
    collision_end_time_with(params, RootOptions::default())
}

/// First time after impact at which the displacement returns to zero.
///
/// Unforced collisions (or latency past the half period) end at exactly
/// `pi / omega0`. Otherwise the forced branch is scanned at a fixed step from
/// `t_l` and the first sign change is bisected.
pub fn collision_end_time_with(params: &CollisionParams, opts: RootOptions) -> Result<f64, CollisionError> {
    params.validate()?;
    if params.v0 <= 0.0 {
        return Err(CollisionError::NoApproachVelocity);
    }
    let half = params.half_period();
    if !params.control_acts() {
        return Ok(half);
    }
    let step = half / opts.scan_divisions as f64;
    let horizon = params.t_l + opts.horizon_periods * 2.0 * half;
    let mut lo = params.t_l;
    let hi = loop {
        let t = lo + step;
        if t > horizon {
            return Err(CollisionError::NoRelease { horizon_s: horizon });
        }
        if displacement_unchecked(params, t) <= 0.0 {
            break t;
        }
        lo = t;
    };
    let mut hi = hi;
    while hi - lo > opts.tol_s {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if displacement_unchecked(params, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn impulse_closed_form(p: &CollisionParams, t_f: f64) -> f64 {
    let w = p.omega0();
    let plastic = p.m_f * p.v0;
    let spring = p.m_r * p.v0 * (1.0 - (w * t_f).cos());
    let control = if p.control_acts() {
        let active = t_f - p.t_l;
        p.control_force() * (active - (w * active).sin() / w)
    } else {
        0.0
    };
    plastic + spring + control
}

/// Total impulse delivered to the object (N s).
pub fn total_impulse(params: &CollisionParams) -> Result<f64, CollisionError> {
    let t_f = collision_end_time(params)?;
    Ok(impulse_closed_form(params, t_f))
}

/// Impulse of the unforced collision, evaluated at the unforced end time.
pub fn natural_impulse(params: &CollisionParams) -> Result<f64, CollisionError> {
    params.validate()?;
    let w = params.omega0();
    let t_half = params.half_period();
    Ok(params.m_f * params.v0 + params.m_r * params.v0 * (1.0 - (w * t_half).cos()))
}

/// Collision impulse ratio: total impulse over natural impulse.
pub fn impulse_ratio(params: &CollisionParams) -> Result<CollisionResult, CollisionError> {
    analyze(params, None)
}

/// Full analysis; when `samples` is given the trajectory is sampled at that
/// many evenly spaced times over `[0, t_f]`.
pub fn analyze(params: &CollisionParams, samples: Option<usize>) -> Result<CollisionResult, CollisionError> {
    params.validate()?;
    if params.v0 <= 0.0 {
        return Err(CollisionError::NoApproachVelocity);
    }
    let t_f = collision_end_time(params)?;
    let total = impulse_closed_form(params, t_f);
    let natural = natural_impulse(params)?;
    let eta = total / natural;
    let trajectory = samples.map(|n| {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = t_f * i as f64 / (n - 1) as f64;
                let x = displacement_unchecked(params, t);
                TrajectorySample { t, x, force: -params.k * x }
            })
            .collect()
    });
    Ok(CollisionResult {
        t_f,
        total_impulse: total,
        natural_impulse: natural,
        eta,
        eta_out_of_range: !(0.0..=1.0).contains(&eta),
        trajectory,
    })
}

/// Grid axes for an eta sweep. Each axis must be strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: Vec<f64>,
    pub t_l: Vec<f64>,
    pub v0: Vec<f64>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), CollisionError> {
        for (name, axis) in [("k", &self.k), ("t_l", &self.t_l), ("v0", &self.v0)] {
            if axis.is_empty() {
                return Err(CollisionError::InvalidGrid(format!("axis {name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(CollisionError::InvalidGrid(format!("axis {name} has non-finite values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CollisionError::InvalidGrid(format!("axis {name} is not strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.k.len() * self.t_l.len() * self.v0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub t_l: f64,
    pub v0: f64,
    pub outcome: Result<CollisionResult, CollisionError>,
}

impl SweepRow {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(r) if r.eta_out_of_range => "eta_out_of_range",
            Ok(_) => "ok",
            Err(CollisionError::NoRelease { .. }) => "no_release",
            Err(_) => "invalid",
        }
    }
}

/// Evaluate eta over the grid. Rows come back ordered by (k, t_l, v0);
/// failed cells carry their error instead of aborting the sweep.
pub fn sweep_eta(grid: &SweepGrid, fixed: &CollisionParams) -> Result<Vec<SweepRow>, CollisionError> {
    grid.validate()?;
    let cells: Vec<(f64, f64, f64)> = grid
        .k
        .iter()
        .flat_map(|&k| grid.t_l.iter().flat_map(move |&t_l| grid.v0.iter().map(move |&v0| (k, t_l, v0))))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(k, t_l, v0)| {
            let params = CollisionParams { k, t_l, v0, ..*fixed };
            SweepRow { k, t_l, v0, outcome: impulse_ratio(&params) }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: &str = "k_N_per_m,t_l_s,v0_m_per_s,eta,t_f_s,I_Ns,I_N_Ns,status";

/// Write sweep rows as CSV. Failed cells print `nan` in the numeric columns.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let (eta, t_f, i, i_n) = match &row.outcome {
            Ok(r) => (r.eta, r.t_f, r.total_impulse, r.natural_impulse),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig9(row.k),
            sig9(row.t_l),
            sig9(row.v0),
            sig9(eta),
            sig9(t_f),
            sig9(i),
            sig9(i_n),
            row.status()
        )?;
    }
    Ok(())
}

/// `n` points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// RK4 on m_r x'' = -k x (+ u after t_l), landing exactly on t_l.
    fn rk4(p: &CollisionParams, t_end: f64, h_max: f64) -> f64 {
        let u = p.control_force();
        let accel = |x: f64, forced: bool| (-p.k * x + if forced { u } else { 0.0 }) / p.m_r;
        let mut state = (0.0_f64, p.v0);
        let mut t = 0.0;
        let segments = if t_end <= p.t_l { vec![(t_end, false)] } else { vec![(p.t_l, false), (t_end, true)] };
        for (seg_end, forced) in segments {
            let n = ((seg_end - t) / h_max).ceil().max(1.0) as usize;
            let h = (seg_end - t) / n as f64;
            for _ in 0..n {
                let (x, v) = state;
                let k1 = (v, accel(x, forced));
                let k2 = (v + 0.5 * h * k1.1, accel(x + 0.5 * h * k1.0, forced));
                let k3 = (v + 0.5 * h * k2.1, accel(x + 0.5 * h * k2.0, forced));
                let k4 = (v + h * k3.1, accel(x + h * k3.0, forced));
                state = (
                    x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    v + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                );
            }
            t = seg_end;
        }
        state.0
    }

    #[test]
    fn nominal_at_impact_is_zero() {
        let p = CollisionParams::nominal();
        assert_eq!(displacement(&p, 0.0).unwrap(), 0.0);
        assert_eq!(force_on_finger(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn at_rest_stays_at_rest() {
        let p = CollisionParams { v0: 0.0, f_in: 0.0, ..CollisionParams::nominal() };
        for t in [0.0, 0.003, 0.1, 2.0] {
            assert_eq!(displacement(&p, t).unwrap(), 0.0);
            assert_eq!(force_on_finger(&p, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn within_latency_window_matches_rk4() {
        let p = CollisionParams::nominal();
        let x = displacement(&p, 0.005).unwrap();
        let w = (1500.0_f64 / 0.1).sqrt();
        assert!((x - 0.15 / w * (w * 0.005).sin()).abs() < 1e-15);
        let oracle = rk4(&p, 0.005, 1e-6);
        assert!(((x - oracle) / oracle).abs() < 1e-6, "{x} vs {oracle}");
        let f = force_on_finger(&p, 0.005).unwrap();
        assert_eq!(f, -1500.0 * x);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CollisionParams::nominal();
        assert!(matches!(displacement(&p, -1e-3), Err(CollisionError::InvalidTime(_))));
        let bad = CollisionParams { k: f64::NAN, ..p };
        assert!(matches!(displacement(&bad, 0.0), Err(CollisionError::InvalidParam { name: "k", .. })));
        let bad = CollisionParams { m_r: 0.0, ..p };
        assert!(displacement(&bad, 0.0).is_err());
    }

    #[test]
    fn unforced_end_time_is_half_period() {
        let p = CollisionParams { f_in: 0.0, ..CollisionParams::nominal() };
        let t_f = collision_end_time(&p).unwrap();
        let expected = PI / (1500.0_f64 / 0.1).sqrt();
        assert_eq!(t_f, expected);
        assert!((t_f - 0.025651).abs() < 1e-6);
        // RK4 confirms the sign change brackets pi/w0.
        assert!(rk4(&p, t_f - 1e-6, 1e-6) > 0.0);
        assert!(rk4(&p, t_f + 1e-6, 1e-6) < 0.0);
    }

    #[test]
    fn late_control_does_not_change_end_time() {
        let p = CollisionParams { t_l: 0.03, ..CollisionParams::nominal() };
        assert_eq!(collision_end_time(&p).unwrap(), p.half_period());
        let r = impulse_ratio(&p).unwrap();
        assert_eq!(r.eta, 1.0);
    }

    #[test]
    fn retracting_control_shortens_contact() {
        let p = CollisionParams::nominal();
        let t_f = collision_end_time(&p).unwrap();
        assert!(t_f < p.half_period());
        assert!(displacement(&p, t_f).unwrap().abs() < 1e-12);
        assert!(rk4(&p, t_f - 1e-5, 1e-6) > 0.0);
        assert!(rk4(&p, t_f + 1e-5, 1e-6) < 0.0);
    }

    #[test]
    fn pressing_control_can_fail_to_release() {
        let p = CollisionParams { control_sign: ControlSign::Press, ..CollisionParams::nominal() };
        assert!(matches!(collision_end_time(&p), Err(CollisionError::NoRelease { .. })));
    }

    #[test]
    fn natural_impulse_values() {
        let p = CollisionParams::nominal();
        assert!((natural_impulse(&p).unwrap() - 0.03075).abs() < 1e-15);
        let p0 = CollisionParams { m_f: 0.0, ..p };
        assert!((natural_impulse(&p0).unwrap() - 0.030).abs() < 1e-15);
        let rest = CollisionParams { v0: 0.0, ..p };
        assert_eq!(natural_impulse(&rest).unwrap(), 0.0);
        let unforced = CollisionParams { f_in: 0.0, ..p };
        assert_eq!(total_impulse(&unforced).unwrap(), natural_impulse(&unforced).unwrap());
    }

    #[test]
    fn total_impulse_vanishes_with_velocity() {
        let p = CollisionParams { f_in: 0.0, v0: 1e-9, ..CollisionParams::nominal() };
        assert!(total_impulse(&p).unwrap() < 1e-9);
    }

    #[test]
    fn eta_is_one_without_control() {
        let p = CollisionParams { f_in: 0.0, ..CollisionParams::nominal() };
        let r = impulse_ratio(&p).unwrap();
        assert_eq!(r.eta, 1.0);
        assert!(!r.eta_out_of_range);
    }

    #[test]
    fn nominal_eta_below_one_and_rising_with_latency() {
        let mut prev = 0.0;
        for i in 0..=7 {
            let p = CollisionParams { t_l: i as f64 * 1e-3, ..CollisionParams::nominal() };
            let eta = impulse_ratio(&p).unwrap().eta;
            assert!(eta > prev && eta < 1.0, "t_l={} eta={eta}", p.t_l);
            prev = eta;
        }
    }

    #[test]
    fn trajectory_ends_at_zero() {
        let r = analyze(&CollisionParams::nominal(), Some(50)).unwrap();
        let traj = r.trajectory.unwrap();
        assert_eq!(traj.len(), 50);
        assert!(traj.last().unwrap().x.abs() < 1e-12);
        assert!(traj[1..49].iter().all(|s| s.x > 0.0 && s.force < 0.0));
    }

    #[test]
    fn sweep_single_cell_at_zero_latency() {
        let grid = SweepGrid { k: vec![1500.0], t_l: vec![0.0], v0: vec![0.15] };
        let rows = sweep_eta(&grid, &CollisionParams::nominal()).unwrap();
        assert_eq!(rows.len(), 1);
        // Zero latency: x = (v0/w) sin(wt) + (u/k)(1 - cos(wt)), root where tan(w t/2) = -v0 k/(u w).
        let p = CollisionParams { t_l: 0.0, ..CollisionParams::nominal() };
        let w = p.omega0();
        let u = p.control_force();
        let t_f = 2.0 * (-p.v0 * p.k / (u * w)).atan() / w;
        let expected = (p.m_f * p.v0 + p.m_r * p.v0 * (1.0 - (w * t_f).cos()) + u * (t_f - (w * t_f).sin() / w))
            / (p.m_f * p.v0 + 2.0 * p.m_r * p.v0);
        let got = rows[0].outcome.as_ref().unwrap();
        assert!((got.t_f - t_f).abs() < 1e-11);
        assert!((got.eta - expected).abs() < 1e-9, "{} vs {expected}", got.eta);
    }

    #[test]
    fn sweep_rows_are_lexicographic_and_record_failures() {
        let grid = SweepGrid { k: vec![500.0, 1500.0], t_l: vec![0.0, 0.01], v0: vec![0.1, 0.2] };
        let fixed = CollisionParams { control_sign: ControlSign::Press, ..CollisionParams::nominal() };
        let rows = sweep_eta(&grid, &fixed).unwrap();
        assert_eq!(rows.len(), 8);
        let keys: Vec<_> = rows.iter().map(|r| (r.k, r.t_l, r.v0)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
        assert!(rows.iter().any(|r| r.status() != "ok"));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with(SWEEP_CSV_HEADER));
    }

    #[test]
    fn grid_validation() {
        let bad = SweepGrid { k: vec![2.0, 1.0], t_l: vec![0.0], v0: vec![0.1] };
        assert!(sweep_eta(&bad, &CollisionParams::nominal()).is_err());
        let empty = SweepGrid { k: vec![], t_l: vec![0.0], v0: vec![0.1] };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn eta_rises_with_stiffness_at_nominal_latency() {
        let grid = SweepGrid { k: logspace(100.0, 10_000.0, 21), t_l: vec![0.007], v0: vec![0.15] };
        let rows = sweep_eta(&grid, &CollisionParams::nominal()).unwrap();
        let etas: Vec<f64> = rows.iter().map(|r| r.outcome.as_ref().unwrap().eta).collect();
        assert!(etas.windows(2).all(|w| w[1] >= w[0]), "{etas:?}");
        assert!(etas[0] < etas[20]);
    }
}
