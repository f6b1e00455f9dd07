//! Quintic motion primitives and trajectory containers.
//!
//! Each axis of a multirotor trajectory is a piecewise quintic. On one segment
//! starting from `(p0, v0, a0)`:
//!
//! ```text
//! p(t) = alpha/120 t^5 + beta/24 t^4 + gamma/6 t^3 + a0/2 t^2 + v0 t + p0
//! v(t) = alpha/24  t^4 + beta/6  t^3 + gamma/2 t^2 + a0 t     + v0
//! a(t) = alpha/6   t^3 + beta/2  t^2 + gamma t     + a0
//! ```
//!
//! and the minimum-jerk choice of `(alpha, beta, gamma)` that reaches a fully
//! specified end state has a closed form (see [`min_jerk_coefficients`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Attitude, Vec3};

/// Relative tolerance on knot times, as a fraction of the sampling period.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Absolute slack before a bound excess counts as a violation.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

/// Position, velocity and acceleration along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisState {
    pub p: f64,
    pub v: f64,
    pub a: f64,
}

impl AxisState {
    pub const fn new(p: f64, v: f64, a: f64) -> Self {
        AxisState { p, v, a }
    }

    pub const fn rest(p: f64) -> Self {
        AxisState { p, v: 0.0, a: 0.0 }
    }
}

/// One single-axis quintic segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub start: AxisState,
    pub duration: f64,
}

/// Minimum-jerk coefficients joining `start` to `end` in `duration` seconds.
pub fn min_jerk_coefficients(start: AxisState, end: AxisState, duration: f64) -> Result<QuinticSegment> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::domain(format!(
            "segment duration must be positive, got {duration}"
        )));
    }
    let (alpha, beta, gamma) = min_jerk_raw(start, end, duration);
    Ok(QuinticSegment {
        alpha,
        beta,
        gamma,
        start,
        duration,
    })
}

#[inline]
pub(crate) fn min_jerk_raw(start: AxisState, end: AxisState, t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t5 = t3 * t2;
    let dp = end.p - start.p - start.v * t - 0.5 * start.a * t2;
    let dv = end.v - start.v - start.a * t;
    let da = end.a - start.a;
    let alpha = (720.0 * dp - 360.0 * t * dv + 60.0 * t2 * da) / t5;
    let beta = (-360.0 * t * dp + 168.0 * t2 * dv - 24.0 * t3 * da) / t5;
    let gamma = (60.0 * t2 * dp - 24.0 * t3 * dv + 3.0 * t2 * t2 * da) / t5;
    (alpha, beta, gamma)
}

impl QuinticSegment {
    /// Evaluates the segment at local time `t` in [0, duration].
    pub fn sample(&self, t: f64) -> Result<AxisState> {
        // Tiny overshoot from accumulated time arithmetic is tolerated.
        let slack = GRID_TOLERANCE * self.duration;
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::domain(format!(
                "sample time {t} outside [0, {}]",
                self.duration
            )));
        }
        Ok(self.eval(t))
    }

    #[inline]
    pub(crate) fn eval(&self, t: f64) -> AxisState {
        let QuinticSegment {
            alpha,
            beta,
            gamma,
            start,
            ..
        } = *self;
        let t2 = t * t;
        let t3 = t2 * t;
        let p = alpha / 120.0 * t3 * t2
            + beta / 24.0 * t2 * t2
            + gamma / 6.0 * t3
            + 0.5 * start.a * t2
            + start.v * t
            + start.p;
        let v = alpha / 24.0 * t2 * t2 + beta / 6.0 * t3 + gamma / 2.0 * t2 + start.a * t + start.v;
        let a = alpha / 6.0 * t3 + beta / 2.0 * t2 + gamma * t + start.a;
        AxisState { p, v, a }
    }
}

/// Time-stamped vehicle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryKnot {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub attitude: Option<Attitude>,
}

impl TrajectoryKnot {
    pub fn at_rest(t: f64, position: Vec3) -> Self {
        TrajectoryKnot {
            t,
            position,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            attitude: None,
        }
    }

    pub fn axis_state(&self, j: usize) -> AxisState {
        AxisState::new(
            self.position.axis(j),
            self.velocity.axis(j),
            self.acceleration.axis(j),
        )
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.position.is_finite()
            && self.velocity.is_finite()
            && self.acceleration.is_finite()
            && self
                .attitude
                .map_or(true, |a| a.roll.is_finite() && a.pitch.is_finite() && a.yaw.is_finite())
    }
}

/// Knots on the uniform grid `t_k = k * Ts`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    knots: Vec<TrajectoryKnot>,
    sampling_period: f64,
}

impl Trajectory {
    /// Validates the grid (N >= 1, Ts > 0, `t_k = k Ts` within `1e-9 Ts`) and
    /// that every entry is finite.
    pub fn new(knots: Vec<TrajectoryKnot>, sampling_period: f64) -> Result<Self> {
        if !(sampling_period > 0.0 && sampling_period.is_finite()) {
            return Err(Error::invalid(
                "sampling period",
                format!("must be positive, got {sampling_period}"),
            ));
        }
        if knots.len() < 2 {
            return Err(Error::invalid(
                "trajectory",
                format!("needs at least 2 knots, got {}", knots.len()),
            ));
        }
        for (k, knot) in knots.iter().enumerate() {
            if !knot.is_finite() {
                return Err(Error::invalid(
                    "trajectory",
                    format!("non-finite entry at knot {k}"),
                ));
            }
            let expected = k as f64 * sampling_period;
            if (knot.t - expected).abs() > GRID_TOLERANCE * sampling_period {
                return Err(Error::invalid(
                    "trajectory",
                    format!(
                        "non-uniform time grid: knot {k} at t = {} but expected {expected}",
                        knot.t
                    ),
                ));
            }
        }
        Ok(Trajectory {
            knots,
            sampling_period,
        })
    }

    /// Builds a trajectory from states, stamping `t_k = k Ts`.
    pub fn from_states(
        states: impl IntoIterator<Item = (Vec3, Vec3, Vec3)>,
        sampling_period: f64,
    ) -> Result<Self> {
        let knots = states
            .into_iter()
            .enumerate()
            .map(|(k, (p, v, a))| TrajectoryKnot {
                t: k as f64 * sampling_period,
                position: p,
                velocity: v,
                acceleration: a,
                attitude: None,
            })
            .collect();
        Trajectory::new(knots, sampling_period)
    }

    pub fn knots(&self) -> &[TrajectoryKnot] {
        &self.knots
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
    }

    /// Number of intervals N.
    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.intervals() as f64 * self.sampling_period
    }

    pub fn has_attitudes(&self) -> bool {
        self.knots.iter().all(|k| k.attitude.is_some())
    }

    /// Replaces every attitude channel.
    pub fn with_attitudes(mut self, attitudes: &[Attitude]) -> Self {
        assert_eq!(attitudes.len(), self.knots.len());
        for (knot, att) in self.knots.iter_mut().zip(attitudes) {
            knot.attitude = Some(*att);
        }
        self
    }

    /// Whether `other` lives on the same grid (same N and Ts).
    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.intervals() == other.intervals()
            && (self.sampling_period - other.sampling_period).abs()
                <= GRID_TOLERANCE * self.sampling_period
    }

    /// Min-jerk segment between knot `k` and `k + 1` along axis `j`.
    pub fn segment(&self, k: usize, j: usize) -> QuinticSegment {
        let (alpha, beta, gamma) = min_jerk_raw(
            self.knots[k].axis_state(j),
            self.knots[k + 1].axis_state(j),
            self.sampling_period,
        );
        QuinticSegment {
            alpha,
            beta,
            gamma,
            start: self.knots[k].axis_state(j),
            duration: self.sampling_period,
        }
    }
}

/// Which kinematic bound was exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Velocity,
    Acceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index k of the segment [t_k, t_{k+1}].
    pub segment: usize,
    pub axis: usize,
    pub quantity: Quantity,
    /// Absolute time of the offending sample.
    pub t: f64,
    pub value: f64,
    pub limit: f64,
}

impl Violation {
    pub fn excess(&self) -> f64 {
        self.value.abs() - self.limit
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest bound excess, 0 when feasible.
    pub fn max_excess(&self) -> f64 {
        self.violations
            .iter()
            .map(Violation::excess)
            .fold(0.0, f64::max)
    }
}

/// Samples every inter-knot min-jerk segment at `intra_samples + 2` equispaced
/// points (both endpoints included) and reports each `|v| > v_max` or
/// `|a| > a_max` beyond [`AUDIT_TOLERANCE`].
pub fn feasibility_audit(
    traj: &Trajectory,
    v_max: Vec3,
    a_max: Vec3,
    intra_samples: usize,
) -> Result<FeasibilityReport> {
    if traj.knots().len() < 2 {
        return Err(Error::domain("feasibility audit needs at least 2 knots"));
    }
    let ts = traj.sampling_period();
    let steps = intra_samples + 1;
    let mut violations = Vec::new();
    for k in 0..traj.intervals() {
        let t0 = traj.knots()[k].t;
        for j in 0..3 {
            let seg = traj.segment(k, j);
            let (vl, al) = (v_max.axis(j), a_max.axis(j));
            for i in 0..=steps {
                let tau = ts * i as f64 / steps as f64;
                let s = seg.eval(tau);
                let mut check = |quantity, value: f64, limit: f64| {
                    if value.abs() > limit + AUDIT_TOLERANCE {
                        violations.push(Violation {
                            segment: k,
                            axis: j,
                            quantity,
                            t: t0 + tau,
                            value,
                            limit,
                        });
                    }
                };
                check(Quantity::Velocity, s.v, vl);
                check(Quantity::Acceleration, s.a, al);
            }
        }
    }
    Ok(FeasibilityReport { violations })
}
