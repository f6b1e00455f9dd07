//! Relay trajectory optimization.
//!
//! The continuous problem is transcribed onto the peer's time grid (see
//! [`transcription`]) and solved with a quadratic-penalty method: each round
//! minimizes cost plus weighted bound excess, then grows the weight. Inner
//! iterations take damped Gauss-Newton steps on a banded curvature model with
//! Armijo backtracking; the link-cost gradient comes from forward differences.

mod linesearch;
mod curvature;
pub mod transcription;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comms::GainModel;
use crate::dynamics::{feasibility_audit, FeasibilityReport, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scenario::Scenario;

use linesearch::armijo;
pub use transcription::{transcribe, Transcription, VarKind};
use transcription::Problem;

/// Bound excess up to which an iterate counts as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-3;

/// Window, in iterations, of the relative-decrease stopping test.
const STALL_WINDOW: usize = 10;
/// Relative weight of inactive bound samples in the curvature model: grown
/// after a backtracked step, shrunk after a full one.
const DAMPING_INIT: f64 = 1e-2;
const DAMPING_FACTOR: f64 = 4.0;
const DAMPING_MIN: f64 = 1e-8;
const DAMPING_MAX: f64 = 1e8;
/// Amplitude [m] of the seeded perturbation applied to the initial positions.
const SEED_JITTER: f64 = 1e-6;

/// How the first iterate is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Stay at the start position.
    Hold,
    /// Track the midpoint between the base station and the peer, blending in
    /// from the start position.
    MidpointTrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Iteration budget of each penalty round.
    pub max_iters: usize,
    /// Relative cost decrease over 10 iterations below which a round ends.
    pub tol: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_rounds: usize,
    pub fd_step: f64,
    pub intra_samples: usize,
    pub seed: u64,
    pub initial_guess: InitStrategy,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iters: 2000,
            tol: 1e-4,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            penalty_rounds: 6,
            fd_step: 1e-6,
            intra_samples: 4,
            seed: 0,
            initial_guess: InitStrategy::MidpointTrack,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("solver.{name}");
        if self.max_iters == 0 {
            return Err(Error::invalid(field("max_iters"), "must be >= 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(field("tol"), format!("must be positive, got {}", self.tol)));
        }
        if !(self.penalty_init > 0.0 && self.penalty_init.is_finite()) {
            return Err(Error::invalid(field("penalty_init"), "must be positive"));
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(Error::invalid(field("penalty_growth"), "must exceed 1"));
        }
        if self.penalty_rounds == 0 {
            return Err(Error::invalid(field("penalty_rounds"), "must be >= 1"));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1e-2) {
            return Err(Error::invalid(field("fd_step"), "must lie in (0, 1e-2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
    /// Penalized objective at every accepted iterate.
    pub cost_history: Vec<f64>,
    /// Index into `cost_history` where each penalty round starts.
    pub round_starts: Vec<usize>,
    /// Unpenalized cost of the returned trajectory under the solve model.
    pub final_cost: f64,
    pub max_constraint_violation: f64,
    pub feasible: bool,
    pub audit: FeasibilityReport,
    pub iterations_used: usize,
    pub wall_time: f64,
    pub model_used: GainModel,
}

impl SolveReport {
    pub fn trajectory(&self) -> &Trajectory {
        self.trajectory.as_ref().expect("solve always attaches a trajectory")
    }
}

/// First iterate for `scenario`.
pub fn initial_guess(scenario: &Scenario, strategy: InitStrategy) -> Trajectory {
    let peer = &scenario.peer;
    let ts = peer.sampling_period();
    let n = peer.knots().len();
    let states: Vec<(Vec3, Vec3, Vec3)> = match strategy {
        InitStrategy::Hold => vec![(scenario.relay_start, Vec3::ZERO, Vec3::ZERO); n],
        InitStrategy::MidpointTrack => {
            let target: Vec<Vec3> = peer
                .knots()
                .iter()
                .map(|k| (scenario.bs_position + k.position).scale(0.5))
                .collect();
            let ramp = ramp_duration(target[0] - scenario.relay_start, scenario.v_max, scenario.a_max);
            let mid: Vec<Vec3> = target
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let s = min_jerk_blend(k as f64 * ts / ramp);
                    scenario.relay_start + (*p - scenario.relay_start).scale(s)
                })
                .collect();
            let vel = finite_difference(&mid, ts);
            let acc = finite_difference(&vel, ts);
            let clip = |v: Vec3, lim: Vec3| {
                Vec3::new(
                    v.x.clamp(-lim.x, lim.x),
                    v.y.clamp(-lim.y, lim.y),
                    v.z.clamp(-lim.z, lim.z),
                )
            };
            mid.iter()
                .zip(&vel)
                .zip(&acc)
                .map(|((p, v), a)| (*p, clip(*v, scenario.v_max), clip(*a, scenario.a_max)))
                .collect()
        }
    };
    Trajectory::from_states(states, ts).expect("peer grid is valid")
}

/// Safety factor on the ramp duration; leaves headroom for the target's own
/// motion.
const RAMP_MARGIN: f64 = 1.5;

/// Duration of a min-jerk move over `delta` that respects the per-axis limits.
fn ramp_duration(delta: Vec3, v_max: Vec3, a_max: Vec3) -> f64 {
    // Min-jerk peaks: |v| = 1.875 d / T, |a| = 5.7735 d / T^2.
    let t = (0..3).fold(0.0f64, |t, j| {
        let d = delta.axis(j).abs();
        t.max(1.875 * d / v_max.axis(j))
            .max((5.7735 * d / a_max.axis(j)).sqrt())
    });
    RAMP_MARGIN * t.max(f64::MIN_POSITIVE)
}

fn min_jerk_blend(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Central differences inside, one-sided at the ends.
fn finite_difference(xs: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = xs.len();
    (0..n)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (xs[hi] - xs[lo]).scale(1.0 / ((hi - lo) as f64 * dt))
        })
        .collect()
}

/// Optimizes the relay trajectory under `model` starting from the configured
/// initial guess.
pub fn solve(scenario: &Scenario, model: GainModel, params: &SolverParams) -> Result<SolveReport> {
    let guess = initial_guess(scenario, params.initial_guess);
    solve_from(scenario, model, params, &guess)
}

/// Like [`solve`] but starting from `guess` (knot 0 is replaced by the pinned
/// start state).
pub fn solve_from(
    scenario: &Scenario,
    model: GainModel,
    params: &SolverParams,
    guess: &Trajectory,
) -> Result<SolveReport> {
    let clock = Instant::now();
    params.validate()?;
    let mut problem = Problem::new(scenario, model, params.intra_samples)?;
    let layout = problem.layout.clone();
    let mut x = layout.encode(guess)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for k in 1..=layout.intervals() {
        for j in 0..3 {
            x[layout.index(k, VarKind::Position, j)] += SEED_JITTER * rng.gen_range(-1.0..1.0);
        }
    }

    let initial = problem.terms(&x);
    if let Some(k) = initial.steps.iter().position(|c| !c.is_finite()) {
        return Err(Error::Setup(format!(
            "non-finite cost at the initial point, step {k} (t = {})",
            k as f64 * layout.sampling_period()
        )));
    }

    let mut history = Vec::new();
    let mut round_starts = Vec::new();
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut grad = vec![0.0; x.len()];

    let mut damping = DAMPING_INIT;
    for round in 0..params.penalty_rounds {
        problem.weight = params.penalty_init * params.penalty_growth.powi(round as i32);
        let mut terms = problem.terms(&x);
        let mut f = terms.total(problem.weight);
        problem.gradient(&x, &terms, params.fd_step, &mut grad);
        round_starts.push(history.len());
        history.push(f);
        let round_start = history.len() - 1;

        for _ in 0..params.max_iters {
            let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
            problem.curvature(&terms, damping).solve(&mut d);
            let Some(step) = armijo(&x, f, &grad, &d, |z| problem.value(z)) else {
                if damping >= DAMPING_MAX {
                    break;
                }
                damping = (damping * DAMPING_FACTOR).min(DAMPING_MAX);
                continue;
            };
            damping = if step.alpha == 1.0 {
                (damping / DAMPING_FACTOR).max(DAMPING_MIN)
            } else {
                (damping * DAMPING_FACTOR).min(DAMPING_MAX)
            };
            iterations += 1;
            x = step.x;
            f = step.f;
            terms = problem.terms(&x);
            problem.gradient(&x, &terms, params.fd_step, &mut grad);
            history.push(f);

            let accepted = history.len() - 1 - round_start;
            if accepted >= STALL_WINDOW {
                let past = history[history.len() - 1 - STALL_WINDOW];
                if past - f <= params.tol * f.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }

        let traj = layout.decode(&x, scenario.gravity);
        let audit = feasibility_audit(&traj, scenario.v_max, scenario.a_max, params.intra_samples)?;
        if audit.max_excess() <= FEASIBILITY_TOLERANCE {
            let cost = terms.cost();
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, x.clone()));
            }
        }
    }

    let chosen = best.map(|(_, z)| z).unwrap_or(x);
    let trajectory = layout.decode(&chosen, scenario.gravity);
    let audit = feasibility_audit(&trajectory, scenario.v_max, scenario.a_max, params.intra_samples)?;
    let final_cost = problem.terms(&chosen).cost();
    let max_constraint_violation = audit.max_excess();
    Ok(SolveReport {
        trajectory: Some(trajectory),
        cost_history: history,
        round_starts,
        final_cost,
        max_constraint_violation,
        feasible: max_constraint_violation <= FEASIBILITY_TOLERANCE,
        audit,
        iterations_used: iterations,
        wall_time: clock.elapsed().as_secs_f64(),
        model_used: model,
    })
}
