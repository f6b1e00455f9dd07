//! Decision-vector layout and the penalized objective.
//!
//! The decision vector holds the relay state of knots `1..=N`, nine entries per
//! knot: `[px, py, pz, vx/vmax_x, vy/vmax_y, vz/vmax_z, ax/amax_x, ay/amax_y,
//! az/amax_z]`. Knot 0 is pinned to the start state at rest. Between knots the
//! trajectory is the min-jerk quintic joining the two knot states, so the
//! motion-primitive dynamics hold by construction and only the velocity and
//! acceleration bounds remain as (penalized) constraints.

use crate::comms::{approx_gain_factor, gain_attitude_vector, GainModel, LinkBudget};
use crate::dynamics::{AxisState, Trajectory, TrajectoryKnot};
use crate::error::{Error, Result};
use crate::geometry::{attitude_from_acceleration, Vec3};
use crate::objective::{resolve_attitudes, step_cost, CostParams};
use crate::scenario::Scenario;

use super::curvature::{bound_rows, empty_model, BandCholesky, BoundRow};

pub const VARS_PER_KNOT: usize = 9;

const KINDS: [VarKind; 3] = [VarKind::Position, VarKind::Velocity, VarKind::Acceleration];
/// Ridge added to the curvature model, relative to the mean step-cost
/// curvature.
const CURVATURE_RIDGE: f64 = 1e-6;
/// Smallest diagonal margin of a step-cost block, relative to its largest
/// diagonal entry.
const PD_FLOOR: f64 = 1e-3;
/// Probe distance [m] of the step-cost Hessian.
const HESSIAN_PROBE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Position = 0,
    Velocity = 1,
    Acceleration = 2,
}

/// Layout of the decision vector for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcription {
    intervals: usize,
    sampling_period: f64,
    start: Vec3,
    v_max: Vec3,
    a_max: Vec3,
}

/// Builds the decision-vector layout for `scenario`.
pub fn transcribe(scenario: &Scenario) -> Result<Transcription> {
    let n = scenario.peer.intervals();
    let ts = scenario.peer.sampling_period();
    if n == 0 {
        return Err(Error::invalid("peer trajectory", "needs N >= 1 intervals"));
    }
    if !(ts > 0.0) {
        return Err(Error::invalid("sampling period", format!("must be positive, got {ts}")));
    }
    Ok(Transcription {
        intervals: n,
        sampling_period: ts,
        start: scenario.relay_start,
        v_max: scenario.v_max,
        a_max: scenario.a_max,
    })
}

impl Transcription {
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
    }

    pub fn v_max(&self) -> Vec3 {
        self.v_max
    }

    pub fn a_max(&self) -> Vec3 {
        self.a_max
    }

    pub fn num_vars(&self) -> usize {
        VARS_PER_KNOT * self.intervals
    }

    /// Index of the variable for knot `k` (1-based; knot 0 is pinned).
    pub fn index(&self, knot: usize, kind: VarKind, axis: usize) -> usize {
        debug_assert!(knot >= 1 && knot <= self.intervals && axis < 3);
        (knot - 1) * VARS_PER_KNOT + kind as usize * 3 + axis
    }

    fn scale(&self, kind: VarKind, axis: usize) -> f64 {
        match kind {
            VarKind::Position => 1.0,
            VarKind::Velocity => self.v_max.axis(axis),
            VarKind::Acceleration => self.a_max.axis(axis),
        }
    }

    /// Per-knot, per-axis states decoded from `z`, knot 0 included.
    pub(crate) fn decode_states(&self, z: &[f64]) -> Vec<[AxisState; 3]> {
        assert_eq!(z.len(), self.num_vars());
        let mut out = Vec::with_capacity(self.intervals + 1);
        out.push([0, 1, 2].map(|j| AxisState::rest(self.start.axis(j))));
        for chunk in z.chunks_exact(VARS_PER_KNOT) {
            out.push([0, 1, 2].map(|j| {
                AxisState::new(
                    chunk[j],
                    chunk[3 + j] * self.v_max.axis(j),
                    chunk[6 + j] * self.a_max.axis(j),
                )
            }));
        }
        out
    }

    /// Trajectory for decision vector `z`. Attitudes are reconstructed from
    /// the acceleration channel when possible.
    pub fn decode(&self, z: &[f64], gravity: f64) -> Trajectory {
        let states = self.decode_states(z);
        let knots = states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let acceleration = Vec3::new(s[0].a, s[1].a, s[2].a);
                TrajectoryKnot {
                    t: k as f64 * self.sampling_period,
                    position: Vec3::new(s[0].p, s[1].p, s[2].p),
                    velocity: Vec3::new(s[0].v, s[1].v, s[2].v),
                    acceleration,
                    attitude: attitude_from_acceleration(acceleration, gravity).ok(),
                }
            })
            .collect::<Vec<_>>();
        let mut traj = Trajectory::new(knots, self.sampling_period)
            .expect("decoded knots lie on the transcription grid");
        if !traj.has_attitudes() {
            // Partial channels are never written; drop them all.
            let bare: Vec<_> = traj
                .knots()
                .iter()
                .map(|k| TrajectoryKnot { attitude: None, ..*k })
                .collect();
            traj = Trajectory::new(bare, self.sampling_period).expect("same grid");
        }
        traj
    }

    /// Decision vector for `traj`; knot 0 of `traj` is ignored.
    pub fn encode(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.intervals() != self.intervals {
            return Err(Error::GridMismatch {
                relay: traj.intervals(),
                peer: self.intervals,
                detail: String::new(),
            });
        }
        let mut z = vec![0.0; self.num_vars()];
        for (k, knot) in traj.knots().iter().enumerate().skip(1) {
            for j in 0..3 {
                z[self.index(k, VarKind::Position, j)] = knot.position.axis(j);
                z[self.index(k, VarKind::Velocity, j)] =
                    knot.velocity.axis(j) / self.scale(VarKind::Velocity, j);
                z[self.index(k, VarKind::Acceleration, j)] =
                    knot.acceleration.axis(j) / self.scale(VarKind::Acceleration, j);
            }
        }
        Ok(z)
    }
}

/// Penalized objective: summed step cost plus `weight` times the squared,
/// limit-normalized bound excesses sampled on every segment.
pub(crate) struct Problem {
    pub layout: Transcription,
    peer_positions: Vec<Vec3>,
    /// Surrogate attitude vectors of the peer, one per knot.
    peer_gains: Vec<[f64; 7]>,
    bs: Vec3,
    budget: LinkBudget,
    model: GainModel,
    cost: CostParams,
    /// Sampled bound functionals of one segment, per axis.
    bounds: [Vec<BoundRow>; 3],
    pub weight: f64,
}

impl Problem {
    pub fn new(scenario: &Scenario, model: GainModel, intra_samples: usize) -> Result<Self> {
        if model == GainModel::Exact {
            return Err(Error::Setup(
                "the exact dipole model is for evaluation only; optimize with the surrogate or pattern-agnostic model".into(),
            ));
        }
        let layout = transcribe(scenario)?;
        let peer_attitudes = resolve_attitudes(&scenario.peer, scenario.gravity)?;
        let steps = intra_samples + 1;
        let ts = layout.sampling_period;
        let taus: Vec<f64> = (0..=steps).map(|i| ts * i as f64 / steps as f64).collect();
        let bounds = [0, 1, 2].map(|j| bound_rows(&layout, j, &taus));
        Ok(Problem {
            peer_positions: scenario.peer.knots().iter().map(|k| k.position).collect(),
            peer_gains: peer_attitudes.iter().map(|a| gain_attitude_vector(*a)).collect(),
            bs: scenario.bs_position,
            budget: scenario.budget,
            model,
            cost: scenario.cost,
            bounds,
            weight: 0.0,
            layout,
        })
    }

    /// Step cost at knot `k` with the relay at `p` (relay attitude at hover).
    #[inline]
    pub fn step_term(&self, k: usize, p: Vec3) -> f64 {
        let to_peer = self.peer_positions[k] - p;
        let to_bs = self.bs - p;
        let r21 = to_peer.norm_squared();
        let r10 = to_bs.norm_squared();
        if !(r21 > 0.0 && r10 > 0.0) {
            return f64::INFINITY;
        }
        let (g21, g10) = match self.model {
            GainModel::PatternAgnostic => (1.0, 1.0),
            _ => {
                let d21 = to_peer.scale(1.0 / r21.sqrt());
                let d10 = to_bs.scale(1.0 / r10.sqrt());
                let hover = |d: Vec3| (1.0 - d.z * d.z).clamp(0.0, 1.0);
                (
                    hover(d21) * approx_gain_factor(&self.peer_gains[k], d21),
                    hover(d10),
                )
            }
        };
        step_cost(
            self.budget.k_relay_bs * g10 / r10,
            self.budget.k_uav_uav * g21 / r21,
            &self.cost,
        )
    }

    /// Unweighted penalty of one segment along one axis.
    #[inline]
    pub fn segment_term(&self, start: AxisState, end: AxisState, axis: usize) -> f64 {
        let x = self.scaled(start, end, axis);
        self.bounds[axis]
            .iter()
            .map(|row| {
                let e = (dot6(&row.coeffs, &x).abs() - 1.0).max(0.0);
                e * e
            })
            .sum()
    }

    #[inline]
    fn scaled(&self, start: AxisState, end: AxisState, axis: usize) -> [f64; 6] {
        let (vl, al) = (self.layout.v_max.axis(axis), self.layout.a_max.axis(axis));
        [start.p, start.v / vl, start.a / al, end.p, end.v / vl, end.a / al]
    }

    /// Positive definite banded model of the penalized objective's Hessian:
    /// per-knot finite-difference Hessians of the step cost (shifted to be
    /// positive definite) plus the Gauss-Newton curvature of every active
    /// bound sample. Inactive samples enter with relative weight `damping`,
    /// which keeps model steps from tearing the trajectory apart.
    pub fn curvature(&self, terms: &Terms, damping: f64) -> BandCholesky {
        let n = self.layout.intervals;
        let mut h = empty_model(&self.layout);
        let mut cost_diag = 0.0;
        for k in 1..=n {
            let s = &terms.states[k];
            let p = Vec3::new(s[0].p, s[1].p, s[2].p);
            let block = pd_shift(fd_hessian(|q| self.step_term(k, q), p, terms.steps[k]));
            for a in 0..3 {
                cost_diag += block[a][a];
                for b in 0..=a {
                    let (ia, ib) = (
                        self.layout.index(k, VarKind::Position, a),
                        self.layout.index(k, VarKind::Position, b),
                    );
                    h.add(ia, ib, block[a][b]);
                }
            }
        }
        let w2 = 2.0 * self.weight;
        for seg in 0..n {
            for j in 0..3 {
                let x = self.scaled(terms.states[seg][j], terms.states[seg + 1][j], j);
                let idx: [Option<usize>; 6] = std::array::from_fn(|e| {
                    let knot = seg + e / 3;
                    (knot > 0).then(|| self.layout.index(knot, KINDS[e % 3], j))
                });
                for row in &self.bounds[j] {
                    let w = if dot6(&row.coeffs, &x).abs() > 1.0 {
                        w2
                    } else {
                        w2 * damping
                    };
                    if w == 0.0 {
                        continue;
                    }
                    for e1 in 0..6 {
                        let Some(i1) = idx[e1] else { continue };
                        for e2 in 0..=e1 {
                            let Some(i2) = idx[e2] else { continue };
                            h.add(i1, i2, w * row.coeffs[e1] * row.coeffs[e2]);
                        }
                    }
                }
            }
        }
        let ridge = (CURVATURE_RIDGE * cost_diag / (3 * n) as f64).max(f64::MIN_POSITIVE.sqrt());
        for i in 0..self.layout.num_vars() {
            h.add(i, i, ridge);
        }
        h.factor().expect("curvature model is positive definite")
    }

    /// Cached per-term values for a decision vector.
    pub fn terms(&self, z: &[f64]) -> Terms {
        let states = self.layout.decode_states(z);
        let steps = states
            .iter()
            .enumerate()
            .map(|(k, s)| self.step_term(k, Vec3::new(s[0].p, s[1].p, s[2].p)))
            .collect();
        let n = self.layout.intervals;
        let mut segments = vec![[0.0; 3]; n];
        for (k, seg) in segments.iter_mut().enumerate() {
            for (j, v) in seg.iter_mut().enumerate() {
                *v = self.segment_term(states[k][j], states[k + 1][j], j);
            }
        }
        Terms {
            states,
            steps,
            segments,
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.terms(z).total(self.weight)
    }

    /// Gradient of the penalized objective.
    ///
    /// The link cost is differentiated by forward differences with step
    /// `h_i = fd_step (1 + |z_i|)`; a position perturbation only changes its
    /// own knot's step cost, so only that term is re-evaluated. The bound
    /// penalty is a squared hinge of linear functionals and is differentiated
    /// exactly: difference quotients across its kinks are off by far more
    /// than the size of the cost gradient.
    pub fn gradient(&self, z: &[f64], terms: &Terms, fd_step: f64, grad: &mut [f64]) {
        let n = self.layout.intervals;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for k in 1..=n {
            let s = &terms.states[k];
            let base = Vec3::new(s[0].p, s[1].p, s[2].p);
            for j in 0..3 {
                let i = self.layout.index(k, VarKind::Position, j);
                let hi = z[i] + fd_step * (1.0 + z[i].abs());
                let mut p = base;
                p.set_axis(j, hi);
                grad[i] = (self.step_term(k, p) - terms.steps[k]) / (hi - z[i]);
            }
        }
        let w2 = 2.0 * self.weight;
        for seg in 0..n {
            for j in 0..3 {
                let x = self.scaled(terms.states[seg][j], terms.states[seg + 1][j], j);
                for row in &self.bounds[j] {
                    let u = dot6(&row.coeffs, &x);
                    let e = u.abs() - 1.0;
                    if e <= 0.0 {
                        continue;
                    }
                    let c = w2 * e * u.signum();
                    for (e_idx, coeff) in row.coeffs.iter().enumerate() {
                        let knot = seg + e_idx / 3;
                        if knot > 0 {
                            grad[self.layout.index(knot, KINDS[e_idx % 3], j)] += c * coeff;
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Terms {
    pub states: Vec<[AxisState; 3]>,
    pub steps: Vec<f64>,
    pub segments: Vec<[f64; 3]>,
}

impl Terms {
    pub fn cost(&self) -> f64 {
        self.steps.iter().sum()
    }

    pub fn penalty(&self) -> f64 {
        self.segments.iter().flat_map(|s| s.iter()).sum()
    }

    pub fn total(&self, weight: f64) -> f64 {
        self.cost() + weight * self.penalty()
    }
}

#[inline]
fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference Hessian of `f` at `p`; `f0 = f(p)`. Probes that land on
/// a singular point contribute nothing.
fn fd_hessian(f: impl Fn(Vec3) -> f64, p: Vec3, f0: f64) -> [[f64; 3]; 3] {
    let h = HESSIAN_PROBE;
    let at = |da: [f64; 3]| {
        let v = f(p + Vec3::new(da[0], da[1], da[2]));
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    };
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        let mut e = [0.0; 3];
        e[a] = h;
        let plus = at(e);
        e[a] = -h;
        let minus = at(e);
        m[a][a] = (plus - 2.0 * f0 + minus) / (h * h);
        for b in 0..a {
            let mut pp = [0.0; 3];
            pp[a] = h;
            pp[b] = h;
            let mut pm = pp;
            pm[b] = -h;
            let mut mp = pp;
            mp[a] = -h;
            let mm = [-pp[0], -pp[1], -pp[2]];
            let v = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h * h);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    for row in &mut m {
        for v in row.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
    }
    m
}

/// Raises each diagonal entry until its row is strictly diagonally dominant,
/// which makes the block positive definite.
fn pd_shift(mut m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let scale = (0..3).fold(0.0f64, |s, a| s.max(m[a][a].abs()));
    let floor = PD_FLOOR * scale;
    for a in 0..3 {
        let off: f64 = (0..3).filter(|&b| b != a).map(|b| m[a][b].abs()).sum();
        m[a][a] = m[a][a].max(off + floor);
    }
    m
}
