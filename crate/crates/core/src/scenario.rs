//! Scenario configuration, trajectory CSV files and synthetic peer motion.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comms::{LinkBudget, DIPOLE_DIRECTIVITY};
use crate::dynamics::{Trajectory, TrajectoryKnot, GRID_TOLERANCE};
use crate::error::{Error, Result};
use crate::geometry::{attitude_from_acceleration, Attitude, Vec3, DEFAULT_GRAVITY};
use crate::objective::{CostParams, LinkSetup};
use crate::optimizer::SolverParams;

pub const TRAJECTORY_HEADER: &str = "t,px,py,pz,vx,vy,vz,ax,ay,az";
pub const ATTITUDE_COLUMNS: &str = "roll,pitch";

/// Relative margin added to analytic peaks when declaring a synthetic peer's
/// kinematic limits; covers the quintic reconstruction between knots.
const DECLARED_LIMIT_MARGIN: f64 = 1e-3;

/// Analytic peer motions standing in for a recorded UAV trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PeerSpec {
    Hover {
        position: Vec3,
    },
    Line {
        start: Vec3,
        velocity: Vec3,
    },
    /// Horizontal circle about `center`.
    Arc {
        center: Vec3,
        radius: f64,
        /// [rad/s]
        angular_rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `center + amplitude * sin(frequency * t + phase)` per axis.
    Lissajous {
        center: Vec3,
        amplitude: Vec3,
        /// Angular frequencies [rad/s].
        frequency: Vec3,
        #[serde(default)]
        phase: Vec3,
    },
}

impl PeerSpec {
    /// Default Lissajous figure centred on `center`: tilts reach roughly 12
    /// degrees in roll and 17 degrees in pitch.
    pub fn default_lissajous(center: Vec3) -> Self {
        PeerSpec::Lissajous {
            center,
            amplitude: Vec3::new(1.5, 1.5, 0.3),
            frequency: Vec3::new(1.4, 1.2, 0.6),
            phase: Vec3::ZERO,
        }
    }

    fn state(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        match *self {
            PeerSpec::Hover { position } => (position, Vec3::ZERO, Vec3::ZERO),
            PeerSpec::Line { start, velocity } => (start + velocity.scale(t), velocity, Vec3::ZERO),
            PeerSpec::Arc {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                let (s, c) = (angular_rate * t + phase).sin_cos();
                let w = angular_rate;
                (
                    center + Vec3::new(radius * c, radius * s, 0.0),
                    Vec3::new(-radius * w * s, radius * w * c, 0.0),
                    Vec3::new(-radius * w * w * c, -radius * w * w * s, 0.0),
                )
            }
            PeerSpec::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
            } => {
                let mut p = center;
                let mut v = Vec3::ZERO;
                let mut a = Vec3::ZERO;
                for j in 0..3 {
                    let (amp, w) = (amplitude.axis(j), frequency.axis(j));
                    let (s, c) = (w * t + phase.axis(j)).sin_cos();
                    p.set_axis(j, center.axis(j) + amp * s);
                    v.set_axis(j, amp * w * c);
                    a.set_axis(j, -amp * w * w * s);
                }
                (p, v, a)
            }
        }
    }

    /// Analytic per-axis bounds on |velocity| and |acceleration|.
    pub fn peak_kinematics(&self) -> (Vec3, Vec3) {
        let abs = |v: Vec3| Vec3::new(v.x.abs(), v.y.abs(), v.z.abs());
        match *self {
            PeerSpec::Hover { .. } => (Vec3::ZERO, Vec3::ZERO),
            PeerSpec::Line { velocity, .. } => (abs(velocity), Vec3::ZERO),
            PeerSpec::Arc {
                radius,
                angular_rate,
                ..
            } => {
                let v = (radius * angular_rate).abs();
                let a = (radius * angular_rate * angular_rate).abs();
                (Vec3::new(v, v, 0.0), Vec3::new(a, a, 0.0))
            }
            PeerSpec::Lissajous {
                amplitude,
                frequency,
                ..
            } => {
                let mut v = Vec3::ZERO;
                let mut a = Vec3::ZERO;
                for j in 0..3 {
                    let (amp, w) = (amplitude.axis(j).abs(), frequency.axis(j).abs());
                    v.set_axis(j, amp * w);
                    a.set_axis(j, amp * w * w);
                }
                (v, a)
            }
        }
    }

    /// Limits the synthesized trajectory is guaranteed to respect.
    pub fn declared_limits(&self) -> (Vec3, Vec3) {
        let (v, a) = self.peak_kinematics();
        let pad = |x: Vec3| {
            let f = |c: f64| c * (1.0 + DECLARED_LIMIT_MARGIN) + 1e-9;
            Vec3::new(f(x.x), f(x.y), f(x.z))
        };
        (pad(v), pad(a))
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: Vec3| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("peer.params.{name}"), "must be finite"))
            }
        };
        match self {
            PeerSpec::Hover { position } => finite("position", *position),
            PeerSpec::Line { start, velocity } => {
                finite("start", *start)?;
                finite("velocity", *velocity)
            }
            PeerSpec::Arc {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                finite("center", *center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("peer.params.radius", "must be positive"));
                }
                if !(angular_rate.is_finite() && phase.is_finite()) {
                    return Err(Error::invalid("peer.params.angular_rate", "must be finite"));
                }
                Ok(())
            }
            PeerSpec::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
            } => {
                finite("center", *center)?;
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)?;
                finite("phase", *phase)
            }
        }
    }
}

/// Number of intervals `N = T / Ts`, requiring an integer ratio within 1e-9.
pub fn grid_intervals(horizon: f64, sampling_period: f64) -> Result<usize> {
    if !(sampling_period > 0.0 && sampling_period.is_finite()) {
        return Err(Error::invalid(
            "sampling period",
            format!("Ts must be positive, got {sampling_period}"),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(
            "trajectory duration",
            format!("T must be positive, got {horizon}"),
        ));
    }
    let ratio = horizon / sampling_period;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 || n < 1.0 {
        return Err(Error::invalid(
            "trajectory duration",
            format!("T = {horizon} is not a positive multiple of Ts = {sampling_period}"),
        ));
    }
    Ok(n as usize)
}

/// Samples `spec` on the grid `k Ts`, with exact analytic derivatives and
/// attitudes reconstructed from the acceleration channel.
pub fn synth_peer(spec: &PeerSpec, horizon: f64, sampling_period: f64, gravity: f64) -> Result<Trajectory> {
    spec.validate()?;
    let n = grid_intervals(horizon, sampling_period)?;
    let knots = (0..=n)
        .map(|k| {
            let t = k as f64 * sampling_period;
            let (position, velocity, acceleration) = spec.state(t);
            let attitude = attitude_from_acceleration(acceleration, gravity)?;
            Ok(TrajectoryKnot {
                t,
                position,
                velocity,
                acceleration,
                attitude: Some(attitude),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(knots, sampling_period)
}

/// Where the peer trajectory of a scenario came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeerSource {
    File { file: PathBuf },
    Synthetic(PeerSpec),
}

/// Fully validated planning scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_position: Vec3,
    pub relay_start: Vec3,
    pub peer: Trajectory,
    pub peer_source: PeerSource,
    pub v_max: Vec3,
    pub a_max: Vec3,
    pub budget: LinkBudget,
    pub cost: CostParams,
    pub solver: SolverParams,
    pub gravity: f64,
}

impl Scenario {
    pub fn link_setup(&self) -> LinkSetup {
        LinkSetup {
            bs: self.bs_position,
            budget: self.budget,
            gravity: self.gravity,
        }
    }

    /// Scenario with an explicit peer trajectory and defaults elsewhere,
    /// mirroring the published setup (limits 2 m/s and 2 m/s^2, budgets 1e9).
    pub fn with_peer(bs_position: Vec3, relay_start: Vec3, peer: Trajectory, source: PeerSource) -> Result<Self> {
        let s = Scenario {
            bs_position,
            relay_start,
            peer,
            peer_source: source,
            v_max: Vec3::new(2.0, 2.0, 2.0),
            a_max: Vec3::new(2.0, 2.0, 2.0),
            budget: LinkBudget::default(),
            cost: CostParams::default(),
            solver: SolverParams::default(),
            gravity: DEFAULT_GRAVITY,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bs_position", self.bs_position),
            ("relay_start", self.relay_start),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("v_max", self.v_max), ("a_max", self.a_max)] {
            if !(v.x > 0.0 && v.y > 0.0 && v.z > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("components must be positive, got {v:?}")));
            }
        }
        if self.relay_start == self.bs_position {
            return Err(Error::invalid("relay_start", "coincides with bs_position"));
        }
        LinkBudget::new(
            self.budget.k_relay_bs,
            self.budget.k_uav_uav,
            self.budget.dipole_directivity,
        )?;
        self.cost.validate()?;
        self.solver.validate()?;
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(Error::invalid("gravity", "must be positive"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.peer.duration()
    }
}

fn default_directivity() -> f64 {
    DIPOLE_DIRECTIVITY
}

fn default_p_norm() -> u32 {
    CostParams::default().p_norm
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    bs_position: Vec3,
    relay_start: Vec3,
    peer: PeerSource,
    v_max: Vec3,
    a_max: Vec3,
    k_relay_bs: f64,
    k_uav_uav: f64,
    #[serde(default = "default_directivity")]
    dipole_directivity: f64,
    #[serde(default = "default_p_norm")]
    p_norm: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_floor: Option<f64>,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "Ts")]
    sampling_period: f64,
    #[serde(default)]
    solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<f64>,
}

/// Loads and validates a scenario file. Relative peer trajectory paths are
/// resolved against the scenario's directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let gravity = file.gravity.unwrap_or(DEFAULT_GRAVITY);
    let n = grid_intervals(file.horizon, file.sampling_period)?;

    let (peer, peer_source) = match file.peer {
        PeerSource::Synthetic(spec) => (
            synth_peer(&spec, file.horizon, file.sampling_period, gravity)?,
            PeerSource::Synthetic(spec),
        ),
        PeerSource::File { file: rel } => {
            let resolved = if rel.is_absolute() {
                rel
            } else {
                path.parent().unwrap_or(Path::new(".")).join(rel)
            };
            let traj = read_trajectory(&resolved)?;
            if traj.intervals() != n
                || (traj.sampling_period() - file.sampling_period).abs()
                    > GRID_TOLERANCE * file.sampling_period
            {
                return Err(Error::invalid(
                    "peer.file",
                    format!(
                        "{} has N = {}, Ts = {} but the scenario asks for N = {n}, Ts = {}",
                        resolved.display(),
                        traj.intervals(),
                        traj.sampling_period(),
                        file.sampling_period
                    ),
                ));
            }
            let absolute = fs::canonicalize(&resolved).unwrap_or(resolved);
            (traj, PeerSource::File { file: absolute })
        }
    };

    let mut cost = CostParams {
        p_norm: file.p_norm,
        ..CostParams::default()
    };
    if let Some(floor) = file.rate_floor {
        cost.rate_floor = floor;
    }
    let scenario = Scenario {
        bs_position: file.bs_position,
        relay_start: file.relay_start,
        peer,
        peer_source,
        v_max: file.v_max,
        a_max: file.a_max,
        budget: LinkBudget {
            k_relay_bs: file.k_relay_bs,
            k_uav_uav: file.k_uav_uav,
            dipole_directivity: file.dipole_directivity,
        },
        cost,
        solver: file.solver,
        gravity,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes `scenario` in the format read by [`load_scenario`].
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ScenarioFile {
        bs_position: scenario.bs_position,
        relay_start: scenario.relay_start,
        peer: scenario.peer_source.clone(),
        v_max: scenario.v_max,
        a_max: scenario.a_max,
        k_relay_bs: scenario.budget.k_relay_bs,
        k_uav_uav: scenario.budget.k_uav_uav,
        dipole_directivity: scenario.budget.dipole_directivity,
        p_norm: scenario.cost.p_norm,
        rate_floor: Some(scenario.cost.rate_floor),
        horizon: scenario.horizon(),
        sampling_period: scenario.peer.sampling_period(),
        solver: scenario.solver,
        gravity: Some(scenario.gravity),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("scenario serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the trajectory CSV; roll and pitch columns appear when every knot
/// carries an attitude.
pub fn write_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trajectory_csv(traj)).map_err(|e| Error::io(path, e))
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let with_att = traj.has_attitudes();
    let mut out = String::from(TRAJECTORY_HEADER);
    if with_att {
        out.push(',');
        out.push_str(ATTITUDE_COLUMNS);
    }
    out.push('\n');
    for k in traj.knots() {
        let (p, v, a) = (k.position, k.velocity, k.acceleration);
        // `{}` on f64 prints the shortest representation that round-trips.
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            k.t, p.x, p.y, p.z, v.x, v.y, v.z, a.x, a.y, a.z
        )
        .unwrap();
        if let (true, Some(att)) = (with_att, k.attitude) {
            write!(out, ",{},{}", att.roll, att.pitch).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a trajectory CSV. The sampling period is taken as `t_N / N` and the
/// grid is then checked knot by knot.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text).map_err(|reason| Error::Parse {
        path: path.to_path_buf(),
        reason,
    })
}

fn parse_trajectory(text: &str) -> std::result::Result<Trajectory, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let header = header.trim();
    let with_att = if header == TRAJECTORY_HEADER {
        false
    } else if header == format!("{TRAJECTORY_HEADER},{ATTITUDE_COLUMNS}") {
        true
    } else {
        return Err(format!("unexpected header {header:?}"));
    };
    let width = if with_att { 12 } else { 10 };

    let mut knots = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != width {
            return Err(format!(
                "line {}: expected {width} columns, found {}",
                i + 1,
                fields.len()
            ));
        }
        let mut vals = [0.0; 12];
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| format!("line {}: cannot parse {f:?}", i + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite value {f:?}", i + 1));
            }
            vals[c] = v;
        }
        knots.push(TrajectoryKnot {
            t: vals[0],
            position: Vec3::new(vals[1], vals[2], vals[3]),
            velocity: Vec3::new(vals[4], vals[5], vals[6]),
            acceleration: Vec3::new(vals[7], vals[8], vals[9]),
            attitude: with_att.then(|| Attitude::tilt(vals[10], vals[11])),
        });
    }
    if knots.len() < 2 {
        return Err(format!("need at least 2 knots, found {}", knots.len()));
    }
    let n = knots.len() - 1;
    let ts = knots[n].t / n as f64;
    if knots[0].t != 0.0 {
        return Err(format!("first knot must be at t = 0, found {}", knots[0].t));
    }
    Trajectory::new(knots, ts).map_err(|e| e.to_string())
}
