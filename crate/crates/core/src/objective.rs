//! Smooth-max cost and exact throughput evaluation.

use serde::{Deserialize, Serialize};

use crate::comms::{link_snrs, GainModel, LinkBudget, LinkSample};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{attitude_from_acceleration, Attitude, Vec3, DEFAULT_GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Exponent of the p-norm smooth max.
    pub p_norm: u32,
    /// Lower bound applied to each rate before taking its reciprocal, so a
    /// dead link costs `1 / rate_floor` instead of infinity.
    pub rate_floor: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            p_norm: 10,
            rate_floor: 1e-9,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if self.p_norm < 1 {
            return Err(Error::invalid("p_norm", "must be >= 1"));
        }
        if !(self.rate_floor > 0.0 && self.rate_floor.is_finite()) {
            return Err(Error::invalid(
                "rate_floor",
                format!("must be positive, got {}", self.rate_floor),
            ));
        }
        Ok(())
    }
}

/// The fixed parts of a relay scenario needed to evaluate links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSetup {
    pub bs: Vec3,
    pub budget: LinkBudget,
    pub gravity: f64,
}

impl LinkSetup {
    pub fn new(bs: Vec3, budget: LinkBudget) -> Self {
        LinkSetup {
            bs,
            budget,
            gravity: DEFAULT_GRAVITY,
        }
    }
}

/// `(sum_j e_j^p)^(1/p)`, evaluated with the largest element factored out.
pub fn smooth_max(values: &[f64], p: u32) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("smooth max of an empty list"));
    }
    if p < 1 {
        return Err(Error::domain("smooth max exponent must be >= 1"));
    }
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::domain(format!("smooth max entry {bad} is negative")));
    }
    Ok(smooth_max_unchecked(values, p))
}

#[inline]
pub(crate) fn smooth_max_unchecked(values: &[f64], p: u32) -> f64 {
    let m = values.iter().copied().fold(0.0, f64::max);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let sum: f64 = values.iter().map(|v| (v / m).powi(p as i32)).sum();
    m * sum.powf(1.0 / p as f64)
}

/// Smooth max of the two reciprocal hop rates at one time step.
pub fn step_cost(snr_bs: f64, snr_uav: f64, params: &CostParams) -> f64 {
    let inv = |snr: f64| 1.0 / (1.0 + snr).log2().max(params.rate_floor);
    smooth_max_unchecked(&[inv(snr_bs), inv(snr_uav)], params.p_norm)
}

/// Attitudes of every knot: the stored channel when complete, otherwise
/// reconstructed from the acceleration channel.
pub fn resolve_attitudes(traj: &Trajectory, gravity: f64) -> Result<Vec<Attitude>> {
    if traj.has_attitudes() {
        return Ok(traj.knots().iter().map(|k| k.attitude.unwrap()).collect());
    }
    traj.knots()
        .iter()
        .enumerate()
        .map(|(k, knot)| {
            attitude_from_acceleration(knot.acceleration, gravity)
                .map_err(|e| Error::domain(format!("knot {k}: {e}")))
        })
        .collect()
}

fn check_grids(relay: &Trajectory, peer: &Trajectory) -> Result<()> {
    if relay.same_grid(peer) {
        return Ok(());
    }
    let detail = if relay.intervals() == peer.intervals() {
        format!(
            " (sampling periods {} vs {})",
            relay.sampling_period(),
            peer.sampling_period()
        )
    } else {
        String::new()
    };
    Err(Error::GridMismatch {
        relay: relay.intervals(),
        peer: peer.intervals(),
        detail,
    })
}

/// Summed step cost over all knots.
///
/// Under [`GainModel::Approx`] the relay is evaluated at hover attitude; under
/// [`GainModel::Exact`] both vehicles use their resolved attitudes.
pub fn trajectory_cost(
    relay: &Trajectory,
    peer: &Trajectory,
    setup: &LinkSetup,
    model: GainModel,
    params: &CostParams,
) -> Result<f64> {
    check_grids(relay, peer)?;
    let peer_att = resolve_attitudes(peer, setup.gravity)?;
    let relay_att = match model {
        GainModel::Exact => resolve_attitudes(relay, setup.gravity)?,
        _ => vec![Attitude::HOVER; relay.knots().len()],
    };
    let mut total = 0.0;
    for (k, (r, p)) in relay.knots().iter().zip(peer.knots()).enumerate() {
        let (xi_uav, xi_bs) = link_snrs(
            r.position,
            relay_att[k],
            p.position,
            peer_att[k],
            setup.bs,
            &setup.budget,
            model,
        )
        .map_err(|e| Error::domain(format!("step {k}: {e}")))?;
        total += step_cost(xi_bs, xi_uav, params);
    }
    Ok(total)
}

/// Exact-model link evaluation of a relay trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    /// Sum over steps of the end-to-end rate.
    pub total_bits: f64,
    /// Smallest end-to-end rate over all steps.
    pub min_rate: f64,
    pub trace: Vec<LinkSample>,
    pub relay_attitudes: Vec<Attitude>,
    pub peer_attitudes: Vec<Attitude>,
}

/// Evaluates both hops under the exact dipole model at the realized attitudes.
pub fn exact_throughput(relay: &Trajectory, peer: &Trajectory, setup: &LinkSetup) -> Result<Throughput> {
    check_grids(relay, peer)?;
    let relay_attitudes = resolve_attitudes(relay, setup.gravity)?;
    let peer_attitudes = resolve_attitudes(peer, setup.gravity)?;
    let mut trace = Vec::with_capacity(relay.knots().len());
    for (k, (r, p)) in relay.knots().iter().zip(peer.knots()).enumerate() {
        let (xi_uav, xi_bs) = link_snrs(
            r.position,
            relay_attitudes[k],
            p.position,
            peer_attitudes[k],
            setup.bs,
            &setup.budget,
            GainModel::Exact,
        )
        .map_err(|e| Error::domain(format!("step {k}: {e}")))?;
        trace.push(LinkSample::from_snrs(r.t, xi_uav, xi_bs));
    }
    let total_bits = trace.iter().map(|s| s.rate_end_to_end).sum();
    let min_rate = trace
        .iter()
        .map(|s| s.rate_end_to_end)
        .fold(f64::INFINITY, f64::min);
    Ok(Throughput {
        total_bits,
        min_rate,
        trace,
        relay_attitudes,
        peer_attitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn smooth_max_examples() {
        assert_eq!(smooth_max(&[2.5], 10).unwrap(), 2.5);
        // 4 (1 + 0.75^10)^0.1
        assert_abs_diff_eq!(smooth_max(&[3.0, 4.0], 10).unwrap(), 4.02195, epsilon = 1e-4);
        for p in [1, 2, 7, 10, 30] {
            assert_abs_diff_eq!(
                smooth_max(&[1.7, 1.7], p).unwrap(),
                1.7 * 2f64.powf(1.0 / p as f64),
                epsilon = 1e-12
            );
        }
        assert_eq!(smooth_max(&[0.0, 0.0], 10).unwrap(), 0.0);
        assert!(smooth_max(&[], 10).is_err());
        assert!(smooth_max(&[1.0, -1.0], 10).is_err());
        assert!(smooth_max(&[1.0], 0).is_err());
    }

    #[test]
    fn smooth_max_survives_huge_entries() {
        let v = smooth_max(&[1e300, 1e300], 10).unwrap();
        assert!(v.is_finite());
        assert_abs_diff_eq!(v / 1e300, 2f64.powf(0.1), epsilon = 1e-12);
    }

    #[test]
    fn step_cost_examples() {
        let params = CostParams::default();
        assert_abs_diff_eq!(step_cost(3.0, 3.0, &params), 0.5 * 2f64.powf(0.1), epsilon = 1e-12);
        let p = CostParams {
            p_norm: 200,
            ..params
        };
        assert_abs_diff_eq!(step_cost(1.0, 1e300, &p), 1.0, epsilon = 1e-12);
        let dead = step_cost(0.0, 10.0, &params);
        assert!(dead.is_finite());
        assert!(dead >= 1.0 / params.rate_floor);
    }

    #[test]
    fn cost_params_validation() {
        assert!(CostParams::default().validate().is_ok());
        assert!(CostParams { p_norm: 0, rate_floor: 1e-9 }.validate().is_err());
        assert!(CostParams { p_norm: 10, rate_floor: 0.0 }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn sandwich_bound(values in proptest::collection::vec(0.0..100.0f64, 1..20), p in 1u32..40) {
            let m = values.iter().copied().fold(0.0, f64::max);
            let s = smooth_max(&values, p).unwrap();
            let n = values.len() as f64;
            prop_assert!(s >= m * (1.0 - 1e-12));
            prop_assert!(s <= m * n.powf(1.0 / p as f64) * (1.0 + 1e-12));
        }

        #[test]
        fn monotone_in_p(values in proptest::collection::vec(0.0..100.0f64, 1..20), p in 1u32..40, dp in 1u32..10) {
            let lo = smooth_max(&values, p).unwrap();
            let hi = smooth_max(&values, p + dp).unwrap();
            prop_assert!(lo >= hi * (1.0 - 1e-12));
        }

        #[test]
        fn step_cost_decreases_in_each_snr(a in 1.0..1e9f64, ratio in 0.1..10.0f64, f in 1.01..10.0f64) {
            // Both reciprocal rates must be within reach of each other for the
            // weaker term to register in f64 at p = 10.
            let b = a * ratio;
            let params = CostParams::default();
            let base = step_cost(a, b, &params);
            prop_assert!(step_cost(a * f, b, &params) < base);
            prop_assert!(step_cost(a, b * f, &params) < base);
        }
    }
}
