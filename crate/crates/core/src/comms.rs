//! Half-wave dipole gains, the quadratic-form gain surrogate and hop SNRs.
//!
//! Both UAVs carry a half-wave dipole aligned with their body z-axis; the base
//! station tracks the relay with a beam of constant gain. Link budgets are kept
//! lumped (`k = directivities^2 * P / sigma^2`) so an SNR is always
//! `k * gain_factor / distance^2` with a dimensionless gain factor in [0, 1].

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_from_dipole_axis, rotation_world_to_body, unit_direction, Attitude, Vec3};

/// Directivity of a half-wave dipole.
pub const DIPOLE_DIRECTIVITY: f64 = 1.64;

/// Below this `sin(theta)` the dipole gain takes its axial limit 0.
const AXIAL_SIN_EPS: f64 = 1e-9;

/// Lumped link budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// `D_B^2 D^2 P / sigma_0^2` for the relay -> base station hop.
    pub k_relay_bs: f64,
    /// `D^4 P / sigma_1^2` for the UAV -> relay hop.
    pub k_uav_uav: f64,
    pub dipole_directivity: f64,
}

impl LinkBudget {
    pub fn new(k_relay_bs: f64, k_uav_uav: f64, dipole_directivity: f64) -> Result<Self> {
        for (name, v) in [
            ("k_relay_bs", k_relay_bs),
            ("k_uav_uav", k_uav_uav),
            ("dipole_directivity", dipole_directivity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(LinkBudget {
            k_relay_bs,
            k_uav_uav,
            dipole_directivity,
        })
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            k_relay_bs: 1e9,
            k_uav_uav: 1e9,
            dipole_directivity: DIPOLE_DIRECTIVITY,
        }
    }
}

/// How antenna gains enter the SNRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// Exact dipole pattern at the given attitudes.
    Exact,
    /// Quadratic-form surrogate `g(att)^T v(d)` per antenna.
    Approx,
    /// Every gain factor is 1.
    PatternAgnostic,
}

/// One time step of a two-hop link evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub t: f64,
    /// SNR of the UAV -> relay hop.
    pub snr_uav: f64,
    /// SNR of the relay -> base station hop.
    pub snr_bs: f64,
    pub rate_uav: f64,
    pub rate_bs: f64,
    pub rate_end_to_end: f64,
}

impl LinkSample {
    pub fn from_snrs(t: f64, snr_uav: f64, snr_bs: f64) -> Self {
        let rate_uav = (1.0 + snr_uav).log2();
        let rate_bs = (1.0 + snr_bs).log2();
        LinkSample {
            t,
            snr_uav,
            snr_bs,
            rate_uav,
            rate_bs,
            rate_end_to_end: rate_uav.min(rate_bs),
        }
    }
}

/// Amplitude gain `D cos(pi/2 cos(theta)) / sin(theta)` of a half-wave dipole,
/// with `theta` measured from the dipole axis.
pub fn dipole_gain(theta_axis: f64, directivity: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta_axis) {
        return Err(Error::domain(format!(
            "dipole angle {theta_axis} outside [0, pi]"
        )));
    }
    let s = theta_axis.sin();
    if s < AXIAL_SIN_EPS {
        return Ok(0.0);
    }
    Ok(directivity * (FRAC_PI_2 * theta_axis.cos()).cos() / s)
}

/// Attitude half of the quadratic gain surrogate.
///
/// `g^T v(d)` equals `1 - (z_B . d)^2` for the body z-axis of the zero-yaw
/// Z-X-Y attitude, i.e. the squared norm of `d` projected on the body x-y
/// plane.
pub fn gain_attitude_vector(att: Attitude) -> [f64; 7] {
    let (sp, cp) = att.pitch.sin_cos();
    let (sr, cr) = att.roll.sin_cos();
    [
        1.0,
        -sp * sp,
        -cp * cp * sr * sr,
        -cr * cr * cp * cp,
        2.0 * cp * sp * sr,
        -2.0 * cp * cr * sp,
        2.0 * cp * cp * cr * sr,
    ]
}

/// Direction half of the quadratic gain surrogate: `[1, d1^2, d2^2, d3^2,
/// d1 d2, d1 d3, d2 d3]`.
pub fn direction_quadratic_vector(d: Vec3) -> Result<[f64; 7]> {
    if !((d.norm() - 1.0).abs() <= 1e-9) {
        return Err(Error::domain(format!("direction {d:?} is not a unit vector")));
    }
    Ok(direction_terms(d))
}

#[inline]
fn direction_terms(d: Vec3) -> [f64; 7] {
    [1.0, d.x * d.x, d.y * d.y, d.z * d.z, d.x * d.y, d.x * d.z, d.y * d.z]
}

/// `clamp(g^T v, 0, 1)`: the surrogate power gain normalized by `D^2`.
#[inline]
pub(crate) fn approx_gain_factor(g: &[f64; 7], d: Vec3) -> f64 {
    let v = direction_terms(d);
    let dot: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
    dot.clamp(0.0, 1.0)
}

/// Surrogate power gain `D^2 clamp(g(att)^T v(d), 0, 1)`.
pub fn approx_power_gain(att: Attitude, d: Vec3, directivity: f64) -> Result<f64> {
    direction_quadratic_vector(d)?;
    Ok(directivity * directivity * approx_gain_factor(&gain_attitude_vector(att), d))
}

/// Exact power gain `G(theta)^2` seen along `world_link` by a dipole on a
/// vehicle at attitude `att`.
pub fn exact_power_gain(att: Attitude, world_link: Vec3, directivity: f64) -> Result<f64> {
    let body = rotation_world_to_body(att).apply(world_link);
    let theta = angle_from_dipole_axis(body)?;
    let g = dipole_gain(theta, directivity)?;
    Ok(g * g)
}

/// SNRs `(xi_uav, xi_bs)` of the UAV -> relay and relay -> BS hops.
///
/// `p1`/`att1` belong to the relay, `p2`/`att2` to the transmitting UAV and
/// `p0` to the base station.
pub fn link_snrs(
    p1: Vec3,
    att1: Attitude,
    p2: Vec3,
    att2: Attitude,
    p0: Vec3,
    budget: &LinkBudget,
    model: GainModel,
) -> Result<(f64, f64)> {
    let to_peer = unit_direction(p1, p2)
        .map_err(|_| Error::Coincident(format!("relay and UAV both at {p1:?}")))?;
    let to_bs = unit_direction(p1, p0)
        .map_err(|_| Error::Coincident(format!("relay and base station both at {p1:?}")))?;
    let r21_sq = (p2 - p1).norm_squared();
    let r10_sq = (p1 - p0).norm_squared();

    let (gain_21, gain_10) = match model {
        GainModel::PatternAgnostic => (1.0, 1.0),
        GainModel::Approx => {
            let g1 = gain_attitude_vector(att1);
            let g2 = gain_attitude_vector(att2);
            (
                approx_gain_factor(&g1, to_peer) * approx_gain_factor(&g2, to_peer),
                approx_gain_factor(&g1, to_bs),
            )
        }
        GainModel::Exact => {
            let d = budget.dipole_directivity;
            let norm = d * d;
            let relay_rx = exact_power_gain(att1, to_peer, d)? / norm;
            let peer_tx = exact_power_gain(att2, -to_peer, d)? / norm;
            let relay_tx = exact_power_gain(att1, to_bs, d)? / norm;
            (relay_rx * peer_tx, relay_tx)
        }
    };
    Ok((
        budget.k_uav_uav * gain_21 / r21_sq,
        budget.k_relay_bs * gain_10 / r10_sq,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_world_to_body;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    const D: f64 = DIPOLE_DIRECTIVITY;

    #[test]
    fn dipole_gain_examples() {
        assert_abs_diff_eq!(dipole_gain(FRAC_PI_2, D).unwrap(), 1.64, epsilon = 1e-12);
        assert_eq!(dipole_gain(0.0, D).unwrap(), 0.0);
        assert_eq!(dipole_gain(PI, D).unwrap(), 0.0);
        // cos(1.11072) = 0.44404, / sin(pi/4), * 1.64
        assert_abs_diff_eq!(dipole_gain(FRAC_PI_4, D).unwrap(), 1.0298, epsilon = 1e-3);
        assert!(dipole_gain(-0.1, D).is_err());
        assert!(dipole_gain(3.2, D).is_err());
    }

    fn assert_vec7(got: [f64; 7], want: [f64; 7]) {
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_attitude_vector_examples() {
        assert_vec7(gain_attitude_vector(Attitude::HOVER), [1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert_vec7(
            gain_attitude_vector(Attitude::tilt(0.0, FRAC_PI_2)),
            [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        assert_vec7(
            gain_attitude_vector(Attitude::tilt(FRAC_PI_4, 0.0)),
            [1.0, 0.0, -0.5, -0.5, 0.0, 0.0, 1.0],
        );
    }

    #[test]
    fn direction_vector_examples() {
        assert_vec7(direction_quadratic_vector(Vec3::E1).unwrap(), [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_vec7(direction_quadratic_vector(Vec3::E3).unwrap(), [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let s = 1.0 / 3f64.sqrt();
        let third = 1.0 / 3.0;
        assert_vec7(
            direction_quadratic_vector(Vec3::new(s, s, s)).unwrap(),
            [1.0, third, third, third, third, third, third],
        );
        assert!(direction_quadratic_vector(Vec3::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn approx_power_gain_examples() {
        assert_abs_diff_eq!(approx_power_gain(Attitude::HOVER, Vec3::E1, D).unwrap(), 2.6896, epsilon = 1e-12);
        assert_eq!(approx_power_gain(Attitude::HOVER, Vec3::E3, D).unwrap(), 0.0);
        assert_abs_diff_eq!(
            approx_power_gain(Attitude::tilt(0.0, FRAC_PI_4), Vec3::E1, D).unwrap(),
            1.3448,
            epsilon = 1e-9
        );
    }

    #[test]
    fn exact_power_gain_examples() {
        assert_abs_diff_eq!(exact_power_gain(Attitude::HOVER, Vec3::E1, D).unwrap(), 2.6896, epsilon = 1e-9);
        assert_eq!(exact_power_gain(Attitude::HOVER, Vec3::E3, D).unwrap(), 0.0);
        assert_abs_diff_eq!(
            exact_power_gain(Attitude::tilt(0.0, FRAC_PI_2), Vec3::E1, D).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        assert!(exact_power_gain(Attitude::HOVER, Vec3::ZERO, D).is_err());
    }

    #[test]
    fn link_snr_examples() {
        let budget = LinkBudget::default();
        let relay = Vec3::new(0.0, 3.0, 1.5);
        let bs = Vec3::new(1.0, 3.0, 1.5);
        let peer = Vec3::new(4.0, 3.0, 1.5);
        for model in [GainModel::Exact, GainModel::Approx, GainModel::PatternAgnostic] {
            let (_, xi_bs) = link_snrs(relay, Attitude::HOVER, peer, Attitude::HOVER, bs, &budget, model).unwrap();
            assert_abs_diff_eq!(xi_bs, 1e9, epsilon = 1e-3);
        }

        let (a, b) = link_snrs(
            Vec3::ZERO,
            Attitude::tilt(0.3, -0.2),
            Vec3::new(0.0, 10.0, 0.0),
            Attitude::tilt(0.1, 0.1),
            Vec3::new(0.0, 0.0, 10.0),
            &budget,
            GainModel::PatternAgnostic,
        )
        .unwrap();
        assert_abs_diff_eq!(a, 1e7, epsilon = 1e-6);
        assert_abs_diff_eq!(b, 1e7, epsilon = 1e-6);

        let (xi_uav, _) = link_snrs(
            Vec3::new(2.0, 3.0, 1.5),
            Attitude::HOVER,
            Vec3::new(2.0, 3.0, 4.0),
            Attitude::HOVER,
            bs,
            &budget,
            GainModel::Exact,
        )
        .unwrap();
        assert_eq!(xi_uav, 0.0);

        assert!(matches!(
            link_snrs(bs, Attitude::HOVER, peer, Attitude::HOVER, bs, &budget, GainModel::Exact),
            Err(Error::Coincident(_))
        ));
    }

    fn attitude() -> impl Strategy<Value = Attitude> {
        (-1.4..1.4f64, -1.4..1.4f64).prop_map(|(r, p)| Attitude::tilt(r, p))
    }

    fn unit() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-4)
            .prop_map(|(x, y, z)| {
                let v = Vec3::new(x, y, z);
                v.scale(1.0 / v.norm())
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn dipole_gain_is_even(theta in 0.0..PI) {
            let a = dipole_gain(theta, D).unwrap();
            let b = dipole_gain(PI - theta, D).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn surrogate_is_horizontal_projection(att in attitude(), d in unit()) {
            let g = gain_attitude_vector(att);
            let v = direction_quadratic_vector(d).unwrap();
            let gv: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            let body = rotation_world_to_body(att).apply(d);
            let horizontal = body.x * body.x + body.y * body.y;
            prop_assert!((gv - horizontal).abs() <= 1e-10);
        }

        #[test]
        fn snrs_are_finite_and_non_negative(
            att1 in attitude(), att2 in attitude(),
            p1 in (-5.0..5.0f64, -5.0..5.0f64, 0.5..5.0f64),
            p2 in (-5.0..5.0f64, -5.0..5.0f64, 0.5..5.0f64),
        ) {
            let p1 = Vec3::new(p1.0, p1.1, p1.2);
            let p2 = Vec3::new(p2.0, p2.1, p2.2);
            let p0 = Vec3::new(1.0, 3.0, 0.2);
            prop_assume!((p1 - p2).norm() > 1e-3);
            for model in [GainModel::Exact, GainModel::Approx, GainModel::PatternAgnostic] {
                let (a, b) = link_snrs(p1, att1, p2, att2, p0, &LinkBudget::default(), model).unwrap();
                prop_assert!(a.is_finite() && a >= 0.0);
                prop_assert!(b.is_finite() && b >= 0.0);
                let s = LinkSample::from_snrs(0.0, a, b);
                prop_assert!(s.rate_uav >= 0.0 && s.rate_bs >= 0.0);
                prop_assert_eq!(s.rate_end_to_end, s.rate_uav.min(s.rate_bs));
            }
        }

        #[test]
        fn hover_surrogate_scales_agnostic_by_horizontal_fraction(
            p1 in (-5.0..5.0f64, -5.0..5.0f64, 0.5..5.0f64),
        ) {
            let p1 = Vec3::new(p1.0, p1.1, p1.2);
            let p0 = Vec3::new(1.0, 3.0, 1.5);
            let p2 = Vec3::new(4.0, 3.0, 1.5);
            prop_assume!((p1 - p0).norm() > 1e-3 && (p1 - p2).norm() > 1e-3);
            let b = LinkBudget::default();
            let (_, approx) = link_snrs(p1, Attitude::HOVER, p2, Attitude::HOVER, p0, &b, GainModel::Approx).unwrap();
            let (_, agnostic) = link_snrs(p1, Attitude::HOVER, p2, Attitude::HOVER, p0, &b, GainModel::PatternAgnostic).unwrap();
            let d3 = unit_direction(p1, p0).unwrap().z;
            prop_assert!((approx - agnostic * (1.0 - d3 * d3)).abs() <= 1e-9 * agnostic);
        }
    }

    #[test]
    fn surrogate_tracks_exact_pattern() {
        let n = 10_000;
        let worst = (0..=n)
            .map(|i| {
                let theta = PI * i as f64 / n as f64;
                let g = dipole_gain(theta, D).unwrap();
                (g * g / (D * D) - theta.sin().powi(2)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 0.12, "worst deviation {worst}");
    }
}
