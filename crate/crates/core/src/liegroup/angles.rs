//! Angle parameterizations used for plot data: planar angles, intrinsic
//! Z–Y–X Euler angles, and the Mollweide projection.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use super::group::{GroupElement, GroupKind};
use super::matrix::Mat;
use crate::error::{Error, Result};

pub const GIMBAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angles {
    /// SO2 rotation angle in (−π, π].
    Planar(f64),
    /// Intrinsic Z–Y–X angles: R = Rz(yaw)·Ry(pitch)·Rx(roll).
    ///
    /// At gimbal lock roll is set to 0 and the whole in-plane rotation is
    /// reported as yaw.
    Euler {
        yaw: f64,
        pitch: f64,
        roll: f64,
        gimbal_lock: bool,
    },
}

pub fn rotation_to_angles(g: &GroupElement) -> Result<Angles> {
    let r = g.real();
    match g.spec().kind {
        GroupKind::SO2 => {
            let mut theta = r.get(1, 0).atan2(r.get(0, 0));
            if theta <= -PI {
                theta = PI;
            }
            Ok(Angles::Planar(theta))
        }
        GroupKind::SO3 => Ok(matrix_to_euler(r)),
        _ => Err(Error::contract("angles are defined for SO2 and SO3 only")),
    }
}

pub fn matrix_to_euler(r: &Mat) -> Angles {
    let pitch = (-r.get(2, 0)).clamp(-1.0, 1.0).asin();
    if FRAC_PI_2 - pitch.abs() < GIMBAL_TOL {
        let yaw = (-r.get(0, 1)).atan2(r.get(1, 1));
        return Angles::Euler {
            yaw,
            pitch: pitch.signum() * FRAC_PI_2,
            roll: 0.0,
            gimbal_lock: true,
        };
    }
    Angles::Euler {
        yaw: r.get(1, 0).atan2(r.get(0, 0)),
        pitch,
        roll: r.get(2, 1).atan2(r.get(2, 2)),
        gimbal_lock: false,
    }
}

pub fn euler_to_matrix(yaw: f64, pitch: f64, roll: f64) -> Mat {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let rz = Mat::from_row_major(3, &[cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0]);
    let ry = Mat::from_row_major(3, &[cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp]);
    let rx = Mat::from_row_major(3, &[1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr]);
    rz * ry * rx
}

/// Mollweide forward projection on the unit sphere.
///
/// The auxiliary angle θ solves 2θ + sin 2θ = π sin(lat), by safeguarded
/// Newton iteration to 1e−10.
pub fn mollweide_project(lon: f64, lat: f64) -> (f64, f64) {
    let target = PI * lat.sin();
    let theta = if FRAC_PI_2 - lat.abs() < 1e-12 {
        lat.signum() * FRAC_PI_2
    } else {
        let (mut lo, mut hi) = (-FRAC_PI_2, FRAC_PI_2);
        let mut t = lat;
        for _ in 0..200 {
            let f = 2.0 * t + (2.0 * t).sin() - target;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let df = 2.0 + 2.0 * (2.0 * t).cos();
            let mut next = t - f / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() < 1e-10;
            t = next;
            if done {
                break;
            }
        }
        t
    };
    let x = 2.0 * SQRT_2 / PI * lon * theta.cos();
    let y = SQRT_2 * theta.sin();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{prior::sample_prior, rotation_2d, GroupSpec};
    use crate::rng::substream;

    #[test]
    fn identity_has_zero_angles() {
        let g = GroupElement::identity(GroupSpec::SO3);
        match rotation_to_angles(&g).unwrap() {
            Angles::Euler { yaw, pitch, roll, gimbal_lock } => {
                assert_eq!((yaw, pitch, roll, gimbal_lock), (0.0, 0.0, 0.0, false));
            }
            other => panic!("{other:?}"),
        }
        let g = GroupElement::identity(GroupSpec::SO2);
        assert_eq!(rotation_to_angles(&g).unwrap(), Angles::Planar(0.0));
    }

    #[test]
    fn planar_angle_roundtrip() {
        let g = GroupElement::from_real(GroupSpec::SO2, rotation_2d(1.234)).unwrap();
        match rotation_to_angles(&g).unwrap() {
            Angles::Planar(t) => assert!((t - 1.234).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn euler_roundtrip_on_uniform_rotations() {
        let mut rng = substream(5, 0);
        for _ in 0..1000 {
            let g = sample_prior(GroupSpec::SO3, &mut rng);
            let Angles::Euler { yaw, pitch, roll, gimbal_lock } = rotation_to_angles(&g).unwrap() else {
                panic!()
            };
            assert!(!gimbal_lock);
            let r = euler_to_matrix(yaw, pitch, roll);
            assert!((r - *g.real()).frobenius() < 1e-8);
            let Angles::Euler { yaw: y2, pitch: p2, roll: r2, .. } = matrix_to_euler(&r) else { panic!() };
            assert!((y2 - yaw).abs() < 1e-8 && (p2 - pitch).abs() < 1e-8 && (r2 - roll).abs() < 1e-8);
        }
    }

    #[test]
    fn gimbal_lock_is_flagged_and_reconstructs() {
        for pitch in [FRAC_PI_2, -FRAC_PI_2] {
            let r = euler_to_matrix(0.4, pitch, 0.9);
            let Angles::Euler { yaw, pitch: p, roll, gimbal_lock } = matrix_to_euler(&r) else { panic!() };
            assert!(gimbal_lock);
            assert_eq!(roll, 0.0);
            assert!((euler_to_matrix(yaw, p, roll) - r).frobenius() < 1e-9);
        }
    }

    #[test]
    fn mollweide_reference_points() {
        let (x, y) = mollweide_project(0.0, 0.0);
        assert_eq!((x, y), (0.0, 0.0));
        let (x, y) = mollweide_project(0.0, FRAC_PI_2);
        assert!(x.abs() < 1e-12 && (y - SQRT_2).abs() < 1e-12);
        let (x, y) = mollweide_project(PI, 0.0);
        assert!((x - 2.0 * SQRT_2).abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn mollweide_solves_auxiliary_equation() {
        for k in 0..=100 {
            let lat = -FRAC_PI_2 + PI * k as f64 / 100.0;
            let (_, y) = mollweide_project(0.3, lat);
            let theta = (y / SQRT_2).clamp(-1.0, 1.0).asin();
            let residual = 2.0 * theta + (2.0 * theta).sin() - PI * lat.sin();
            assert!(residual.abs() < 1e-9, "lat {lat}: {residual}");
        }
    }

    #[test]
    fn mollweide_is_odd_in_longitude() {
        for (lon, lat) in [(0.3, 0.2), (2.9, -1.1), (1.0, 1.5)] {
            let (u, v) = mollweide_project(lon, lat);
            let (u2, v2) = mollweide_project(-lon, lat);
            assert_eq!((u2, v2), (-u, v));
        }
    }
}
