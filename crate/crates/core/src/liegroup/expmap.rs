//! Exponential and logarithm maps.
//!
//! Rotation groups use closed forms (planar rotation, Rodrigues). The GL(2)
//! groups use scaling-and-squaring with a truncated Taylor series for `exp`
//! and inverse scaling-and-squaring (Denman–Beavers square roots followed by
//! a Mercator series) for `log`.

use std::f64::consts::PI;

use super::group::{rotation_2d, so3_hat, so3_vee, AlgebraElement, GroupElement, GroupKind};
use super::matrix::{CMat, Mat};
use crate::error::{Error, Result};

/// Inputs with a larger Frobenius norm are rejected by [`mat_exp`].
pub const EXP_NORM_LIMIT: f64 = 50.0;
/// Rotations whose angle is this close to π have no principal logarithm.
pub const CUT_LOCUS_TOL: f64 = 1e-6;

const TAYLOR_TERMS: usize = 18;
const EXTRA_SQUARINGS: i32 = 4;
const LOG_SERIES_RADIUS: f64 = 0.25;

pub fn mat_exp(a: &AlgebraElement) -> Result<GroupElement> {
    let norm = a.norm();
    if !norm.is_finite() || norm > EXP_NORM_LIMIT {
        return Err(Error::ExpRange {
            norm,
            limit: EXP_NORM_LIMIT,
        });
    }
    let spec = a.spec();
    let mat = match spec.kind {
        GroupKind::SO2 => CMat::real(rotation_2d(a.coeffs()[0])),
        GroupKind::SO3 => {
            let c = a.coeffs();
            CMat::real(rodrigues([c[0], c[1], c[2]]))
        }
        GroupKind::GL2RPlus | GroupKind::GL2C => expm_scaling_squaring(a.matrix()),
    };
    Ok(GroupElement::new_unchecked(spec, mat))
}

/// exp of the skew matrix of ω.
pub fn rodrigues(w: [f64; 3]) -> Mat {
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let theta = theta2.sqrt();
    let k = so3_hat(w);
    // sin θ / θ and (1 − cos θ) / θ², with series near zero
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Mat::identity(3) + k.scale(a) + (k * k).scale(b)
}

fn expm_scaling_squaring(a: &CMat) -> CMat {
    let n = a.n();
    let norm = a.frobenius();
    let squarings = if norm > 0.0 {
        (norm.log2().ceil() as i32).max(0) + EXTRA_SQUARINGS
    } else {
        EXTRA_SQUARINGS
    };
    let b = a.scale(0.5f64.powi(squarings));
    let mut term = CMat::identity(n);
    let mut sum = CMat::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = (term * b).scale(1.0 / k as f64);
        sum = sum + term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

pub fn mat_log(g: &GroupElement) -> Result<AlgebraElement> {
    let spec = g.spec();
    match spec.kind {
        GroupKind::SO2 => {
            let r = g.real();
            let theta = r.get(1, 0).atan2(r.get(0, 0));
            if PI - theta.abs() < CUT_LOCUS_TOL {
                return Err(Error::CutLocus {
                    angle: theta.abs(),
                    tol: CUT_LOCUS_TOL,
                });
            }
            AlgebraElement::from_coeffs(spec, &[theta])
        }
        GroupKind::SO3 => {
            let w = so3_log(g.real())?;
            AlgebraElement::from_coeffs(spec, &w)
        }
        GroupKind::GL2RPlus | GroupKind::GL2C => {
            check_log_domain(g.matrix())?;
            let l = logm_inverse_scaling_squaring(g.matrix());
            AlgebraElement::from_matrix(spec, &l)
        }
    }
}

/// Rotation angle of a 3×3 rotation matrix, in [0, π].
pub fn so3_angle(r: &Mat) -> f64 {
    let w = so3_vee(r);
    let s = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

fn so3_log(r: &Mat) -> Result<[f64; 3]> {
    let v = so3_vee(r);
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if PI - theta < CUT_LOCUS_TOL {
        return Err(Error::CutLocus {
            angle: theta,
            tol: CUT_LOCUS_TOL,
        });
    }
    if theta < 1e-4 {
        // θ / sin θ ≈ 1 + θ²/6
        let f = 1.0 + theta * theta / 6.0;
        return Ok([v[0] * f, v[1] * f, v[2] * f]);
    }
    if theta < 0.5 * PI {
        let f = theta / s;
        return Ok([v[0] * f, v[1] * f, v[2] * f]);
    }
    // Near π the skew part is small; recover the axis from the symmetric
    // part (R + Rᵀ)/2 − cos θ·I = (1 − cos θ)·n nᵀ instead.
    let one_minus_c = 1.0 - c;
    let mut b = [[0.0; 3]; 3];
    for (i, row) in b.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let sym = 0.5 * (r.get(i, j) + r.get(j, i));
            *e = (sym - if i == j { c } else { 0.0 }) / one_minus_c;
        }
    }
    let k = (0..3)
        .max_by(|&x, &y| b[x][x].total_cmp(&b[y][y]))
        .expect("three diagonal entries");
    let col = [b[0][k], b[1][k], b[2][k]];
    let len = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
    let mut n = [col[0] / len, col[1] / len, col[2] / len];
    let dot = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
    if dot < 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    Ok([n[0] * theta, n[1] * theta, n[2] * theta])
}

fn check_log_domain(m: &CMat) -> Result<()> {
    for lambda in m.eigenvalues_2x2() {
        let scale = lambda.norm().max(1.0);
        if lambda.re < 0.0 && lambda.im.abs() <= 1e-12 * scale {
            return Err(Error::LogDomain {
                re: lambda.re,
                im: lambda.im,
            });
        }
        if lambda.norm() == 0.0 {
            return Err(Error::Singular { sigma_min: 0.0 });
        }
    }
    Ok(())
}

fn logm_inverse_scaling_squaring(g: &CMat) -> CMat {
    let n = g.n();
    let id = CMat::identity(n);
    let mut x = *g;
    let mut roots = 0;
    while (x - id).frobenius() >= LOG_SERIES_RADIUS && roots < 64 {
        x = sqrtm_denman_beavers(&x);
        roots += 1;
    }
    // log(I + E) = E − E²/2 + E³/3 − …
    let e = x - id;
    let mut power = e;
    let mut sum = e;
    for k in 2..200 {
        power = power * e;
        let term = power.scale(if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64);
        sum = sum + term;
        if term.frobenius() < 1e-18 {
            break;
        }
    }
    sum.scale(2f64.powi(roots))
}

/// Principal square root by the Denman–Beavers iteration.
pub(crate) fn sqrtm_denman_beavers(a: &CMat) -> CMat {
    let mut y = *a;
    let mut z = CMat::identity(a.n());
    for _ in 0..100 {
        let y_inv = y.inverse().expect("iterates stay invertible");
        let z_inv = z.inverse().expect("iterates stay invertible");
        let y_next = (y + z_inv).scale(0.5);
        let z_next = (z + y_inv).scale(0.5);
        let delta = (y_next - y).frobenius();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.frobenius() {
            break;
        }
    }
    y
}
