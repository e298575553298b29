use nalgebra::DMatrix;

use super::group::{GroupElement, GroupSpec};
use super::matrix::{CMat, Mat};
use crate::error::{Error, Result};

pub const SINGULAR_TOL: f64 = 1e-10;

/// Nearest special-orthogonal matrix to a real invertible element (the
/// orthogonal polar factor, with the reflection case resolved by flipping the
/// singular direction of the smallest singular value).
pub fn polar_rotation(g: &GroupElement) -> Result<GroupElement> {
    if g.spec().is_complex() && !g.matrix().is_real() {
        return Err(Error::contract("polar_rotation needs a real matrix"));
    }
    let m = g.real();
    let n = m.n();
    let dm = DMatrix::from_row_slice(n, n, m.as_slice());
    let svd = dm.svd(true, true);
    let mut u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sigma = svd.singular_values;
    let (k_min, sigma_min) = sigma
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    if sigma_min < SINGULAR_TOL {
        return Err(Error::Singular { sigma_min });
    }
    if (&u * &v_t).determinant() < 0.0 {
        u.column_mut(k_min).neg_mut();
    }
    let r = &u * &v_t;
    let mut out = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, r[(i, j)]);
        }
    }
    let spec = if n == 2 { GroupSpec::SO2 } else { GroupSpec::SO3 };
    Ok(GroupElement::new_unchecked(spec, CMat::real(out)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{prior::sample_prior, rotation_2d};
    use crate::rng::substream;

    #[test]
    fn rotation_is_fixed() {
        let r = GroupElement::from_real(GroupSpec::SO2, rotation_2d(0.7)).unwrap();
        let p = polar_rotation(&r).unwrap();
        assert!((*p.real() - *r.real()).frobenius() < 1e-14);
    }

    #[test]
    fn spd_gives_identity() {
        let g = GroupElement::from_real(GroupSpec::GL2R_PLUS, Mat::diag(&[2.0, 0.5])).unwrap();
        let p = polar_rotation(&g).unwrap();
        assert!((*p.real() - Mat::identity(2)).frobenius() < 1e-14);
    }

    #[test]
    fn recovers_constructed_rotation() {
        let mut rng = substream(3, 0);
        for _ in 0..200 {
            let r = sample_prior(GroupSpec::SO3, &mut rng);
            let m = *r.real() * Mat::diag(&[1.3, 0.7, 1.1]);
            let g = GroupElement::new_unchecked(GroupSpec::SO3, CMat::real(m));
            let p = polar_rotation(&g).unwrap();
            assert!((*p.real() - *r.real()).frobenius() < 1e-8);
        }
    }

    #[test]
    fn reflection_is_resolved_to_nearest_rotation() {
        let g = GroupElement::from_real(GroupSpec::GL2C, Mat::diag(&[3.0, -0.5])).unwrap();
        let p = polar_rotation(&g).unwrap();
        assert!((p.real().det() - 1.0).abs() < 1e-12);
        // the small singular direction is flipped, leaving the identity
        assert!((*p.real() - Mat::identity(2)).frobenius() < 1e-12);
    }

    #[test]
    fn singular_input_is_rejected() {
        let g = GroupElement::new_unchecked(GroupSpec::GL2R_PLUS, CMat::real(Mat::diag(&[1.0, 1e-12])));
        assert!(matches!(polar_rotation(&g), Err(Error::Singular { .. })));
    }
}
