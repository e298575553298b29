use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use super::expmap::mat_exp;
use super::group::{rotation_2d, AlgebraElement, GroupElement, GroupKind, GroupSpec};
use super::matrix::{CMat, Mat};

/// Draws from the prior over the hypothesis group.
///
/// Compact groups are sampled uniformly (Haar): SO2 through θ ~ U[−π, π),
/// SO3 through a normalized Gaussian quaternion. The GL(2) groups push a
/// uniform U[−π/2, π/2] law on every real algebra coefficient through `exp`.
pub fn sample_prior<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> GroupElement {
    match spec.kind {
        GroupKind::SO2 => {
            let theta = rng.gen_range(-PI..PI);
            GroupElement::new_unchecked(spec, CMat::real(rotation_2d(theta)))
        }
        GroupKind::SO3 => {
            let q = loop {
                let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break q.map(|v| v / norm);
                }
            };
            GroupElement::new_unchecked(spec, CMat::real(quaternion_to_matrix(q)))
        }
        GroupKind::GL2RPlus | GroupKind::GL2C => {
            let coeffs: Vec<f64> = (0..spec.algebra_dim)
                .map(|_| rng.gen_range(-FRAC_PI_2..=FRAC_PI_2))
                .collect();
            let a = AlgebraElement::from_coeffs(spec, &coeffs).expect("coefficient count matches");
            mat_exp(&a).expect("prior coefficients are bounded")
        }
    }
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quaternion_to_matrix(q: [f64; 4]) -> Mat {
    let [w, x, y, z] = q;
    Mat::from_row_major(
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    )
}
