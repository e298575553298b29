//! Matrix Lie group numerics: exponential and logarithm maps, prior
//! samplers, finite subgroup tables, polar decomposition and angle
//! parameterizations.

mod angles;
mod discrete;
mod expmap;
mod group;
mod matrix;
mod polar;
mod prior;

pub use angles::{euler_to_matrix, matrix_to_euler, mollweide_project, rotation_to_angles, Angles, GIMBAL_TOL};
pub use discrete::{discrete_group, DiscreteGroupTable, SubgroupName, CLOSURE_TOL};
pub use expmap::{mat_exp, mat_log, rodrigues, so3_angle, CUT_LOCUS_TOL, EXP_NORM_LIMIT};
pub use group::{rotation_2d, so3_hat, so3_vee, AlgebraElement, Field, GroupElement, GroupKind, GroupSpec};
pub use matrix::{CMat, Mat};
pub use polar::{polar_rotation, SINGULAR_TOL};
pub use prior::{quaternion_to_matrix, sample_prior};
