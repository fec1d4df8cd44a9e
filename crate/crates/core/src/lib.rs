// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod face;
pub mod geometry;
pub mod kinematics;
pub mod mapping;
pub mod optics;
pub mod scenario;
pub mod servo;
