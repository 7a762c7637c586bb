//! Numerical kernels shared across the crate.

pub mod gauss;
pub mod normal;
pub mod roots;
