//! Pricing and verification library for an Ornstein-Uhlenbeck type
//! stochastic-volatility model driven by a pure-jump subordinator.
//!
//! The crate prices European calls by Monte Carlo with a conditional
//! closed-form estimator, evaluates a term-by-term decomposition of the
//! price (closed-form value + principal jump impact + five interaction
//! terms), and verifies the decomposition identity against the reference
//! price on shared random numbers.
//!
//! Modules:
//! * [`levy`] — jump measures (inverse-Gaussian and gamma variants),
//!   moments, admissibility, quadrature against the measure;
//! * [`bs`] — closed-form call pricing, partials, and the jump operators
//!   acting on the pricing function;
//! * [`kernel`] — fast fixed-rule evaluation of the jump operators for
//!   the estimator hot loop;
//! * [`model`] — full parameterization and exact variance machinery;
//! * [`path`] — exact jump-path simulation and the reference price;
//! * [`decomp`] — decomposition term estimators and reporting.

pub mod bs;
pub mod decomp;
pub mod kernel;
pub mod levy;
pub mod math;
pub mod model;
pub mod path;

pub use bs::{BsError, BsPoint};
pub use decomp::{decompose, DecompConfig, DecompositionReport, TermEstimate};
pub use levy::{LevyError, LevyMeasureSpec, MeasureVariant, MomentOrder, QuadratureResult};
pub use model::{avg_future_variance, BnsParams, MarketState, ModelError};
pub use path::{
    mc_price, sample_jump_path, state_path_on_grid, terminal_state, JumpPath, PriceEstimate,
    SimConfig, SimError, SmallJumpPolicy,
};
