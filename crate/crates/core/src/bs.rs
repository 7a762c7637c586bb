//! Closed-form call pricing and the jump operators acting on it.
//!
//! Everything is expressed in the log price `x` and the squared
//! volatility. Besides the textbook price and partials, this module
//! carries the shift-difference operators driven by jumps of size `z`:
//! a price shift `x -> x + rho z`, a variance shift `sigma2 -> sigma2 + z`,
//! the compensated single-jump impact, and its integral against the jump
//! measure together with the partial derivatives of that integral.

use crate::levy::{LevyError, LevyMeasureSpec, QuadratureResult};
use crate::math::normal::{norm_cdf, norm_pdf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BsError {
    #[error("invalid evaluation point: {0}")]
    InvalidPoint(String),
    #[error("operation undefined at maturity (tau = 0)")]
    AtMaturity,
    #[error("finite-difference step {step} too large for tau {tau}")]
    StepTooLarge { step: f64, tau: f64 },
    #[error("variance shift makes squared volatility nonpositive: {0}")]
    VarianceShift(f64),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

/// One evaluation point for the pricing function and its operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPoint {
    pub t: f64,
    pub x: f64,
    pub sigma2: f64,
    pub strike: f64,
    pub rate: f64,
    pub maturity: f64,
}

impl BsPoint {
    pub fn new(
        t: f64,
        x: f64,
        sigma2: f64,
        strike: f64,
        rate: f64,
        maturity: f64,
    ) -> Result<Self, BsError> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(BsError::InvalidPoint(format!(
                "squared volatility must be > 0, got {sigma2}"
            )));
        }
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(BsError::InvalidPoint(format!(
                "strike must be > 0, got {strike}"
            )));
        }
        if !(rate >= 0.0) {
            return Err(BsError::InvalidPoint(format!(
                "rate must be >= 0, got {rate}"
            )));
        }
        if !(0.0 <= t && t <= maturity) {
            return Err(BsError::InvalidPoint(format!(
                "need 0 <= t <= maturity, got t = {t}, maturity = {maturity}"
            )));
        }
        if !x.is_finite() {
            return Err(BsError::InvalidPoint(format!("log price must be finite, got {x}")));
        }
        Ok(Self {
            t,
            x,
            sigma2,
            strike,
            rate,
            maturity,
        })
    }

    /// Time to maturity.
    #[inline]
    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }

    #[inline]
    fn with_shift(&self, dx: f64, dvar: f64) -> BsPoint {
        BsPoint {
            x: self.x + dx,
            sigma2: self.sigma2 + dvar,
            ..*self
        }
    }
}

/// `d+` and `d-` for a (possibly shifted) log price and squared volatility.
#[inline]
fn d_pair(p: &BsPoint, x: f64, var: f64) -> (f64, f64, f64) {
    let tau = p.tau();
    let s = (var * tau).sqrt();
    let m = x - p.strike.ln() + p.rate * tau;
    (m / s + 0.5 * s, m / s - 0.5 * s, s)
}

/// Moneyness arguments of the pricing formula, also under a price shift
/// `x -> x + rho z` and under the joint shift that moves the variance by
/// the same jump.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedArgs {
    pub d_plus: f64,
    pub d_minus: f64,
    /// Price shift only.
    pub d_plus_x_shift: f64,
    pub d_minus_x_shift: f64,
    /// Joint price and variance shift.
    pub d_plus_joint: f64,
    pub d_minus_joint: f64,
}

pub fn shifted_args(p: &BsPoint, rho: f64, z: f64) -> ShiftedArgs {
    debug_assert!(p.tau() > 0.0 && z > 0.0);
    let (d_plus, d_minus, s) = d_pair(p, p.x, p.sigma2);
    let shift = rho * z / s;
    let (d_plus_joint, d_minus_joint, _) = d_pair(p, p.x + rho * z, p.sigma2 + z);
    ShiftedArgs {
        d_plus,
        d_minus,
        d_plus_x_shift: d_plus + shift,
        d_minus_x_shift: d_minus + shift,
        d_plus_joint,
        d_minus_joint,
    }
}

/// Call price; the terminal extension `(e^x - K)^+` applies at `tau = 0`.
pub fn price(p: &BsPoint) -> f64 {
    let tau = p.tau();
    if tau == 0.0 {
        return (p.x.exp() - p.strike).max(0.0);
    }
    let (dp, dm, _) = d_pair(p, p.x, p.sigma2);
    p.x.exp() * norm_cdf(dp) - p.strike * (-p.rate * tau).exp() * norm_cdf(dm)
}

/// First and second log-price derivatives, the squared-volatility
/// derivative, and the time derivative recovered from the pricing PDE.
#[derive(Debug, Clone, Copy)]
pub struct Partials {
    pub d_x: f64,
    pub d_xx: f64,
    pub d_sigma2: f64,
    pub d_t: f64,
}

pub fn partials(p: &BsPoint) -> Result<Partials, BsError> {
    let tau = p.tau();
    if tau == 0.0 {
        return Err(BsError::AtMaturity);
    }
    let (dp, _, s) = d_pair(p, p.x, p.sigma2);
    let ex = p.x.exp();
    let phi = norm_pdf(dp);
    let d_x = ex * norm_cdf(dp);
    let d_xx = d_x + ex * phi / s;
    let d_sigma2 = 0.5 * tau.sqrt() / p.sigma2.sqrt() * ex * phi;
    // the pricing operator annihilates the price, which pins d_t
    let eta_minus = p.rate - 0.5 * p.sigma2;
    let d_t = -(0.5 * p.sigma2 * d_xx + eta_minus * d_x - p.rate * price(p));
    Ok(Partials {
        d_x,
        d_xx,
        d_sigma2,
        d_t,
    })
}

/// Residual of the pricing operator with the time derivative replaced by
/// a central finite difference of the given step. Scales as `O(step^2)`.
pub fn pde_residual(p: &BsPoint, dt_step: f64) -> Result<f64, BsError> {
    let tau = p.tau();
    if !(dt_step > 0.0) {
        return Err(BsError::InvalidPoint(format!(
            "step must be > 0, got {dt_step}"
        )));
    }
    if tau <= dt_step {
        return Err(BsError::StepTooLarge {
            step: dt_step,
            tau,
        });
    }
    let up = BsPoint {
        t: p.t + dt_step,
        ..*p
    };
    let down = BsPoint {
        t: p.t - dt_step,
        ..*p
    };
    let fd_t = (price(&up) - price(&down)) / (2.0 * dt_step);
    let pr = partials(p)?;
    let eta_minus = p.rate - 0.5 * p.sigma2;
    Ok(fd_t + 0.5 * p.sigma2 * pr.d_xx + eta_minus * pr.d_x - p.rate * price(p))
}

/// `e^x phi(d+) - K e^{-r tau} phi(d-)`; identically zero in exact
/// arithmetic, so the returned value is pure rounding noise.
pub fn phi_identity_gap(p: &BsPoint) -> f64 {
    debug_assert!(p.tau() > 0.0);
    let tau = p.tau();
    let (dp, dm, _) = d_pair(p, p.x, p.sigma2);
    p.x.exp() * norm_pdf(dp) - p.strike * (-p.rate * tau).exp() * norm_pdf(dm)
}

/// Shift difference `BS(t, x + dx, sigma2 + dvar) - BS(t, x, sigma2)`.
pub fn shift_diff(p: &BsPoint, dx: f64, dvar: f64) -> Result<f64, BsError> {
    let shifted_var = p.sigma2 + dvar;
    if !(shifted_var > 0.0) {
        return Err(BsError::VarianceShift(shifted_var));
    }
    Ok(price(&p.with_shift(dx, dvar)) - price(p))
}

// 8-point Gauss-Legendre rule on [0, 1]; exact for the short shift
// integrals below, whose integrands are analytic on the tiny interval.
const GL8_01: [(f64, f64); 8] = [
    (0.019_855_071_751_231_84, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_181_0),
    (0.591_717_321_247_824_9, 0.181_341_891_689_181_0),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_2, 0.050_614_268_145_188_13),
];

// `rho * int_0^z (f'(x + rho v) - e^{rho v} f'(x)) dv` for the price
// derivative `f'` of the operand. This is the compensated jump operator
// written as a short integral; unlike the difference form it carries no
// cancellation, so it is the branch of choice when the shift `rho z` is
// small against the moneyness scale.
#[inline]
fn jump_op_short_shift(rho: f64, z: f64, dfx0: f64, dfx: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for (xi, w) in GL8_01 {
        let v = z * xi;
        acc += w * (dfx(rho * v) - (rho * v).exp() * dfx0);
    }
    rho * z * acc
}

// switch to the short-shift branch when the shifted arguments would
// cancel to this fraction of themselves
#[inline]
fn shift_is_small(rho: f64, z: f64, s: f64) -> bool {
    rho.abs() * z < 0.08 * s
}

/// Compensated single-jump impact: the price-shift difference plus the
/// delta term that offsets the drift compensation. Large shifts use the
/// fused form
/// `e^{x+rho z}(Phi(d+_s) - Phi(d+)) - K e^{-r tau}(Phi(d-_s) - Phi(d-))`,
/// short shifts an exact integral representation that avoids
/// cancellation.
pub fn single_jump_impact(p: &BsPoint, rho: f64, z: f64) -> f64 {
    debug_assert!(z > 0.0 && p.tau() > 0.0);
    if rho == 0.0 {
        return 0.0;
    }
    let (d_plus, _, s) = d_pair(p, p.x, p.sigma2);
    if shift_is_small(rho, z, s) {
        let ex = p.x.exp();
        let dfx0 = ex * norm_cdf(d_plus);
        return jump_op_short_shift(rho, z, dfx0, |a| {
            (p.x + a).exp() * norm_cdf(d_plus + a / s)
        });
    }
    let args = shifted_args(p, rho, z);
    (p.x + rho * z).exp() * (norm_cdf(args.d_plus_x_shift) - norm_cdf(args.d_plus))
        - p.strike
            * (-p.rate * p.tau()).exp()
            * (norm_cdf(args.d_minus_x_shift) - norm_cdf(args.d_minus))
}

/// The same operator assembled from its definition: price-shift
/// difference plus `d_x BS * (1 - e^{rho z})`. Kept as an independent
/// route for cross-checking.
pub fn single_jump_impact_expanded(p: &BsPoint, rho: f64, z: f64) -> Result<f64, BsError> {
    debug_assert!(z > 0.0 && p.tau() > 0.0);
    let shifted = shift_diff(p, rho * z, 0.0)?;
    let pr = partials(p)?;
    Ok(shifted + pr.d_x * (1.0 - (rho * z).exp()))
}

/// Jump-impact integral: the single-jump impact integrated against the
/// jump measure. Exactly zero when `rho = 0`.
pub fn jump_impact(
    p: &BsPoint,
    rho: f64,
    spec: &LevyMeasureSpec,
    tol: f64,
) -> Result<QuadratureResult, BsError> {
    debug_assert!(p.tau() > 0.0);
    if rho == 0.0 {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 1,
        });
    }
    Ok(spec.integrate(|z| single_jump_impact(p, rho, z), tol)?)
}

/// Partial derivatives of the jump-impact integral, computed by
/// integrating the differentiated single-jump impact (the derivative and
/// the measure integral commute on this domain).
#[derive(Debug, Clone, Copy)]
pub struct JumpImpactPartials {
    pub d_x: f64,
    pub d_xx: f64,
    pub d_sigma2: f64,
}

pub fn jump_impact_partials(
    p: &BsPoint,
    rho: f64,
    spec: &LevyMeasureSpec,
    tol: f64,
) -> Result<JumpImpactPartials, BsError> {
    debug_assert!(p.tau() > 0.0);
    if rho == 0.0 {
        return Ok(JumpImpactPartials {
            d_x: 0.0,
            d_xx: 0.0,
            d_sigma2: 0.0,
        });
    }
    let tau = p.tau();
    let (dp, _, s) = d_pair(p, p.x, p.sigma2);
    let ex = p.x.exp();
    let phi = norm_pdf(dp);
    let cdf = norm_cdf(dp);
    let sigma = p.sigma2.sqrt();

    // price derivatives of the three operands, as functions of the
    // log-price shift; these feed the short-shift branch
    let dx_of_dx = |a: f64| {
        let da = dp + a / s;
        (p.x + a).exp() * (norm_cdf(da) + norm_pdf(da) / s)
    };
    let dx_of_dxx = |a: f64| {
        let da = dp + a / s;
        let pda = norm_pdf(da);
        (p.x + a).exp() * (norm_cdf(da) + 2.0 * pda / s - da * pda / (s * s))
    };
    let vega_scale = 0.5 * tau.sqrt() / sigma;
    let dx_of_dsigma2 = |a: f64| {
        let da = dp + a / s;
        vega_scale * (p.x + a).exp() * norm_pdf(da) * (1.0 - da / s)
    };

    let d_x = spec.integrate(
        |z| {
            if shift_is_small(rho, z, s) {
                jump_op_short_shift(rho, z, dx_of_dx(0.0), dx_of_dx)
            } else {
                let shift = rho * z / s;
                (p.x + rho * z).exp() * (norm_cdf(dp + shift) - cdf)
                    + ex * phi * (1.0 - (rho * z).exp()) / s
            }
        },
        tol,
    )?;
    let d_xx = spec.integrate(
        |z| {
            if shift_is_small(rho, z, s) {
                jump_op_short_shift(rho, z, dx_of_dxx(0.0), dx_of_dxx)
            } else {
                let shift = rho * z / s;
                let dps = dp + shift;
                (p.x + rho * z).exp() * (norm_cdf(dps) + norm_pdf(dps) / s)
                    - ex * (cdf + phi / s)
                    + ex * (cdf + 2.0 * phi / s - dp * phi / (s * s)) * (1.0 - (rho * z).exp())
            }
        },
        tol,
    )?;
    let d_sigma2 = spec.integrate(
        |z| {
            if shift_is_small(rho, z, s) {
                jump_op_short_shift(rho, z, dx_of_dsigma2(0.0), dx_of_dsigma2)
            } else {
                let e = (rho * z).exp();
                let dps = dp + rho * z / s;
                vega_scale * ex * (e * (norm_pdf(dps) - phi) - dp * phi * (1.0 - e) / s)
            }
        },
        tol,
    )?;
    Ok(JumpImpactPartials {
        d_x: d_x.value,
        d_xx: d_xx.value,
        d_sigma2: d_sigma2.value,
    })
}

/// Joint-shift difference of the jump-impact integral:
/// `Lbar BS(t, x + rho z, sigma2 + z) - Lbar BS(t, x, sigma2)`.
pub fn jump_impact_shift_diff(
    p: &BsPoint,
    rho: f64,
    spec: &LevyMeasureSpec,
    z: f64,
    tol: f64,
) -> Result<f64, BsError> {
    debug_assert!(p.tau() > 0.0 && z > 0.0);
    if rho == 0.0 {
        return Ok(0.0);
    }
    let shifted = p.with_shift(rho * z, z);
    let half = 0.5 * tol;
    let a = jump_impact(&shifted, rho, spec, half)?;
    let b = jump_impact(p, rho, spec, half)?;
    Ok(a.value - b.value)
}
