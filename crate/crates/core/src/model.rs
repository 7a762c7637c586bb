//! Model parameterization and the deterministic variance machinery.
//!
//! The squared volatility follows a mean-reverting flow between jumps and
//! gains the jump size instantly at a jump. Everything here is exact in
//! closed form; no time discretization is involved.

use crate::levy::{LevyError, LevyMeasureSpec, MeasureVariant, MomentOrder};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponential-moment condition violated at the given horizon (slack {slack:e})")]
    AdmissibilityViolated { slack: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

/// `eps(t) = (1 - e^{-lambda t}) / lambda`, the integrated decay factor.
///
/// Increasing and concave in `t`, bounded by `min(t, 1/lambda)`. A series
/// branch avoids cancellation for small `lambda * t`.
pub fn integrated_decay(lambda: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0 && lambda >= 0.0);
    let lt = lambda * t;
    if lt < 1e-8 {
        t * (1.0 - 0.5 * lt + lt * lt / 6.0)
    } else {
        (1.0 - (-lt).exp()) / lambda
    }
}

/// `int_0^tau eps(v) dv`, the doubly integrated decay factor.
pub fn integrated_decay_integral(lambda: f64, tau: f64) -> f64 {
    let lt = lambda * tau;
    if lt < 1e-4 {
        tau * tau * (0.5 - lt / 6.0 + lt * lt / 24.0)
    } else {
        (tau - integrated_decay(lambda, tau)) / lambda
    }
}

/// Deterministic mean-reverting flow of the squared volatility over `dt`.
pub fn ou_decay(sigma2: f64, lambda: f64, dt: f64) -> f64 {
    debug_assert!(dt >= 0.0);
    (-lambda * dt).exp() * sigma2
}

/// Drift that makes the discounted asset price a martingale:
/// `int (1 - e^{rho z}) nu(dz)`.
///
/// Closed form in the gamma case, quadrature in the IG case.
pub fn jump_compensator(measure: &LevyMeasureSpec, rho: f64) -> Result<f64, ModelError> {
    if rho > 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "leverage parameter must be <= 0, got {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    match measure.variant {
        MeasureVariant::GammaOu => {
            Ok(-measure.lambda * measure.a * rho / (measure.b - rho))
        }
        MeasureVariant::IgOu => {
            let q = measure.integrate(|z| -(rho * z).exp_m1(), 1e-9)?;
            Ok(q.value)
        }
    }
}

/// Full parameterization of the model. Construction is the single
/// enforcement point for the standing assumptions.
#[derive(Debug, Clone)]
pub struct BnsParams {
    spot: f64,
    sigma0_sq: f64,
    rho: f64,
    rate: f64,
    horizon: f64,
    measure: LevyMeasureSpec,
    /// Derived martingale drift, cached at construction.
    mu: f64,
}

impl BnsParams {
    pub fn new(
        spot: f64,
        sigma0_sq: f64,
        rho: f64,
        rate: f64,
        horizon: f64,
        measure: LevyMeasureSpec,
    ) -> Result<Self, ModelError> {
        if !(spot > 0.0) || !spot.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "spot must be > 0, got {spot}"
            )));
        }
        if !(sigma0_sq > 0.0) || !sigma0_sq.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "initial squared volatility must be > 0, got {sigma0_sq}"
            )));
        }
        if !(rho <= 0.0) || !rho.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "leverage parameter must be <= 0, got {rho}"
            )));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "interest rate must be >= 0, got {rate}"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        let chk = measure.assumption2(horizon);
        if !chk.holds {
            return Err(ModelError::AdmissibilityViolated { slack: chk.slack });
        }
        let mu = jump_compensator(&measure, rho)?;
        Ok(Self {
            spot,
            sigma0_sq,
            rho,
            rate,
            horizon,
            measure,
            mu,
        })
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn measure(&self) -> &LevyMeasureSpec {
        &self.measure
    }

    /// Mean-reversion rate; stored once, inside the measure.
    pub fn lambda(&self) -> f64 {
        self.measure.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Hard lower bound of the squared volatility over `[0, T]`.
    pub fn sigma2_floor(&self) -> f64 {
        (-self.lambda() * self.horizon).exp() * self.sigma0_sq
    }

    pub fn initial_state(&self) -> MarketState {
        MarketState {
            t: 0.0,
            x: self.spot.ln(),
            sigma2: self.sigma0_sq,
        }
    }
}

/// Log price and squared volatility at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub t: f64,
    pub x: f64,
    pub sigma2: f64,
}

/// Exact integrated squared volatility over `(t, T]` given the jumps on
/// that interval:
/// `eps(T-t) sigma2_t + sum_j eps(T-t_j) z_j + M int_0^{T-t} eps(v) dv`,
/// where `M` is a deterministic drift rate standing in for compensated
/// small jumps (zero when no truncation is active).
pub fn integrated_variance(
    sigma2_t: f64,
    t: f64,
    horizon: f64,
    lambda: f64,
    jump_times: &[f64],
    jump_sizes: &[f64],
    drift_mass_rate: f64,
) -> Result<f64, ModelError> {
    let tau = horizon - t;
    if tau < 0.0 {
        return Err(ModelError::Domain(format!(
            "horizon {horizon} is before t = {t}"
        )));
    }
    let mut iv = integrated_decay(lambda, tau) * sigma2_t
        + drift_mass_rate * integrated_decay_integral(lambda, tau);
    for (&tj, &zj) in jump_times.iter().zip(jump_sizes) {
        if tj <= t || tj > horizon {
            return Err(ModelError::Domain(format!(
                "jump time {tj} outside ({t}, {horizon}]"
            )));
        }
        iv += integrated_decay(lambda, horizon - tj) * zj;
    }
    Ok(iv)
}

/// Time-average of the expected future squared volatility over `(t, T]`:
/// a convex combination of the current value and the stationary jump mean.
pub fn avg_future_variance(state: &MarketState, params: &BnsParams) -> Result<f64, ModelError> {
    let tau = params.horizon() - state.t;
    if tau <= 0.0 {
        return Err(ModelError::Domain(
            "average future variance needs t < T".to_string(),
        ));
    }
    let lambda = params.lambda();
    let weight = integrated_decay(lambda, tau) / tau;
    let m1 = params.measure().moment(MomentOrder::First);
    Ok(weight * state.sigma2 + (1.0 - weight) * m1 / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_params() -> BnsParams {
        let measure = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
        BnsParams::new(468.44, 0.064262 * 0.064262, -4.7039, 0.01, 0.25, measure).unwrap()
    }

    #[test]
    fn integrated_decay_examples() {
        assert_eq!(integrated_decay(2.4958, 0.0), 0.0);
        // vanishing-rate limit through the series branch
        assert_eq!(integrated_decay(0.0, 3.0), 3.0);
        let lt: f64 = 1e-12 * 3.0;
        assert_relative_eq!(
            integrated_decay(1e-12, 3.0),
            3.0 * (1.0 - 0.5 * lt + lt * lt / 6.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            integrated_decay(2.4958, 0.25),
            0.18598295208546487,
            max_relative = 1e-14
        );
        // bounds and concavity
        let lambda = 1.7;
        let mut prev = 0.0;
        let mut prev_slope = f64::INFINITY;
        for i in 1..100 {
            let t = 0.05 * i as f64;
            let e = integrated_decay(lambda, t);
            assert!(e <= t.min(1.0 / lambda) + 1e-15);
            assert!(e > prev);
            let slope = (e - prev) / 0.05;
            assert!(slope <= prev_slope + 1e-12);
            prev_slope = slope;
            prev = e;
        }
    }

    #[test]
    fn integrated_decay_integral_matches_quadrature() {
        for (lambda, tau) in [(2.4958, 0.25), (1e-6, 2.0), (8.0, 1.3)] {
            let n = 200_000;
            let h = tau / n as f64;
            let mut s = 0.5 * integrated_decay(lambda, tau);
            for i in 1..n {
                s += integrated_decay(lambda, h * i as f64);
            }
            assert_relative_eq!(
                integrated_decay_integral(lambda, tau),
                s * h,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn ou_decay_semigroup() {
        let v = 0.3;
        let lambda = 2.4958;
        assert_eq!(ou_decay(v, lambda, 0.0), v);
        let once = ou_decay(ou_decay(v, lambda, 0.11), lambda, 0.31);
        let combined = ou_decay(v, lambda, 0.42);
        assert_relative_eq!(once, combined, max_relative = 1e-14);
    }

    #[test]
    fn compensator_examples() {
        let ig = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
        let gamma = LevyMeasureSpec::gamma_ou(2.4958, 0.0872, 11.98).unwrap();
        assert_eq!(jump_compensator(&ig, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            jump_compensator(&gamma, -4.7039).unwrap(),
            0.061360200172861261,
            max_relative = 1e-13
        );
        // IG via quadrature agrees with the closed form obtainable through
        // Gamma-function integrals
        assert_relative_eq!(
            jump_compensator(&ig, -4.7039).unwrap(),
            0.082782884970769276,
            max_relative = 1e-9
        );
        assert!(jump_compensator(&ig, 0.5).is_err());
    }

    #[test]
    fn params_construction_and_caching() {
        let p = paper_params();
        assert_relative_eq!(p.mu(), 0.082782884970769276, max_relative = 1e-9);
        assert_relative_eq!(
            p.sigma2_floor(),
            (-2.4958_f64 * 0.25).exp() * 0.064262 * 0.064262,
            max_relative = 1e-14
        );
        // rho > 0 rejected
        let m = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
        assert!(BnsParams::new(468.44, 0.004, 0.1, 0.01, 0.25, m).is_err());
        // admissibility violation rejected
        let bad = LevyMeasureSpec::gamma_ou(1.0, 1.0, 0.01).unwrap();
        assert!(matches!(
            BnsParams::new(100.0, 0.04, -1.0, 0.0, 10.0, bad),
            Err(ModelError::AdmissibilityViolated { .. })
        ));
    }

    #[test]
    fn integrated_variance_no_jumps() {
        let iv = integrated_variance(0.02, 0.1, 0.35, 2.4958, &[], &[], 0.0).unwrap();
        assert_relative_eq!(
            iv,
            integrated_decay(2.4958, 0.25) * 0.02,
            max_relative = 1e-14
        );
    }

    #[test]
    fn integrated_variance_single_jump() {
        let (t, horizon, lambda) = (0.0, 0.25, 2.4958);
        let iv =
            integrated_variance(0.02, t, horizon, lambda, &[0.1], &[0.005], 0.0).unwrap();
        let want = integrated_decay(lambda, 0.25) * 0.02
            + integrated_decay(lambda, 0.15) * 0.005;
        assert_relative_eq!(iv, want, max_relative = 1e-14);
        // out-of-interval jump is a domain error
        assert!(integrated_variance(0.02, t, horizon, lambda, &[0.3], &[0.005], 0.0).is_err());
        assert!(integrated_variance(0.02, 0.2, horizon, lambda, &[0.1], &[0.005], 0.0).is_err());
    }

    #[test]
    fn integrated_variance_matches_riemann_sum() {
        // piecewise-exponential variance path resolved on a dense grid
        let (t, horizon, lambda) = (0.05, 0.4, 2.4958);
        let sigma2_t = 0.0041;
        let times = [0.1, 0.18, 0.33];
        let sizes = [0.002, 0.0007, 0.004];
        let drift = 0.03;
        let n = 400_000;
        let h = (horizon - t) / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let u = t + h * (i as f64 + 0.5);
            let mut v = ou_decay(sigma2_t, lambda, u - t)
                + drift * integrated_decay(lambda, u - t);
            for (&tj, &zj) in times.iter().zip(&sizes) {
                if tj <= u {
                    v += ou_decay(zj, lambda, u - tj);
                }
            }
            sum += v * h;
        }
        let exact =
            integrated_variance(sigma2_t, t, horizon, lambda, &times, &sizes, drift).unwrap();
        assert_relative_eq!(exact, sum, max_relative = 1e-6);
    }

    #[test]
    fn avg_future_variance_limits() {
        let p = paper_params();
        // short horizon: dominated by the current value
        let state = MarketState {
            t: 0.25 - 1e-9,
            x: p.spot().ln(),
            sigma2: 0.0123,
        };
        assert_relative_eq!(
            avg_future_variance(&state, &p).unwrap(),
            0.0123,
            max_relative = 1e-8
        );
        // long horizon: approaches the stationary mean of the variance
        let m = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
        let long = BnsParams::new(468.44, 0.004, -4.7039, 0.01, 400.0, m).unwrap();
        let state0 = long.initial_state();
        let stationary = long.measure().moment(MomentOrder::First) / long.lambda();
        assert_relative_eq!(
            avg_future_variance(&state0, &long).unwrap(),
            stationary,
            max_relative = 1e-2
        );
        // t = T is a domain error
        let at_t = MarketState {
            t: 0.25,
            x: 0.0,
            sigma2: 0.004,
        };
        assert!(avg_future_variance(&at_t, &p).is_err());
    }

    #[test]
    fn avg_future_variance_is_convex_combination() {
        let p = paper_params();
        let m1 = p.measure().moment(MomentOrder::First);
        let stationary = m1 / p.lambda();
        for t in [0.0, 0.1, 0.2, 0.2499] {
            let state = MarketState {
                t,
                x: 6.0,
                sigma2: 0.0123,
            };
            let v = avg_future_variance(&state, &p).unwrap();
            let lo = stationary.min(0.0123);
            let hi = stationary.max(0.0123);
            assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}
