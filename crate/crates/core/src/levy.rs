//! Lévy measures of the variance-driving subordinator.
//!
//! Two measure families are supported: the inverse-Gaussian-OU measure
//! (infinite activity) and the gamma-OU measure (compound Poisson). The
//! module provides densities, moments, admissibility checks, closed-form
//! tail quantities used by the jump sampler and operator kernels, and
//! quadrature of integrands against the measure on `(0, inf)`.

use crate::math::gauss::{adaptive_gk, laguerre_rule, legendre_rule};
use crate::math::normal::erfc;
use crate::math::roots::solve_bracketed;
use thiserror::Error;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("invalid measure parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrand violates the small-jump contract: {0}")]
    IntegrandContract(String),
    #[error(
        "quadrature failed to reach tolerance: partial {partial:e}, error {abs_error:e}, {evaluations} evaluations"
    )]
    QuadratureFailure {
        partial: f64,
        abs_error: f64,
        evaluations: usize,
    },
    #[error("tail-intensity inversion failed for mass {0:e}")]
    TailInversion(f64),
}

/// Which stationary law the variance process targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureVariant {
    /// Inverse-Gaussian stationary law; infinite jump activity.
    IgOu,
    /// Gamma stationary law; finite jump activity.
    GammaOu,
}

/// Jump-size intensity of the time-changed subordinator.
///
/// `lambda` is the mean-reversion rate of the variance process (the time
/// change couples it into the measure), `a` and `b` are the shape and
/// scale of the stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyMeasureSpec {
    pub variant: MeasureVariant,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

/// Moments of the measure that are guaranteed finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    First,
    Second,
}

/// Outcome of the exponential-moment admissibility check.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityCheck {
    pub holds: bool,
    /// Left side minus right side of the variant's inequality.
    pub slack: f64,
}

/// Value of an integral against the measure plus an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl LevyMeasureSpec {
    pub fn new(variant: MeasureVariant, lambda: f64, a: f64, b: f64) -> Result<Self, LevyError> {
        for (name, v) in [("lambda", lambda), ("a", a), ("b", b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(LevyError::InvalidParameter(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            variant,
            lambda,
            a,
            b,
        })
    }

    pub fn ig_ou(lambda: f64, a: f64, b: f64) -> Result<Self, LevyError> {
        Self::new(MeasureVariant::IgOu, lambda, a, b)
    }

    pub fn gamma_ou(lambda: f64, a: f64, b: f64) -> Result<Self, LevyError> {
        Self::new(MeasureVariant::GammaOu, lambda, a, b)
    }

    /// Density of the measure at `z > 0`.
    pub fn density(&self, z: f64) -> Result<f64, LevyError> {
        if !(z > 0.0) {
            return Err(LevyError::Domain(format!(
                "density is defined on (0, inf), got z = {z}"
            )));
        }
        Ok(self.density_unchecked(z))
    }

    #[inline]
    fn density_unchecked(&self, z: f64) -> f64 {
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::IgOu => {
                lambda * a / (2.0 * SQRT_2PI)
                    * z.powf(-1.5)
                    * (1.0 + b * b * z)
                    * (-0.5 * b * b * z).exp()
            }
            MeasureVariant::GammaOu => lambda * a * b * (-b * z).exp(),
        }
    }

    /// Total mass of the measure; `None` means infinite (IG case).
    pub fn total_mass(&self) -> Option<f64> {
        match self.variant {
            MeasureVariant::IgOu => None,
            MeasureVariant::GammaOu => Some(self.lambda * self.a),
        }
    }

    /// `int z^k nu(dz)` for `k` in `{1, 2}`, in closed form.
    pub fn moment(&self, order: MomentOrder) -> f64 {
        let Self { lambda, a, b, .. } = *self;
        match (order, self.variant) {
            (MomentOrder::First, _) => lambda * a / b,
            (MomentOrder::Second, MeasureVariant::GammaOu) => 2.0 * lambda * a / (b * b),
            (MomentOrder::Second, MeasureVariant::IgOu) => 2.0 * lambda * a / (b * b * b),
        }
    }

    /// Checks the exponential-moment condition at horizon `t_horizon`.
    ///
    /// IG requires `b^2/2 > 2 eps(T)`, gamma requires `b > 2 eps(T)` where
    /// `eps(T) = (1 - e^{-lambda T}) / lambda`. Equality counts as failure.
    pub fn assumption2(&self, t_horizon: f64) -> AdmissibilityCheck {
        let eps = crate::model::integrated_decay(self.lambda, t_horizon);
        let slack = match self.variant {
            MeasureVariant::IgOu => 0.5 * self.b * self.b - 2.0 * eps,
            MeasureVariant::GammaOu => self.b - 2.0 * eps,
        };
        AdmissibilityCheck {
            holds: slack > 0.0,
            slack,
        }
    }

    /// Exponential decay rate of the density at large `z`.
    pub fn decay_rate(&self) -> f64 {
        match self.variant {
            MeasureVariant::IgOu => 0.5 * self.b * self.b,
            MeasureVariant::GammaOu => self.b,
        }
    }

    /// Upper tail mass `nu((z, inf))`, in closed form.
    ///
    /// Diverges as `z -> 0` in the IG case.
    pub fn tail_mass(&self, z: f64) -> f64 {
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::IgOu => {
                if z <= 0.0 {
                    f64::INFINITY
                } else {
                    lambda * a / SQRT_2PI / z.sqrt() * (-0.5 * b * b * z).exp()
                }
            }
            MeasureVariant::GammaOu => lambda * a * (-b * z.max(0.0)).exp(),
        }
    }

    /// Smallest `z` with `tail_mass(z) = mass` (`mass > 0`).
    pub fn invert_tail_mass(&self, mass: f64) -> Result<f64, LevyError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(LevyError::TailInversion(mass));
        }
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::GammaOu => {
                if mass >= lambda * a {
                    return Ok(0.0);
                }
                Ok((lambda * a / mass).ln() / b)
            }
            MeasureVariant::IgOu => {
                // solve ln tail_mass(e^y) = ln mass in y = ln z
                let c = 0.5 * b * b;
                let k = (lambda * a / SQRT_2PI).ln();
                let target = mass.ln();
                let f = |y: f64| k - 0.5 * y - c * y.exp() - target;
                let df = |y: f64| -0.5 - c * y.exp();
                let mut lo = -800.0;
                // expand the upper end until bracketed
                let mut hi = (1.0 / c).ln();
                let mut tries = 0;
                while f(hi) > 0.0 {
                    hi += 3.0;
                    tries += 1;
                    if tries > 300 {
                        return Err(LevyError::TailInversion(mass));
                    }
                }
                if f(lo) < 0.0 {
                    lo = hi - 3.0;
                    while f(lo) < 0.0 {
                        lo -= 3.0;
                        if lo < -900.0 {
                            return Err(LevyError::TailInversion(mass));
                        }
                    }
                }
                solve_bracketed(f, df, lo, hi, 1e-14)
                    .map(f64::exp)
                    .ok_or(LevyError::TailInversion(mass))
            }
        }
    }

    /// Mean mass below a truncation level: `int_0^eps z nu(dz)`.
    pub fn truncated_mean_mass(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::IgOu => {
                let erf = 1.0 - erfc(b * (0.5 * eps).sqrt());
                lambda * a * (erf / b - eps.sqrt() * (-0.5 * b * b * eps).exp() / SQRT_2PI)
            }
            MeasureVariant::GammaOu => {
                lambda * a * (1.0 - (-b * eps).exp() * (1.0 + b * eps)) / b
            }
        }
    }

    /// Exponentially tilted tail mass `int_zeta^inf e^{rho w} nu(dw)` for `rho <= 0`.
    pub fn tilted_tail_mass(&self, zeta: f64, rho: f64) -> f64 {
        debug_assert!(rho <= 0.0);
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::GammaOu => lambda * a * b * (-(b - rho) * zeta).exp() / (b - rho),
            MeasureVariant::IgOu => {
                let cp = 0.5 * b * b - rho;
                if zeta <= 0.0 {
                    return f64::INFINITY;
                }
                lambda * a / SQRT_2PI
                    * ((-cp * zeta).exp() / zeta.sqrt()
                        + rho * (SQRT_PI / cp.sqrt()) * erfc((cp * zeta).sqrt()))
            }
        }
    }

    /// `int_zeta^inf (e^{rho w} - e^{rho zeta}) nu(dw)` for `rho <= 0`.
    ///
    /// Finite down to `zeta = 0`, where it equals `int (e^{rho w} - 1) nu(dw)`.
    pub fn tilt_excess_tail(&self, zeta: f64, rho: f64) -> f64 {
        debug_assert!(rho <= 0.0);
        let Self { lambda, a, b, .. } = *self;
        match self.variant {
            MeasureVariant::GammaOu => lambda * a * rho * (-(b - rho) * zeta).exp() / (b - rho),
            MeasureVariant::IgOu => {
                let cp = 0.5 * b * b - rho;
                lambda * a * rho * erfc((cp * zeta.max(0.0)).sqrt()) / (b * b - 2.0 * rho).sqrt()
            }
        }
    }

    /// Integrates `f` against the measure on `(0, inf)` to absolute
    /// tolerance `tol`.
    ///
    /// The integrand is expected to be `O(z)` near zero and exponentially
    /// dominated by the density's decay at infinity; a cheap probe rejects
    /// obvious violations before any quadrature work is spent.
    pub fn integrate<F: Fn(f64) -> f64>(
        &self,
        f: F,
        tol: f64,
    ) -> Result<QuadratureResult, LevyError> {
        self.integrate_with_budget(f, tol, 60_000)
    }

    pub fn integrate_with_budget<F: Fn(f64) -> f64>(
        &self,
        f: F,
        tol: f64,
        max_evals: usize,
    ) -> Result<QuadratureResult, LevyError> {
        if !(tol > 0.0) {
            return Err(LevyError::Domain(format!("tol must be > 0, got {tol}")));
        }
        // probe the caller contract at a handful of points
        let probes = [1e-8, 1e-4, 1.0, 10.0];
        let mut vals = [0.0; 4];
        for (v, z) in vals.iter_mut().zip(probes) {
            *v = f(z);
            if !v.is_finite() {
                return Err(LevyError::IntegrandContract(format!(
                    "integrand is not finite at z = {z}"
                )));
            }
        }
        let r_small = vals[0].abs() / 1e-8;
        let r_mid = vals[1].abs() / 1e-4;
        if r_small > 30.0 * (r_mid + 1e-300) && r_small > 1e-12 {
            return Err(LevyError::IntegrandContract(
                "integrand grows faster than O(z) towards 0".to_string(),
            ));
        }
        let mut evaluations = probes.len();

        let c = self.decay_rate();
        let z1 = 1.0 / c;
        let z2 = 9.0 / c;
        let ct = 0.5 * c;
        let tol_each = tol / 3.0;

        let mut value = 0.0;
        let mut abs_error = 0.0;
        let mut run = |res: Result<crate::math::gauss::AdaptiveResult, crate::math::gauss::AdaptiveResult>|
         -> Result<(), LevyError> {
            match res {
                Ok(r) => {
                    value += r.value;
                    abs_error += r.abs_error;
                    evaluations += r.evaluations;
                    Ok(())
                }
                Err(r) => Err(LevyError::QuadratureFailure {
                    partial: value + r.value,
                    abs_error: abs_error + r.abs_error,
                    evaluations: evaluations + r.evaluations,
                }),
            }
        };

        match self.variant {
            MeasureVariant::IgOu => {
                // z = u^2 removes the endpoint singularity
                let Self { lambda, a, b, .. } = *self;
                let g = |u: f64| {
                    if u < 1e-120 {
                        return 0.0;
                    }
                    let z = u * u;
                    f(z) * (lambda * a / SQRT_2PI) / (u * u)
                        * (1.0 + b * b * z)
                        * (-0.5 * b * b * z).exp()
                };
                run(adaptive_gk(&g, 0.0, z1.sqrt(), tol_each, max_evals / 3))?;
            }
            MeasureVariant::GammaOu => {
                let g = |z: f64| f(z) * self.density_unchecked(z.max(1e-300));
                run(adaptive_gk(&g, 0.0, z1, tol_each, max_evals / 3))?;
            }
        }
        let g_mid = |z: f64| f(z) * self.density_unchecked(z);
        run(adaptive_gk(&g_mid, z1, z2, tol_each, max_evals / 3))?;
        // tail mapped through z = z2 - ln(v)/ct
        let g_tail = |v: f64| {
            if v < 1e-300 {
                return 0.0;
            }
            let z = z2 - v.ln() / ct;
            f(z) * self.density_unchecked(z) / (ct * v)
        };
        run(adaptive_gk(&g_tail, 0.0, 1.0, tol_each, max_evals / 3))?;

        Ok(QuadratureResult {
            value,
            abs_error_estimate: abs_error,
            evaluations,
        })
    }

    /// Fixed quadrature rule representing `int f dnu ~ sum w_i f(z_i)`.
    ///
    /// Intended for hot loops that evaluate many integrands against the
    /// same measure; accuracy is validated against [`Self::integrate`].
    pub fn quadrature_rule(&self, n_singular: usize, n_bulk: usize, n_tail: usize) -> NuRule {
        let c = self.decay_rate();
        let z1 = 1.0 / c;
        let z2 = 9.0 / c;
        let ct = 0.5 * c;
        let mut nodes = Vec::with_capacity(n_singular + n_bulk + n_tail);
        let mut weights = Vec::with_capacity(nodes.capacity());

        match self.variant {
            MeasureVariant::IgOu => {
                let (xs, ws) = legendre_rule(n_singular);
                let half = 0.5 * z1.sqrt();
                for (x, w) in xs.iter().zip(&ws) {
                    let u = half * (x + 1.0);
                    let z = u * u;
                    nodes.push(z);
                    weights.push(w * half * 2.0 * u * self.density_unchecked(z));
                }
            }
            MeasureVariant::GammaOu => {
                let (xs, ws) = legendre_rule(n_singular);
                let half = 0.5 * z1;
                for (x, w) in xs.iter().zip(&ws) {
                    let z = half * (x + 1.0);
                    nodes.push(z);
                    weights.push(w * half * self.density_unchecked(z));
                }
            }
        }
        let (xs, ws) = legendre_rule(n_bulk);
        let half = 0.5 * (z2 - z1);
        let mid = 0.5 * (z2 + z1);
        for (x, w) in xs.iter().zip(&ws) {
            let z = mid + half * x;
            nodes.push(z);
            weights.push(w * half * self.density_unchecked(z));
        }
        // Laguerre tail matched to the density's decay rate
        let (ts, ws) = laguerre_rule(n_tail);
        for (t, w) in ts.iter().zip(&ws) {
            let z = z2 + t / c;
            nodes.push(z);
            weights.push(w / c * self.density_unchecked(z) * t.exp());
        }
        let _ = ct;
        NuRule { nodes, weights }
    }
}

/// Precomputed nodes and weights for integrals against a Lévy measure.
#[derive(Debug, Clone)]
pub struct NuRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NuRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
