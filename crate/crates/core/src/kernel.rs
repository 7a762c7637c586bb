//! Fixed-rule evaluator for the jump operators along simulated paths.
//!
//! The decomposition estimators evaluate the jump-impact integral and its
//! partial derivatives millions of times. This module reduces all of them
//! to sums of closed-form "atoms"
//!
//! ```text
//!   E(gamma) = int_0^inf phi(d + beta zeta) e^{-gamma zeta} dzeta
//!            = (1/|beta|) e^{kappa^2/2 + kappa d} Phi(d + kappa),   kappa = gamma/beta,
//! ```
//!
//! by writing the tail functions of the measure as exponential
//! superpositions: the gamma measure contributes a single exponential,
//! the IG measure an integral of exponentials over a fixed node set
//! (`erfc(sqrt(c z))` and `z^{-1/2} e^{-c z}` both admit such forms).
//! Each atom needs one scaled-erfc evaluation and is stable for every
//! combination of moneyness and time to maturity; accuracy is checked
//! against the adaptive operators in `bs`.


use crate::levy::{LevyMeasureSpec, MeasureVariant, NuRule};
use crate::math::gauss::legendre_rule;
use crate::math::normal::{erfcx, norm_cdf, norm_pdf};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Strike-level constants shared by every evaluation in a run.
#[derive(Debug, Clone, Copy)]
pub struct OptionCtx {
    pub strike: f64,
    pub ln_strike: f64,
    pub rate: f64,
}

impl OptionCtx {
    pub fn new(strike: f64, rate: f64) -> Self {
        Self {
            strike,
            ln_strike: strike.ln(),
            rate,
        }
    }
}

/// Jump-impact integral value and partial derivatives at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct LbarEval {
    pub value: f64,
    pub d_x: f64,
    pub d_sigma2: f64,
}

/// Precomputed atom rates/weights plus a fixed measure rule.
#[derive(Debug, Clone)]
pub struct JumpKernel {
    rho: f64,
    mu: f64,
    /// Exponential decay rates of the atoms.
    rates: Vec<f64>,
    /// Atom weights reproducing `int phi(d + beta z) g(z) dz` where `g`
    /// is the tilt-excess tail of the measure.
    w_g: Vec<f64>,
    /// Atom weights for the tilted tail mass `h`.
    w_h: Vec<f64>,
    /// Fixed rule for integrals against the measure itself.
    nu_rule: NuRule,
}

impl JumpKernel {
    /// `n_atoms` controls the IG atom count (the gamma measure is exact
    /// with a single atom); `nu_sizes` are the node counts of the fixed
    /// measure rule (singular, bulk, tail).
    pub fn new(
        spec: &LevyMeasureSpec,
        rho: f64,
        mu: f64,
        n_atoms: usize,
        nu_sizes: (usize, usize, usize),
    ) -> Self {
        debug_assert!(rho <= 0.0);
        let nu_rule = spec.quadrature_rule(nu_sizes.0, nu_sizes.1, nu_sizes.2);
        let (lambda, a, b) = (spec.lambda, spec.a, spec.b);
        let (mut rates, mut w_g, mut w_h) = (Vec::new(), Vec::new(), Vec::new());
        if rho < 0.0 {
            match spec.variant {
                MeasureVariant::GammaOu => {
                    rates.push(b - rho);
                    w_g.push(lambda * a * rho / (b - rho));
                    w_h.push(lambda * a * b / (b - rho));
                }
                MeasureVariant::IgOu => {
                    let cp = 0.5 * b * b - rho;
                    let c_g = lambda * a * rho / (2.0 * cp).sqrt();
                    let a_1 = lambda * a / SQRT_2PI;
                    let (xs, ws) = legendre_rule(n_atoms);
                    let quarter_pi = std::f64::consts::FRAC_PI_4;
                    for (x, w) in xs.iter().zip(&ws) {
                        let theta = quarter_pi * (x + 1.0);
                        let w = quarter_pi * w;
                        let u = theta.tan();
                        let opu2 = 1.0 + u * u;
                        rates.push(cp * opu2);
                        let g_w = c_g * std::f64::consts::FRAC_2_PI * w;
                        w_g.push(g_w);
                        w_h.push(a_1 * (2.0 * cp.sqrt() / SQRT_PI) * w * opu2 + g_w);
                    }
                }
            }
        }
        Self {
            rho,
            mu,
            rates,
            w_g,
            w_h,
            nu_rule,
        }
    }

    pub fn nu_rule(&self) -> &NuRule {
        &self.nu_rule
    }

    #[inline]
    fn d_plus(&self, tau: f64, x: f64, sigma2: f64, ctx: &OptionCtx) -> (f64, f64) {
        let s = (sigma2 * tau).sqrt();
        let m = x - ctx.ln_strike + ctx.rate * tau;
        (m / s + 0.5 * s, s)
    }

    /// One stable atom `E(rate)`; `inv_abs_beta = 1/|beta|`,
    /// `scale = 0.5 e^{-d^2/2}`.
    #[inline]
    fn atom(d: f64, beta: f64, inv_abs_beta: f64, scale: f64, rate: f64) -> (f64, f64) {
        let kappa = rate / beta;
        let y = -(d + kappa) * FRAC_1_SQRT_2;
        let e = if y >= 0.0 {
            inv_abs_beta * scale * erfcx(y)
        } else {
            // here kappa in (-d, 0), so the exponent is <= 0
            inv_abs_beta
                * (0.5 * kappa * kappa + kappa * d).exp()
                * norm_cdf(d + kappa)
        };
        (e, kappa)
    }

    /// Jump-impact integral at `(tau, x, sigma2)`.
    pub fn lbar(&self, tau: f64, x: f64, sigma2: f64, ctx: &OptionCtx) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        let (d, s) = self.d_plus(tau, x, sigma2, ctx);
        let beta = self.rho / s;
        let inv_abs_beta = s / -self.rho;
        let scale = 0.5 * (-0.5 * d * d).exp();
        let mut ig = 0.0;
        for (&rate, &wg) in self.rates.iter().zip(&self.w_g) {
            let (e, _) = Self::atom(d, beta, inv_abs_beta, scale, rate);
            ig += wg * e;
        }
        self.rho * x.exp() / s * ig
    }

    /// Jump-impact integral together with its log-price and
    /// squared-volatility derivatives, from a single atom pass.
    pub fn lbar_partials(&self, tau: f64, x: f64, sigma2: f64, ctx: &OptionCtx) -> LbarEval {
        if self.rho == 0.0 {
            return LbarEval::default();
        }
        let (d, s) = self.d_plus(tau, x, sigma2, ctx);
        let beta = self.rho / s;
        let inv_abs_beta = s / -self.rho;
        let scale = 0.5 * (-0.5 * d * d).exp();
        let phi_d = norm_pdf(d);
        let (mut ig, mut ih, mut ihp) = (0.0, 0.0, 0.0);
        for ((&rate, &wg), &wh) in self.rates.iter().zip(&self.w_g).zip(&self.w_h) {
            let (e, kappa) = Self::atom(d, beta, inv_abs_beta, scale, rate);
            let ep = phi_d / beta - kappa * e;
            ig += wg * e;
            ih += wh * e;
            ihp += wh * ep;
        }
        let ex = x.exp();
        let pre = self.rho * ex / s;
        let value = pre * ig;
        let d_x = pre * ih + ex * phi_d * self.mu / s;
        let d_sigma2 = 0.5 * tau.sqrt() / sigma2.sqrt()
            * ex
            * ((self.rho / s) * (-ihp) + (-d * phi_d) * self.mu / s);
        LbarEval {
            value,
            d_x,
            d_sigma2,
        }
    }

    /// `int (LbarBS(x + rho z, sigma2 + z) - LbarBS(x, sigma2)) nu(dz)`
    /// over the fixed measure rule; `base` is the unshifted value.
    pub fn lbar_joint_shift_integral(
        &self,
        tau: f64,
        x: f64,
        sigma2: f64,
        ctx: &OptionCtx,
        base: f64,
    ) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (&z, &w) in self.nu_rule.nodes.iter().zip(&self.nu_rule.weights) {
            acc += w * (self.lbar(tau, x + self.rho * z, sigma2 + z, ctx) - base);
        }
        acc
    }

    /// Integrals of the price-level shift differences against the measure:
    /// returns `(int (BS(x+rho z, v+z) - BS(x+rho z, v)) dnu,
    ///           int (BS(x, v+z) - BS(x, v)) dnu)`.
    ///
    /// The first is the combined move of price and variance net of the
    /// price-only move; the second isolates the variance jump.
    pub fn bs_shift_integrals(&self, tau: f64, x: f64, sigma2: f64, ctx: &OptionCtx) -> (f64, f64) {
        let disc_k = ctx.strike * (-ctx.rate * tau).exp();
        let m0 = x - ctx.ln_strike + ctx.rate * tau;
        // price with the exponentials and moneyness shared across nodes
        let at = |ex: f64, m: f64, var: f64| {
            let s = (var * tau).sqrt();
            let d = m / s;
            ex * norm_cdf(d + 0.5 * s) - disc_k * norm_cdf(d - 0.5 * s)
        };
        let ex0 = x.exp();
        let base = at(ex0, m0, sigma2);
        let mut total = 0.0;
        let mut vol = 0.0;
        for (&z, &w) in self.nu_rule.nodes.iter().zip(&self.nu_rule.weights) {
            vol += w * (at(ex0, m0, sigma2 + z) - base);
            if self.rho == 0.0 {
                total = vol;
            } else {
                let exs = ex0 * (self.rho * z).exp();
                let ms = m0 + self.rho * z;
                total += w * (at(exs, ms, sigma2 + z) - at(exs, ms, sigma2));
            }
        }
        (total, vol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::{jump_impact, jump_impact_partials, jump_impact_shift_diff, shift_diff};
    use approx::assert_relative_eq;

    const RHO: f64 = -4.7039;

    fn ig_spec() -> LevyMeasureSpec {
        LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap()
    }

    fn gamma_spec() -> LevyMeasureSpec {
        LevyMeasureSpec::gamma_ou(2.4958, 0.0872, 11.98).unwrap()
    }

    fn kernel_for(spec: &LevyMeasureSpec, rho: f64) -> JumpKernel {
        let mu = crate::model::jump_compensator(spec, rho).unwrap();
        JumpKernel::new(spec, rho, mu, 32, (24, 24, 16))
    }

    fn bs_point(tau: f64, x: f64, sigma2: f64) -> BsPoint {
        BsPoint::new(0.0, x, sigma2, 460.0, 0.01, tau).unwrap()
    }

    #[test]
    fn lbar_matches_adaptive_operator() {
        let ctx = OptionCtx::new(460.0, 0.01);
        let x0 = 468.44f64.ln();
        let v0 = 0.064262 * 0.064262;
        for spec in [ig_spec(), gamma_spec()] {
            let kernel = kernel_for(&spec, RHO);
            for (tau, x, v, tol) in [
                (0.25, x0, v0, 1e-9),
                (0.01, x0, v0, 1e-8),
                (1e-4, x0, v0, 1e-5),
                (0.25, x0 + 0.8, v0, 1e-7),
                (0.25, x0 - 0.8, v0, 1e-7),
                (1.0, x0, 4.0, 1e-8),
                (0.25, x0, 25.0, 1e-8),
            ] {
                let fast = kernel.lbar(tau, x, v, &ctx);
                let p = bs_point(tau, x, v);
                let slow = jump_impact(&p, RHO, &spec, 1e-11).unwrap().value;
                let scale = slow.abs().max(1e-30);
                assert!(
                    ((fast - slow) / scale).abs() < tol,
                    "{:?}: lbar mismatch at tau={tau} x={x} v={v}: {fast} vs {slow}",
                    spec.variant
                );
            }
        }
    }

    #[test]
    fn lbar_partials_match_adaptive_operator() {
        let ctx = OptionCtx::new(460.0, 0.01);
        let x0 = 468.44f64.ln();
        let v0 = 0.064262 * 0.064262;
        for spec in [ig_spec(), gamma_spec()] {
            let kernel = kernel_for(&spec, RHO);
            for (tau, x, v) in [(0.25, x0, v0), (0.05, x0 + 0.03, 0.01), (0.6, x0 - 0.1, 0.1)] {
                let fast = kernel.lbar_partials(tau, x, v, &ctx);
                let p = bs_point(tau, x, v);
                let slow = jump_impact_partials(&p, RHO, &spec, 1e-11).unwrap();
                assert_relative_eq!(fast.d_x, slow.d_x, max_relative = 1e-7);
                assert_relative_eq!(fast.d_sigma2, slow.d_sigma2, max_relative = 1e-7);
                let slow_v = jump_impact(&p, RHO, &spec, 1e-11).unwrap().value;
                assert_relative_eq!(fast.value, slow_v, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn joint_shift_integral_matches_adaptive_composition() {
        let ctx = OptionCtx::new(460.0, 0.01);
        let x0 = 468.44f64.ln();
        let v0 = 0.064262 * 0.064262;
        let tau = 0.25;
        for spec in [gamma_spec(), ig_spec()] {
            let kernel = kernel_for(&spec, RHO);
            let base = kernel.lbar(tau, x0, v0, &ctx);
            let fast = kernel.lbar_joint_shift_integral(tau, x0, v0, &ctx, base);
            let p = bs_point(tau, x0, v0);
            let slow = spec
                .integrate(
                    |z| jump_impact_shift_diff(&p, RHO, &spec, z, 1e-9).unwrap(),
                    1e-7,
                )
                .unwrap();
            assert_relative_eq!(fast, slow.value, max_relative = 2e-5);
        }
    }

    #[test]
    fn bs_shift_integrals_match_adaptive() {
        let ctx = OptionCtx::new(460.0, 0.01);
        let x0 = 468.44f64.ln();
        let v0 = 0.064262 * 0.064262;
        let tau = 0.25;
        for spec in [ig_spec(), gamma_spec()] {
            let kernel = kernel_for(&spec, RHO);
            let (total, vol) = kernel.bs_shift_integrals(tau, x0, v0, &ctx);
            let p = bs_point(tau, x0, v0);
            let slow_total = spec
                .integrate(
                    |z| {
                        shift_diff(&p, RHO * z, z).unwrap() - shift_diff(&p, RHO * z, 0.0).unwrap()
                    },
                    1e-10,
                )
                .unwrap();
            let slow_vol = spec
                .integrate(|z| shift_diff(&p, 0.0, z).unwrap(), 1e-10)
                .unwrap();
            assert_relative_eq!(total, slow_total.value, max_relative = 1e-7);
            assert_relative_eq!(vol, slow_vol.value, max_relative = 1e-7);
        }
    }

    #[test]
    fn zero_leverage_collapses() {
        let ctx = OptionCtx::new(460.0, 0.01);
        for spec in [ig_spec(), gamma_spec()] {
            let kernel = kernel_for(&spec, 0.0);
            let ev = kernel.lbar_partials(0.25, 6.1, 0.004, &ctx);
            assert_eq!((ev.value, ev.d_x, ev.d_sigma2), (0.0, 0.0, 0.0));
            assert_eq!(kernel.lbar(0.25, 6.1, 0.004, &ctx), 0.0);
            assert_eq!(
                kernel.lbar_joint_shift_integral(0.25, 6.1, 0.004, &ctx, 0.0),
                0.0
            );
            // the combined shift integral reduces to the pure variance part
            let (total, vol) = kernel.bs_shift_integrals(0.25, 6.1, 0.004, &ctx);
            assert_eq!(total, vol);
            assert!(vol > 0.0);
        }
    }

    #[test]
    fn gamma_single_atom_is_closed_form() {
        // one atom reproduces the adaptive integral to quadrature accuracy
        let spec = gamma_spec();
        let kernel = kernel_for(&spec, RHO);
        assert_eq!(kernel.rates.len(), 1);
        let ctx = OptionCtx::new(460.0, 0.01);
        let fast = kernel.lbar(0.25, 468.44f64.ln(), 0.064262 * 0.064262, &ctx);
        let p = bs_point(0.25, 468.44f64.ln(), 0.064262 * 0.064262);
        let slow = jump_impact(&p, RHO, &spec, 1e-12).unwrap();
        assert_relative_eq!(fast, slow.value, max_relative = 1e-10);
    }
}
