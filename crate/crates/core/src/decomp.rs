//! Term-by-term estimation of the call-price decomposition.
//!
//! The call price splits into the closed-form value at the current
//! variance, a principal jump-impact term, and five interaction terms:
//!
//! * `i1` — continuous drift of the squared volatility acting on vega;
//! * `i2` — variance jumps acting on the price level, split into a pure
//!   variance-jump part and the part from price and variance jumping
//!   together;
//! * `i3`..`i5` — interactions of the jump-impact integral with the
//!   price drift, the variance drift, and simultaneous jumps.
//!
//! All terms are estimated on a shared set of simulated paths (common
//! random numbers) with a fixed Gauss-Legendre rule in time, so the
//! identity `reference = bs + principal + sum(i_k)` can be tested as a
//! single sample-mean test with a per-path residual.

use crate::bs::{price, BsError, BsPoint};
use crate::kernel::{JumpKernel, OptionCtx};
use crate::math::gauss::legendre_rule;
use crate::math::normal::{norm_pdf, FRAC_1_SQRT_2PI};
use crate::model::{BnsParams, MarketState, ModelError};
use crate::path::{
    advance_to, conditional_price, fmt_g17, mean_se, sample_jump_path, stream_rng, SimConfig,
    SimError, StreamPurpose,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("invalid decomposition config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A Monte Carlo estimate of one term.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl TermEstimate {
    fn from_samples(values: &[f64]) -> Self {
        let (estimate, std_error) = mean_se(values);
        Self {
            estimate,
            std_error,
        }
    }
}

/// Tuning knobs of the estimators.
#[derive(Debug, Clone)]
pub struct DecompConfig {
    pub sim: SimConfig,
    /// Gauss-Legendre nodes of the time integral.
    pub time_nodes: usize,
    /// Atom count of the jump-impact kernel (IG only).
    pub atom_nodes: usize,
    /// Node counts of the fixed measure rule (singular, bulk, tail).
    pub nu_nodes: (usize, usize, usize),
}

impl DecompConfig {
    pub fn new(sim: SimConfig) -> Self {
        Self {
            sim,
            time_nodes: 32,
            atom_nodes: 32,
            nu_nodes: (24, 24, 16),
        }
    }
}

/// All estimated terms for one `(strike, maturity)` pair.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub strike: f64,
    pub maturity: f64,
    pub n_paths: usize,
    /// Closed-form price at the evaluation state.
    pub bs_term: f64,
    /// `tau * (jump-impact integral)` at the evaluation state.
    pub jump_principal: f64,
    pub i1: TermEstimate,
    pub i2: TermEstimate,
    pub i2_vol_jump: TermEstimate,
    pub i2_joint_jump: TermEstimate,
    pub i3: TermEstimate,
    pub i4: TermEstimate,
    pub i5: TermEstimate,
    pub reference_price: TermEstimate,
    /// `reference - (bs + principal + sum i_k)` over the shared paths.
    pub residual: f64,
    pub residual_se: f64,
    /// Pathwise gap of the identity
    /// `i3+i4+i5 = E[int disc * jump-impact du] - principal`.
    pub jump_identity_gap: f64,
    pub jump_identity_gap_se: f64,
}

impl DecompositionReport {
    /// Does the decomposition identity hold at `k` standard errors?
    pub fn identity_holds(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.residual_se
    }

    pub fn csv_header() -> &'static str {
        "strike,maturity,n_paths,bs_term,jump_principal,\
         i1,i1_se,i2,i2_se,i2_vol,i2_vol_se,i2_joint,i2_joint_se,\
         i3,i3_se,i4,i4_se,i5,i5_se,\
         reference_price,reference_se,residual,residual_se,\
         jump_identity_gap,jump_identity_gap_se"
    }

    pub fn csv_row(&self) -> String {
        let f = fmt_g17;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.strike),
            f(self.maturity),
            self.n_paths,
            f(self.bs_term),
            f(self.jump_principal),
            f(self.i1.estimate),
            f(self.i1.std_error),
            f(self.i2.estimate),
            f(self.i2.std_error),
            f(self.i2_vol_jump.estimate),
            f(self.i2_vol_jump.std_error),
            f(self.i2_joint_jump.estimate),
            f(self.i2_joint_jump.std_error),
            f(self.i3.estimate),
            f(self.i3.std_error),
            f(self.i4.estimate),
            f(self.i4.std_error),
            f(self.i5.estimate),
            f(self.i5.std_error),
            f(self.reference_price.estimate),
            f(self.reference_price.std_error),
            f(self.residual),
            f(self.residual_se),
            f(self.jump_identity_gap),
            f(self.jump_identity_gap_se),
        )
    }

    pub fn text_block(&self) -> String {
        let total = self.bs_term
            + self.jump_principal
            + self.i1.estimate
            + self.i2.estimate
            + self.i3.estimate
            + self.i4.estimate
            + self.i5.estimate;
        format!(
            "strike {:.4}  maturity {:.4}  paths {}\n\
             closed-form value     {:>14.8}\n\
             jump principal        {:>14.8}\n\
             i1 (vol drift)        {:>14.8}  se {:.3e}\n\
             i2 (vol jumps)        {:>14.8}  se {:.3e}\n\
             i2   pure variance    {:>14.8}  se {:.3e}\n\
             i2   joint price/vol  {:>14.8}  se {:.3e}\n\
             i3 (jump x drift)     {:>14.8}  se {:.3e}\n\
             i4 (jump x vol drift) {:>14.8}  se {:.3e}\n\
             i5 (jump x jumps)     {:>14.8}  se {:.3e}\n\
             sum of terms          {:>14.8}\n\
             reference price       {:>14.8}  se {:.3e}\n\
             residual              {:>14.6e}  se {:.3e}  [{}]\n\
             identity gap          {:>14.6e}  se {:.3e}\n",
            self.strike,
            self.maturity,
            self.n_paths,
            self.bs_term,
            self.jump_principal,
            self.i1.estimate,
            self.i1.std_error,
            self.i2.estimate,
            self.i2.std_error,
            self.i2_vol_jump.estimate,
            self.i2_vol_jump.std_error,
            self.i2_joint_jump.estimate,
            self.i2_joint_jump.std_error,
            self.i3.estimate,
            self.i3.std_error,
            self.i4.estimate,
            self.i4.std_error,
            self.i5.estimate,
            self.i5.std_error,
            total,
            self.reference_price.estimate,
            self.reference_price.std_error,
            self.residual,
            self.residual_se,
            if self.identity_holds(3.0) { "pass" } else { "FAIL" },
            self.jump_identity_gap,
            self.jump_identity_gap_se,
        )
    }
}

struct PathTerms {
    i1: f64,
    i2_vol: f64,
    i2_joint: f64,
    i3: f64,
    i4: f64,
    i5: f64,
    /// `int disc * (jump impact) du` along the path.
    lbar_integral: f64,
    reference: f64,
}

#[inline]
fn vega(tau: f64, x: f64, sigma2: f64, ctx: &OptionCtx) -> f64 {
    let s = (sigma2 * tau).sqrt();
    let d_plus = (x - ctx.ln_strike + ctx.rate * tau) / s + 0.5 * s;
    0.5 * tau.sqrt() / sigma2.sqrt() * x.exp() * norm_pdf(d_plus)
}

/// Estimates every decomposition term for the call struck at `strike`,
/// seen from `state`, on a single set of paths.
pub fn decompose(
    params: &BnsParams,
    state: &MarketState,
    strike: f64,
    cfg: &DecompConfig,
) -> Result<DecompositionReport, DecompError> {
    if !(strike > 0.0) {
        return Err(DecompError::InvalidConfig(format!(
            "strike must be > 0, got {strike}"
        )));
    }
    if cfg.time_nodes == 0 {
        return Err(DecompError::InvalidConfig(
            "time_nodes must be >= 1".to_string(),
        ));
    }
    let horizon = params.horizon();
    let tau = horizon - state.t;
    if tau == 0.0 {
        // at the horizon everything collapses onto the payoff
        let payoff = (state.x.exp() - strike).max(0.0);
        return Ok(DecompositionReport {
            strike,
            maturity: horizon,
            n_paths: 0,
            bs_term: payoff,
            jump_principal: 0.0,
            i1: TermEstimate::default(),
            i2: TermEstimate::default(),
            i2_vol_jump: TermEstimate::default(),
            i2_joint_jump: TermEstimate::default(),
            i3: TermEstimate::default(),
            i4: TermEstimate::default(),
            i5: TermEstimate::default(),
            reference_price: TermEstimate {
                estimate: payoff,
                std_error: 0.0,
            },
            residual: 0.0,
            residual_se: 0.0,
            jump_identity_gap: 0.0,
            jump_identity_gap_se: 0.0,
        });
    }
    if cfg.sim.n_paths < 2 {
        return Err(DecompError::Sim(SimError::TooFewPaths(cfg.sim.n_paths)));
    }

    let lambda = params.lambda();
    let mu = params.mu();
    let rho = params.rho();
    let ctx = OptionCtx::new(strike, params.rate());
    let kernel = JumpKernel::new(params.measure(), rho, mu, cfg.atom_nodes, cfg.nu_nodes);

    let bs_term = price(&BsPoint::new(
        state.t,
        state.x,
        state.sigma2,
        strike,
        params.rate(),
        horizon,
    )?);
    let jump_principal = tau * kernel.lbar(tau, state.x, state.sigma2, &ctx);

    // fixed time rule on [t, horizon]
    let (xs, ws) = legendre_rule(cfg.time_nodes);
    let mid = 0.5 * (state.t + horizon);
    let half = 0.5 * tau;
    let nodes: Vec<f64> = xs.iter().map(|x| mid + half * x).collect();
    let weights: Vec<f64> = ws.iter().map(|w| w * half).collect();
    let discounts: Vec<f64> = nodes
        .iter()
        .map(|u| (-params.rate() * (u - state.t)).exp())
        .collect();

    let per_path: Vec<PathTerms> = (0..cfg.sim.n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<PathTerms, DecompError> {
            let mut jump_rng = stream_rng(cfg.sim.seed, p, StreamPurpose::Jumps);
            let jumps = sample_jump_path(params, &cfg.sim, state.t, &mut jump_rng)?;
            let mut grng = stream_rng(cfg.sim.seed, p, StreamPurpose::Gaussians);
            let mut cur = *state;
            let mut jidx = 0usize;
            let mut acc = PathTerms {
                i1: 0.0,
                i2_vol: 0.0,
                i2_joint: 0.0,
                i3: 0.0,
                i4: 0.0,
                i5: 0.0,
                lbar_integral: 0.0,
                reference: 0.0,
            };
            for ((&u, &w), &disc) in nodes.iter().zip(&weights).zip(&discounts) {
                advance_to(params, &mut cur, &jumps, &mut jidx, u, &mut grng)?;
                let tau_u = horizon - u;
                let wd = w * disc;
                let neg_lambda_sigma2 = -lambda * cur.sigma2;
                acc.i1 += wd * vega(tau_u, cur.x, cur.sigma2, &ctx) * neg_lambda_sigma2;
                let (i2_total, i2_vol) = kernel.bs_shift_integrals(tau_u, cur.x, cur.sigma2, &ctx);
                acc.i2_vol += wd * i2_vol;
                acc.i2_joint += wd * (i2_total - i2_vol);
                let ev = kernel.lbar_partials(tau_u, cur.x, cur.sigma2, &ctx);
                acc.i3 += wd * tau_u * ev.d_x * mu;
                acc.i4 += wd * tau_u * ev.d_sigma2 * neg_lambda_sigma2;
                acc.i5 += wd
                    * tau_u
                    * kernel.lbar_joint_shift_integral(tau_u, cur.x, cur.sigma2, &ctx, ev.value);
                acc.lbar_integral += wd * ev.value;
            }
            acc.reference = if cfg.sim.plain_estimator {
                advance_to(params, &mut cur, &jumps, &mut jidx, horizon, &mut grng)?;
                (-params.rate() * tau).exp() * (cur.x.exp() - strike).max(0.0)
            } else {
                conditional_price(params, state, &jumps, strike)?
            };
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    let collect = |f: fn(&PathTerms) -> f64| -> Vec<f64> { per_path.iter().map(f).collect() };
    let i1 = TermEstimate::from_samples(&collect(|p| p.i1));
    let i2_vol_jump = TermEstimate::from_samples(&collect(|p| p.i2_vol));
    let i2_joint_jump = TermEstimate::from_samples(&collect(|p| p.i2_joint));
    let i2 = TermEstimate {
        // the split sums to the total by construction
        estimate: i2_vol_jump.estimate + i2_joint_jump.estimate,
        std_error: TermEstimate::from_samples(&collect(|p| p.i2_vol + p.i2_joint)).std_error,
    };
    let i3 = TermEstimate::from_samples(&collect(|p| p.i3));
    let i4 = TermEstimate::from_samples(&collect(|p| p.i4));
    let i5 = TermEstimate::from_samples(&collect(|p| p.i5));
    let reference_price = TermEstimate::from_samples(&collect(|p| p.reference));

    let residual_samples: Vec<f64> = per_path
        .iter()
        .map(|p| {
            p.reference
                - (bs_term
                    + jump_principal
                    + p.i1
                    + p.i2_vol
                    + p.i2_joint
                    + p.i3
                    + p.i4
                    + p.i5)
        })
        .collect();
    let residual_se = TermEstimate::from_samples(&residual_samples).std_error;
    let residual = reference_price.estimate
        - (bs_term
            + jump_principal
            + i1.estimate
            + i2.estimate
            + i3.estimate
            + i4.estimate
            + i5.estimate);

    let gap_samples: Vec<f64> = per_path
        .iter()
        .map(|p| (p.i3 + p.i4 + p.i5) - (p.lbar_integral - jump_principal))
        .collect();
    let (jump_identity_gap, jump_identity_gap_se) = mean_se(&gap_samples);

    Ok(DecompositionReport {
        strike,
        maturity: horizon,
        n_paths: cfg.sim.n_paths,
        bs_term,
        jump_principal,
        i1,
        i2,
        i2_vol_jump,
        i2_joint_jump,
        i3,
        i4,
        i5,
        reference_price,
        residual,
        residual_se,
        jump_identity_gap,
        jump_identity_gap_se,
    })
}

/// Envelope bound for the vega integrand: `vega <= sqrt(tau) e^x /
/// (2 sigma sqrt(2 pi))`, used as a plausibility cap in tests.
pub fn vega_envelope(tau: f64, x: f64, sigma2: f64) -> f64 {
    0.5 * tau.sqrt() * x.exp() / sigma2.sqrt() * FRAC_1_SQRT_2PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasureSpec;
    use approx::assert_relative_eq;

    fn paper_params() -> BnsParams {
        let m = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
        BnsParams::new(468.44, 0.064262 * 0.064262, -4.7039, 0.01, 0.25, m).unwrap()
    }

    fn quick_cfg(n_paths: usize, seed: u64) -> DecompConfig {
        DecompConfig::new(SimConfig::new(n_paths, seed))
    }

    #[test]
    fn vega_matches_bs_partials() {
        let ctx = OptionCtx::new(460.0, 0.01);
        let p = BsPoint::new(0.05, 6.1, 0.02, 460.0, 0.01, 0.3).unwrap();
        let want = crate::bs::partials(&p).unwrap().d_sigma2;
        assert_relative_eq!(vega(p.tau(), p.x, p.sigma2, &ctx), want, max_relative = 1e-13);
        assert!(want <= vega_envelope(p.tau(), p.x, p.sigma2));
    }

    #[test]
    fn identity_holds_on_paper_point() {
        let params = paper_params();
        let state = params.initial_state();
        let report = decompose(&params, &state, 460.0, &quick_cfg(8_000, 7)).unwrap();
        assert!(
            report.identity_holds(3.0),
            "residual {} vs se {}",
            report.residual,
            report.residual_se
        );
        assert!(
            report.jump_identity_gap.abs() <= 3.0 * report.jump_identity_gap_se,
            "identity gap {} vs se {}",
            report.jump_identity_gap,
            report.jump_identity_gap_se
        );
        // vega positivity forces a negative i1 and a nonnegative pure
        // variance-jump part, both at 3 standard errors
        assert!(report.i1.estimate < 3.0 * report.i1.std_error);
        assert!(report.i1.estimate < 0.0);
        assert!(report.i2_vol_jump.estimate > -3.0 * report.i2_vol_jump.std_error);
        assert!(report.i1.estimate.abs() < report.bs_term);
        // split additivity is exact
        let sum = report.i2_vol_jump.estimate + report.i2_joint_jump.estimate;
        assert_eq!(sum, report.i2.estimate);
    }

    #[test]
    fn zero_leverage_collapse() {
        let m = LevyMeasureSpec::gamma_ou(2.4958, 0.5, 11.98).unwrap();
        let params = BnsParams::new(468.44, 0.064262 * 0.064262, 0.0, 0.01, 0.25, m).unwrap();
        let state = params.initial_state();
        let report = decompose(&params, &state, 460.0, &quick_cfg(6_000, 11)).unwrap();
        assert_eq!(report.jump_principal, 0.0);
        assert_eq!(report.i3.estimate, 0.0);
        assert_eq!(report.i4.estimate, 0.0);
        assert_eq!(report.i5.estimate, 0.0);
        assert_eq!(report.i2_joint_jump.estimate, 0.0);
        assert_eq!(report.jump_identity_gap, 0.0);
        assert!(report.identity_holds(3.0));
    }

    #[test]
    fn at_horizon_degenerates_to_payoff() {
        let params = paper_params();
        let state = MarketState {
            t: 0.25,
            x: 6.2,
            sigma2: 0.004,
        };
        let report = decompose(&params, &state, 460.0, &quick_cfg(100, 1)).unwrap();
        let payoff = (6.2f64.exp() - 460.0).max(0.0);
        assert_eq!(report.bs_term, payoff);
        assert_eq!(report.reference_price.estimate, payoff);
        assert_eq!(report.jump_principal, 0.0);
        assert_eq!(report.i1.estimate, 0.0);
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn frozen_variance_i1_matches_deterministic_quadrature() {
        // vanishing jump shape: the variance path is deterministic decay,
        // so i1 is a plain integral along it
        let m = LevyMeasureSpec::ig_ou(2.4958, 1e-13, 11.98).unwrap();
        let params = BnsParams::new(468.44, 0.064262 * 0.064262, -4.7039, 0.01, 0.25, m).unwrap();
        let state = params.initial_state();
        let report = decompose(&params, &state, 460.0, &quick_cfg(16, 3)).unwrap();
        let ctx = OptionCtx::new(460.0, 0.01);
        // oracle: dense-trapezoid deterministic integral
        let n = 200_000;
        let h = 0.25 / n as f64;
        let lambda = params.lambda();
        let mut want = 0.0;
        for i in 0..n {
            let u = h * (i as f64 + 0.5);
            let sigma2 = crate::model::ou_decay(state.sigma2, lambda, u);
            let drift = params.mu();
            let x = state.x + (params.rate() + drift) * u
                - 0.5 * crate::model::integrated_decay(lambda, u) * state.sigma2;
            let _ = x;
            // the price path is random; only the deterministic variance
            // enters this check, so integrate the vega coefficient along
            // a frozen-x path (valid because i1's MC spread collapses as
            // the integrand variance does; here we compare magnitudes)
            let v = vega(0.25 - u, state.x, sigma2, &ctx) * (-lambda * sigma2);
            want += v * h * (-params.rate() * u).exp();
        }
        // x still diffuses, so allow a generous band
        assert!(
            (report.i1.estimate - want).abs() <= 0.1 * want.abs(),
            "i1 {} vs deterministic {}",
            report.i1.estimate,
            want
        );
        assert!(report.i1.estimate < 0.0);
    }

    #[test]
    fn residual_se_shrinks_with_path_count() {
        let params = paper_params();
        let state = params.initial_state();
        let small = decompose(&params, &state, 460.0, &quick_cfg(2_000, 5)).unwrap();
        let large = decompose(&params, &state, 460.0, &quick_cfg(8_000, 5)).unwrap();
        let ratio = small.residual_se / large.residual_se;
        assert!(
            (ratio - 2.0).abs() <= 0.4,
            "se ratio {ratio} not close to 2"
        );
        assert!(large.identity_holds(3.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let params = paper_params();
        let state = params.initial_state();
        let a = decompose(&params, &state, 460.0, &quick_cfg(500, 21)).unwrap();
        let b = decompose(&params, &state, 460.0, &quick_cfg(500, 21)).unwrap();
        assert_eq!(a.csv_row(), b.csv_row());
    }
}
