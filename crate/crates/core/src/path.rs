//! Exact path simulation and the Monte Carlo reference price.
//!
//! Jumps of the driving subordinator are sampled exactly (compound
//! Poisson for the gamma measure, inverse tail-intensity above a
//! truncation level for the IG measure). Between jumps the squared
//! volatility follows its deterministic flow, and the log price advances
//! with the exact integrated variance over each cell, so the simulated
//! law at the grid points carries no time-discretization error.

use crate::levy::MeasureVariant;
use crate::model::{
    integrated_decay, integrated_variance, BnsParams, MarketState, ModelError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("standard error undefined with {0} paths (need at least 2)")]
    TooFewPaths(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Levy(#[from] crate::levy::LevyError),
}

/// What to do with the jump mass below the IG truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallJumpPolicy {
    /// Drop it (biases the subordinator down by the truncated mean mass).
    Discard,
    /// Add the truncated mean mass as a deterministic drift of the
    /// variance process (and of the subordinator for bound checks).
    AddDeterministicDrift,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Truncation level for IG jump sampling (ignored for gamma).
    pub ig_truncation: f64,
    pub small_jump_policy: SmallJumpPolicy,
    /// Use the realized-payoff estimator instead of integrating the
    /// Brownian part out in closed form. Kept for cross-validation.
    pub plain_estimator: bool,
    /// Optional diagnostic grid for path dumps.
    pub grid: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            ig_truncation: 1e-6,
            small_jump_policy: SmallJumpPolicy::AddDeterministicDrift,
            plain_estimator: false,
            grid: None,
        }
    }

    fn validate(&self, variant: MeasureVariant) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::InvalidConfig("n_paths must be >= 1".to_string()));
        }
        if variant == MeasureVariant::IgOu && !(self.ig_truncation > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "ig_truncation must be > 0, got {}",
                self.ig_truncation
            )));
        }
        Ok(())
    }
}

/// A realized jump record of the subordinator on an interval.
#[derive(Debug, Clone)]
pub struct JumpPath {
    /// Strictly increasing jump times.
    pub times: Vec<f64>,
    /// Positive jump sizes aligned with `times`.
    pub sizes: Vec<f64>,
    /// Truncation level used while sampling (0 for gamma).
    pub truncation_level: f64,
    /// Mean mass of the discarded small jumps per unit time.
    pub compensated_small_jump_mass: f64,
    policy: SmallJumpPolicy,
}

impl JumpPath {
    /// Drift rate actually applied to the variance process.
    pub fn drift_rate(&self) -> f64 {
        match self.policy {
            SmallJumpPolicy::AddDeterministicDrift => self.compensated_small_jump_mass,
            SmallJumpPolicy::Discard => 0.0,
        }
    }

    /// Total subordinator increment over `(t, horizon]`, including the
    /// deterministic compensation when active.
    pub fn total_increment(&self, t: f64, horizon: f64) -> f64 {
        self.sizes.iter().sum::<f64>() + self.drift_rate() * (horizon - t)
    }

    /// Exact integrated squared volatility from `(t, sigma2_t)` to the
    /// horizon.
    pub fn integrated_variance_from(
        &self,
        sigma2_t: f64,
        t: f64,
        horizon: f64,
        lambda: f64,
    ) -> Result<f64, ModelError> {
        integrated_variance(
            sigma2_t,
            t,
            horizon,
            lambda,
            &self.times,
            &self.sizes,
            self.drift_rate(),
        )
    }
}

pub(crate) enum StreamPurpose {
    Jumps = 0,
    Gaussians = 1,
}

/// Counter-based stream keyed by `(seed, path index, purpose)`, so jump
/// sampling and Gaussian draws stay independent and reproducible no
/// matter how paths are scheduled across threads.
pub(crate) fn stream_rng(seed: u64, path_idx: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_idx * 8 + purpose as u64 + 1);
    rng
}

// Knuth's product method, chunked so the exponential never underflows.
fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    debug_assert!(mean >= 0.0);
    let mut remaining = mean;
    let mut count = 0usize;
    while remaining > 0.0 {
        let chunk = remaining.min(500.0);
        remaining -= chunk;
        let limit = (-chunk).exp();
        let mut prod: f64 = 1.0;
        loop {
            prod *= 1.0 - rng.gen::<f64>();
            if prod <= limit {
                break;
            }
            count += 1;
        }
    }
    count
}

/// Samples the jumps of the subordinator on `(t0, horizon]`.
///
/// Gamma: exact compound Poisson (arrival rate `lambda a`, exponential
/// sizes of rate `b`). IG: Poisson arrivals at the truncated tail
/// intensity with sizes drawn by inverting the upper tail mass.
pub fn sample_jump_path<R: Rng>(
    params: &BnsParams,
    cfg: &SimConfig,
    t0: f64,
    rng: &mut R,
) -> Result<JumpPath, SimError> {
    cfg.validate(params.measure().variant)?;
    let horizon = params.horizon();
    let span = horizon - t0;
    if span < 0.0 {
        return Err(SimError::InvalidConfig(format!(
            "start {t0} is past the horizon {horizon}"
        )));
    }
    let measure = params.measure();
    let (trunc, small_mass, intensity) = match measure.variant {
        MeasureVariant::GammaOu => (0.0, 0.0, measure.lambda * measure.a),
        MeasureVariant::IgOu => {
            let eps = cfg.ig_truncation;
            (
                eps,
                measure.truncated_mean_mass(eps),
                measure.tail_mass(eps),
            )
        }
    };
    let n_jumps = sample_poisson(rng, intensity * span);
    let mut times: Vec<f64> = (0..n_jumps)
        .map(|_| t0 + span * (1.0 - rng.gen::<f64>()))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sizes: Vec<f64> = match measure.variant {
        MeasureVariant::GammaOu => (0..n_jumps)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln() / measure.b)
            .collect(),
        MeasureVariant::IgOu => {
            let mut sizes = Vec::with_capacity(n_jumps);
            for _ in 0..n_jumps {
                let v = 1.0 - rng.gen::<f64>();
                sizes.push(measure.invert_tail_mass(v * intensity)?);
            }
            sizes
        }
    };
    Ok(JumpPath {
        times,
        sizes,
        truncation_level: trunc,
        compensated_small_jump_mass: small_mass,
        policy: cfg.small_jump_policy,
    })
}

/// Advances a state to the horizon in one exact step, given the jump
/// path on `(state.t, horizon]` and one standard normal draw.
pub fn terminal_state(
    params: &BnsParams,
    state: &MarketState,
    jumps: &JumpPath,
    gaussian: f64,
) -> Result<MarketState, SimError> {
    let horizon = params.horizon();
    let tau = horizon - state.t;
    let lambda = params.lambda();
    let iv = jumps.integrated_variance_from(state.sigma2, state.t, horizon, lambda)?;
    let inc = jumps.total_increment(state.t, horizon);
    let x = state.x + (params.rate() + params.mu()) * tau - 0.5 * iv
        + params.rho() * inc
        + iv.sqrt() * gaussian;
    let drift = jumps.drift_rate();
    let mut sigma2 =
        crate::model::ou_decay(state.sigma2, lambda, tau) + drift * integrated_decay(lambda, tau);
    for (&tj, &zj) in jumps.times.iter().zip(&jumps.sizes) {
        sigma2 += crate::model::ou_decay(zj, lambda, horizon - tj);
    }
    Ok(MarketState {
        t: horizon,
        x,
        sigma2,
    })
}

/// Advances `cur` to time `u`, consuming jumps with times in
/// `(cur.t, u]` starting at `*jidx`, and drawing one Gaussian when the
/// cell has positive length. Exact in law at `u`.
pub(crate) fn advance_to<R: Rng>(
    params: &BnsParams,
    cur: &mut MarketState,
    jumps: &JumpPath,
    jidx: &mut usize,
    u: f64,
    rng: &mut R,
) -> Result<(), SimError> {
    if u < cur.t || u > params.horizon() {
        return Err(SimError::InvalidConfig(format!(
            "grid point {u} outside [{}, {}]",
            cur.t,
            params.horizon()
        )));
    }
    let dt = u - cur.t;
    if dt == 0.0 {
        return Ok(());
    }
    let lambda = params.lambda();
    let drift = jumps.drift_rate();
    let start = *jidx;
    let mut end = start;
    while end < jumps.times.len() && jumps.times[end] <= u {
        end += 1;
    }
    *jidx = end;
    let cell_times = &jumps.times[start..end];
    let cell_sizes = &jumps.sizes[start..end];
    let iv = integrated_variance(cur.sigma2, cur.t, u, lambda, cell_times, cell_sizes, drift)?;
    let inc: f64 = cell_sizes.iter().sum::<f64>() + drift * dt;
    let g: f64 = rng.sample(StandardNormal);
    let x = cur.x + (params.rate() + params.mu()) * dt - 0.5 * iv
        + params.rho() * inc
        + iv.sqrt() * g;
    let mut sigma2 =
        crate::model::ou_decay(cur.sigma2, lambda, dt) + drift * integrated_decay(lambda, dt);
    for (&tj, &zj) in cell_times.iter().zip(cell_sizes) {
        sigma2 += crate::model::ou_decay(zj, lambda, u - tj);
    }
    *cur = MarketState { t: u, x, sigma2 };
    Ok(())
}

/// Advances a state across a sorted grid, drawing one Gaussian per cell.
/// The law at every grid point is exact.
pub fn state_path_on_grid<R: Rng>(
    params: &BnsParams,
    state: &MarketState,
    jumps: &JumpPath,
    rng: &mut R,
    grid: &[f64],
) -> Result<Vec<MarketState>, SimError> {
    let mut out = Vec::with_capacity(grid.len());
    let mut cur = *state;
    let mut jidx = 0usize;
    for &u in grid {
        advance_to(params, &mut cur, jumps, &mut jidx, u, rng)?;
        out.push(cur);
    }
    Ok(out)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEstimate {
    pub price: f64,
    pub std_error: f64,
}

/// Mean and sample standard error, summed in index order.
pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / ((n - 1) as f64 * n as f64)).sqrt())
}

/// Discounted expected payoff given one jump path, with the Brownian
/// part integrated out in closed form.
pub(crate) fn conditional_price(
    params: &BnsParams,
    state: &MarketState,
    jumps: &JumpPath,
    strike: f64,
) -> Result<f64, SimError> {
    let horizon = params.horizon();
    let tau = horizon - state.t;
    let iv = jumps.integrated_variance_from(state.sigma2, state.t, horizon, params.lambda())?;
    let inc = jumps.total_increment(state.t, horizon);
    let m = state.x + (params.rate() + params.mu()) * tau - 0.5 * iv + params.rho() * inc;
    let sqrt_iv = iv.sqrt();
    let d1 = (m + iv - strike.ln()) / sqrt_iv;
    let d2 = d1 - sqrt_iv;
    Ok(state.x.exp() * (params.mu() * tau + params.rho() * inc).exp()
        * crate::math::normal::norm_cdf(d1)
        - strike * (-params.rate() * tau).exp() * crate::math::normal::norm_cdf(d2))
}

/// Monte Carlo price of the call struck at `strike`, seen from `state`.
///
/// The default estimator averages the conditional closed form over jump
/// paths; `cfg.plain_estimator` switches to realized payoffs.
pub fn mc_price(
    params: &BnsParams,
    state: &MarketState,
    strike: f64,
    cfg: &SimConfig,
) -> Result<PriceEstimate, SimError> {
    cfg.validate(params.measure().variant)?;
    if cfg.n_paths < 2 {
        return Err(SimError::TooFewPaths(cfg.n_paths));
    }
    if !(state.t < params.horizon()) {
        return Err(SimError::InvalidConfig(
            "pricing needs t < horizon".to_string(),
        ));
    }
    let values: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<f64, SimError> {
            let mut jump_rng = stream_rng(cfg.seed, p, StreamPurpose::Jumps);
            let jumps = sample_jump_path(params, cfg, state.t, &mut jump_rng)?;
            if cfg.plain_estimator {
                let mut grng = stream_rng(cfg.seed, p, StreamPurpose::Gaussians);
                let g: f64 = grng.sample(StandardNormal);
                let end = terminal_state(params, state, &jumps, g)?;
                let tau = params.horizon() - state.t;
                Ok((-params.rate() * tau).exp() * (end.x.exp() - strike).max(0.0))
            } else {
                conditional_price(params, state, &jumps, strike)
            }
        })
        .collect::<Result<_, _>>()?;
    let (price, std_error) = mean_se(&values);
    Ok(PriceEstimate { price, std_error })
}

/// Writes simulated paths on a grid as CSV rows
/// `(path_id, time, x, sigma2, jump_size)`, where `jump_size` is the
/// jump mass that arrived in the cell ending at `time`.
pub fn write_paths_csv<W: std::io::Write>(
    params: &BnsParams,
    cfg: &SimConfig,
    grid: &[f64],
    out: &mut W,
) -> Result<(), SimError> {
    cfg.validate(params.measure().variant)?;
    writeln!(out, "path_id,time,x,sigma2,jump_size")
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let state = params.initial_state();
    for p in 0..cfg.n_paths as u64 {
        let mut jump_rng = stream_rng(cfg.seed, p, StreamPurpose::Jumps);
        let jumps = sample_jump_path(params, cfg, state.t, &mut jump_rng)?;
        let mut grng = stream_rng(cfg.seed, p, StreamPurpose::Gaussians);
        let states = state_path_on_grid(params, &state, &jumps, &mut grng, grid)?;
        let mut prev_t = state.t;
        for s in &states {
            let cell_mass: f64 = jumps
                .times
                .iter()
                .zip(&jumps.sizes)
                .filter(|(&tj, _)| tj > prev_t && tj <= s.t)
                .map(|(_, &z)| z)
                .sum();
            writeln!(
                out,
                "{},{},{},{},{}",
                p,
                fmt_g17(s.t),
                fmt_g17(s.x),
                fmt_g17(s.sigma2),
                fmt_g17(cell_mass)
            )
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            prev_t = s.t;
        }
    }
    Ok(())
}

/// Full-precision decimal formatting (17 significant digits).
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}
