use bns_core::*;
use std::time::Instant;

fn main() {
    let m = LevyMeasureSpec::ig_ou(2.4958, 0.0872, 11.98).unwrap();
    let params = BnsParams::new(468.44, 0.064262 * 0.064262, -4.7039, 0.01, 0.25, m).unwrap();
    let state = params.initial_state();
    for seed in [7u64, 123, 2024] {
        let cfg = DecompConfig::new(SimConfig::new(100_000, seed));
        let t0 = Instant::now();
        let r = decompose(&params, &state, 460.0, &cfg).unwrap();
        println!(
            "seed {:>4}: wall {:>5.1}s  gap {:+.4e} (se {:.2e}, {:+.2}sig)  resid {:+.4e} (se {:.2e}, {:+.2}sig)",
            seed, t0.elapsed().as_secs_f64(),
            r.jump_identity_gap, r.jump_identity_gap_se, r.jump_identity_gap / r.jump_identity_gap_se,
            r.residual, r.residual_se, r.residual / r.residual_se,
        );
    }
}
