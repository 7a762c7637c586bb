//! Standard normal density and distribution function.
//!
//! The CDF is evaluated through a rational-approximation complementary
//! error function (Cody's three-region scheme, the same one used by the
//! classic CALERF routines). Relative accuracy is close to machine
//! precision over the whole range, including the far tails that show up
//! when quadrature nodes land deep out of the money. The scaled variant
//! `erfcx` reuses the same rationals without the exponential factor; the
//! operator kernels lean on it to avoid overflow in tilted Gaussian
//! integrals.

/// 1 / sqrt(2 pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

// Cody's coefficients: erf on [0, 0.46875].
const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];

// scaled erfc on (0.46875, 4].
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_5e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];

// scaled erfc asymptotic factor on (4, inf).
const P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_460_5e0,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

// erf(x) for |x| <= 0.46875
#[inline]
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

// e^{y^2} erfc(y) for y > 0.46875
#[inline]
fn erfcx_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else {
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let result = if y < 26.6 {
        exp_mxsq(y) * erfcx_tail(y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Scaled complementary error function `e^{y^2} erfc(y)` for `y >= 0`.
///
/// Stays order `1/y` for large arguments instead of underflowing.
pub fn erfcx(y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    if y <= 0.46875 {
        (y * y).exp() * (1.0 - erf_small(y))
    } else {
        erfcx_tail(y)
    }
}

// exp(-y^2) split so the squared argument keeps full precision for large y.
#[inline]
fn exp_mxsq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal probability density function.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arithmetic.
    #[test]
    fn erfc_matches_reference() {
        let cases = [
            (0.0, 1.0),
            (0.1, 0.88753708398171511),
            (0.46875, 0.50738652678206201),
            (0.5, 0.47950012218695346),
            (1.0, 0.15729920705028513),
            (2.0, 0.0046777349810472658),
            (3.9, 3.4792248597231742e-8),
            (4.0, 1.5417257900280019e-8),
            (6.0, 2.1519736712498913e-17),
            (10.0, 2.0884875837625448e-45),
            (26.0, 5.6631924088561428e-296),
            (-0.3, 1.3286267594591274),
            (-1.5, 1.9661051464753107),
            (-4.5, 1.999999999803384),
            (-8.0, 2.0),
        ];
        for (x, want) in cases {
            let got = erfc(x);
            let rel = if want != 0.0 {
                ((got - want) / want).abs()
            } else {
                got.abs()
            };
            assert!(rel < 5e-15, "erfc({x}) = {got}, want {want}, rel {rel}");
        }
    }

    #[test]
    fn erfcx_consistent_with_erfc() {
        for y in [0.0f64, 0.1, 0.46875, 0.5, 1.0, 2.5, 4.0, 6.0, 10.0, 25.0] {
            let want = (y * y).exp() * erfc(y);
            let got = erfcx(y);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "erfcx({y}) = {got}, want {want}"
            );
        }
        // far tail follows the asymptotic series ~ 1/(y sqrt(pi))
        for y in [50.0, 1e3, 1e6] {
            let lead = 1.0 / (y * std::f64::consts::PI.sqrt());
            let got = erfcx(y);
            assert!(((got - lead) / lead).abs() < 1.0 / (y * y));
        }
    }

    #[test]
    fn norm_cdf_matches_reference() {
        let cases = [
            (0.0, 0.5),
            (0.31, 0.62171952182201928),
            (1.0, 0.84134474606854295),
            (-1.0, 0.15865525393145705),
            (2.5, 0.99379033467422386),
            (-2.5, 0.0062096653257761352),
            (5.0, 0.99999971334842812),
            (-5.0, 2.8665157187919391e-7),
            (-10.0, 7.6198530241605261e-24),
            (8.0, 0.99999999999999938),
            (-37.0, 5.7255712225245768e-300),
        ];
        for (x, want) in cases {
            let got = norm_cdf(x);
            let rel = ((got - want) / want).abs();
            let tol = if x.abs() > 30.0 { 1e-12 } else { 5e-15 };
            assert!(rel < tol, "norm_cdf({x}) = {got}, want {want}, rel {rel}");
        }
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in 0..=200 {
            let x = -10.0 + 0.1 * i as f64;
            let p = norm_cdf(x);
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn pdf_normalization() {
        // trapezoid over [-12, 12] is plenty for 1e-12
        let n = 48_000;
        let h = 24.0 / n as f64;
        let mut s = 0.5 * (norm_pdf(-12.0) + norm_pdf(12.0));
        for i in 1..n {
            s += norm_pdf(-12.0 + h * i as f64);
        }
        assert!((s * h - 1.0).abs() < 1e-12);
    }
}
