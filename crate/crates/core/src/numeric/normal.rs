//! Standard normal density, distribution and quantile functions.
//!
//! The distribution function is evaluated through `erfc` so that both tails
//! keep full relative precision. Quantiles use Wichura's AS 241 (PPND16),
//! which is accurate to about 1e-16 relative over the whole open unit
//! interval and takes the tail probability directly, so inverting a tiny
//! upper-tail mass does not lose digits to `1 - p`.

use std::f64::consts::SQRT_2;

use rand::Rng;

/// 1 / sqrt(2 pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln(sqrt(2 pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this the log-tail uses its asymptotic series.
const LOG_TAIL_SWITCH: f64 = -30.0;

#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x).
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// 1 − Φ(x), computed without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Mills-ratio series 1 − 1/x² + 3/x⁴ − 15/x⁶ + 105/x⁸ − 945/x¹⁰, valid for large |x|.
fn tail_series(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))))
}

/// ln Φ(x), finite for every finite `x`.
pub fn ln_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        (-sf(x)).ln_1p()
    } else if x > LOG_TAIL_SWITCH {
        cdf(x).ln()
    } else {
        ln_pdf(x) - (-x).ln() + tail_series(x).ln()
    }
}

/// ln(1 − Φ(x)).
#[inline]
pub fn ln_sf(x: f64) -> f64 {
    ln_cdf(-x)
}

/// Inverse Mills ratio φ(x) / (1 − Φ(x)), stable for large positive `x`.
pub fn inv_mills(x: f64) -> f64 {
    if x < -LOG_TAIL_SWITCH {
        pdf(x) / sf(x)
    } else {
        x / tail_series(x)
    }
}

/// Φ⁻¹(p). Returns ∓∞ at the endpoints and NaN outside [0, 1].
// published coefficients, kept verbatim
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_700) * r
            + 45921.953_931_549_871)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_6)
            * q;
        let den = ((((((5226.495_278_852_545_9 * r + 28729.085_735_721_943) * r + 39307.895_800_092_711) * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751_1)
            * r
            + 687.187_007_492_057_91)
            * r
            + 42.313_330_701_600_911)
            * r
            + 1.0;
        return num / den;
    }

    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_185) * r + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_100_05)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_81)
            * r
            + 0.599_832_206_555_887_94)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// The `x` with 1 − Φ(x) = `q`, accurate for tiny `q`.
#[inline]
pub fn upper_quantile(q: f64) -> f64 {
    -quantile(q)
}

/// Maps a raw 64-bit draw to a uniform on the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One exact standard-normal variate from exactly one 64-bit draw.
#[inline]
pub fn inverse_cdf_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    quantile(open_unit(rng.next_u64()))
}

/// Above this lower bound the truncated tail is sampled by rejection.
const REJECTION_SWITCH: f64 = 25.0;

/// Exact draw from N(0, 1) conditioned on `x >= lower`.
///
/// Inverse-CDF on the upper tail, so strongly truncated laws keep their
/// precision; far tails (`lower > 25`) use the exponential rejection
/// sampler of Robert (1995).
pub fn truncated_below<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower == f64::NEG_INFINITY {
        return inverse_cdf_draw(rng);
    }
    if lower > REJECTION_SWITCH {
        let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
        loop {
            let z = lower - open_unit(rng.next_u64()).ln() / rate;
            let d = z - rate;
            if open_unit(rng.next_u64()).ln() <= -0.5 * d * d {
                return z;
            }
        }
    }
    let mass = sf(lower);
    let u = open_unit(rng.next_u64());
    upper_quantile(u * mass).max(lower)
}

/// Exact draw from N(0, 1) conditioned on `x <= upper`.
#[inline]
pub fn truncated_above<R: Rng + ?Sized>(upper: f64, rng: &mut R) -> f64 {
    -truncated_below(-upper, rng)
}
