//! Globally adaptive Gauss–Kronrod (7/15 point) quadrature.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};

// Kronrod abscissae on [-1, 1] (non-negative half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SUBINTERVALS: usize = 2000;

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub subintervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Piece {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Piece { lo, hi, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Integrates `f` over the finite interval `[lo, hi]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate falls below `abs_tol`, or returns an error when the subdivision
/// budget runs out first.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64) -> Result<Integral> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(invalid(format!("integration bounds must be finite and ordered, got [{lo}, {hi}]")));
    }
    if abs_tol.is_nan() || abs_tol <= 0.0 {
        return Err(invalid("integration tolerance must be positive"));
    }
    if lo == hi {
        return Ok(Integral { value: 0.0, error_estimate: 0.0, subintervals: 0 });
    }

    let mut heap = BinaryHeap::new();
    let first = kronrod15(&f, lo, hi);
    let mut total_error = first.error;
    heap.push(first);

    while total_error > abs_tol {
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(crate::Error::Internal(format!(
                "quadrature did not reach {abs_tol:e} (estimate {total_error:e}) on [{lo}, {hi}]"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval exhausted at machine resolution; accept it
            heap.push(Piece { error: 0.0, ..worst });
            total_error = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let left = kronrod15(&f, worst.lo, mid);
        let right = kronrod15(&f, mid, worst.hi);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let value = super::sum(pieces.iter().map(|p| p.value));
    let error_estimate = pieces.iter().map(|p| p.error).sum();
    Ok(Integral { value, error_estimate, subintervals: pieces.len() })
}
