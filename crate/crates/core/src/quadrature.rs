//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! Infinite endpoints are mapped onto finite ones (`x = a + t/(1-t)` and
//! `x = t/(1-t²)`); Kronrod nodes never touch the interval ends, so the
//! singular Jacobian at `t = ±1` is never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 0.0,
            rel: 1e-13,
            max_intervals: 4000,
        }
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Single 21-point Kronrod rule on `[a, b]`, exact for polynomials of degree 31.
pub(crate) fn kronrod21<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    kronrod(&mut f, a, b).0
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn adaptive_finite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadratureResult {
    let (value, error) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 21;
    loop {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            return QuadratureResult { value: total, abs_error: total_err, evaluations, converged: true };
        }
        if heap.len() >= tol.max_intervals {
            break;
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod(&mut f, worst.a, mid);
        let (rv, re) = kronrod(&mut f, mid, worst.b);
        evaluations += 42;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed accumulated round-off from the running totals.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    QuadratureResult { value, abs_error, evaluations, converged: false }
}

/// Integrates `f` over `[a, b]`; either endpoint may be infinite.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadratureResult {
    if a == b {
        return QuadratureResult { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
    }
    if a > b {
        let r = integrate(f, b, a, tol);
        return QuadratureResult { value: -r.value, ..r };
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive_finite(f, a, b, tol),
        (true, false) => adaptive_finite(
            |t| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => adaptive_finite(
            |t| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => adaptive_finite(
            |t| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            -1.0,
            1.0,
            tol,
        ),
    }
}

/// Integration with the default tolerance (relative `1e-13`).
pub fn quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, Tolerance::default()).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        // ∫_{-1}^{1} x^30 = 2/31
        let (v, _) = kronrod(&mut |x: f64| x.powi(30), -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
        let (v, _) = kronrod(&mut |x: f64| x.powi(31) + 1.0, -1.0, 1.0);
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        let s: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((s - 2.0).abs() < 1e-15);
        let k: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((k - 2.0).abs() < 1e-15);
    }

    #[test]
    fn semi_infinite_and_full_line() {
        let v = quad(|x: f64| (-x * x / 2.0).exp(), f64::NEG_INFINITY, f64::INFINITY);
        assert!((v / (2.0 * std::f64::consts::PI).sqrt() - 1.0).abs() < 1e-13);
        let v = quad(|x: f64| (-x).exp(), 1.0, f64::INFINITY);
        assert!((v / (-1.0f64).exp() - 1.0).abs() < 1e-13);
        let v = quad(|x: f64| x.exp(), f64::NEG_INFINITY, 0.0);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn kinks_are_resolved_adaptively() {
        let v = quad(|x: f64| x.abs(), -1.0, 2.0);
        assert!((v - 2.5).abs() < 1e-12);
    }
}
