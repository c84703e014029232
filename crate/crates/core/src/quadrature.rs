//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// QUADPACK qk15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Error estimates below this many ulps of `int |f|` are rounding noise.
const ROUNDING_FACTOR: f64 = 50.0;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quadrature {
    pub fn into_result(self, tol: f64) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureFailure {
                tol,
                err: self.error,
            })
        }
    }
}

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
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
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Subintervals allowed before an integration is declared unconverged.
const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)` by global
/// bisection of the subinterval with the largest error estimate.
///
/// An error estimate within a small multiple of the rounding level of
/// `int |f|` also counts as converged. A non-finite integrand value is
/// returned immediately as the value of the integral, flagged as converged
/// only if it is an infinity.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (whole, err) = kronrod15(&f, a, b);
    if !whole.is_finite() {
        return Quadrature {
            value: whole,
            error: 0.0,
            converged: whole.is_infinite(),
        };
    }
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: whole,
        error: err,
    });
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let magnitude: f64 = heap.iter().map(|p| p.value.abs()).sum();
        let target = abs_tol
            .max(rel_tol * value.abs())
            .max(ROUNDING_FACTOR * f64::EPSILON * magnitude);
        if !value.is_finite() {
            return Quadrature {
                value,
                error: 0.0,
                converged: value.is_infinite(),
            };
        }
        if error <= target {
            return Quadrature {
                value,
                error,
                converged: true,
            };
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if heap.len() + 2 > MAX_INTERVALS || !(worst.a < mid && mid < worst.b) {
            heap.push(worst);
            let value = heap.iter().map(|p| p.value).sum();
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod15(&f, lo, hi);
            heap.push(Piece {
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_on_polynomials_up_to_degree_22() {
        for deg in 0..=22 {
            let (v, _) = kronrod15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_reaches_tolerance_on_peaked_integrand() {
        // int_0^3 t e^{t^2} dt = (e^9 - 1)/2
        let q = integrate(|t| t * (t * t).exp(), 0.0, 3.0, 1e-12, 1e-14);
        assert!(q.converged);
        assert_relative_eq!(q.value, (9f64.exp() - 1.0) / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn infinite_integrand_propagates() {
        let q = integrate(|t| (t * t).exp(), 0.0, 40.0, 1e-12, 1e-14);
        assert!(q.value.is_infinite());
        assert!(q.converged);
    }

    #[test]
    fn degenerate_interval() {
        let q = integrate(|t| t, 2.0, 2.0, 1e-12, 0.0);
        assert_eq!(q.value, 0.0);
    }
}
