//! Adaptive Gauss–Kronrod (7–15) quadrature with a global error heap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, SprayError};

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

#[derive(Clone, Copy, Debug)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integral of `f` over `[a, b]` (either orientation). Endpoints are never
/// evaluated, so integrable endpoint singularities are allowed.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    adaptive(f, a, b, settings)
}

/// [`integrate`] after the substitution `x = a + (b − a)(3u² − 2u³)`, which
/// flattens the integrand near both endpoints; inverse-square-root
/// endpoint singularities become bounded.
pub fn integrate_endpoint_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    let w = b - a;
    adaptive(
        |u| f(a + w * u * u * (3.0 - 2.0 * u)) * w * 6.0 * u * (1.0 - u),
        0.0,
        1.0,
        settings,
    )
}

fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(SprayError::QuadratureFailure("infinite limits".into()));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = kronrod(&mut f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a: lo,
        b: hi,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut err = e;
    loop {
        if !total.is_finite() {
            return Err(SprayError::QuadratureFailure("non-finite integrand".into()));
        }
        if err <= settings.abs_tol.max(settings.rel_tol * total.abs()) {
            return Ok(QuadResult {
                value: sign * total,
                error: err,
                intervals: heap.len(),
            });
        }
        if heap.len() >= settings.max_intervals {
            return Err(SprayError::QuadratureFailure(format!(
                "interval budget exhausted, error {err:e}"
            )));
        }
        let p = heap.pop().expect("heap is nonempty");
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            return Err(SprayError::QuadratureFailure(format!(
                "subinterval underflow near {m}"
            )));
        }
        let (v1, e1) = kronrod(&mut f, p.a, m);
        let (v2, e2) = kronrod(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece {
            a: p.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            value: v2,
            error: e2,
        });
        // Refresh the running sums to stop cancellation drift.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_trig() {
        let r = integrate(|x| x.powi(5) - x, 0.0, 2.0, &QuadSettings::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 2.0)).abs() < 1e-13);
        let r = integrate(
            f64::sin,
            std::f64::consts::PI,
            0.0,
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((r.value + 2.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let f = |x: f64| 1.0 / (1.0 - x * x).sqrt();
        let r = integrate_endpoint_singular(f, 0.0, 1.0, &QuadSettings::default()).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        let r = integrate(f, 0.0, 0.999, &QuadSettings::default()).unwrap();
        assert!((r.value - 0.999f64.asin()).abs() < 1e-11);
    }

    #[test]
    fn divergent_integral_fails() {
        let r = integrate(|x| 1.0 / (1.0 - x), 0.0, 1.0, &QuadSettings::default());
        assert!(matches!(r, Err(SprayError::QuadratureFailure(_))));
    }
}
