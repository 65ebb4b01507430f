//! Richardson-extrapolated central finite differences.
//!
//! Used as the independent oracle for the automatic-differentiation scheme
//! and as the fallback for fields that only evaluate in `f64`.

use crate::diffops::Jet;
use crate::error::Result;

/// Step sizes for first and second partials.
#[derive(Clone, Copy, Debug)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        // Second differences lose about eps/h² to roundoff, so they get a
        // larger step; Richardson removes the O(h²) truncation term.
        FdSteps {
            first: 1e-5,
            second: 1e-3,
        }
    }
}

/// Richardson-extrapolated central difference of a scalar function at 0.
pub fn derivative<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    let d = |f: &mut F, h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = d(&mut f, h);
    let fine = d(&mut f, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Richardson-extrapolated central second difference at 0.
pub fn second_derivative<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    let f0 = f(0.0);
    let mut d = |h: f64| (f(h) - 2.0 * f0 + f(-h)) / (h * h);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

type VecFn<'a> = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + 'a;

fn shifted(f: &VecFn, z: &[f64], n: usize, moves: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut w = z.to_vec();
    for &(m, d) in moves {
        w[m] += d;
    }
    f(&w[..n], &w[n..])
}

fn combine(terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].1.len()];
    for (c, v) in terms {
        for (o, a) in out.iter_mut().zip(v.iter()) {
            *o += c * a;
        }
    }
    out
}

/// Value, gradient and Hessian of a vector field in `z = (x, y)` by
/// Richardson-extrapolated central differences.
pub fn fd_jet(f: &VecFn, x: &[f64], y: &[f64], steps: FdSteps) -> Result<Jet<f64>> {
    let n = x.len();
    let z: Vec<f64> = x.iter().chain(y).copied().collect();
    let dim = 2 * n;
    let g = f(x, y)?;
    let out = g.len();
    let mut grad = vec![vec![0.0; dim]; out];
    let mut hess = vec![vec![vec![0.0; dim]; dim]; out];

    for m in 0..dim {
        let first = |h: f64| -> Result<Vec<f64>> {
            let p = shifted(f, &z, n, &[(m, h)])?;
            let q = shifted(f, &z, n, &[(m, -h)])?;
            Ok(combine(&[(0.5 / h, &p), (-0.5 / h, &q)]))
        };
        let h = steps.first;
        let coarse = first(h)?;
        let fine = first(0.5 * h)?;
        let d = combine(&[(4.0 / 3.0, &fine), (-1.0 / 3.0, &coarse)]);
        for i in 0..out {
            grad[i][m] = d[i];
        }
    }

    for p in 0..dim {
        for q in p..dim {
            let second = |h: f64| -> Result<Vec<f64>> {
                if p == q {
                    let a = shifted(f, &z, n, &[(p, h)])?;
                    let b = shifted(f, &z, n, &[(p, -h)])?;
                    let s = 1.0 / (h * h);
                    Ok(combine(&[(s, &a), (-2.0 * s, &g), (s, &b)]))
                } else {
                    let pp = shifted(f, &z, n, &[(p, h), (q, h)])?;
                    let pm = shifted(f, &z, n, &[(p, h), (q, -h)])?;
                    let mp = shifted(f, &z, n, &[(p, -h), (q, h)])?;
                    let mm = shifted(f, &z, n, &[(p, -h), (q, -h)])?;
                    let s = 0.25 / (h * h);
                    Ok(combine(&[(s, &pp), (-s, &pm), (-s, &mp), (s, &mm)]))
                }
            };
            let h = steps.second;
            let coarse = second(h)?;
            let fine = second(0.5 * h)?;
            let d = combine(&[(4.0 / 3.0, &fine), (-1.0 / 3.0, &coarse)]);
            for i in 0..out {
                hess[i][p][q] = d[i];
                hess[i][q][p] = d[i];
            }
        }
    }
    Ok(Jet { g, grad, hess })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_derivatives() {
        assert!((derivative(|t| (1.0 + t).exp(), 1e-3) - 1f64.exp()).abs() < 1e-10);
        assert!((second_derivative(|t| (0.5 + t).sin(), 1e-2) + 0.5f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn jet_of_polynomial() {
        // g = x0² y1 + x1 y0³
        let f = |x: &[f64], y: &[f64]| Ok(vec![x[0] * x[0] * y[1] + x[1] * y[0].powi(3)]);
        let j = fd_jet(&f, &[0.3, -0.7], &[1.1, 0.4], FdSteps::default()).unwrap();
        let g = &j.grad[0];
        assert!((g[0] - 2.0 * 0.3 * 0.4).abs() < 1e-9);
        assert!((g[1] - 1.1f64.powi(3)).abs() < 1e-9);
        assert!((g[2] + 0.7 * 3.0 * 1.21).abs() < 1e-9);
        let h = &j.hess[0];
        assert!((h[0][3] - 0.6).abs() < 1e-8);
        assert!((h[1][2] - 3.0 * 1.21).abs() < 1e-8);
        assert!((h[2][2] + 0.7 * 6.0 * 1.1).abs() < 1e-8);
        assert!(h[0][1].abs() < 1e-8);
    }
}
