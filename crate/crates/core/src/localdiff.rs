//! Derivatives of sampled functions on nonuniform grids.
//!
//! Each node is differentiated with the 5-point Lagrange stencil formed by
//! its nearest neighbours (centred in the interior, one-sided at the ends).
//! Weights come from Fornberg's recursion, so no resampling is needed.

use crate::error::{Result, SprayError};

/// Finite-difference weights at `z` for nodes `xs`, derivative orders `0..=m`.
/// Returns `w[k][j]`, the weight of node `j` for the `k`-th derivative.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

pub const STENCIL: usize = 5;

fn window(i: usize, len: usize) -> usize {
    i.saturating_sub(STENCIL / 2).min(len - STENCIL)
}

pub fn check_grid(t: &[f64]) -> Result<()> {
    if t.len() < STENCIL {
        return Err(SprayError::TooFewSamples {
            need: STENCIL,
            got: t.len(),
        });
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SprayError::NonMonotone);
    }
    Ok(())
}

/// First and second derivatives of `f` at every node of `t`.
pub fn derivatives(t: &[f64], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(t)?;
    if f.len() != t.len() {
        return Err(SprayError::DimensionMismatch {
            expected: t.len(),
            got: f.len(),
        });
    }
    let mut d1 = Vec::with_capacity(t.len());
    let mut d2 = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let s = window(i, t.len());
        let w = fornberg_weights(t[i], &t[s..s + STENCIL], 2);
        d1.push((0..STENCIL).map(|j| w[1][j] * f[s + j]).sum());
        d2.push((0..STENCIL).map(|j| w[2][j] * f[s + j]).sum());
    }
    Ok((d1, d2))
}

/// Componentwise [`derivatives`] of vector samples `f[i][c]`.
pub fn vector_derivatives(t: &[f64], f: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_grid(t)?;
    let dim = f.first().map_or(0, Vec::len);
    let mut d1 = vec![vec![0.0; dim]; t.len()];
    let mut d2 = vec![vec![0.0; dim]; t.len()];
    for c in 0..dim {
        let col: Vec<f64> = f.iter().map(|v| v[c]).collect();
        let (a, b) = derivatives(t, &col)?;
        for i in 0..t.len() {
            d1[i][c] = a[i];
            d2[i][c] = b[i];
        }
    }
    Ok((d1, d2))
}

/// Running integral of samples from `t[0]`, using cubic Hermite pieces
/// with stencil slopes.
pub fn cumulative_integral(t: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let (d1, _) = derivatives(t, f)?;
    let mut out = vec![0.0; t.len()];
    for i in 1..t.len() {
        let h = t[i] - t[i - 1];
        out[i] = out[i - 1] + h * (f[i - 1] + f[i]) / 2.0 + h * h * (d1[i - 1] - d1[i]) / 12.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_are_classical() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn quartic_exact_on_nonuniform_grid() {
        let t: Vec<f64> = (0..12).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let f: Vec<f64> = t.iter().map(|s| s.powi(4) - 2.0 * s).collect();
        let (d1, d2) = derivatives(&t, &f).unwrap();
        for i in 0..t.len() {
            assert!((d1[i] - (4.0 * t[i].powi(3) - 2.0)).abs() < 1e-9);
            assert!((d2[i] - 12.0 * t[i] * t[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn integral_of_cosine() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let f: Vec<f64> = t.iter().map(|s| s.cos()).collect();
        let i = cumulative_integral(&t, &f).unwrap();
        assert!((i[200] - 2f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            derivatives(&[0.0, 1.0], &[0.0, 1.0]),
            Err(SprayError::TooFewSamples { .. })
        ));
        let t = [0.0, 1.0, 1.0, 2.0, 3.0];
        assert_eq!(
            derivatives(&t, &[0.0; 5]).unwrap_err(),
            SprayError::NonMonotone
        );
    }
}
