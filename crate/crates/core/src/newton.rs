//! Newton's method for square nonlinear systems with LU solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SprayError};

#[derive(Clone, Copy, Debug)]
pub struct NewtonSettings {
    /// Stop once the residual norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual norm accepted when the iteration stalls before `tol`.
    pub accept: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-12,
            max_iter: 50,
            accept: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonResult {
    pub z: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solves `F(z) = 0` where `fj` returns the residual and Jacobian, or
/// `None` outside the admissible region. Steps are halved until the
/// residual decreases.
pub fn solve<F>(fj: F, z0: &[f64], settings: &NewtonSettings) -> Result<NewtonResult>
where
    F: Fn(&[f64]) -> Option<(Vec<f64>, DMatrix<f64>)>,
{
    let mut z = z0.to_vec();
    let (mut r, mut j) = fj(&z).ok_or(SprayError::NewtonDiverged(f64::INFINITY))?;
    let mut res = norm(&r);
    let mut iterations = 0;
    while res > settings.tol && iterations < settings.max_iter {
        iterations += 1;
        let rhs = -DVector::from_column_slice(&r);
        let dz = j
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(SprayError::JacobianSingular)?;
        if !dz.iter().all(|v| v.is_finite()) {
            return Err(SprayError::JacobianSingular);
        }
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-4 {
            let trial: Vec<f64> = z
                .iter()
                .zip(dz.iter())
                .map(|(a, b)| a + lambda * b)
                .collect();
            if let Some((rt, jt)) = fj(&trial) {
                let nt = norm(&rt);
                if nt.is_finite() && nt < res {
                    z = trial;
                    r = rt;
                    j = jt;
                    res = nt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if res <= settings.tol.max(settings.accept) {
        Ok(NewtonResult {
            z,
            residual: res,
            iterations,
        })
    } else {
        Err(SprayError::NewtonDiverged(res))
    }
}

/// Central-difference Jacobian of `f` at `z`.
pub fn fd_jacobian<F: Fn(&[f64]) -> Option<Vec<f64>>>(f: &F, z: &[f64]) -> Option<DMatrix<f64>> {
    let r0 = f(z)?;
    let mut j = DMatrix::zeros(r0.len(), z.len());
    let mut w = z.to_vec();
    for k in 0..z.len() {
        let h = 1e-7 * (1.0 + z[k].abs());
        w[k] = z[k] + h;
        let a = f(&w)?;
        w[k] = z[k] - h;
        let b = f(&w)?;
        w[k] = z[k];
        for i in 0..r0.len() {
            j[(i, k)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    Some(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_circle_line_intersection() {
        // x² + y² = 4, y = x + 1, from the first quadrant.
        let fj = |z: &[f64]| {
            let r = vec![z[0] * z[0] + z[1] * z[1] - 4.0, z[1] - z[0] - 1.0];
            let j = DMatrix::from_row_slice(2, 2, &[2.0 * z[0], 2.0 * z[1], -1.0, 1.0]);
            Some((r, j))
        };
        let s = solve(fj, &[1.0, 1.0], &NewtonSettings::default()).unwrap();
        let x = (-1.0 + 7f64.sqrt()) / 2.0;
        assert!((s.z[0] - x).abs() < 1e-12 && (s.z[1] - x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_and_divergent() {
        let fj = |_: &[f64]| Some((vec![1.0, 1.0], DMatrix::zeros(2, 2)));
        assert_eq!(
            solve(fj, &[0.0, 0.0], &NewtonSettings::default()).unwrap_err(),
            SprayError::JacobianSingular
        );
        // x² + 1 = 0 has no real root.
        let fj = |z: &[f64]| {
            Some((
                vec![z[0] * z[0] + 1.0],
                DMatrix::from_element(1, 1, 2.0 * z[0]),
            ))
        };
        assert!(matches!(
            solve(fj, &[0.3], &NewtonSettings::default()),
            Err(SprayError::NewtonDiverged(_))
        ));
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let f = |z: &[f64]| Some(vec![z[0].sin() * z[1], z[1].exp()]);
        let j = fd_jacobian(&f, &[0.4, 0.7]).unwrap();
        assert!((j[(0, 0)] - 0.4f64.cos() * 0.7).abs() < 1e-9);
        assert!((j[(0, 1)] - 0.4f64.sin()).abs() < 1e-9);
        assert!(j[(1, 0)].abs() < 1e-12 && (j[(1, 1)] - 0.7f64.exp()).abs() < 1e-8);
    }
}
