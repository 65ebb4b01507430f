//! Damped Gauss–Newton (Levenberg–Marquardt) least squares with
//! finite-difference Jacobians and multi-start.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct LmSettings {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            max_iter: 300,
            ftol: 1e-20,
            xtol: 1e-15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    /// Largest absolute residual.
    pub max_abs: f64,
    pub iterations: usize,
}

fn cost_of(r: &[f64]) -> Option<f64> {
    let c: f64 = r.iter().map(|v| v * v).sum();
    c.is_finite().then_some(c)
}

fn jacobian<F: Fn(&[f64]) -> Option<Vec<f64>>>(f: &F, p: &[f64], m: usize) -> Option<DMatrix<f64>> {
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-7 * (1.0 + p[k].abs());
        q[k] = p[k] + h;
        let a = f(&q);
        q[k] = p[k] - h;
        let b = f(&q);
        q[k] = p[k];
        match (a, b) {
            (Some(a), Some(b)) if a.len() == m && b.len() == m => {
                for i in 0..m {
                    j[(i, k)] = (a[i] - b[i]) / (2.0 * h);
                }
            }
            // One-sided difference when a central stencil leaves the valid region.
            (Some(a), _) if a.len() == m => {
                let r0 = f(p)?;
                for i in 0..m {
                    j[(i, k)] = (a[i] - r0[i]) / h;
                }
            }
            (_, Some(b)) if b.len() == m => {
                let r0 = f(p)?;
                for i in 0..m {
                    j[(i, k)] = (r0[i] - b[i]) / h;
                }
            }
            _ => return None,
        }
    }
    j.iter().all(|v| v.is_finite()).then_some(j)
}

/// Minimizes `Σ r_i(p)²` from `p0`. `resid` returns `None` outside the
/// admissible parameter region. Returns `None` if `p0` is inadmissible.
pub fn levenberg_marquardt<F>(resid: F, p0: &[f64], settings: &LmSettings) -> Option<LmResult>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut p = p0.to_vec();
    let mut r = resid(&p)?;
    let m = r.len();
    let mut cost = cost_of(&r)?;
    let mut mu = 1e-3;
    let mut iterations = 0;
    if p.is_empty() {
        let max_abs = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        return Some(LmResult {
            params: p,
            cost,
            max_abs,
            iterations,
        });
    }
    'outer: while iterations < settings.max_iter && cost > 0.0 {
        iterations += 1;
        let j = match jacobian(&resid, &p, m) {
            Some(j) => j,
            None => break,
        };
        let rv = DVector::from_column_slice(&r);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * rv;
        loop {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let step = match a.lu().solve(&(-&g)) {
                Some(s) => s,
                None => {
                    mu *= 10.0;
                    if mu > 1e16 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let candidate = resid(&trial).and_then(|rt| cost_of(&rt).map(|c| (rt, c)));
            match candidate {
                Some((rt, c)) if c < cost => {
                    let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let snorm = step.norm();
                    let decrease = (cost - c) / cost;
                    p = trial;
                    r = rt;
                    cost = c;
                    mu = (mu / 3.0).max(1e-15);
                    if decrease < settings.ftol || snorm <= settings.xtol * (pnorm + settings.xtol)
                    {
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    mu *= 4.0;
                    if mu > 1e16 {
                        break 'outer;
                    }
                }
            }
        }
    }
    let max_abs = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Some(LmResult {
        params: p,
        cost,
        max_abs,
        iterations,
    })
}

/// Runs [`levenberg_marquardt`] from every start and keeps the lowest
/// maximum residual. Stops early once a fit reaches `good_enough`.
pub fn multi_start<F>(
    resid: F,
    starts: &[Vec<f64>],
    settings: &LmSettings,
    good_enough: f64,
) -> Option<LmResult>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut best: Option<LmResult> = None;
    for s in starts {
        if let Some(fit) = levenberg_marquardt(&resid, s, settings) {
            if best.as_ref().is_none_or(|b| fit.max_abs < b.max_abs) {
                best = Some(fit);
            }
        }
        if best.as_ref().is_some_and(|b| b.max_abs <= good_enough) {
            break;
        }
    }
    best
}

/// Signed log-spaced starting values: `±{0.1, 0.316, 1, 3.16}`.
pub const START_GRID: [f64; 8] = [
    -3.162_277_660_168_379,
    -1.0,
    -0.316_227_766_016_837_94,
    -0.1,
    0.1,
    0.316_227_766_016_837_94,
    1.0,
    3.162_277_660_168_379,
];

/// Cartesian product of `START_GRID` with itself `k` times.
pub fn grid_starts(k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                START_GRID.iter().map(move |&g| {
                    let mut q = p.clone();
                    q.push(g);
                    q
                })
            })
            .collect();
    }
    out
}
