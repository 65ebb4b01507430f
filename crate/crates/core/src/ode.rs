//! Dormand–Prince 5(4) with continuous output.
//!
//! Stages that leave the admissible region are treated like failed error
//! tests: the step is halved and, once accepted, not grown again. Repeated
//! halving ends in [`Stop::Underflow`], which callers use to locate
//! boundaries.

use crate::error::{Result, SprayError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSettings {
    pub atol: f64,
    pub rtol: f64,
    /// Largest allowed `|h|`; `None` for no cap.
    pub max_step: Option<f64>,
    /// Steps below `h_min_rel * max(1, |t|)` end the run.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings {
            atol: 1e-10,
            rtol: 1e-10,
            max_step: None,
            h_min_rel: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.r[0]
    }

    /// State at `t0 + θh`.
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        let [r1, r2, r3, r4, r5] = &self.r;
        let s = 1.0 - theta;
        (0..r1.len())
            .map(|i| r1[i] + theta * (r2[i] + s * (r3[i] + theta * (r4[i] + s * r5[i]))))
            .collect()
    }

    /// Time derivative of the continuous extension at `t0 + θh`.
    pub fn deriv(&self, theta: f64) -> Vec<f64> {
        let [_, r2, r3, r4, r5] = &self.r;
        let s = 1.0 - theta;
        (0..r2.len())
            .map(|i| {
                let a = r4[i] + s * r5[i];
                let b = r3[i] + theta * a;
                let c = r2[i] + s * b;
                let db = a - theta * r5[i];
                let dc = -b + s * db;
                (c + theta * dc) / self.h
            })
            .collect()
    }

    /// `θ` of an absolute time inside the step.
    pub fn theta(&self, t: f64) -> f64 {
        ((t - self.t0) / self.h).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    /// `t_end` reached.
    Reached,
    /// The step callback asked to stop.
    Callback,
    /// Step size fell below the floor, typically at a boundary.
    Underflow,
    /// Step budget exhausted.
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct OdeRun {
    pub t: f64,
    pub y: Vec<f64>,
    pub stop: Stop,
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        let w = h * c;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += w * v;
        }
    }
    out
}

fn rms_norm(e: &[f64], y0: &[f64], y1: &[f64], s: &OdeSettings) -> f64 {
    let sum: f64 = (0..e.len())
        .map(|i| {
            let sc = s.atol + s.rtol * y0[i].abs().max(y1[i].abs());
            (e[i] / sc).powi(2)
        })
        .sum();
    (sum / e.len() as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` towards `t_end`.
///
/// `inside` must hold at every stage; `on_step` sees each accepted step and
/// returns `false` to stop. `f` errors at an admissible point are fatal.
pub fn solve<F, P, C>(
    mut f: F,
    inside: P,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    settings: &OdeSettings,
    mut on_step: C,
) -> Result<OdeRun>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> bool,
    C: FnMut(&DenseStep) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    if !inside(&y) {
        return Err(SprayError::ImmediateDomainViolation);
    }
    let mut k1 = f(t, &y)?;
    let max_step = settings.max_step.unwrap_or(f64::INFINITY);
    let mut h = dir
        * initial_step(&mut f, &inside, t, &y, &k1, settings)
            .min(max_step)
            .min((t_end - t0).abs());
    let mut run = OdeRun {
        t,
        y: y.clone(),
        stop: Stop::Reached,
        accepted: 0,
        rejected: 0,
    };
    let mut cautious = false;

    loop {
        if (t_end - t) * dir <= 0.0 {
            run.stop = Stop::Reached;
            break;
        }
        if run.accepted + run.rejected >= settings.max_steps {
            run.stop = Stop::MaxSteps;
            break;
        }
        let h_floor = settings.h_min_rel * t.abs().max(1.0);
        if h.abs() < h_floor {
            run.stop = Stop::Underflow;
            break;
        }
        // Split the remainder evenly rather than finish with a sliver step.
        let rem = (t_end - t).abs();
        let last = rem <= h.abs();
        if last {
            h = t_end - t;
        } else if rem < 2.0 * h.abs() {
            h = 0.5 * (t_end - t);
        }

        let attempt = (|| -> Option<Result<(Vec<f64>, [Vec<f64>; 7])>> {
            let mut stage = |s: Vec<f64>, c: f64| -> Option<Result<Vec<f64>>> {
                if !inside(&s) {
                    return None;
                }
                Some(f(t + c * h, &s))
            };
            let k2 = match stage(axpy(&y, h, &[(A21, &k1)]), C2)? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let k3 = match stage(axpy(&y, h, &[(A31, &k1), (A32, &k2)]), C3)? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let k4 = match stage(axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), C4)? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let k5 = match stage(
                axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                C5,
            )? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let k6 = match stage(
                axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
                1.0,
            )? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let y1 = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = match stage(y1.clone(), 1.0)? {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            if y1.iter().chain(&k7).any(|v| !v.is_finite()) {
                return None;
            }
            Some(Ok((y1, [k1.clone(), k2, k3, k4, k5, k6, k7])))
        })();

        let (y1, ks) = match attempt {
            None => {
                run.rejected += 1;
                cautious = true;
                h *= 0.5;
                continue;
            }
            Some(Err(e)) => return Err(e),
            Some(Ok(v)) => v,
        };
        let [k1_, _k2, k3, k4, k5, k6, k7] = &ks;
        let err_vec = axpy(
            &vec![0.0; y.len()],
            h,
            &[(E1, k1_), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
        );
        let err = rms_norm(&err_vec, &y, &y1, settings);
        if !(err <= 1.0) {
            run.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
            continue;
        }

        let r2: Vec<f64> = y1.iter().zip(&y).map(|(a, b)| a - b).collect();
        let r3: Vec<f64> = (0..y.len()).map(|i| h * k1_[i] - r2[i]).collect();
        let r4: Vec<f64> = (0..y.len()).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
        let r5 = axpy(
            &vec![0.0; y.len()],
            h,
            &[(D1, k1_), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)],
        );
        let step = DenseStep {
            t0: t,
            h,
            r: [y.clone(), r2, r3, r4, r5],
        };

        t = if last { t_end } else { t + h };
        y = y1;
        k1 = ks[6].clone();
        run.accepted += 1;
        run.t = t;
        run.y = y.clone();

        if !on_step(&step) {
            run.stop = Stop::Callback;
            break;
        }
        if last {
            run.stop = Stop::Reached;
            break;
        }
        let mut fac = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        if cautious {
            fac = fac.min(1.0);
            cautious = false;
        }
        h = dir * (h.abs() * fac).min(max_step);
    }
    Ok(run)
}

/// Starting step from the usual two-evaluation estimate of the local scale.
fn initial_step<F, P>(f: &mut F, inside: &P, t: f64, y: &[f64], k1: &[f64], s: &OdeSettings) -> f64
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> bool,
{
    let sc: Vec<f64> = y.iter().map(|v| s.atol + s.rtol * v.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, c)| (a / c).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(k1).map(|(a, b)| a + h0 * b).collect();
    if !inside(&y1) {
        return h0;
    }
    let k2 = match f(t + h0, &y1) {
        Ok(k) => k,
        Err(_) => return h0,
    };
    let diff: Vec<f64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let s = OdeSettings::default();
        let run = solve(
            |_, y| Ok(vec![-y[0]]),
            |_| true,
            0.0,
            &[1.0],
            3.0,
            &s,
            |_| true,
        )
        .unwrap();
        assert_eq!(run.stop, Stop::Reached);
        assert!((run.y[0] - (-3f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn backwards_and_dense_output() {
        let s = OdeSettings {
            max_step: Some(0.1),
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        // y = (cos t, sin t) backwards from 0
        let run = solve(
            |_, y| Ok(vec![-y[1], y[0]]),
            |_| true,
            0.0,
            &[1.0, 0.0],
            -2.0,
            &s,
            |st| {
                let tm = st.t0 + 0.37 * st.h;
                let v = st.eval(0.37);
                let d = st.deriv(0.37);
                worst = worst
                    .max((v[0] - tm.cos()).abs())
                    .max((v[1] - tm.sin()).abs());
                worst_d = worst_d
                    .max((d[0] + tm.sin()).abs())
                    .max((d[1] - tm.cos()).abs());
                true
            },
        )
        .unwrap();
        assert!((run.t + 2.0).abs() < 1e-15);
        assert!(worst < 1e-9, "{worst}");
        assert!(worst_d < 1e-8, "{worst_d}");
    }

    #[test]
    fn boundary_ends_in_underflow() {
        // x' = 1 inside x < 1
        let s = OdeSettings::default();
        let run = solve(
            |_, _| Ok(vec![1.0]),
            |y| y[0] < 1.0,
            0.0,
            &[0.0],
            5.0,
            &s,
            |_| true,
        )
        .unwrap();
        assert_eq!(run.stop, Stop::Underflow);
        assert!((run.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_start() {
        let s = OdeSettings::default();
        let r = solve(
            |_, _| Ok(vec![1.0]),
            |y| y[0] < 1.0,
            0.0,
            &[2.0],
            5.0,
            &s,
            |_| true,
        );
        assert_eq!(r.unwrap_err(), SprayError::ImmediateDomainViolation);
    }
}
