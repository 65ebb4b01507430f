//! Conical regions of the slit tangent bundle.
//!
//! A domain is an intersection of constraints, each with a clearance
//! function that is positive inside. Membership requires every clearance to
//! exceed the interior margin. Clearances are 0-homogeneous in the velocity,
//! so the cone property holds by construction.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::state::TangentState;

pub const DEFAULT_MARGIN: f64 = 1e-12;

type ClearanceFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Constraint {
    /// Open Euclidean ball around the origin; clearance `r² - |x|²`.
    Ball { radius: f64 },
    /// `x[axis] > 0`.
    HalfSpace { axis: usize },
    /// Velocities positively parallel to `direction` are removed; clearance `1 - <ŷ, d̂>`.
    ExcludeDirection { direction: Vec<f64> },
    /// Any other 0-homogeneous clearance.
    Custom {
        name: String,
        clearance: Arc<ClearanceFn>,
    },
}

impl Constraint {
    pub fn clearance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Constraint::Ball { radius } => radius * radius - x.iter().map(|v| v * v).sum::<f64>(),
            Constraint::HalfSpace { axis } => x[*axis],
            Constraint::ExcludeDirection { direction } => {
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nd = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                let c: f64 = y.iter().zip(direction).map(|(a, b)| a * b).sum();
                1.0 - c / (ny * nd)
            }
            Constraint::Custom { clearance, .. } => clearance(x, y),
        }
    }

    /// Time derivative of the clearance along `(ẋ, ẏ)`.
    pub fn rate(&self, x: &[f64], y: &[f64], xd: &[f64], yd: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        match self {
            Constraint::Ball { .. } => -2.0 * dot(x, xd),
            Constraint::HalfSpace { axis } => xd[*axis],
            Constraint::ExcludeDirection { direction } => {
                let ny = dot(y, y).sqrt();
                let nd = dot(direction, direction).sqrt();
                let c = dot(y, direction);
                -(dot(yd, direction) / ny - c * dot(y, yd) / ny.powi(3)) / nd
            }
            Constraint::Custom { clearance, .. } => {
                let h = 1e-7;
                let shift = |e: f64| -> (Vec<f64>, Vec<f64>) {
                    (
                        x.iter().zip(xd).map(|(a, b)| a + e * b).collect(),
                        y.iter().zip(yd).map(|(a, b)| a + e * b).collect(),
                    )
                };
                let (xp, yp) = shift(h);
                let (xm, ym) = shift(-h);
                (clearance(&xp, &yp) - clearance(&xm, &ym)) / (2.0 * h)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Constraint::Ball { radius } => format!("|x| < {radius}"),
            Constraint::HalfSpace { axis } => format!("x{} > 0", axis + 1),
            Constraint::ExcludeDirection { direction } => format!("y not along {direction:?}"),
            Constraint::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Clone, Debug)]
pub struct ConicalDomain {
    dim: usize,
    constraints: Vec<Constraint>,
    margin: f64,
}

#[derive(Debug, Serialize)]
pub struct DomainSummary {
    pub dim: usize,
    pub constraints: Vec<String>,
    pub margin: f64,
}

impl ConicalDomain {
    /// All of the slit tangent bundle over n-space.
    pub fn whole(dim: usize) -> Self {
        ConicalDomain {
            dim,
            constraints: Vec::new(),
            margin: DEFAULT_MARGIN,
        }
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::whole(dim).with(Constraint::Ball { radius: 1.0 })
    }

    pub fn upper_half_plane() -> Self {
        Self::whole(2).with(Constraint::HalfSpace { axis: 1 })
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn is_bounded_by_constraints(&self) -> bool {
        !self.constraints.is_empty()
    }

    /// Smallest clearance, `+inf` for the whole space.
    pub fn clearance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.clearance(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// The smallest clearance and its rate along `(ẋ, ẏ)`.
    pub fn clearance_with_rate(&self, x: &[f64], y: &[f64], xd: &[f64], yd: &[f64]) -> (f64, f64) {
        self.constraints
            .iter()
            .map(|c| (c.clearance(x, y), c.rate(x, y, xd, yd)))
            .fold((f64::INFINITY, 0.0), |best, cur| {
                if cur.0 < best.0 {
                    cur
                } else {
                    best
                }
            })
    }

    pub fn contains_raw(&self, x: &[f64], y: &[f64]) -> bool {
        if x.len() != self.dim || y.len() != self.dim {
            return false;
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) || y.iter().all(|&v| v == 0.0) {
            return false;
        }
        self.clearance(x, y) > self.margin
    }

    pub fn contains(&self, s: &TangentState) -> bool {
        self.contains_raw(s.x(), s.y())
    }

    /// Intersection of two regions over the same space.
    pub fn intersect(&self, other: &ConicalDomain) -> ConicalDomain {
        let mut constraints = self.constraints.clone();
        for c in &other.constraints {
            let dup = constraints.iter().any(|d| d.describe() == c.describe());
            if !dup {
                constraints.push(c.clone());
            }
        }
        ConicalDomain {
            dim: self.dim,
            constraints,
            margin: self.margin.max(other.margin),
        }
    }

    pub fn summary(&self) -> DomainSummary {
        DomainSummary {
            dim: self.dim,
            constraints: self.constraints.iter().map(Constraint::describe).collect(),
            margin: self.margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership_respects_margin() {
        let d = ConicalDomain::unit_ball(2);
        assert!(d.contains_raw(&[0.5, 0.0], &[1.0, 0.0]));
        assert!(!d.contains_raw(&[1.0, 0.0], &[1.0, 0.0]));
        assert!(!d.contains_raw(&[1.0 - 1e-13, 0.0], &[1.0, 0.0]));
        assert!(!d.contains_raw(&[0.0, 0.0], &[0.0, 0.0]));
    }

    #[test]
    fn excluded_direction_is_conical() {
        let d = ConicalDomain::upper_half_plane().with(Constraint::ExcludeDirection {
            direction: vec![0.0, 1.0],
        });
        assert!(!d.contains_raw(&[0.0, 1.0], &[0.0, 3.0]));
        assert!(d.contains_raw(&[0.0, 1.0], &[0.0, -3.0]));
        for lambda in [0.5, 2.0, 10.0] {
            assert!(d.contains_raw(&[0.3, 0.2], &[lambda * 0.1, lambda * 1.0]));
        }
    }

    #[test]
    fn rates_match_finite_differences() {
        let x = [0.3, 0.4];
        let y = [0.5, -0.2];
        let (xd, yd) = ([0.7, 0.1], [-0.3, 0.6]);
        let cons = [
            Constraint::Ball { radius: 1.0 },
            Constraint::HalfSpace { axis: 1 },
            Constraint::ExcludeDirection {
                direction: vec![0.0, 1.0],
            },
        ];
        for c in &cons {
            let h = 1e-6;
            let at = |e: f64| {
                let xs: Vec<f64> = x.iter().zip(&xd).map(|(a, b)| a + e * b).collect();
                let ys: Vec<f64> = y.iter().zip(&yd).map(|(a, b)| a + e * b).collect();
                c.clearance(&xs, &ys)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((c.rate(&x, &y, &xd, &yd) - fd).abs() < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn intersection_keeps_both() {
        let d = ConicalDomain::unit_ball(2).intersect(&ConicalDomain::upper_half_plane());
        assert!(d.contains_raw(&[0.0, 0.5], &[1.0, 0.0]));
        assert!(!d.contains_raw(&[0.0, -0.5], &[1.0, 0.0]));
        assert!(!d.contains_raw(&[0.0, 1.5], &[1.0, 0.0]));
    }
}
