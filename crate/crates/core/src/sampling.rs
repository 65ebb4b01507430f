//! Seeded random tangent states for property checks and verification runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::ConicalDomain;
use crate::error::{Result, SprayError};
use crate::state::TangentState;

/// Where base points are drawn from before the domain filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleRegion {
    /// `|x| ≤ radius`.
    Ball { radius: f64 },
    /// `x¹ ∈ [−2, 2]`, `x² ∈ [0.2, 2]`.
    HalfPlane,
    /// The cube `[−half, half]^n`.
    Cube { half: f64 },
}

impl SampleRegion {
    /// The default region for a domain: a ball of radius 0.9 when the domain
    /// carries a ball constraint, the half-plane box when it requires
    /// `x² > 0`, otherwise `[−2, 2]^n`.
    pub fn for_domain(domain: &ConicalDomain) -> Self {
        use crate::domain::Constraint;
        if domain
            .constraints()
            .iter()
            .any(|c| matches!(c, Constraint::Ball { .. }))
        {
            SampleRegion::Ball { radius: 0.9 }
        } else if domain
            .constraints()
            .iter()
            .any(|c| matches!(c, Constraint::HalfSpace { axis: 1 }))
        {
            SampleRegion::HalfPlane
        } else {
            SampleRegion::Cube { half: 2.0 }
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        // Box–Muller pairs.
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn base_point<R: Rng>(rng: &mut R, n: usize, region: SampleRegion) -> Vec<f64> {
    match region {
        SampleRegion::Ball { radius } => {
            let d = gaussian_direction(rng, n);
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            d.into_iter().map(|a| a * r).collect()
        }
        SampleRegion::HalfPlane => {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            if n > 1 {
                x[1] = rng.random_range(0.2..2.0);
            }
            x
        }
        SampleRegion::Cube { half } => (0..n).map(|_| rng.random_range(-half..half)).collect(),
    }
}

/// `count` states inside `domain` with unit velocities in uniformly random
/// directions, drawn by rejection from `region`.
pub fn random_states<R: Rng>(
    rng: &mut R,
    domain: &ConicalDomain,
    region: SampleRegion,
    count: usize,
) -> Result<Vec<TangentState>> {
    let n = domain.dim();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * (count + 1) {
            return Err(SprayError::BadParams(
                "sampling region barely meets the domain".into(),
            ));
        }
        let x = base_point(rng, n, region);
        let y = gaussian_direction(rng, n);
        let s = TangentState::new(x, y)?;
        if domain.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

/// [`random_states`] from a fresh generator seeded with `seed`, using the
/// domain's default region.
pub fn seeded_states(domain: &ConicalDomain, count: usize, seed: u64) -> Result<Vec<TangentState>> {
    random_states(
        &mut rng(seed),
        domain,
        SampleRegion::for_domain(domain),
        count,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states_are_deterministic_and_inside() {
        let d = ConicalDomain::unit_ball(3);
        let a = seeded_states(&d, 20, 7).unwrap();
        let b = seeded_states(&d, 20, 7).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(d.contains(s));
            assert!((s.speed() - 1.0).abs() < 1e-12);
            assert!(s.x().iter().map(|v| v * v).sum::<f64>() <= 0.81 + 1e-12);
        }
        let h = seeded_states(&ConicalDomain::upper_half_plane(), 20, 1).unwrap();
        assert!(h.iter().all(|s| s.x()[1] >= 0.2));
    }
}
