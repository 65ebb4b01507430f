//! Projective completion of sprays with finite maximal intervals.
//!
//! If every geodesic of `G` lives on an interval `(a, b)` of its affine
//! parameter `t`, a reparameterization `s(t)` that sends the finite ends to
//! `±∞` defines the projectively related spray `Ḡ = G + P y` with
//! `P = ½ s''(0)/s'(0)`. Only `(a, b)` come from probing; `P` follows from
//! the closed form of the chosen map.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Result, SprayError};
use crate::field::SprayField;
use crate::geodesics::{self, EndpointStatus, IntervalEstimate, ProbeSettings};
use crate::state::TangentState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReparamStrategy {
    /// `s = ln(1 − t/a)`: completes the negative end.
    LnLeft,
    /// `s = −ln(1 − t/b)`: completes the positive end.
    LnRight,
    /// `s = ln((1 − t/a)/(1 − t/b))`: completes both ends.
    LnTwoSided,
    /// `s = tan(k(t − m)) + tan(k m)`, `k = π/(b − a)`, `m = (a + b)/2`.
    TanTwoSided,
}

impl ReparamStrategy {
    pub const ALL: [ReparamStrategy; 4] = [
        ReparamStrategy::LnLeft,
        ReparamStrategy::LnRight,
        ReparamStrategy::LnTwoSided,
        ReparamStrategy::TanTwoSided,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            ReparamStrategy::LnLeft => "ln-left",
            ReparamStrategy::LnRight => "ln-right",
            ReparamStrategy::LnTwoSided => "ln-two-sided",
            ReparamStrategy::TanTwoSided => "tan-two-sided",
        }
    }

    pub fn needs_left(self) -> bool {
        !matches!(self, ReparamStrategy::LnRight)
    }

    pub fn needs_right(self) -> bool {
        !matches!(self, ReparamStrategy::LnLeft)
    }

    /// Whether the map is valid for the interval `(a, b)`.
    fn admits(self, a: f64, b: f64) -> bool {
        let left = a < 0.0 && a.is_finite();
        let right = b > 0.0 && b.is_finite();
        (!self.needs_left() || left) && (!self.needs_right() || right)
    }

    /// `s(t)` on `(a, b)`; the unused end may be infinite.
    pub fn s(self, a: f64, b: f64, t: f64) -> f64 {
        match self {
            ReparamStrategy::LnLeft => (-t / a).ln_1p(),
            ReparamStrategy::LnRight => -(-t / b).ln_1p(),
            ReparamStrategy::LnTwoSided => (-t / a).ln_1p() - (-t / b).ln_1p(),
            ReparamStrategy::TanTwoSided => {
                let (k, m) = (std::f64::consts::PI / (b - a), 0.5 * (a + b));
                (k * (t - m)).tan() + (k * m).tan()
            }
        }
    }

    /// `s'(t)`.
    pub fn s_prime(self, a: f64, b: f64, t: f64) -> f64 {
        match self {
            ReparamStrategy::LnLeft => 1.0 / (t - a),
            ReparamStrategy::LnRight => 1.0 / (b - t),
            ReparamStrategy::LnTwoSided => 1.0 / (t - a) + 1.0 / (b - t),
            ReparamStrategy::TanTwoSided => {
                let (k, m) = (std::f64::consts::PI / (b - a), 0.5 * (a + b));
                k / (k * (t - m)).cos().powi(2)
            }
        }
    }

    /// `P = ½ s''(0)/s'(0)`.
    pub fn factor(self, a: f64, b: f64) -> f64 {
        match self {
            ReparamStrategy::LnLeft => 0.5 / a,
            ReparamStrategy::LnRight => 0.5 / b,
            ReparamStrategy::LnTwoSided => 0.5 * (1.0 / a + 1.0 / b),
            ReparamStrategy::TanTwoSided => {
                let k = std::f64::consts::PI / (b - a);
                k * (-k * 0.5 * (a + b)).tan()
            }
        }
    }
}

impl fmt::Display for ReparamStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReparamStrategy {
    type Err = SprayError;

    /// Accepts the command-line names and their snake_case spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        ReparamStrategy::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| SprayError::UnknownLabel(s.to_string()))
    }
}

fn status_name(s: EndpointStatus) -> String {
    match s {
        EndpointStatus::Blowup => "blowup",
        EndpointStatus::DomainExit => "domain_exit",
        EndpointStatus::HorizonReached => "horizon_reached",
    }
    .to_string()
}

fn check_pattern(strategy: ReparamStrategy, iv: &IntervalEstimate) -> Result<()> {
    let left_ok = !strategy.needs_left() || iv.left_finite();
    let right_ok = !strategy.needs_right() || iv.right_finite();
    if left_ok && right_ok && strategy.admits(iv.a, iv.b) {
        Ok(())
    } else {
        Err(SprayError::WrongIntervalPattern {
            strategy: strategy.name().to_string(),
            left: status_name(iv.left_status),
            right: status_name(iv.right_status),
        })
    }
}

fn probe(
    spray: &SprayField,
    state: &TangentState,
    settings: &ProbeSettings,
) -> Result<IntervalEstimate> {
    geodesics::probe_maximal_interval(spray, state, settings).map_err(|e| match e {
        SprayError::ProbeFailure(_) => e,
        other => SprayError::ProbeFailure(other.to_string()),
    })
}

/// `P(x, y)` of the completion at one state, from the probed interval.
pub fn completion_factor(
    spray: &SprayField,
    state: &TangentState,
    strategy: ReparamStrategy,
    settings: &ProbeSettings,
) -> Result<f64> {
    let iv = probe(spray, state, settings)?;
    check_pattern(strategy, &iv)?;
    Ok(strategy.factor(iv.a, iv.b))
}

#[derive(Clone, Debug)]
pub struct CompletionSettings {
    pub probe: ProbeSettings,
    /// States whose interval pattern is checked before construction.
    pub sample_states: Vec<TangentState>,
    /// Grid used to key the memoization cache; `None` disables caching.
    pub cache_resolution: Option<f64>,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        CompletionSettings {
            probe: ProbeSettings::default(),
            sample_states: Vec::new(),
            cache_resolution: Some(1e-9),
        }
    }
}

type Cache = Mutex<HashMap<Vec<i64>, f64>>;

fn rounded(v: &[f64], res: f64) -> Option<Vec<i64>> {
    v.iter()
        .map(|a| {
            let k = (a / res).round();
            (k.abs() < 9e18).then_some(k as i64)
        })
        .collect()
}

/// `G + P y` with `P` from [`completion_factor`] at every evaluation. With a
/// cache resolution, `P` is computed at the state rounded to that grid and
/// memoized, so values depend only on the key.
pub fn make_complete(
    spray: &SprayField,
    strategy: ReparamStrategy,
    settings: &CompletionSettings,
) -> Result<SprayField> {
    for s in &settings.sample_states {
        completion_factor(spray, s, strategy, &settings.probe)?;
    }
    let base = spray.clone();
    let probe_settings = settings.probe;
    let resolution = settings.cache_resolution;
    let cache: Arc<Cache> = Arc::new(Mutex::new(HashMap::new()));
    let label = format!("completed:{}+{}", spray.label(), strategy.name());
    let factor_at = move |x: &[f64], y: &[f64]| -> Result<f64> {
        let key = resolution.and_then(|r| rounded(&[x, y].concat(), r).map(|k| (k, r)));
        let Some((key, r)) = key else {
            let s = TangentState::new(x.to_vec(), y.to_vec())?;
            return completion_factor(&base, &s, strategy, &probe_settings);
        };
        if let Some(p) = cache.lock().expect("cache lock").get(&key) {
            return Ok(*p);
        }
        let n = x.len();
        let xs: Vec<f64> = key[..n].iter().map(|k| *k as f64 * r).collect();
        let ys: Vec<f64> = key[n..].iter().map(|k| *k as f64 * r).collect();
        let s = TangentState::new(xs, ys)?;
        let p = completion_factor(&base, &s, strategy, &probe_settings)?;
        // Identical keys always produce identical values, so racing inserts agree.
        cache.lock().expect("cache lock").insert(key, p);
        Ok(p)
    };
    let inner = spray.clone();
    SprayField::numeric(
        label,
        spray.params().clone(),
        spray.domain().clone(),
        move |x, y| {
            let g = inner.eval_raw(x, y)?;
            let p = factor_at(x, y)?;
            Ok(g.iter().zip(y).map(|(gi, yi)| gi + p * yi).collect())
        },
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessEntry {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub forward: bool,
    pub backward: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessReport {
    pub spray: String,
    pub horizon: f64,
    pub entries: Vec<CompletenessEntry>,
    pub positively_complete: bool,
    pub negatively_complete: bool,
    /// Every sample reaches the horizon both ways.
    pub complete: bool,
    /// No sample reaches the horizon in either direction.
    pub incomplete_both_ways: bool,
}

/// Probes every sample and records which ends reach the horizon.
pub fn verify_complete(
    spray: &SprayField,
    samples: &[TangentState],
    horizon: f64,
    settings: &ProbeSettings,
) -> Result<CompletenessReport> {
    let probe_settings = ProbeSettings {
        horizon,
        ..*settings
    };
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let iv = probe(spray, s, &probe_settings)?;
        entries.push(CompletenessEntry {
            x: s.x().to_vec(),
            y: s.y().to_vec(),
            a: iv.a,
            b: iv.b,
            forward: !iv.right_finite(),
            backward: !iv.left_finite(),
        });
    }
    let positively_complete = entries.iter().all(|e| e.forward);
    let negatively_complete = entries.iter().all(|e| e.backward);
    Ok(CompletenessReport {
        spray: spray.label().to_string(),
        horizon,
        positively_complete,
        negatively_complete,
        complete: positively_complete && negatively_complete,
        incomplete_both_ways: entries.iter().all(|e| !e.forward && !e.backward),
        entries,
    })
}
