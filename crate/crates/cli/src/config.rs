//! Run configuration, read from JSON.
//!
//! ```json
//! {
//!   "spray":   { "label": "semicircle", "params": {} },
//!   "factor":  { "label": "funk", "params": { "c": 0.5 } },
//!   "initial": { "x": [0.0, 1.0], "y": [1.0, 0.0] },
//!   "t_span":  [0.0, 2.0],
//!   "settings": { "integrator": {}, "probe": {}, "samples": 20, "seed": 42 }
//! }
//! ```
//!
//! Every key except `spray` is optional. Defaults: no factor, no initial
//! state, `t_span = [0, horizon]` with `horizon = 1`, core integrator and
//! probe defaults, `samples = 20`, `seed = 42`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use spraylab::completeness::{self, CompletionSettings};
use spraylab::pathspace::{self, PathFamily};
use spraylab::{
    catalog, IntegratorSettings, Params, ProbeSettings, ProjectiveFactor, ReparamStrategy,
    SprayField, TangentState,
};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 20;
pub const DEFAULT_HORIZON: f64 = 1.0;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spray: LabelSpec,
    #[serde(default)]
    pub factor: Option<LabelSpec>,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub t_span: Option<[f64; 2]>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub settings: RunSettings,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub label: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub integrator: IntegratorSettings,
    pub probe: ProbeSettings,
    pub samples: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            integrator: IntegratorSettings::default(),
            probe: ProbeSettings::default(),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.t_span.is_some() && cfg.horizon.is_some() {
            return Err(CliError::Config(
                "give either `t_span` or `horizon`, not both".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn initial_state(&self) -> Result<TangentState, CliError> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `initial` state".into()))?;
        TangentState::new(init.x.clone(), init.y.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Integration span `[t0, t1]`; `t0` must be 0 and `t1` nonzero.
    pub fn span(&self) -> Result<(f64, f64), CliError> {
        let (t0, t1) = match (self.t_span, self.horizon) {
            (Some([a, b]), _) => (a, b),
            (None, Some(h)) => (0.0, h),
            (None, None) => (0.0, DEFAULT_HORIZON),
        };
        if t0 != 0.0 || t1 == 0.0 || !t1.is_finite() {
            return Err(CliError::Config(
                "t_span must start at 0 and end at a finite nonzero time".into(),
            ));
        }
        Ok((t0, t1))
    }

    pub fn factor(&self) -> Result<ProjectiveFactor, CliError> {
        let f = self
            .factor
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `factor`".into()))?;
        catalog::named_factor(&f.label, &f.params).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Spray addressed by a catalog label, `pathspace:<family>` or
/// `completed:<base>+<strategy>`.
pub fn resolve_spray(entry: &LabelSpec) -> Result<SprayField, CliError> {
    let params: Params = entry.params.clone();
    if let Some(family) = entry.label.strip_prefix("pathspace:") {
        let fam =
            PathFamily::builtin(family, &params).map_err(|e| CliError::Config(e.to_string()))?;
        return pathspace::construct_spray(&fam).map_err(CliError::Computation);
    }
    if let Some(rest) = entry.label.strip_prefix("completed:") {
        let (base, strategy) = rest.split_once('+').ok_or_else(|| {
            CliError::Config(format!(
                "expected `completed:<base>+<strategy>`, got `{}`",
                entry.label
            ))
        })?;
        let strategy: ReparamStrategy = strategy
            .parse()
            .map_err(|e: spraylab::SprayError| CliError::Config(e.to_string()))?;
        let base =
            catalog::named_spray(base, &params).map_err(|e| CliError::Config(e.to_string()))?;
        return completeness::make_complete(&base, strategy, &CompletionSettings::default())
            .map_err(CliError::Computation);
    }
    catalog::named_spray(&entry.label, &params).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_configs() {
        let cfg = RunConfig::from_json(r#"{"spray": {"label": "flat"}}"#).unwrap();
        assert_eq!(cfg.settings.seed, DEFAULT_SEED);
        assert_eq!(cfg.span().unwrap(), (0.0, DEFAULT_HORIZON));
        let cfg = RunConfig::from_json(
            r#"{"spray": {"label": "funk_scaled", "params": {"c": 0.25}},
                "initial": {"x": [0, 0], "y": [1, 0]}, "horizon": 3,
                "settings": {"integrator": {"atol": 1e-9}, "seed": 7}}"#,
        )
        .unwrap();
        assert_eq!(cfg.settings.integrator.atol, 1e-9);
        assert_eq!(
            cfg.settings.integrator.rtol,
            IntegratorSettings::default().rtol
        );
        assert_eq!(cfg.span().unwrap(), (0.0, 3.0));
    }

    #[test]
    fn rejects_unknown_keys() {
        for text in [
            r#"{"spray": {"label": "flat"}, "bogus": 1}"#,
            r#"{"spray": {"label": "flat", "colour": "red"}}"#,
            r#"{"spray": {"label": "flat"}, "settings": {"integrator": {"speed": 1}}}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn resolves_every_label_kind() {
        let entry = |label: &str| LabelSpec {
            label: label.into(),
            params: BTreeMap::new(),
        };
        assert_eq!(
            resolve_spray(&entry("semicircle")).unwrap().label(),
            "semicircle"
        );
        assert!(resolve_spray(&entry("pathspace:semicircles")).is_ok());
        let done = resolve_spray(&entry("completed:flat_ball+ln-two-sided")).unwrap();
        assert_eq!(done.label(), "completed:flat_ball+ln-two-sided");
        assert!(matches!(
            resolve_spray(&entry("completed:flat_ball")),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            resolve_spray(&entry("nope")),
            Err(CliError::Config(_))
        ));
    }
}
