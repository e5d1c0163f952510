use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mlmc::{ConstantSet, EstimatorMode};
use crate::schemes::SchemeDescriptor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// How the bias/variance split `q` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QPolicy {
    /// `q = 1/2`.
    Default,
    /// `(γ-β)/(γ-β+2p)` when `β < γ`, otherwise `1/2`.
    Optimal,
    Fixed(f64),
}

impl fmt::Display for QPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QPolicy::Default => f.write_str("default"),
            QPolicy::Optimal => f.write_str("optimal"),
            QPolicy::Fixed(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantsSource {
    Pilot,
    Explicit,
}

impl ConstantsSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstantsSource::Pilot => "pilot",
            ConstantsSource::Explicit => "explicit",
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Benchmark configuration. Text form is one `key = value` per line with
/// `#` comments; see [`ExperimentConfig::set`] for the keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model_id: String,
    /// `None` selects the model's default functional.
    pub functional_id: Option<String>,
    pub eps_list: Vec<f64>,
    pub replications: u32,
    pub mode_list: Vec<EstimatorMode>,
    pub master_seed: u64,
    pub refinement: usize,
    pub q_policy: QPolicy,
    pub constants_source: ConstantsSource,
    pub pilot_levels: usize,
    pub pilot_samples: u64,
    pub explicit_standard: Option<ConstantSet>,
    pub explicit_modified: Option<ConstantSet>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model_id: "gbm".into(),
            functional_id: None,
            eps_list: eps_schedule(4),
            replications: 20,
            mode_list: vec![EstimatorMode::Standard, EstimatorMode::Modified],
            master_seed: DEFAULT_SEED,
            refinement: 2,
            q_policy: QPolicy::Default,
            constants_source: ConstantsSource::Pilot,
            pilot_levels: 5,
            pilot_samples: 10_000,
            explicit_standard: None,
            explicit_modified: None,
        }
    }
}

/// `ε = 4^{-j}` for `j = 0..=j_max`.
pub fn eps_schedule(j_max: u32) -> Vec<f64> {
    (0..=j_max).map(|j| 0.25f64.powi(j as i32)).collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, e.to_string()))
}

pub fn parse_modes(key: &str, value: &str) -> Result<Vec<EstimatorMode>, ConfigError> {
    if value == "both" {
        return Ok(vec![EstimatorMode::Standard, EstimatorMode::Modified]);
    }
    let mut modes = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mode: EstimatorMode = part.parse().map_err(|e: String| bad(key, e))?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    Ok(modes)
}

fn set_constant(c: &mut ConstantSet, key: &str, field: &str, value: &str) -> Result<(), ConfigError> {
    let v: f64 = parse_num(key, value)?;
    let slot = match field {
        "alpha" => &mut c.alpha,
        "p" => &mut c.p,
        "beta" => &mut c.beta,
        "beta_l" => &mut c.beta_l,
        "gamma" => &mut c.gamma,
        "gamma_l" => &mut c.gamma_l,
        "c1" => &mut c.c1,
        "c20" => &mut c.c20,
        "c2" => &mut c.c2,
        "c2l" => &mut c.c2l,
        "c30" => &mut c.c30,
        "c3" => &mut c.c3,
        "c3l" => &mut c.c3l,
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    };
    *slot = v;
    Ok(())
}

/// Template for explicitly configured constants of one mode.
fn explicit_template(mode: EstimatorMode) -> ConstantSet {
    let alpha = SchemeDescriptor::euler_maruyama().weak_order();
    let p = match mode {
        EstimatorMode::Standard => alpha,
        EstimatorMode::Modified => SchemeDescriptor::ri6().weak_order(),
    };
    ConstantSet::unit(alpha, p, 1.0, 1.0)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Sets one key. Keys: `model_id`, `functional_id`, `eps_list`
    /// (comma separated), `eps_min` (`ε = 4^{-j}`, `j = 0..=eps_min`),
    /// `replications`, `mode_list` (`standard`, `modified`, `both` or a
    /// comma list), `master_seed`, `M`, `q_policy` (`default`, `optimal` or
    /// a number), `constants_source` (`pilot` or `explicit`),
    /// `pilot_levels`, `pilot_samples` and `standard.<field>` /
    /// `modified.<field>` for explicit constants.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "model_id" => self.model_id = value.to_string(),
            "functional_id" => {
                self.functional_id = match value {
                    "" | "default" => None,
                    v => Some(v.to_string()),
                }
            }
            "eps_list" => {
                self.eps_list = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_, _>>()?
            }
            "eps_min" => self.eps_list = eps_schedule(parse_num(key, value)?),
            "replications" => self.replications = parse_num(key, value)?,
            "mode_list" => self.mode_list = parse_modes(key, value)?,
            "master_seed" => self.master_seed = parse_num(key, value)?,
            "M" => self.refinement = parse_num(key, value)?,
            "q_policy" => {
                self.q_policy = match value {
                    "default" => QPolicy::Default,
                    "optimal" => QPolicy::Optimal,
                    v => QPolicy::Fixed(parse_num(key, v)?),
                }
            }
            "constants_source" => {
                self.constants_source = match value {
                    "pilot" => ConstantsSource::Pilot,
                    "explicit" => ConstantsSource::Explicit,
                    _ => return Err(bad(key, "expected `pilot` or `explicit`")),
                }
            }
            "pilot_levels" => self.pilot_levels = parse_num(key, value)?,
            "pilot_samples" => self.pilot_samples = parse_num(key, value)?,
            _ => {
                let (prefix, field) = key.split_once('.').ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
                let (slot, mode) = match prefix {
                    "standard" => (&mut self.explicit_standard, EstimatorMode::Standard),
                    "modified" => (&mut self.explicit_modified, EstimatorMode::Modified),
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                };
                set_constant(slot.get_or_insert_with(|| explicit_template(mode)), key, field, value)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.eps_list.is_empty() {
            return invalid("eps_list is empty".into());
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return invalid("every eps must be positive".into());
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("eps_list must be strictly decreasing".into());
        }
        if self.replications < 1 {
            return invalid("replications must be at least 1".into());
        }
        if self.mode_list.is_empty() {
            return invalid("mode_list is empty".into());
        }
        if self.refinement < 2 {
            return invalid("M must be at least 2".into());
        }
        if let QPolicy::Fixed(q) = self.q_policy {
            if !(q > 0.0 && q < 1.0) {
                return invalid(format!("q must lie in (0, 1), got {q}"));
            }
        }
        if self.constants_source == ConstantsSource::Explicit {
            for &mode in &self.mode_list {
                match self.explicit(mode) {
                    None => return invalid(format!("no explicit constants for mode `{}`", mode.as_str())),
                    Some(c) => c.validate().map_err(|e| ConfigError::Invalid(format!("{}: {e}", mode.as_str())))?,
                }
            }
        }
        super::resolve_problem(&self.model_id, self.functional_id.as_deref())?;
        Ok(())
    }

    pub fn explicit(&self, mode: EstimatorMode) -> Option<&ConstantSet> {
        match mode {
            EstimatorMode::Standard => self.explicit_standard.as_ref(),
            EstimatorMode::Modified => self.explicit_modified.as_ref(),
        }
    }

    /// Canonical `key = value` rendering; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("model_id", self.model_id.clone());
        line("functional_id", self.functional_id.clone().unwrap_or_else(|| "default".into()));
        line(
            "eps_list",
            self.eps_list.iter().map(|e| format!("{e:e}")).collect::<Vec<_>>().join(","),
        );
        line("replications", self.replications.to_string());
        line(
            "mode_list",
            self.mode_list.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","),
        );
        line("master_seed", self.master_seed.to_string());
        line("M", self.refinement.to_string());
        line("q_policy", self.q_policy.to_string());
        line("constants_source", self.constants_source.as_str().into());
        line("pilot_levels", self.pilot_levels.to_string());
        line("pilot_samples", self.pilot_samples.to_string());
        for (prefix, c) in [("standard", &self.explicit_standard), ("modified", &self.explicit_modified)] {
            if let Some(c) = c {
                for (field, v) in constant_fields(c) {
                    line(&format!("{prefix}.{field}"), format!("{v:e}"));
                }
            }
        }
        out
    }
}

pub(crate) fn constant_fields(c: &ConstantSet) -> [(&'static str, f64); 13] {
    [
        ("alpha", c.alpha),
        ("p", c.p),
        ("beta", c.beta),
        ("beta_l", c.beta_l),
        ("gamma", c.gamma),
        ("gamma_l", c.gamma_l),
        ("c1", c.c1),
        ("c20", c.c20),
        ("c2", c.c2),
        ("c2l", c.c2l),
        ("c30", c.c30),
        ("c3", c.c3),
        ("c3l", c.c3l),
    ]
}
