//! Strict flat config files.
//!
//! ```text
//! # comment
//! [objective]
//! kind = quadratic
//! dim = 100
//!
//! [estimator]
//! kind = zoar
//! n = [1, 6]      # lists are only accepted by `sweep`
//! ```
//!
//! Every key belongs to one of the sections `objective`, `estimator`,
//! `optimizer` or `run`. Unknown sections or keys, duplicates, and
//! assignments outside a section are errors that name the offending line.

use std::fmt;
use std::path::Path;

use zoar_core::bench::{RunConfig, Theta0Mode};
use zoar_core::{
    DistTag, EstimatorConfig, EstimatorKind, ObjectiveKind, ObjectiveSpec, OptimizerConfig, Route,
    UpdateRule,
};

pub const SEED_ENV: &str = "ZOAR_SEED";

const KEYS: &[(&str, &[&str])] = &[
    ("objective", &["kind", "dim", "noise_sigma"]),
    ("estimator", &["kind", "mu", "k", "n", "tag", "route"]),
    (
        "optimizer",
        &["rule", "eta", "beta1", "beta2", "zeta", "bias_correction"],
    ),
    ("run", &["iterations", "repeats", "seed", "theta0"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            msg: msg.into(),
        }
    }

    fn general(msg: impl Into<String>) -> Self {
        Self {
            line: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub values: Vec<String>,
    pub is_list: bool,
    pub line: usize,
}

impl Entry {
    pub fn path(&self) -> String {
        format!("{}.{}", self.section, self.key)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigDoc {
    pub entries: Vec<Entry>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_list(raw: &str, line: usize) -> Result<Vec<String>, ConfigError> {
    let inner = raw
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| ConfigError::at(line, format!("unterminated list `{raw}`")))?;
    let items: Vec<String> = inner
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ConfigError::at(line, "empty list value"));
    }
    Ok(items)
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section: Option<String> = None;
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::at(line, format!("unknown section `[{name}]`")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{body}`")))?;
            let key = key.trim();
            let value = value.trim();
            let sec = section
                .as_deref()
                .ok_or_else(|| ConfigError::at(line, format!("key `{key}` appears before any section")))?;
            let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(ConfigError::at(line, format!("unknown key `{key}` in [{sec}]")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("key `{key}` has no value")));
            }
            if entries.iter().any(|e| e.section == sec && e.key == key) {
                return Err(ConfigError::at(line, format!("duplicate key `{sec}.{key}`")));
            }
            let is_list = value.starts_with('[');
            let values = if is_list {
                parse_list(value, line)?
            } else {
                vec![value.to_string()]
            };
            entries.push(Entry {
                section: sec.to_string(),
                key: key.to_string(),
                values,
                is_list,
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn list_entries(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| e.is_list)
    }

    /// Rejects list values; `run` takes exactly one configuration.
    pub fn require_scalar(&self) -> Result<(), ConfigError> {
        match self.list_entries().next() {
            Some(e) => Err(ConfigError::at(
                e.line,
                format!("list value for `{}` is only allowed in sweep", e.path()),
            )),
            None => Ok(()),
        }
    }

    /// One scalar document per element of the Cartesian product of list
    /// values, in document order, with a name like `estimator.n=1,run.seed=3`.
    pub fn expand(&self) -> Vec<(String, ConfigDoc)> {
        let lists: Vec<&Entry> = self.list_entries().collect();
        let total: usize = lists.iter().map(|e| e.values.len()).product();
        let mut cells = Vec::with_capacity(total);
        for mut index in 0..total {
            // last list varies fastest
            let mut choice = vec![0; lists.len()];
            for (slot, e) in lists.iter().enumerate().rev() {
                choice[slot] = index % e.values.len();
                index /= e.values.len();
            }
            let mut doc = self.clone();
            let mut name_parts = Vec::new();
            for (slot, e) in lists.iter().enumerate() {
                let v = e.values[choice[slot]].clone();
                name_parts.push(format!("{}={v}", e.path()));
                let target = doc
                    .entries
                    .iter_mut()
                    .find(|x| x.section == e.section && x.key == e.key)
                    .expect("entry exists");
                target.values = vec![v];
                target.is_list = false;
            }
            let name = if name_parts.is_empty() {
                "base".to_string()
            } else {
                name_parts.join(",")
            };
            cells.push((name, doc));
        }
        cells
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    fn value<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        if e.is_list {
            return Err(ConfigError::at(e.line, format!("`{}` must be a single value", e.path())));
        }
        e.values[0]
            .parse()
            .map(Some)
            .map_err(|err| ConfigError::at(e.line, format!("bad value for `{}`: {err}", e.path())))
    }

    /// Builds the run configuration. `seed_override` (from the environment)
    /// replaces `run.seed` when present.
    pub fn to_run_config(&self, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
        self.require_scalar()?;
        let kind: ObjectiveKind = self
            .value("objective", "kind")?
            .ok_or_else(|| ConfigError::general("missing required key `objective.kind`"))?;
        let dim: usize = self
            .value("objective", "dim")?
            .ok_or_else(|| ConfigError::general("missing required key `objective.dim`"))?;
        let sigma: f64 = self.value("objective", "noise_sigma")?.unwrap_or(0.0);
        let objective = ObjectiveSpec::with_noise(kind, dim, sigma)
            .map_err(|e| ConfigError::general(format!("[objective]: {e}")))?;

        let est_kind: EstimatorKind = self.value("estimator", "kind")?.unwrap_or(EstimatorKind::ZoAR);
        let d = EstimatorConfig::default();
        let estimator = EstimatorConfig {
            mu: self.value("estimator", "mu")?.unwrap_or(d.mu),
            k: self.value("estimator", "k")?.unwrap_or(d.k),
            n: self.value("estimator", "n")?.unwrap_or(d.n),
            tag: self.value::<DistTag>("estimator", "tag")?.unwrap_or(d.tag),
            route: self.value::<Route>("estimator", "route")?.unwrap_or(d.route),
        };

        let o = OptimizerConfig::default();
        let optimizer = OptimizerConfig {
            rule: self.value::<UpdateRule>("optimizer", "rule")?.unwrap_or(o.rule),
            eta: self.value("optimizer", "eta")?.unwrap_or(o.eta),
            beta1: self.value("optimizer", "beta1")?.unwrap_or(o.beta1),
            beta2: self.value("optimizer", "beta2")?.unwrap_or(o.beta2),
            zeta: self.value("optimizer", "zeta")?.unwrap_or(o.zeta),
            bias_correction: self.value("optimizer", "bias_correction")?.unwrap_or(o.bias_correction),
        };

        let mut cfg = RunConfig::new(objective, est_kind);
        cfg.estimator = estimator;
        cfg.optimizer = optimizer;
        if let Some(t) = self.value("run", "iterations")? {
            cfg.iterations = t;
        }
        if let Some(r) = self.value("run", "repeats")? {
            cfg.repeats = r;
        }
        if let Some(s) = self.value("run", "seed")? {
            cfg.master_seed = s;
        }
        if let Some(s) = seed_override {
            cfg.master_seed = s;
        }
        if let Some(e) = self.get("run", "theta0") {
            cfg.theta0 = parse_theta0(&e.values[0]).map_err(|m| ConfigError::at(e.line, m))?;
        }
        cfg.validate()
            .map_err(|e| ConfigError::general(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }
}

/// `uniform(lo, hi)` or `fixed(v)`.
pub fn parse_theta0(raw: &str) -> Result<Theta0Mode, String> {
    let call = |name: &str| {
        raw.strip_prefix(name)
            .map(str::trim)
            .and_then(|r| r.strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number `{}` in theta0", s.trim()))
    };
    if let Some(args) = call("uniform") {
        let (lo, hi) = args
            .split_once(',')
            .ok_or_else(|| "uniform needs two arguments".to_string())?;
        return Ok(Theta0Mode::SeededUniform {
            lo: num(lo)?,
            hi: num(hi)?,
        });
    }
    if let Some(arg) = call("fixed") {
        return Ok(Theta0Mode::FixedValue(num(arg)?));
    }
    Err(format!("theta0 must be `uniform(lo, hi)` or `fixed(v)`, got `{raw}`"))
}

/// Reads `ZOAR_SEED`; an unparsable value is a configuration error.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::general(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
