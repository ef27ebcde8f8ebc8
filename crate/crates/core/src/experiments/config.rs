//! Flat `key = value` configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value      # trailing comments are allowed
//! ```
//!
//! Keys are lowercase identifiers, values run to the end of the line (or the
//! first `#`) with surrounding whitespace removed. Lists are comma separated.
//! A key may appear once per file; overrides applied afterwards replace file
//! values. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::offspring::{LawName, OffspringLaw};
use crate::walk::WalkParams;

/// Ordered `key -> raw value` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_entry(line)
                .map_err(|msg| Error::Config(format!("line {}: {msg}", lineno + 1)))?;
            if out.entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(out)
    }

    /// Parses a single `key=value` override.
    pub fn parse_override(entry: &str) -> Result<(String, String)> {
        split_entry(entry.trim()).map_err(Error::Config)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key} = {v}: {e}"))))
            .transpose()
    }

    pub fn parsed_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse::<T>().map_err(|e| Error::Config(format!("{key} = {v}: '{item}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn split_entry(line: &str) -> std::result::Result<(String, String), String> {
    let Some((key, value)) = line.split_once('=') else {
        return Err(format!("expected key = value, got '{line}'"));
    };
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
        return Err(format!("bad key '{key}'"));
    }
    if value.is_empty() {
        return Err(format!("empty value for '{key}'"));
    }
    Ok((key.to_string(), value.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    MaxDisplacement,
    Profile,
    TotalMass,
    SurvivalCurve,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::MaxDisplacement,
        ExperimentKind::Profile,
        ExperimentKind::TotalMass,
        ExperimentKind::SurvivalCurve,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::MaxDisplacement => "max_displacement",
            ExperimentKind::Profile => "profile",
            ExperimentKind::TotalMass => "total_mass",
            ExperimentKind::SurvivalCurve => "survival_curve",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "beta",
    "n",
    "n_grid",
    "alpha",
    "t",
    "y",
    "delta",
    "law",
    "replicates",
    "target_survivors",
    "min_survivors",
    "seed",
    "feller_samples",
    "m_max",
    "survival_m",
];

/// Everything an experiment run depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub beta: f64,
    pub n_grid: Vec<u64>,
    pub alpha: f64,
    /// Macroscopic time; the horizon is `[n^alpha t]`.
    pub t: f64,
    /// Initial mass density: `ceil(y n^alpha)` particles start at the origin.
    pub y: f64,
    /// Survival thresholds `delta` for `P(Z > delta n^alpha)`.
    pub delta: Vec<f64>,
    pub law: LawName,
    /// BRW replicates per `n`. Ignored where `target_survivors` sizes the
    /// budget.
    pub replicates: u64,
    /// When positive, the per-`n` budget is chosen so that this many
    /// survivors are expected, with 20% headroom.
    pub target_survivors: u64,
    pub min_survivors: usize,
    pub master_seed: u64,
    /// Exact Feller draws per `delta > 0`.
    pub feller_samples: u64,
    /// Largest generation in the survival table.
    pub m_max: u64,
    /// Generation at which BRW survival is checked against the pgf.
    pub survival_m: u64,
}

impl ExperimentConfig {
    /// Defaults for `kind`, matching the reference settings of each
    /// experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            beta: 0.5,
            n_grid: vec![50, 100, 200],
            alpha: 1.5,
            t: 1.0,
            y: 1.0,
            delta: vec![0.0],
            law: LawName::GeometricHalf,
            replicates: 1000,
            target_survivors: 0,
            min_survivors: crate::gw::DEFAULT_MIN_SURVIVORS,
            master_seed: 1,
            feller_samples: 100_000,
            m_max: 100_000,
            survival_m: 1000,
        };
        match kind {
            ExperimentKind::MaxDisplacement => Self { target_survivors: 1000, ..base },
            ExperimentKind::Profile => Self { alpha: 1.2, target_survivors: 4000, ..base },
            ExperimentKind::TotalMass => {
                Self { alpha: 1.2, n_grid: vec![100], delta: vec![0.0, 0.5, 1.0], replicates: 10_000, ..base }
            }
            ExperimentKind::SurvivalCurve => Self { n_grid: vec![100], replicates: 200_000, ..base },
        }
    }

    /// Builds a config from key/value pairs. `experiment` must be present
    /// unless `kind` is given.
    pub fn from_key_values(kv: &KeyValues, kind: Option<ExperimentKind>) -> Result<Self> {
        if let Some((key, _)) = kv.iter().find(|(k, _)| !KNOWN_KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        let file_kind: Option<ExperimentKind> = kv.parsed("experiment")?;
        let kind = match (kind, file_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for '{b}', not '{a}'")));
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::Config("missing 'experiment'".into())),
        };
        let mut cfg = Self::defaults(kind);
        if kv.contains("n") && kv.contains("n_grid") {
            return Err(Error::Config("give either 'n' or 'n_grid', not both".into()));
        }
        if let Some(v) = kv.parsed("beta")? {
            cfg.beta = v;
        }
        if let Some(v) = kv.parsed::<u64>("n")? {
            cfg.n_grid = vec![v];
        }
        if let Some(v) = kv.parsed_list("n_grid")? {
            cfg.n_grid = v;
        }
        if let Some(v) = kv.parsed("alpha")? {
            cfg.alpha = v;
        }
        if let Some(v) = kv.parsed("t")? {
            cfg.t = v;
        }
        if let Some(v) = kv.parsed("y")? {
            cfg.y = v;
        }
        if let Some(v) = kv.parsed_list("delta")? {
            cfg.delta = v;
        }
        if let Some(v) = kv.parsed("law")? {
            cfg.law = v;
        }
        if let Some(v) = kv.parsed("replicates")? {
            cfg.replicates = v;
        }
        if let Some(v) = kv.parsed("target_survivors")? {
            cfg.target_survivors = v;
        }
        if let Some(v) = kv.parsed("min_survivors")? {
            cfg.min_survivors = v;
        }
        if let Some(v) = kv.parsed("seed")? {
            cfg.master_seed = v;
        }
        if let Some(v) = kv.parsed("feller_samples")? {
            cfg.feller_samples = v;
        }
        if let Some(v) = kv.parsed("m_max")? {
            cfg.m_max = v;
        }
        if let Some(v) = kv.parsed("survival_m")? {
            cfg.survival_m = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?, kind)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must exceed 1, got {}", self.alpha));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if !(self.y > 0.0 && self.y.is_finite()) {
            return bad(format!("y must be positive, got {}", self.y));
        }
        if self.delta.is_empty() || self.delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return bad("delta must be a nonempty list of nonnegative numbers".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_grid must be nonempty and strictly increasing".into());
        }
        if self.law == LawName::Custom {
            return bad("custom laws cannot be configured from a file".into());
        }
        if self.experiment == ExperimentKind::SurvivalCurve && self.m_max == 0 {
            return bad("m_max must be at least 1".into());
        }
        for &n in &self.n_grid {
            self.params(n)?;
        }
        Ok(())
    }

    pub fn params(&self, n: u64) -> Result<WalkParams> {
        WalkParams::new(self.beta, n).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn offspring(&self) -> OffspringLaw {
        OffspringLaw::by_name(self.law).expect("validated law")
    }

    /// The effective configuration as key/value pairs, for report echoes.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |xs: &[String]| xs.join(",");
        let mut m = BTreeMap::new();
        m.insert("experiment".into(), self.experiment.to_string());
        m.insert("beta".into(), fmt_float(self.beta));
        m.insert("n_grid".into(), list(&self.n_grid.iter().map(u64::to_string).collect::<Vec<_>>()));
        m.insert("alpha".into(), fmt_float(self.alpha));
        m.insert("t".into(), fmt_float(self.t));
        m.insert("y".into(), fmt_float(self.y));
        m.insert("delta".into(), list(&self.delta.iter().map(|d| fmt_float(*d)).collect::<Vec<_>>()));
        m.insert("law".into(), self.law.to_string());
        m.insert("replicates".into(), self.replicates.to_string());
        m.insert("target_survivors".into(), self.target_survivors.to_string());
        m.insert("min_survivors".into(), self.min_survivors.to_string());
        m.insert("seed".into(), self.master_seed.to_string());
        m.insert("feller_samples".into(), self.feller_samples.to_string());
        m.insert("m_max".into(), self.m_max.to_string());
        m.insert("survival_m".into(), self.survival_m.to_string());
        m
    }
}

/// Shortest round-trip formatting.
pub fn fmt_float(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let kv = KeyValues::parse("# header\n\nbeta = 0.25  # note\nn_grid=10, 20\n").unwrap();
        assert_eq!(kv.get("beta"), Some("0.25"));
        assert_eq!(kv.parsed_list::<u64>("n_grid").unwrap(), Some(vec![10, 20]));
        assert!(KeyValues::parse("beta 0.5").is_err());
        assert!(KeyValues::parse("beta = 1\nbeta = 2").is_err());
        assert!(KeyValues::parse("Beta = 1").is_err());
        assert!(KeyValues::parse("beta =").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("experiment = profile\nbogus = 1", None).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut kv = KeyValues::parse("experiment = total_mass\nbeta = 0.25").unwrap();
        let (k, v) = KeyValues::parse_override("beta=1").unwrap();
        kv.set(k, v);
        let cfg = ExperimentConfig::from_key_values(&kv, None).unwrap();
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.n_grid, vec![100]);
    }

    #[test]
    fn invariants_are_checked() {
        let parse = |s: &str| ExperimentConfig::parse(s, Some(ExperimentKind::Profile));
        assert!(parse("alpha = 1").is_err());
        assert!(parse("n_grid = 100, 50").is_err());
        assert!(parse("replicates = 0").is_err());
        assert!(parse("n = 4\nbeta = 1").is_err());
        assert!(parse("n = 4\nn_grid = 4,5").is_err());
        assert!(parse("experiment = total_mass").is_err());
        assert!(parse("law = geom\nexperiment = profile").is_ok());
    }

    #[test]
    fn kinds_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
        }
        assert_eq!("max-displacement".parse::<ExperimentKind>().unwrap(), ExperimentKind::MaxDisplacement);
    }
}
