//! Experiment reports and their on-disk form: `report.json`, `raw.csv` and
//! `curves/*.csv`.
//!
//! JSON keys are sorted and every float is written with 17 significant
//! digits, so equal reports serialize to equal bytes. CSV floats use the
//! shortest representation that round-trips.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::rng::{RNG_NAME, RNG_VERSION};
use crate::stats::McEstimate;

use super::config::{ExperimentConfig, ExperimentKind};

/// A pass/fail decision and the rule it was checked against.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    /// The allowed deviation (or threshold).
    pub tolerance: f64,
    /// The quantity compared with `tolerance`.
    pub observed: f64,
    pub rule: String,
}

impl Verdict {
    /// Passes when `observed <= tolerance`.
    pub fn at_most(observed: f64, tolerance: f64, rule: impl Into<String>) -> Self {
        Self { pass: observed <= tolerance, tolerance, observed, rule: rule.into() }
    }
}

/// Results for one value of `n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cell {
    pub n: u64,
    pub estimates: BTreeMap<String, McEstimate>,
    pub theory: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub counts: BTreeMap<String, u64>,
}

impl Cell {
    pub fn new(n: u64) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn estimate(&mut self, name: &str, e: McEstimate) {
        self.estimates.insert(name.to_string(), e);
    }

    pub fn theory(&mut self, name: &str, v: f64) {
        self.theory.insert(name.to_string(), v);
    }

    pub fn verdict(&mut self, name: &str, v: Verdict) {
        self.verdicts.insert(name.to_string(), v);
    }

    pub fn count(&mut self, name: &str, c: u64) {
        self.counts.insert(name.to_string(), c);
    }
}

/// One line of `raw.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub replicate: u64,
    pub n: u64,
    pub survived: bool,
    pub statistic: &'static str,
    pub value: f64,
}

/// A plot-ready table written to `curves/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: BTreeMap<String, String>,
    pub cells: Vec<Cell>,
    pub master_seed: u64,
    /// Left out of `report.json` unless set, so reruns compare equal.
    pub wallclock_s: Option<f64>,
    pub events: BTreeMap<String, u64>,
    pub raw: Vec<RawRow>,
    pub curves: Vec<Curve>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment,
            config: config.echo(),
            cells: Vec::new(),
            master_seed: config.master_seed,
            wallclock_s: None,
            events: BTreeMap::new(),
            raw: Vec::new(),
            curves: Vec::new(),
        }
    }

    pub fn add_event(&mut self, name: &str, count: u64) {
        *self.events.entry(name.to_string()).or_insert(0) += count;
    }

    /// Every verdict in every cell passed.
    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }

    /// `(n, verdict name)` of every failed verdict.
    pub fn failures(&self) -> Vec<(u64, String)> {
        self.cells
            .iter()
            .flat_map(|c| c.verdicts.iter().filter(|(_, v)| !v.pass).map(move |(k, _)| (c.n, k.clone())))
            .collect()
    }

    pub fn cell(&self, n: u64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.n == n)
    }

    pub fn to_json_value(&self) -> Value {
        let cells: Vec<Value> = self
            .cells
            .iter()
            .map(|c| {
                let estimates: Map<String, Value> = c
                    .estimates
                    .iter()
                    .map(|(k, e)| (k.clone(), json!({"value": e.value, "stderr": e.stderr, "count": e.count})))
                    .collect();
                let theory: Map<String, Value> = c.theory.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                let verdicts: Map<String, Value> = c
                    .verdicts
                    .iter()
                    .map(|(k, v)| {
                        (
                            k.clone(),
                            json!({"pass": v.pass, "tolerance": v.tolerance, "observed": v.observed, "rule": v.rule}),
                        )
                    })
                    .collect();
                let counts: Map<String, Value> = c.counts.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                json!({
                    "n": c.n,
                    "estimates": estimates,
                    "theory": theory,
                    "verdicts": verdicts,
                    "counts": counts,
                })
            })
            .collect();
        json!({
            "experiment": self.experiment.as_str(),
            "config": self.config,
            "cells": cells,
            "meta": {
                "seed": self.master_seed,
                "version": env!("CARGO_PKG_VERSION"),
                "rng": RNG_NAME,
                "rng_version": RNG_VERSION,
                "wallclock_s": self.wallclock_s,
                "events": self.events,
                "all_pass": self.all_pass(),
            },
        })
    }

    /// Canonical `report.json` bytes.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        canonical_json(&self.to_json_value())
    }

    pub fn write_raw_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "replicate,n,survived,statistic_name,value")?;
        for r in &self.raw {
            writeln!(out, "{},{},{},{},{}", r.replicate, r.n, u8::from(r.survived), r.statistic, r.value)?;
        }
        Ok(())
    }

    /// Writes `report.json`, `raw.csv` and `curves/*.csv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("curves"))?;
        fs::write(dir.join("report.json"), self.to_canonical_json())?;
        let mut raw = BufWriter::new(fs::File::create(dir.join("raw.csv"))?);
        self.write_raw_csv(&mut raw)?;
        raw.flush()?;
        for curve in &self.curves {
            let mut f = BufWriter::new(fs::File::create(dir.join("curves").join(format!("{}.csv", curve.name)))?);
            write_curve(curve, &mut f)?;
            f.flush()?;
        }
        Ok(())
    }
}

pub fn write_curve<W: Write>(curve: &Curve, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", curve.columns.join(","))?;
    for row in &curve.rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Pretty-printed JSON with sorted keys and 17-significant-digit floats.
/// Non-finite floats are already `null` in a [`Value`].
pub fn canonical_json(value: &Value) -> Vec<u8> {
    let mut buf = Vec::new();
    write_canonical(value, &mut buf, 0);
    buf.push(b'\n');
    buf
}

fn write_canonical(value: &Value, out: &mut Vec<u8>, depth: usize) {
    let pad = |out: &mut Vec<u8>, d: usize| out.extend(std::iter::repeat_n(b' ', 2 * d));
    match value {
        Value::Object(map) if !map.is_empty() => {
            // serde_json's default map is a BTreeMap; sort anyway so the
            // output does not depend on that feature choice.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.extend_from_slice(b"{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                serde_json::to_writer(&mut *out, k).expect("string key");
                out.extend_from_slice(b": ");
                write_canonical(&map[k.as_str()], out, depth + 1);
                if i + 1 < keys.len() {
                    out.push(b',');
                }
                out.push(b'\n');
            }
            pad(out, depth);
            out.push(b'}');
        }
        Value::Array(items) if !items.is_empty() => {
            out.extend_from_slice(b"[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_canonical(item, out, depth + 1);
                if i + 1 < items.len() {
                    out.push(b',');
                }
                out.push(b'\n');
            }
            pad(out, depth);
            out.push(b']');
        }
        Value::Number(num) if num.is_f64() => {
            let x = num.as_f64().expect("f64");
            write!(out, "{x:.16e}").expect("write to vec");
        }
        other => serde_json::to_writer(&mut *out, other).expect("scalar"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let v = json!({"b": 0.1, "a": [1, 2.5e-300], "c": null, "d": {}});
        let s = String::from_utf8(canonical_json(&v)).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("2.5000000000000000e-300"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn nan_becomes_null() {
        let v = json!({"x": f64::NAN});
        assert_eq!(String::from_utf8(canonical_json(&v)).unwrap(), "{\n  \"x\": null\n}\n");
    }
}
