//! Finite-n acceptance bands, read from the checked-in `tolerances.txt`.
//!
//! The limit theorems give limits, not rates, so the bands for the
//! simulation experiments are calibrated by pilot runs. The file records the
//! recipe next to every band.

use std::str::FromStr;

use crate::error::{Error, Result};

use super::config::KeyValues;

pub const BUILTIN: &str = include_str!("../../tolerances.txt");

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    kv: KeyValues,
}

impl Tolerances {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("checked-in tolerance file parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self { kv: KeyValues::parse(text)? })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.kv.parsed(key)?.ok_or_else(|| Error::Config(format!("tolerance '{key}' missing")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.kv.parsed(key)
    }

    /// `lo,hi` pair stored under `key`.
    pub fn band(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.kv.parsed_list::<f64>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 && v[0] <= v[1] => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::Config(format!("tolerance '{key}' must be 'lo,hi'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_file_is_complete() {
        let t = Tolerances::builtin();
        for key in ["total_mass_k_sigma", "total_mass_slack", "kolmogorov_tol", "survival_k_sigma"] {
            assert!(t.get::<f64>(key).is_ok(), "{key}");
        }
        for n in [50, 100, 200] {
            let (lo, hi) = t.band(&format!("max_displacement_band_n{n}")).unwrap().unwrap();
            assert!(lo < 0.25 + 1.0 && lo <= hi);
        }
        assert!(t.get::<f64>("profile_ks_max_n100").unwrap() <= 0.1);
    }

    #[test]
    fn bad_band_is_an_error() {
        let t = Tolerances::parse("x = 2,1").unwrap();
        assert!(t.band("x").is_err());
        assert_eq!(t.band("y").unwrap(), None);
    }
}
