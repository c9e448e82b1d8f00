use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::vem_local::{Stabilization, StabilizationKind};

use super::{CliError, CliResult};

const KNOWN_KEYS: [&str; 20] = [
    "alpha", "beta", "degrees", "families", "family", "fem-degree", "jobs", "level", "method", "n", "nmax", "nmin",
    "pmax", "pmin", "samples", "seed", "shape", "sigma", "stab", "test",
];

/// Flat key-value TOML document; every value is kept as text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::usage("--config", e.to_string()))?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(CliError::usage("--config", format!("unknown key `{k}` (known: {})", KNOWN_KEYS.join(", "))));
            }
            let text = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                _ => return Err(CliError::usage("--config", format!("key `{k}` must hold a single value"))),
            };
            values.insert(k, text);
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(&format!("--{key}"), format!("`{v}`: {e}"))))
            .transpose()
    }
}

/// Resolved settings of one command (flag, else config file, else default), echoed
/// into the manifest and hashed.
#[derive(Clone, Debug)]
pub struct Settings {
    pub command: String,
    pub values: BTreeMap<String, String>,
    file: ConfigFile,
}

impl Settings {
    pub fn new(command: &str, file: &ConfigFile) -> Self {
        Self { command: command.into(), values: BTreeMap::new(), file: file.clone() }
    }

    /// Hex SHA-256 of the command and its resolved settings.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        for (k, v) in &self.values {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn string(&mut self, key: &str, flag: &Option<String>, default: Option<&str>) -> CliResult<String> {
        let v = flag
            .clone()
            .or_else(|| self.file.get(key).map(str::to_string))
            .or(default.map(str::to_string))
            .ok_or_else(|| CliError::usage(&format!("--{key}"), "is required"))?;
        self.values.insert(key.into(), v.clone());
        Ok(v)
    }

    pub fn parse<T: FromStr>(&mut self, key: &str, flag: &Option<String>, default: Option<&str>) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.string(key, flag, default)?;
        v.parse::<T>().map_err(|e| CliError::usage(&format!("--{key}"), format!("`{v}`: {e}")))
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get_parsed::<T>(key)? {
                Some(v) => v,
                None => default.ok_or_else(|| CliError::usage(&format!("--{key}"), "is required"))?,
            },
        };
        self.values.insert(key.into(), v.to_string());
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get_parsed::<T>(key)?,
        };
        if let Some(v) = &v {
            self.values.insert(key.into(), v.to_string());
        }
        Ok(v)
    }

    pub fn sigma(&mut self, flag: &Option<String>) -> CliResult<f64> {
        let v = self.string("sigma", flag, Some("1/2"))?;
        parse_sigma(&v).map_err(|m| CliError::usage("--sigma", m))
    }

    pub fn stabilization(&mut self, flag: &Option<String>) -> CliResult<Stabilization> {
        let v = self.string("stab", flag, Some("boundary"))?;
        parse_stabilization(&v).map_err(|m| CliError::usage("--stab", m))
    }
}

/// A number in `(0, 1)` or one of the tokens `1/2`, `sqrt2-1`, `(sqrt2-1)^2`.
pub fn parse_sigma(text: &str) -> Result<f64, String> {
    let s2 = std::f64::consts::SQRT_2 - 1.0;
    let v = match text.trim() {
        "1/2" => 0.5,
        "sqrt2-1" => s2,
        "(sqrt2-1)^2" => s2 * s2,
        t => t.parse::<f64>().map_err(|_| format!("`{t}` is not a number or one of 1/2, sqrt2-1, (sqrt2-1)^2"))?,
    };
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside the open interval (0, 1)"))
    }
}

/// `boundary` (exact boundary product), `gll` (Gauss–Lobatto boundary product),
/// `table` (`gll` with boundary weight √2) or `dofi-dofi`.
pub fn parse_stabilization(text: &str) -> Result<Stabilization, String> {
    match text.trim() {
        "boundary" => Ok(StabilizationKind::BoundaryPlusMoments.into()),
        "gll" => Ok(StabilizationKind::GllBoundaryPlusMoments.into()),
        "table" => Ok(Stabilization::table()),
        "dofi-dofi" => Ok(StabilizationKind::DofiDofi.into()),
        t => Err(format!("`{t}` is not one of boundary, gll, table, dofi-dofi")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_tokens() {
        assert_eq!(parse_sigma("1/2").unwrap(), 0.5);
        let s2 = std::f64::consts::SQRT_2 - 1.0;
        assert_eq!(parse_sigma("sqrt2-1").unwrap(), s2);
        assert!((parse_sigma("(sqrt2-1)^2").unwrap() - 3.0 + 2.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(parse_sigma("0.3").unwrap(), 0.3);
        assert!(parse_sigma("1.5").is_err());
        assert!(parse_sigma("0").is_err());
        assert!(parse_sigma("half").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = ConfigFile::parse("family = \"b\"\nn = 3\nsigma = 0.25\n").unwrap();
        let mut s = Settings::new("mesh", &file);
        assert_eq!(s.string("family", &Some("c".into()), Some("a")).unwrap(), "c");
        assert_eq!(s.value::<usize>("n", None, Some(9)).unwrap(), 3);
        assert_eq!(s.sigma(&None).unwrap(), 0.25);
        assert_eq!(s.value::<usize>("nmax", None, Some(7)).unwrap(), 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse("colour = 1").is_err());
        assert!(ConfigFile::parse("family = [1, 2]").is_err());
    }

    #[test]
    fn hash_depends_on_values_only() {
        let file = ConfigFile::default();
        let mut a = Settings::new("mesh", &file);
        let mut b = Settings::new("mesh", &file);
        a.value("n", Some(3usize), None).unwrap();
        b.value("n", Some(3usize), None).unwrap();
        assert_eq!(a.hash(), b.hash());
        b.value("n", Some(4usize), None).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
