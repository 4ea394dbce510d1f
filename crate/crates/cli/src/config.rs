use std::collections::BTreeMap;
use std::path::PathBuf;

use irwa_core::averaging::{CutoffPolicy, DetuningPolicy};
use irwa_core::dispersive::DispersiveVariant;
use irwa_core::spectra::FockChoice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Command {
    Cutoff,
    Spectrum,
    Dispersive,
    Twoqubit,
    Evolve,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cutoff => "cutoff",
            Command::Spectrum => "spectrum",
            Command::Dispersive => "dispersive",
            Command::Twoqubit => "twoqubit",
            Command::Evolve => "evolve",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown setting '{0}'")]
    UnknownKey(String),
    #[error("{file}:{line}: expected key=value")]
    Syntax { file: String, line: usize },
    #[error("invalid value '{value}' for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("preset '{preset}' belongs to the {expected} command")]
    PresetMismatch { preset: String, expected: &'static str },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

pub const KEYS: &[&str] = &[
    "omega_r",
    "omega_a",
    "delta_policy",
    "g_min",
    "g_max",
    "g_steps",
    "cutoff_policy",
    "fock",
    "levels",
    "out",
    "x",
    "g",
    "delta_min",
    "delta_max",
    "delta_steps",
    "variant",
    "t_max",
    "t_steps",
    "allow_flagged",
];

/// Raw `key = value` settings; later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, *v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        // the qubit frequency is given either directly or as a detuning rule
        match key.as_str() {
            "omega_a" => {
                self.0.remove("delta_policy");
            }
            "delta_policy" => {
                self.0.remove("omega_a");
            }
            _ => {}
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.set(k, v.clone()).expect("keys already validated");
        }
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str, file: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                file: file.to_string(),
                line: i + 1,
            })?;
            s.set(k, v)?;
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    /// `steps` evenly spaced points; the last one is exactly `max`.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + span * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    G,
    Delta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub command: Command,
    pub omega_r: f64,
    pub detuning: DetuningPolicy,
    pub cutoff: CutoffPolicy,
    pub g_grid: Grid,
    pub axis: SweepAxis,
    pub delta_grid: Grid,
    /// Fixed coupling for detuning sweeps and time evolution.
    pub g: f64,
    pub fock: FockChoice,
    pub levels: usize,
    pub variant: DispersiveVariant,
    pub t_max: Option<f64>,
    pub t_steps: usize,
    pub out: Option<PathBuf>,
    pub allow_flagged: bool,
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

struct Reader<'a>(&'a Settings);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.0
            .get(key)
            .ok_or_else(|| ConfigError::Invalid(format!("missing setting '{key}'")))
    }

    fn parse<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key)?;
        v.parse().map_err(|e: T::Err| bad(key, v, e.to_string()))
    }

    fn finite(&self, key: &str) -> Result<f64, ConfigError> {
        let x: f64 = self.parse(key)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(bad(key, self.raw(key)?, "must be finite"))
        }
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        let n: usize = self.parse(key)?;
        if n == 0 {
            return Err(bad(key, self.raw(key)?, "must be at least 1"));
        }
        Ok(n)
    }

    fn grid(&self, prefix: &str) -> Result<Grid, ConfigError> {
        let g = Grid {
            min: self.finite(&format!("{prefix}_min"))?,
            max: self.finite(&format!("{prefix}_max"))?,
            steps: self.count(&format!("{prefix}_steps"))?,
        };
        if g.min > g.max {
            return Err(ConfigError::Invalid(format!(
                "{prefix}_min = {} exceeds {prefix}_max = {}",
                g.min, g.max
            )));
        }
        Ok(g)
    }
}

impl SweepConfig {
    pub fn from_settings(command: Command, s: &Settings) -> Result<Self, ConfigError> {
        let r = Reader(s);
        let omega_r = r.finite("omega_r")?;
        if omega_r <= 0.0 {
            return Err(bad("omega_r", r.raw("omega_r")?, "must be positive"));
        }
        let detuning = match s.get("omega_a") {
            Some(v) => {
                let wa: f64 = v
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| bad("omega_a", v, e.to_string()))?;
                if !(wa.is_finite() && wa >= 0.0) {
                    return Err(bad("omega_a", v, "must be nonnegative"));
                }
                DetuningPolicy::Fixed(wa - omega_r)
            }
            None => r.parse("delta_policy")?,
        };
        let g_grid = r.grid("g")?;
        if g_grid.min < 0.0 {
            return Err(bad("g_min", r.raw("g_min")?, "must be nonnegative"));
        }
        let axis = match r.raw("x")? {
            "g" => SweepAxis::G,
            "delta" => SweepAxis::Delta,
            other => return Err(bad("x", other, "expected 'g' or 'delta'")),
        };
        let g = r.finite("g")?;
        if g < 0.0 {
            return Err(bad("g", r.raw("g")?, "must be nonnegative"));
        }
        let fock = match r.raw("fock")? {
            "auto" => FockChoice::Auto,
            v => {
                let n: usize = v
                    .parse()
                    .map_err(|_| bad("fock", v, "expected 'auto' or a photon cutoff"))?;
                if n == 0 {
                    return Err(bad("fock", v, "photon cutoff must be at least 1"));
                }
                FockChoice::Fixed(n)
            }
        };
        let t_max = match r.raw("t_max")? {
            "auto" => None,
            v => {
                let t = r.finite("t_max")?;
                if t < 0.0 {
                    return Err(bad("t_max", v, "must be nonnegative"));
                }
                Some(t)
            }
        };
        let allow_flagged = match r.raw("allow_flagged")? {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            v => return Err(bad("allow_flagged", v, "expected true or false")),
        };
        Ok(Self {
            command,
            omega_r,
            detuning,
            cutoff: r.parse("cutoff_policy")?,
            g_grid,
            axis,
            delta_grid: r.grid("delta")?,
            g,
            fock,
            levels: r.count("levels")?,
            variant: r.parse("variant")?,
            t_max,
            t_steps: r.count("t_steps")?,
            out: s.get("out").filter(|v| !v.is_empty() && *v != "-").map(PathBuf::from),
            allow_flagged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layers_override() {
        let mut s = Settings::from_pairs(&[("g_min", "0"), ("delta_policy", "fixed:0.1")]).unwrap();
        s.merge(&Settings::from_pairs(&[("g-min", "0.2"), ("omega_a", "1.3")]).unwrap());
        assert_eq!(s.get("g_min"), Some("0.2"));
        assert_eq!(s.get("delta_policy"), None);
        assert_eq!(s.get("omega_a"), Some("1.3"));
    }

    #[test]
    fn file_syntax() {
        let s = Settings::parse("# comment\n\ng_max = 0.3  # trailing\nfock=40\n", "f").unwrap();
        assert_eq!(s.get("g_max"), Some("0.3"));
        assert_eq!(s.get("fock"), Some("40"));
        assert!(matches!(
            Settings::parse("g_max 0.3", "f"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Settings::parse("colour = red", "f"),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = Grid {
            min: 0.005,
            max: 0.1,
            steps: 20,
        };
        let p = g.points();
        assert_eq!(p.len(), 20);
        assert_eq!(p[0], 0.005);
        assert_eq!(p[19], 0.1);
        assert_eq!(
            Grid {
                min: 0.0,
                max: 0.0,
                steps: 1
            }
            .points(),
            vec![0.0]
        );
    }
}
