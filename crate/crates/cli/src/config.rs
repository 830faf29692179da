//! Run configuration assembled from a config file and command-line flags.

use crate::CliError;
use clap::ValueEnum;
use pv_extremes::constants::check_alpha;
use pv_extremes::parallel::default_workers;
use pv_extremes::Dim;
use serde::{Deserialize, Deserializer, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form constants for one dimension.
    Constants,
    /// Monte Carlo estimate of the simplex constant `C_d`.
    EstimateCd,
    /// Monte Carlo estimate of `C_{d,α}`.
    EstimateCdAlpha,
    /// Mean number of pointy vertices at distance `>= t`.
    PointyCount,
    /// Tail of the far vertex distance with the pair bracket.
    Tail,
    /// Monte Carlo estimate of `K_{d,α}`.
    KAlpha,
    /// Wendel probability and mean sphere-simplex volume.
    SimplexStats,
    /// Box experiment: extremal index and Gumbel fit.
    ExtremalIndex,
    /// The acceptance suite.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::EstimateCd => "estimate-cd",
            Command::EstimateCdAlpha => "estimate-cd-alpha",
            Command::PointyCount => "pointy-count",
            Command::Tail => "tail",
            Command::KAlpha => "k-alpha",
            Command::SimplexStats => "simplex-stats",
            Command::ExtremalIndex => "extremal-index",
            Command::Validate => "validate",
        }
    }

    fn takes_alpha(self) -> bool {
        matches!(
            self,
            Command::Constants | Command::EstimateCdAlpha | Command::PointyCount | Command::Tail | Command::KAlpha
        )
    }

    fn default_t(self) -> Option<Vec<f64>> {
        match self {
            Command::Constants => Some(Vec::new()),
            Command::PointyCount => Some(vec![0.0]),
            Command::Tail => Some(vec![0.5, 1.0, 1.5]),
            _ => None,
        }
    }

    fn default_reps(self) -> Option<u64> {
        match self {
            Command::EstimateCd | Command::EstimateCdAlpha | Command::KAlpha | Command::SimplexStats => {
                Some(100_000)
            }
            Command::PointyCount | Command::Tail => Some(10_000),
            Command::ExtremalIndex => Some(200),
            Command::Constants | Command::Validate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Fields as they appear in a config file or on the command line, before
/// defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(default, alias = "t_grid", deserialize_with = "one_or_many")]
    pub t: Option<Vec<f64>>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Side of the observation window of `extremal-index`.
    pub n: Option<f64>,
    pub deep: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

impl PartialConfig {
    /// Field-wise merge; values in `self` win.
    pub fn or(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            command: self.command.or(lower.command),
            d: self.d.or(lower.d),
            alpha: self.alpha.or(lower.alpha),
            t: self.t.or(lower.t),
            reps: self.reps.or(lower.reps),
            seed: self.seed.or(lower.seed),
            workers: self.workers.or(lower.workers),
            n: self.n.or(lower.n),
            deep: self.deep.or(lower.deep),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
        }
    }

    /// Parses a config file: JSON if it starts with `{`, otherwise
    /// `key = value` lines with `#` comments.
    pub fn parse(text: &str) -> Result<PartialConfig, CliError> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")));
        }
        let mut map = serde_json::Map::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let parsed = if key == "t" || key == "t_grid" {
                let items: Result<Vec<f64>, _> = value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let items = items.map_err(|e| CliError::Config(format!("config line {}: {e}", no + 1)))?;
                serde_json::Value::from(items)
            } else {
                serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()))
            };
            if map.insert(key.to_string(), parsed).is_some() {
                return Err(CliError::Config(format!("config line {}: duplicate key {key}", no + 1)));
            }
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<PartialConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        PartialConfig::parse(&text)
    }
}

/// A validated run. Parameters that do not apply to the command are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn reject<T>(value: &Option<T>, flag: &str, command: Command) -> Result<(), CliError> {
    match value {
        Some(_) => Err(CliError::Config(format!("{flag} does not apply to {}", command.name()))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn resolve(p: PartialConfig) -> Result<RunConfig, CliError> {
        let command = p
            .command
            .ok_or_else(|| CliError::Config("no command given on the command line or in the config file".into()))?;
        let d = p.d.unwrap_or(2);
        let dim = Dim::new(d).map_err(|e| CliError::Config(e.to_string()))?;

        let alpha = if command.takes_alpha() {
            let a = p.alpha.unwrap_or(0.0);
            check_alpha(dim, a).map_err(|e| CliError::Config(e.to_string()))?;
            Some(a)
        } else {
            reject(&p.alpha, "alpha", command)?;
            None
        };

        let t = match command.default_t() {
            Some(default) => {
                let t = p.t.unwrap_or(default);
                if let Some(bad) = t.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return Err(CliError::Config(format!("t = {bad} must be finite and non-negative")));
                }
                if command == Command::PointyCount && t.len() != 1 {
                    return Err(CliError::Config("pointy-count takes exactly one t".into()));
                }
                if command == Command::Tail && t.is_empty() {
                    return Err(CliError::Config("tail needs at least one t".into()));
                }
                Some(t)
            }
            None => {
                reject(&p.t, "t", command)?;
                None
            }
        };

        let reps = match command.default_reps() {
            Some(default) => {
                let r = p.reps.unwrap_or(default);
                if r == 0 {
                    return Err(CliError::Config("reps must be at least 1".into()));
                }
                Some(r)
            }
            None => {
                reject(&p.reps, "reps", command)?;
                None
            }
        };

        let n = if command == Command::ExtremalIndex {
            let n = p.n.unwrap_or(100.0);
            let rho = n.powi(d as i32);
            if !(rho > std::f64::consts::E) || !rho.is_finite() {
                return Err(CliError::Config(format!("window side n = {n} gives rho = n^d = {rho}, which must exceed e")));
            }
            Some(n)
        } else {
            reject(&p.n, "n", command)?;
            None
        };

        let deep = if command == Command::Validate {
            Some(p.deep.unwrap_or(false))
        } else {
            if p.deep == Some(true) {
                return Err(CliError::Config(format!("deep does not apply to {}", command.name())));
            }
            None
        };

        let workers = p.workers.unwrap_or_else(default_workers);
        if workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }

        Ok(RunConfig {
            command,
            d,
            alpha,
            t,
            reps,
            seed: p.seed.unwrap_or(0),
            workers,
            n,
            deep,
            out: p.out,
            format: p.format.unwrap_or_default(),
        })
    }

    pub fn dim(&self) -> Dim {
        Dim::new(self.d).expect("validated in resolve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partial(command: Command) -> PartialConfig {
        PartialConfig {
            command: Some(command),
            ..Default::default()
        }
    }

    #[test]
    fn key_value_file() {
        let p = PartialConfig::parse("# tail run\ncommand = tail\nd = 3\nalpha = -1.5\nt = 0.5, 1\nout = res.json\n").unwrap();
        assert_eq!(p.command, Some(Command::Tail));
        assert_eq!(p.d, Some(3));
        assert_eq!(p.alpha, Some(-1.5));
        assert_eq!(p.t, Some(vec![0.5, 1.0]));
        assert_eq!(p.out, Some(PathBuf::from("res.json")));
    }

    #[test]
    fn json_file_accepts_scalar_t() {
        let p = PartialConfig::parse(r#"{"command": "pointy-count", "t": 1.5, "seed": 9}"#).unwrap();
        assert_eq!(p.t, Some(vec![1.5]));
        assert_eq!(p.seed, Some(9));
        let p = PartialConfig::parse(r#"{"t_grid": [0, 1]}"#).unwrap();
        assert_eq!(p.t, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(PartialConfig::parse("colour = red").is_err());
        assert!(PartialConfig::parse(r#"{"reps": -3}"#).is_err());
        assert!(PartialConfig::parse("d = 2\nd = 3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = PartialConfig::parse("command = tail\nd = 3\nseed = 4").unwrap();
        let flags = PartialConfig {
            d: Some(2),
            ..Default::default()
        };
        let c = RunConfig::resolve(flags.or(file)).unwrap();
        assert_eq!((c.command, c.d, c.seed), (Command::Tail, 2, 4));
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(partial(Command::Tail)).unwrap();
        assert_eq!(c.t, Some(vec![0.5, 1.0, 1.5]));
        assert_eq!((c.seed, c.alpha, c.format), (0, Some(0.0), Format::Json));
        assert!(c.workers >= 1);
        let c = RunConfig::resolve(partial(Command::Validate)).unwrap();
        assert_eq!((c.deep, c.reps), (Some(false), None));
    }

    #[test]
    fn bad_combinations() {
        let bad = [
            PartialConfig {
                alpha: Some(1.0),
                ..partial(Command::EstimateCd)
            },
            PartialConfig {
                alpha: Some(-2.0),
                ..partial(Command::Tail)
            },
            PartialConfig {
                t: Some(vec![-0.1]),
                ..partial(Command::Tail)
            },
            PartialConfig {
                t: Some(vec![0.5, 1.0]),
                ..partial(Command::PointyCount)
            },
            PartialConfig {
                deep: Some(true),
                ..partial(Command::Tail)
            },
            PartialConfig {
                reps: Some(0),
                ..partial(Command::EstimateCd)
            },
            PartialConfig {
                d: Some(1),
                ..partial(Command::Constants)
            },
            PartialConfig {
                n: Some(1.0),
                ..partial(Command::ExtremalIndex)
            },
            PartialConfig {
                reps: Some(10),
                ..partial(Command::Constants)
            },
            PartialConfig::default(),
        ];
        for p in bad {
            assert!(matches!(RunConfig::resolve(p.clone()), Err(CliError::Config(_))), "{p:?}");
        }
    }
}
