//! Flat `key = value` run configuration, merged under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tagforge::{Error, Result, Strategy, SynthSpec};

/// Every key a config file may set. Underscores and dashes are interchangeable.
pub const KEYS: &[&str] = &[
    "data",
    "synth",
    "categories",
    "tmn-dist",
    "strategies",
    "rho-grid",
    "seed",
    "split",
    "top",
    "out",
    "population-mode",
    "smoothing",
    "threads",
    "per-user-dump",
    "pool",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err =
            |line: usize, message: String| Error::Config(format!("{}: line {}: {}", path.display(), line, message));
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, found {:?}", line)))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(err(line_no, format!("unknown key {:?}", key)));
            }
            if entries
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(err(line_no, format!("duplicate key {:?}", key)));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    /// The flag value if given, else the parsed file value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|e| {
                Error::Config(format!(
                    "{}: line {}: invalid value for {}: {}",
                    self.path.display(),
                    line,
                    key,
                    e
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyList(pub Vec<Strategy>);

impl FromStr for StrategyList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let strategy: Strategy = name.parse()?;
            if !out.contains(&strategy) {
                out.push(strategy);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("strategy list is empty".into()));
        }
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopList(pub Vec<usize>);

impl FromStr for TopList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out: Vec<usize> = s
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("invalid V list {:?}", s)))?;
        if out.contains(&0) {
            return Err(Error::Config("V must be positive".into()));
        }
        out.dedup();
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid(pub Vec<f64>);

impl FromStr for RhoGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        tagforge::evaluation::parse_rho_grid(s).map(Self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pool(pub tagforge::PoolMode);

impl FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "global" => Ok(Self(tagforge::PoolMode::Global)),
            "per_user" | "per-user" => Ok(Self(tagforge::PoolMode::PerUser)),
            other => Err(Error::Config(format!("unknown pool {:?} (global, per-user)", other))),
        }
    }
}

/// Synthetic-data description such as
/// `users=200,items=2000,categories=11,per-user=100,concentration=0.3`.
/// Missing keys keep their defaults; `seed` is optional and reported
/// separately so the run seed can fill it in.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthArg {
    pub spec: SynthSpec,
    pub seed_given: bool,
}

impl FromStr for SynthArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        let mut seed_given = false;
        let s = s.trim();
        if s.is_empty() || s == "default" {
            return Ok(Self { spec, seed_given });
        }
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("synth entry {:?} is not key=value", part)))?;
            let value = value.trim();
            let bad = || Error::Config(format!("invalid synth value {:?} for {}", value, key.trim()));
            let int = || value.parse::<usize>().map_err(|_| bad());
            let real = || value.parse::<f64>().map_err(|_| bad());
            match key.trim().replace('_', "-").as_str() {
                "users" => spec.num_users = int()?,
                "items" => spec.num_items = int()?,
                "categories" => spec.num_categories = int()?,
                "per-user" => spec.annotations_per_user = int()?,
                "concentration" => spec.concentration = real()?,
                "skew" => spec.skew = real()?,
                "seed" => {
                    spec.seed = value.parse().map_err(|_| bad())?;
                    seed_given = true;
                }
                other => return Err(Error::Config(format!("unknown synth key {:?}", other))),
            }
        }
        spec.validate()?;
        Ok(Self { spec, seed_given })
    }
}
