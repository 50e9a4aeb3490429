//! Apparent profiles under the three forgery strategies.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::folksonomy::CategorySet;
use crate::profiles::Profile;
use crate::simplexopt::solve_optimal_forgery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Optimized,
    Tmn,
    Uniform,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Optimized, Strategy::Tmn, Strategy::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Optimized => "optimized",
            Strategy::Tmn => "tmn",
            Strategy::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "optimized" | "optimised" => Ok(Strategy::Optimized),
            "tmn" => Ok(Strategy::Tmn),
            "uniform" => Ok(Strategy::Uniform),
            other => Err(Error::Config(format!(
                "unknown strategy {:?} (expected optimized, tmn or uniform)",
                other
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForgeryConfig {
    strategy: Strategy,
    rho: f64,
    tmn_distribution: Option<Profile>,
}

impl ForgeryConfig {
    pub fn new(strategy: Strategy, rho: f64, tmn_distribution: Option<Profile>) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("forgery rate {} outside [0, 1]", rho)));
        }
        if strategy == Strategy::Tmn && tmn_distribution.is_none() {
            return Err(Error::Config("the tmn strategy needs a forgery distribution".into()));
        }
        Ok(Self {
            strategy,
            rho,
            tmn_distribution,
        })
    }

    pub fn optimized(rho: f64) -> Result<Self> {
        Self::new(Strategy::Optimized, rho, None)
    }

    pub fn uniform(rho: f64) -> Result<Self> {
        Self::new(Strategy::Uniform, rho, None)
    }

    pub fn tmn(rho: f64, distribution: Profile) -> Result<Self> {
        Self::new(Strategy::Tmn, rho, Some(distribution))
    }

    /// Same strategy and distribution at another forgery rate.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.strategy, rho, self.tmn_distribution.clone())
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tmn_distribution(&self) -> Option<&Profile> {
        self.tmn_distribution.as_ref()
    }

    /// The forgery distribution `r` this config mixes into `p`.
    pub fn forgery_distribution(&self, p: &Profile, population: &Profile) -> Result<Profile> {
        match self.strategy {
            Strategy::Optimized => Ok(solve_optimal_forgery(p, population, self.rho)?.strategy),
            Strategy::Tmn => Ok(self.tmn_distribution.clone().expect("checked at construction")),
            Strategy::Uniform => Ok(Profile::uniform(Arc::clone(p.categories()))),
        }
    }
}

/// `t = (1 - rho) p + rho r` for the configured strategy. A zero rate
/// returns `p` untouched.
pub fn apparent_profile(p: &Profile, population: &Profile, config: &ForgeryConfig) -> Result<Profile> {
    p.ensure_compatible(population)?;
    if config.rho == 0.0 {
        return Ok(p.clone());
    }
    match config.strategy {
        Strategy::Optimized => Ok(solve_optimal_forgery(p, population, config.rho)?.apparent),
        _ => p.mix(&config.forgery_distribution(p, population)?, config.rho),
    }
}

/// Reads `label<TAB>weight` rows, one per category in any order, and
/// normalizes the weights.
pub fn load_tmn_distribution(path: impl AsRef<Path>, categories: Arc<CategorySet>) -> Result<Profile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut weights: Vec<Option<f64>> = vec![None; categories.len()];
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let (label, weight) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected label<TAB>weight".into()))?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid weight {:?}", weight)))?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Validation(format!(
                "weight for {:?} must be non-negative, got {}",
                label, weight
            )));
        }
        let idx = categories
            .index_of(label)
            .ok_or_else(|| Error::UnknownCategory(label.to_string()))?;
        if weights[idx].replace(weight).is_some() {
            return Err(Error::Validation(format!("category {:?} listed twice", label)));
        }
    }
    let present = weights.iter().filter(|w| w.is_some()).count();
    if present != categories.len() {
        return Err(Error::Validation(format!(
            "forgery distribution lists {} of {} categories",
            present,
            categories.len()
        )));
    }
    let weights: Vec<f64> = weights.into_iter().map(|w| w.unwrap_or(0.0)).collect();
    Profile::from_weights(categories, &weights)
}
