//! Flat key-value run configuration. Files use `key = value` lines with
//! dotted section prefixes (`inner.variant = standard`), `#` comments, and
//! UTF-8 text; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use crate::lower::InnerVariant;
use crate::problem::BallRule;
use crate::{Error, Result};

/// Everything a command needs to run. Fields left `None` fall back to
/// per-command defaults.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub t: Option<f64>,
    pub t0: Option<f64>,
    pub eps: Option<f64>,
    pub eps0: Option<f64>,
    pub rounds: Option<usize>,
    pub max_outer: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub suite: Option<String>,
    pub inner_variant: Option<InnerVariant>,
    pub augment_ball: bool,
    pub ball_rule: Option<BallRule>,
    pub svm_mu0: Option<f64>,
}

/// Parses a config file into key-value pairs. Later occurrences of a key win.
pub fn parse_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{}'",
                lineno + 1,
                line
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

/// Comma-separated reals, e.g. `x0 = 1.0, -0.5`.
pub fn parse_vector(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|part| parse_as(key, part.trim())).collect()
}

impl RunConfig {
    /// Folds parsed file entries into the config. Only known keys are
    /// accepted so typos fail loudly.
    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            match key.as_str() {
                "problem" => self.problem = Some(value.clone()),
                "t" => self.t = Some(parse_as(key, value)?),
                "t0" => self.t0 = Some(parse_as(key, value)?),
                "eps" => self.eps = Some(parse_as(key, value)?),
                "eps0" => self.eps0 = Some(parse_as(key, value)?),
                "rounds" => self.rounds = Some(parse_as(key, value)?),
                "max_outer" => self.max_outer = Some(parse_as(key, value)?),
                "x0" => self.x0 = Some(parse_vector(key, value)?),
                "seed" => self.seed = Some(parse_as(key, value)?),
                "out" => self.out = Some(value.clone()),
                "suite" => self.suite = Some(value.clone()),
                "inner.variant" => self.inner_variant = Some(value.parse()?),
                "augment.ball" => self.augment_ball = parse_as(key, value)?,
                "ball.rule" => {
                    self.ball_rule = Some(match value.as_str() {
                        "conservative" => BallRule::Conservative,
                        "as-published" => BallRule::AsPublished,
                        other => {
                            return Err(Error::Config(format!("unknown ball rule '{other}'")))
                        }
                    })
                }
                "svm.mu0" => self.svm_mu0 = Some(parse_as(key, value)?),
                other => return Err(Error::Config(format!("unknown config key '{other}'"))),
            }
        }
        Ok(())
    }
}
