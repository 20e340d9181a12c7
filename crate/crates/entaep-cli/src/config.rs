//! Experiment configuration: a single JSON document selected by its
//! `command` field. Validation happens up front so a bad config dies with
//! a precise message before any work starts.

use std::path::PathBuf;

use serde::Deserialize;

/// Copies cap shared by the sweep commands; matches the type-class engine.
const MAX_COPIES: usize = 200;

#[derive(Debug, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Config {
    ClassicalAep(ClassicalAepConfig),
    QuantumAep(QuantumAepConfig),
    Axioms(SweepConfig),
    LoccCheck(SweepConfig),
    Appendix(SweepConfig),
}

#[derive(Debug, Deserialize)]
pub struct ClassicalAepConfig {
    /// Inline weights; exactly one of this and `distribution_path`.
    pub distribution: Option<Vec<f64>>,
    /// Path to a JSON array of weights.
    pub distribution_path: Option<PathBuf>,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
pub struct QuantumAepConfig {
    /// Inline state object {dims, re, im}; exactly one of this and
    /// `state_path`.
    pub state: Option<serde_json::Value>,
    pub state_path: Option<PathBuf>,
    /// Weights over the single-party cuts, in party order.
    pub theta: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Shared shape of the three Monte-Carlo report commands.
#[derive(Debug, Deserialize)]
pub struct SweepConfig {
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Config {
    /// Structural checks beyond what deserialization enforces. Numeric
    /// content (normalization, state validity) is checked where the
    /// values are first used, so those errors also name the offending
    /// quantity.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Config::ClassicalAep(c) => {
                one_source(c.distribution.is_some(), c.distribution_path.is_some(), "distribution")?;
                check_epsilons(&c.epsilons)?;
                check_ns(&c.ns)
            }
            Config::QuantumAep(c) => {
                one_source(c.state.is_some(), c.state_path.is_some(), "state")?;
                if c.theta.is_empty() {
                    return Err("theta must not be empty".into());
                }
                check_epsilons(&c.epsilons)?;
                check_ns(&c.ns)
            }
            Config::Axioms(c) | Config::LoccCheck(c) | Config::Appendix(c) => {
                if c.samples == 0 {
                    return Err("samples must be at least 1".into());
                }
                Ok(())
            }
        }
    }

    /// Output path requested by the config (the --out flag wins over it).
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Config::ClassicalAep(c) => c.out.as_ref(),
            Config::QuantumAep(c) => c.out.as_ref(),
            Config::Axioms(c) | Config::LoccCheck(c) | Config::Appendix(c) => c.out.as_ref(),
        }
    }

    /// Applies the --seed override to the commands that consume seeds.
    pub fn override_seed(&mut self, seed: u64) {
        if let Config::Axioms(c) | Config::LoccCheck(c) | Config::Appendix(c) = self {
            c.seed = seed;
        }
    }
}

fn one_source(inline: bool, path: bool, what: &str) -> Result<(), String> {
    match (inline, path) {
        (true, false) | (false, true) => Ok(()),
        (true, true) => Err(format!("give either {what} or {what}_path, not both")),
        (false, false) => Err(format!("one of {what} or {what}_path is required")),
    }
}

fn check_epsilons(eps: &[f64]) -> Result<(), String> {
    if eps.is_empty() {
        return Err("epsilons must not be empty".into());
    }
    for &e in eps {
        if !(e > 0.0 && e < 1.0) {
            return Err(format!("every epsilon must lie in (0,1), got {e}"));
        }
    }
    Ok(())
}

fn check_ns(ns: &[usize]) -> Result<(), String> {
    if ns.is_empty() {
        return Err("ns must not be empty".into());
    }
    for &n in ns {
        if n == 0 || n > MAX_COPIES {
            return Err(format!("every n must lie in 1..={MAX_COPIES}, got {n}"));
        }
    }
    Ok(())
}
