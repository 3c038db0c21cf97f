//! Flat key-value experiment configuration.
//!
//! One `key = value` per line; blank lines and lines starting with `#` are
//! ignored. Lists are comma-separated; `random_seeds` items may be
//! inclusive ranges like `0..14`. `pool.dims` takes one value (a cube) or
//! three. Unknown and duplicate keys are rejected so typos cannot silently
//! change an experiment.

use std::collections::BTreeMap;

use crate::bench::synthetic::SyntheticSpec;
use crate::error::{Error, Result};
use crate::selectors::{Strategy, ALL_STRATEGIES};
use crate::volume::RoiMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams {
    /// Monte-Carlo runs per stack.
    pub runs: usize,
    /// Prototype perturbation std per standardized dimension.
    pub sigma: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            runs: 20,
            sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    pub roi_modes: Vec<RoiMode>,
    pub random_seeds: Vec<u64>,
    pub pool: SyntheticSpec,
    pub val: SyntheticSpec,
    pub surrogate: SurrogateParams,
    pub features_grid: usize,
    pub birch_threshold: f64,
}

const KNOWN_KEYS: &[&str] = &[
    "strategies",
    "budgets",
    "roi_modes",
    "random_seeds",
    "pool.n",
    "pool.dims",
    "pool.seed",
    "pool.modes",
    "pool.noise_std",
    "pool.tumor_prob",
    "pool.organ_intensity",
    "pool.background",
    "val.n",
    "val.dims",
    "val.seed",
    "val.modes",
    "val.noise_std",
    "val.tumor_prob",
    "val.organ_intensity",
    "val.background",
    "surrogate.sigma",
    "surrogate.runs",
    "features.grid",
    "birch.threshold",
];

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", idx + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key: {key}")));
        }
        if kv.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate config key: {key}")));
        }
    }

    let required = |key: &str| -> Result<&String> {
        kv.get(key).ok_or_else(|| Error::MissingConfigKey(key.into()))
    };

    let strategies = parse_strategies(required("strategies")?)?;
    let budgets = parse_list(required("budgets")?, "budgets", |tok| {
        tok.parse::<usize>().ok().filter(|&b| b > 0)
    })?;
    let roi_modes = parse_list(required("roi_modes")?, "roi_modes", |tok| {
        tok.parse::<RoiMode>().ok()
    })?;
    let random_seeds = parse_seed_list(required("random_seeds")?)?;

    let pool = parse_spec(&kv, "pool")?;
    let val = parse_spec(&kv, "val")?;

    let surrogate = SurrogateParams {
        runs: parse_opt(&kv, "surrogate.runs", SurrogateParams::default().runs, |t| {
            t.parse::<usize>().ok().filter(|&r| r >= 2)
        })?,
        sigma: parse_opt(&kv, "surrogate.sigma", SurrogateParams::default().sigma, |t| {
            t.parse::<f64>().ok().filter(|s| s.is_finite() && *s >= 0.0)
        })?,
    };
    let features_grid = parse_opt(&kv, "features.grid", 4, |t| {
        t.parse::<usize>().ok().filter(|&g| g >= 1)
    })?;
    let birch_threshold = parse_opt(&kv, "birch.threshold", 0.5, |t| {
        t.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
    })?;

    let config = ExperimentConfig {
        strategies,
        budgets,
        roi_modes,
        random_seeds,
        pool,
        val,
        surrogate,
        features_grid,
        birch_threshold,
    };
    config.validate()?;
    Ok(config)
}

fn parse_strategies(value: &str) -> Result<Vec<Strategy>> {
    if value.trim() == "all" {
        return Ok(ALL_STRATEGIES.to_vec());
    }
    let list = parse_list(value, "strategies", |tok| tok.parse::<Strategy>().ok())?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &list {
        if !seen.insert(s.name()) {
            return Err(Error::Config(format!("duplicate strategy: {s}")));
        }
    }
    Ok(list)
}

fn parse_list<T>(value: &str, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|tok| {
            parse(tok).ok_or_else(|| Error::Config(format!("{key}: invalid item `{tok}`")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

/// Comma-separated seeds; an item is a single integer or an inclusive range
/// `a..b`.
fn parse_seed_list(value: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = tok.split_once("..") {
            let lo: u64 = a.trim().parse().map_err(|_| {
                Error::Config(format!("random_seeds: invalid range start `{a}`"))
            })?;
            let hi: u64 = b.trim().parse().map_err(|_| {
                Error::Config(format!("random_seeds: invalid range end `{b}`"))
            })?;
            if hi < lo {
                return Err(Error::Config(format!("random_seeds: empty range `{tok}`")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(tok.parse().map_err(|_| {
                Error::Config(format!("random_seeds: invalid seed `{tok}`"))
            })?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("random_seeds: empty list".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &out {
        if !seen.insert(*s) {
            return Err(Error::Config(format!("random_seeds: duplicate seed {s}")));
        }
    }
    Ok(out)
}

fn parse_opt<T>(
    kv: &BTreeMap<String, String>,
    key: &str,
    default: T,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => {
            parse(v).ok_or_else(|| Error::Config(format!("{key}: invalid value `{v}`")))
        }
    }
}

fn parse_spec(kv: &BTreeMap<String, String>, prefix: &str) -> Result<SyntheticSpec> {
    let key = |suffix: &str| format!("{prefix}.{suffix}");
    let required = |suffix: &str| -> Result<&String> {
        kv.get(&key(suffix))
            .ok_or_else(|| Error::MissingConfigKey(key(suffix)))
    };
    let n: usize = required("n")?
        .parse()
        .map_err(|_| Error::Config(format!("{}: invalid count", key("n"))))?;
    let seed: u64 = required("seed")?
        .parse()
        .map_err(|_| Error::Config(format!("{}: invalid seed", key("seed"))))?;
    let dims = parse_dims(required("dims")?, &key("dims"))?;
    let modes = parse_opt(kv, &key("modes"), 1, |t| t.parse::<usize>().ok())?;
    let noise_std = parse_opt(kv, &key("noise_std"), 0.02, |t| t.parse::<f64>().ok())?;
    let tumor_prob = parse_opt(kv, &key("tumor_prob"), 0.0, |t| t.parse::<f64>().ok())?;
    let organ_intensity = parse_opt(kv, &key("organ_intensity"), (0.7, 0.9), parse_pair)?;
    let background = parse_opt(kv, &key("background"), (0.1, 0.3), parse_pair)?;
    let spec = SyntheticSpec {
        n,
        dims,
        seed,
        organ_intensity,
        background,
        noise_std,
        tumor_prob,
        modes,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_dims(value: &str, key: &str) -> Result<[usize; 3]> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    let parse_one = |t: &str| -> Result<usize> {
        t.parse()
            .map_err(|_| Error::Config(format!("{key}: invalid dimension `{t}`")))
    };
    match toks.len() {
        1 => {
            let d = parse_one(toks[0])?;
            Ok([d, d, d])
        }
        3 => Ok([parse_one(toks[0])?, parse_one(toks[1])?, parse_one(toks[2])?]),
        other => Err(Error::Config(format!(
            "{key}: expected 1 or 3 values, got {other}"
        ))),
    }
}

fn parse_pair(value: &str) -> Option<(f64, f64)> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    if toks.len() != 2 {
        return None;
    }
    let lo = toks[0].parse().ok()?;
    let hi = toks[1].parse().ok()?;
    Some((lo, hi))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        self.val.validate()?;
        for &b in &self.budgets {
            if b > self.pool.n {
                return Err(Error::Budget {
                    m: b,
                    n: self.pool.n,
                });
            }
        }
        Ok(())
    }

    /// Canonical echo of every resolved key, defaults included; this goes
    /// into the run log verbatim.
    pub fn render_resolved(&self) -> String {
        let list = |items: &[String]| items.join(",");
        let mut out = String::new();
        out.push_str(&format!(
            "strategies = {}\n",
            list(&self.strategies.iter().map(|s| s.name().to_string()).collect::<Vec<_>>())
        ));
        out.push_str(&format!(
            "budgets = {}\n",
            list(&self.budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>())
        ));
        out.push_str(&format!(
            "roi_modes = {}\n",
            list(&self.roi_modes.iter().map(|r| r.name().to_string()).collect::<Vec<_>>())
        ));
        out.push_str(&format!(
            "random_seeds = {}\n",
            list(&self.random_seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        ));
        for (prefix, spec) in [("pool", &self.pool), ("val", &self.val)] {
            out.push_str(&format!("{prefix}.n = {}\n", spec.n));
            out.push_str(&format!(
                "{prefix}.dims = {} {} {}\n",
                spec.dims[0], spec.dims[1], spec.dims[2]
            ));
            out.push_str(&format!("{prefix}.seed = {}\n", spec.seed));
            out.push_str(&format!("{prefix}.modes = {}\n", spec.modes));
            out.push_str(&format!("{prefix}.noise_std = {}\n", spec.noise_std));
            out.push_str(&format!("{prefix}.tumor_prob = {}\n", spec.tumor_prob));
            out.push_str(&format!(
                "{prefix}.organ_intensity = {} {}\n",
                spec.organ_intensity.0, spec.organ_intensity.1
            ));
            out.push_str(&format!(
                "{prefix}.background = {} {}\n",
                spec.background.0, spec.background.1
            ));
        }
        out.push_str(&format!("surrogate.sigma = {}\n", self.surrogate.sigma));
        out.push_str(&format!("surrogate.runs = {}\n", self.surrogate.runs));
        out.push_str(&format!("features.grid = {}\n", self.features_grid));
        out.push_str(&format!("birch.threshold = {}\n", self.birch_threshold));
        out
    }
}
