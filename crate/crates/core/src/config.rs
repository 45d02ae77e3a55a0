//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments run to end of line
//! data = synthetic            # or a CSV path
//! synthetic.separation = 8
//! synthetic.stiffness_mean = 200, 3000
//! alpha = 0.4
//! tau_out = inf
//! novelty_threshold = auto
//! ```
//!
//! Files ending in `.json` are read as the serialised [`ExperimentConfig`]
//! instead. [`to_kv`] writes the effective config back in the flat form.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::{Arm, DataSource, ExperimentConfig};
use crate::rng::RngSeed;
use crate::sample::{DIM, FEATURE_NAMES};
use crate::synthetic::{MeanLayout, SigmaScale, SyntheticSpec};

const SYNTHETIC_PREFIX: &str = "synthetic.";

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not {what}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value, "a number")?;
    if !v.is_finite() {
        return Err(Error::config(key, format!("`{value}` is not finite")));
    }
    Ok(v)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("`{value}` is not a boolean"))),
    }
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi] => Ok((parse_f64(key, lo)?, parse_f64(key, hi)?)),
        _ => Err(Error::config(
            key,
            format!("`{value}` is not a `low, high` pair"),
        )),
    }
}

fn parse_count_or_inf(key: &str, value: &str) -> Result<usize> {
    if value == "inf" {
        Ok(usize::MAX)
    } else {
        parse(key, value, "a non-negative integer or `inf`")
    }
}

fn feature_key(key: &str, suffix: &str) -> Option<usize> {
    let name = key.strip_suffix(suffix)?;
    FEATURE_NAMES.iter().position(|f| *f == name)
}

/// Calls `apply` on every `key = value` line of `text`, skipping blanks and
/// `#` comments. Config errors are tagged with the 1-based line number.
pub fn for_each_entry(text: &str, mut apply: impl FnMut(&str, &str) -> Result<()>) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: Some(i + 1),
                key: None,
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        apply(key.trim(), value.trim()).map_err(|e| match e {
            Error::Config { key, message, .. } => Error::Config {
                line: Some(i + 1),
                key,
                message,
            },
            other => other,
        })?;
    }
    Ok(())
}

/// Reads a generator spec (JSON by `.json` extension, flat text otherwise).
/// Flat keys may carry the `synthetic.` prefix. Does not validate.
pub fn load_synthetic(path: impl AsRef<Path>) -> Result<SyntheticSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&text).map_err(|e| Error::Config {
            line: Some(e.line()),
            key: None,
            message: e.to_string(),
        });
    }
    let mut spec = SyntheticSpec::default();
    for_each_entry(&text, |key, value| set_synthetic(&mut spec, key, value))?;
    Ok(spec)
}

/// Sets one generator key. The `synthetic.` prefix is optional.
pub fn set_synthetic(spec: &mut SyntheticSpec, key: &str, value: &str) -> Result<()> {
    let key = key.strip_prefix(SYNTHETIC_PREFIX).unwrap_or(key);
    match key {
        "classes" => spec.classes = parse(key, value, "a non-negative integer")?,
        "samples_per_class" => {
            spec.samples_per_class = parse(key, value, "a non-negative integer")?
        }
        "separation" => spec.separation = parse_f64(key, value)?,
        "seed" => spec.seed = RngSeed(parse(key, value, "an unsigned integer")?),
        "sigma_scale" => {
            spec.sigma_scale = value
                .parse::<SigmaScale>()
                .map_err(|m| Error::config(key, m))?
        }
        "mean_layout" => {
            spec.mean_layout = value
                .parse::<MeanLayout>()
                .map_err(|m| Error::config(key, m))?
        }
        _ => {
            if let Some(f) = feature_key(key, "_mean") {
                spec.mean_ranges[f] = parse_range(key, value)?;
            } else if let Some(f) = feature_key(key, "_sigma") {
                spec.sigma_ranges[f] = parse_range(key, value)?;
            } else {
                return Err(Error::config(key, "unknown generator key"));
            }
        }
    }
    Ok(())
}

/// Flat form of a generator spec, one `key = value` per line.
pub fn synthetic_to_kv(spec: &SyntheticSpec, prefix: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{prefix}classes = {}", spec.classes);
    let _ = writeln!(
        out,
        "{prefix}samples_per_class = {}",
        spec.samples_per_class
    );
    let _ = writeln!(out, "{prefix}separation = {}", spec.separation);
    let _ = writeln!(out, "{prefix}seed = {}", spec.seed);
    let _ = writeln!(out, "{prefix}mean_layout = {}", spec.mean_layout);
    let _ = writeln!(out, "{prefix}sigma_scale = {}", spec.sigma_scale);
    for f in 0..DIM {
        let (lo, hi) = spec.mean_ranges[f];
        let _ = writeln!(out, "{prefix}{}_mean = {lo}, {hi}", FEATURE_NAMES[f]);
    }
    for f in 0..DIM {
        let (lo, hi) = spec.sigma_ranges[f];
        let _ = writeln!(out, "{prefix}{}_sigma = {lo}, {hi}", FEATURE_NAMES[f]);
    }
    out
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if let Some(rest) = key.strip_prefix(SYNTHETIC_PREFIX) {
            return match &mut self.data {
                DataSource::Synthetic(spec) => {
                    set_synthetic(spec, rest, value).map_err(|e| match e {
                        Error::Config { message, .. } => Error::config(key, message),
                        other => other,
                    })
                }
                DataSource::Csv(_) => {
                    Err(Error::config(key, "generator keys need `data = synthetic`"))
                }
            };
        }
        match key {
            "data" => {
                if value == "synthetic" {
                    if !matches!(self.data, DataSource::Synthetic(_)) {
                        self.data = DataSource::Synthetic(SyntheticSpec::default());
                    }
                } else if value.is_empty() {
                    return Err(Error::config(key, "empty path"));
                } else {
                    self.data = DataSource::Csv(PathBuf::from(value));
                }
            }
            "known_fraction" => self.known_fraction = parse_f64(key, value)?,
            "train_fraction" => self.train_fraction = parse_f64(key, value)?,
            "repetitions" => self.repetitions = parse(key, value, "a non-negative integer")?,
            "novelty_quantile" => self.novelty_quantile = parse_f64(key, value)?,
            "novelty_threshold" => {
                self.novelty_threshold = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(key, value)?)
                }
            }
            "alpha" => self.clusterer.alpha = parse_f64(key, value)?,
            "beta" => self.clusterer.beta = parse_f64(key, value)?,
            "n_gen" => self.clusterer.n_gen = parse(key, value, "a non-negative integer")?,
            "tau_update" => {
                self.clusterer.tau_update = parse(key, value, "a non-negative integer")?
            }
            "tau_out" => self.clusterer.tau_out = parse_count_or_inf(key, value)?,
            "lambda_mu" => self.regression.lambda_mean = parse_f64(key, value)?,
            "lambda_sigma2" => self.regression.lambda_variance = parse_f64(key, value)?,
            "standardize_features" => self.regression.standardize = parse_bool(key, value)?,
            "seed" => self.seed = RngSeed(parse(key, value, "an unsigned integer")?),
            "arm" => self.arm = value.parse::<Arm>().map_err(|m| Error::config(key, m))?,
            "count_outliers_as_singletons" => {
                self.count_outliers_as_singletons = parse_bool(key, value)?
            }
            "include_misrouted_in_ari" => self.include_misrouted_in_ari = parse_bool(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses flat `key = value` text on top of the defaults. Does not validate.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for_each_entry(text, |key, value| config.set(key, value))?;
        Ok(config)
    }

    /// Reads a config file (JSON by `.json` extension, flat text otherwise)
    /// and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config {
                line: Some(e.line()),
                key: None,
                message: e.to_string(),
            })?
        } else {
            Self::from_kv_str(&text)?
        };
        config.validate()?;
        Ok(config)
    }
}

/// Flat form of the whole config. Parsing it back yields an equal config.
pub fn to_kv(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    match &config.data {
        DataSource::Csv(path) => {
            let _ = writeln!(out, "data = {}", path.display());
        }
        DataSource::Synthetic(spec) => {
            out.push_str("data = synthetic\n");
            out.push_str(&synthetic_to_kv(spec, SYNTHETIC_PREFIX));
        }
    }
    let c = &config.clusterer;
    let r = &config.regression;
    let _ = writeln!(out, "known_fraction = {}", config.known_fraction);
    let _ = writeln!(out, "train_fraction = {}", config.train_fraction);
    let _ = writeln!(out, "repetitions = {}", config.repetitions);
    let _ = writeln!(out, "novelty_quantile = {}", config.novelty_quantile);
    match config.novelty_threshold {
        Some(t) => writeln!(out, "novelty_threshold = {t}"),
        None => writeln!(out, "novelty_threshold = auto"),
    }
    .ok();
    let _ = writeln!(out, "alpha = {}", c.alpha);
    let _ = writeln!(out, "beta = {}", c.beta);
    let _ = writeln!(out, "n_gen = {}", c.n_gen);
    let _ = writeln!(out, "tau_update = {}", c.tau_update);
    if c.tau_out == usize::MAX {
        out.push_str("tau_out = inf\n");
    } else {
        let _ = writeln!(out, "tau_out = {}", c.tau_out);
    }
    let _ = writeln!(out, "lambda_mu = {}", r.lambda_mean);
    let _ = writeln!(out, "lambda_sigma2 = {}", r.lambda_variance);
    let _ = writeln!(out, "standardize_features = {}", r.standardize);
    let _ = writeln!(out, "seed = {}", config.seed);
    let _ = writeln!(out, "arm = {}", config.arm.name());
    let _ = writeln!(
        out,
        "count_outliers_as_singletons = {}",
        config.count_outliers_as_singletons
    );
    let _ = writeln!(
        out,
        "include_misrouted_in_ari = {}",
        config.include_misrouted_in_ari
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_kv_str(&to_kv(&c)).unwrap(), c);
    }

    #[test]
    fn overrides_round_trip() {
        let text = "data = synthetic\nsynthetic.separation = 3.5 # tighter\nsynthetic.friction_mean = 0.3, 0.9\n\
                    tau_out = inf\nnovelty_threshold = -20.25\narm = random_params\nstandardize_features = yes\n";
        let c = ExperimentConfig::from_kv_str(text).unwrap();
        assert_eq!(c.clusterer.tau_out, usize::MAX);
        assert_eq!(c.novelty_threshold, Some(-20.25));
        assert_eq!(c.arm, Arm::RandomParams);
        let DataSource::Synthetic(spec) = &c.data else {
            panic!()
        };
        assert_eq!(spec.separation, 3.5);
        assert_eq!(spec.mean_ranges[3], (0.3, 0.9));
        assert_eq!(ExperimentConfig::from_kv_str(&to_kv(&c)).unwrap(), c);
    }

    #[test]
    fn csv_source_round_trip() {
        let c = ExperimentConfig::from_kv_str("data = /tmp/objects.csv\n").unwrap();
        assert_eq!(c.data, DataSource::Csv("/tmp/objects.csv".into()));
        assert_eq!(ExperimentConfig::from_kv_str(&to_kv(&c)).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_and_key() {
        let err = ExperimentConfig::from_kv_str("alpha = 0.4\n\nbeta = lots\n").unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(key.as_deref(), Some("beta"));
            }
            other => panic!("{other:?}"),
        }
        let msg = ExperimentConfig::from_kv_str("gamma = 1")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 1") && msg.contains("gamma"), "{msg}");
        assert!(ExperimentConfig::from_kv_str("just words").is_err());
    }

    #[test]
    fn generator_keys_need_synthetic_source() {
        let err =
            ExperimentConfig::from_kv_str("data = x.csv\nsynthetic.classes = 5\n").unwrap_err();
        assert!(err.is_config_error());
    }

    #[test]
    fn synthetic_keys_with_or_without_prefix() {
        let mut spec = SyntheticSpec::default();
        set_synthetic(&mut spec, "seed", "11").unwrap();
        set_synthetic(&mut spec, "synthetic.classes", "6").unwrap();
        set_synthetic(&mut spec, "stiffness_sigma", "0.01, 0.02").unwrap();
        set_synthetic(&mut spec, "mean_layout", "independent").unwrap();
        assert_eq!(spec.mean_layout, MeanLayout::Independent);
        assert_eq!((spec.seed, spec.classes), (RngSeed(11), 6));
        assert_eq!(spec.sigma_ranges[0], (0.01, 0.02));
        assert!(set_synthetic(&mut spec, "mass_mean", "1, 2").is_err());
        assert!(set_synthetic(&mut spec, "stiffness_mean", "1").is_err());
    }

    #[test]
    fn generator_file_accepts_prefixed_and_bare_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.conf");
        fs::write(&path, "# generator\nclasses = 5\nsynthetic.seed = 3\n").unwrap();
        let spec = load_synthetic(&path).unwrap();
        assert_eq!((spec.classes, spec.seed), (5, RngSeed(3)));
        fs::write(&path, "classes = 5\nalpha = 0.4\n").unwrap();
        match load_synthetic(&path).unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("{other:?}"),
        }
    }
}
