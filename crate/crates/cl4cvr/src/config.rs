//! Experiment configuration files.
//!
//! A config is TOML with a `[run]` table (method, master seed and
//! hyperparameters), a `[data]` table naming the dataset source, and an
//! optional `[experiment]` table for multi-run commands. Command-line
//! overrides are dotted keys applied to the parsed TOML tree before it is
//! checked against the schema, so a misspelled key is rejected like a
//! misspelled line in the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cl4cvr_core::data::{Dataset, SyntheticConfig};
use cl4cvr_core::experiment::RunConfig;
use serde::{Deserialize, Serialize};

use crate::schema::{load_csv, DatasetSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv(CsvSource),
}

/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub schema: PathBuf,
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

/// Settings shared by `ablate` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub seeds: Vec<u64>,
    pub tau_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            seeds: vec![1, 2, 3],
            tau_grid: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            alpha_grid: vec![0.0, 0.01, 0.1, 0.3, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub data: DataSource,
    #[serde(default)]
    pub experiment: ExperimentSettings,
}

impl ExperimentConfig {
    /// Reads a config file, applies `key=value` overrides and validates.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text, overrides).with_context(|| format!("in config {}", path.display()))?;
        if let DataSource::Csv(src) = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [&mut src.schema, &mut src.train, &mut src.val, &mut src.test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let mut tree: toml::Table = toml::from_str(text)?;
        for (key, value) in overrides {
            set_dotted(&mut tree, key, parse_value(value))?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(tree).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.run.validate().context("[run]")?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate().context("[data]")?;
        }
        anyhow::ensure!(!self.experiment.seeds.is_empty(), "experiment.seeds is empty");
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Vocabulary sizes without materialising the data.
    pub fn vocab_sizes(&self) -> anyhow::Result<Vec<u32>> {
        match &self.data {
            DataSource::Synthetic(s) => Ok(s.vocab_sizes.clone()),
            DataSource::Csv(src) => Ok(DatasetSchema::load(&src.schema)?.vocab_sizes()),
        }
    }
}

/// Splits `key=value`.
pub fn parse_override(arg: &str) -> anyhow::Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => bail!("override {arg:?} is not of the form key=value"),
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(tree: &mut toml::Table, key: &str, value: toml::Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut node = tree;
    for p in path {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("override {key:?}: {p:?} is not a table"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

pub fn load_dataset(source: &DataSource) -> anyhow::Result<Dataset> {
    match source {
        DataSource::Synthetic(cfg) => Ok(cl4cvr_core::data::generate_synthetic(cfg)?.dataset),
        DataSource::Csv(src) => {
            let schema = DatasetSchema::load(&src.schema)?;
            let data = Dataset {
                vocab_sizes: schema.vocab_sizes(),
                train: load_csv(&src.train, &schema)?.samples,
                val: load_csv(&src.val, &schema)?.samples,
                test: load_csv(&src.test, &schema)?.samples,
            };
            data.validate()?;
            Ok(data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cl4cvr_core::experiment::Method;

    const TEXT: &str = r#"
[run]
method = "cl4cvr"
seed = 7
[run.hyper]
alpha = 0.2
tower_widths = [16, 8]

[data]
source = "synthetic"
vocab_sizes = [10, 10]
train_size = 100
val_size = 50
test_size = 50
base_ctr = 0.3
base_cvr = 0.1
duplicate_fraction = 0.1
duplicate_size_weights = [1.0]
click_signal = 1.0
conversion_signal = 1.0
popularity_exponent = 0.0
seed = 3
"#;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.into(), v.into())
    }

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ExperimentConfig::parse(TEXT, &[]).unwrap();
        assert_eq!(cfg.run.method, Method::Cl4cvr);
        assert_eq!(cfg.run.hyper.alpha, 0.2);
        assert_eq!(cfg.run.hyper.batch_size, 64);
        assert_eq!(cfg.experiment.seeds, vec![1, 2, 3]);
        assert!(matches!(cfg.data, DataSource::Synthetic(ref s) if s.seed == 3));
    }

    #[test]
    fn overrides_apply_before_validation() {
        let cfg = ExperimentConfig::parse(
            TEXT,
            &[
                kv("run.hyper.alpha", "0"),
                kv("run.method", "base"),
                kv("run.hyper.encoder_widths", "[4]"),
                kv("experiment.seeds", "[5, 6]"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.run.hyper.alpha, 0.0);
        assert_eq!(cfg.run.method, Method::Base);
        assert_eq!(cfg.run.hyper.encoder_widths, vec![4]);
        assert_eq!(cfg.experiment.seeds, vec![5, 6]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = ExperimentConfig::parse(TEXT, &[kv("run.hyper.alhpa", "1")]).unwrap_err();
        assert!(format!("{err:#}").contains("alhpa"), "{err:#}");
        let err = ExperimentConfig::parse(TEXT, &[kv("run.hyper.tau", "-1")]).unwrap_err();
        assert!(format!("{err:#}").contains("tau"), "{err:#}");
        let err = ExperimentConfig::parse(TEXT, &[kv("run.method", "simclr")]).unwrap_err();
        assert!(format!("{err:#}").contains("simclr"), "{err:#}");
    }

    #[test]
    fn resolved_config_roundtrips() {
        let cfg = ExperimentConfig::parse(TEXT, &[kv("run.hyper.tau", "0.25")]).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn override_syntax() {
        assert_eq!(parse_override("a.b = 1").unwrap(), kv("a.b", "1"));
        assert!(parse_override("novalue").is_err());
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("em_fne"), toml::Value::String("em_fne".into()));
    }
}
