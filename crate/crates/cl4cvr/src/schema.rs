//! Dataset schema files and CSV ingestion.
//!
//! A schema lists the feature columns in field order, how each column's raw
//! strings map to ids, and the names of the click and conversion columns.
//! Every field reserves one id past its known values for unseen values.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use cl4cvr_core::data::Sample;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Vocab {
    /// Values are integers in `0..size`; anything else is out of vocabulary.
    Identity { size: u32 },
    /// Values are looked up in `values`; the id is the position.
    Map { values: Vec<String> },
}

impl Vocab {
    fn known(&self) -> u32 {
        match self {
            Vocab::Identity { size } => *size,
            Vocab::Map { values } => values.len() as u32,
        }
    }

    /// Id count including the reserved unseen-value id.
    pub fn size(&self) -> u32 {
        self.known() + 1
    }

    pub fn oov_id(&self) -> u32 {
        self.known()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub vocab: Vocab,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub fields: Vec<FieldSpec>,
    #[serde(default = "default_click")]
    pub click_column: String,
    #[serde(default = "default_conversion")]
    pub conversion_column: String,
}

fn default_click() -> String {
    "y".into()
}

fn default_conversion() -> String {
    "z".into()
}

impl DatasetSchema {
    /// Integer-id schema with fields named `f0, f1, ...`.
    pub fn identity(vocab_sizes: &[u32]) -> Self {
        DatasetSchema {
            fields: vocab_sizes
                .iter()
                .enumerate()
                .map(|(i, &size)| FieldSpec {
                    name: format!("f{i}"),
                    vocab: Vocab::Identity { size },
                })
                .collect(),
            click_column: default_click(),
            conversion_column: default_conversion(),
        }
    }

    /// Vocabulary sizes as seen by the model, reserved ids included.
    pub fn vocab_sizes(&self) -> Vec<u32> {
        self.fields.iter().map(|f| f.vocab.size()).collect()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.fields.is_empty(), "schema has no fields");
        let mut seen = BTreeSet::new();
        for name in self.fields.iter().map(|f| &f.name).chain([&self.click_column, &self.conversion_column]) {
            if !seen.insert(name.as_str()) {
                anyhow::bail!("column {name:?} appears twice in the schema");
            }
        }
        for f in &self.fields {
            if let Vocab::Map { values } = &f.vocab {
                let mut uniq = values.clone();
                uniq.sort();
                uniq.dedup();
                anyhow::ensure!(uniq.len() == values.len(), "field {:?} lists a value twice", f.name);
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
        let schema: DatasetSchema = toml::from_str(&text).with_context(|| format!("parsing schema {}", path.display()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))
    }

    /// Builds a string-map schema from the distinct values of a CSV file,
    /// listed in order of first appearance.
    pub fn fit(
        reader: impl Read,
        field_names: &[String],
        click_column: &str,
        conversion_column: &str,
    ) -> anyhow::Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols = field_names
            .iter()
            .map(|n| column(&header, n))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let mut values: Vec<Vec<String>> = vec![Vec::new(); cols.len()];
        let mut index: Vec<HashSet<String>> = vec![HashSet::new(); cols.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (f, &c) in cols.iter().enumerate() {
                let v = rec.get(c).unwrap_or("");
                if index[f].insert(v.to_string()) {
                    values[f].push(v.to_string());
                }
            }
        }
        let schema = DatasetSchema {
            fields: field_names
                .iter()
                .zip(values)
                .map(|(name, values)| FieldSpec {
                    name: name.clone(),
                    vocab: Vocab::Map { values },
                })
                .collect(),
            click_column: click_column.into(),
            conversion_column: conversion_column.into(),
        };
        schema.validate()?;
        Ok(schema)
    }
}

fn column(header: &csv::StringRecord, name: &str) -> anyhow::Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow::anyhow!("missing column {name:?}"))
}

/// One rejected row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("{} malformed row(s); first at line {}: {}", .0.len(), .0[0].line, .0[0].message)]
    Rows(Vec<RowError>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedCsv {
    pub samples: Vec<Sample>,
    /// Per field, how many values were mapped to the reserved unseen id.
    pub oov_counts: Vec<usize>,
}

impl LoadedCsv {
    pub fn oov_total(&self) -> usize {
        self.oov_counts.iter().sum()
    }
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn parse_label(raw: &str, column: &str) -> Result<u8, String> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("label {column}={other:?} is not 0 or 1")),
    }
}

struct Lookup<'a> {
    vocab: &'a Vocab,
    map: Option<HashMap<&'a str, u32>>,
}

impl<'a> Lookup<'a> {
    fn new(vocab: &'a Vocab) -> Self {
        let map = match vocab {
            Vocab::Map { values } => Some(values.iter().enumerate().map(|(i, v)| (v.as_str(), i as u32)).collect()),
            Vocab::Identity { .. } => None,
        };
        Lookup { vocab, map }
    }

    fn id(&self, raw: &str) -> Option<u32> {
        match (&self.map, self.vocab) {
            (Some(m), _) => m.get(raw).copied(),
            (None, Vocab::Identity { size }) => raw.trim().parse::<u32>().ok().filter(|v| v < size),
            (None, Vocab::Map { .. }) => None,
        }
    }
}

/// Parses a CSV stream. Every malformed row is collected before failing, so
/// the error lists all offending lines.
pub fn read_csv(reader: impl Read, schema: &DatasetSchema) -> Result<LoadedCsv, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.into()))
    };
    let feature_cols = schema.fields.iter().map(|f| find(&f.name)).collect::<Result<Vec<_>, _>>()?;
    let y_col = find(&schema.click_column)?;
    let z_col = find(&schema.conversion_column)?;
    let lookups: Vec<Lookup> = schema.fields.iter().map(|f| Lookup::new(&f.vocab)).collect();

    let mut samples = Vec::new();
    let mut oov_counts = vec![0; schema.fields.len()];
    let mut errors = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            errors.push(RowError {
                line,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
            continue;
        }
        let labels = parse_label(&record[y_col], &schema.click_column)
            .and_then(|y| parse_label(&record[z_col], &schema.conversion_column).map(|z| (y, z)));
        let (y, z) = match labels {
            Ok(v) => v,
            Err(message) => {
                errors.push(RowError { line, message });
                continue;
            }
        };
        if z > y {
            errors.push(RowError {
                line,
                message: "conversion without click (z=1, y=0)".into(),
            });
            continue;
        }
        let features = feature_cols
            .iter()
            .zip(&lookups)
            .enumerate()
            .map(|(f, (&c, lk))| {
                lk.id(&record[c]).unwrap_or_else(|| {
                    oov_counts[f] += 1;
                    lk.vocab.oov_id()
                })
            })
            .collect();
        samples.push(Sample::new(features, y, z).expect("labels checked above"));
    }
    if errors.is_empty() {
        Ok(LoadedCsv { samples, oov_counts })
    } else {
        Err(IngestError::Rows(errors))
    }
}

/// Loads a CSV file and prints a warning to stderr when unseen values were
/// mapped to reserved ids.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> anyhow::Result<LoadedCsv> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let loaded = read_csv(std::io::BufReader::new(file), schema).with_context(|| format!("ingesting {}", path.display()))?;
    if loaded.oov_total() > 0 {
        let per_field: Vec<String> = schema
            .fields
            .iter()
            .zip(&loaded.oov_counts)
            .filter(|(_, &n)| n > 0)
            .map(|(f, n)| format!("{}={n}", f.name))
            .collect();
        eprintln!(
            "warning: {}: {} unseen value(s) mapped to the reserved id ({})",
            path.display(),
            loaded.oov_total(),
            per_field.join(", ")
        );
    }
    Ok(loaded)
}

/// Writes samples with raw values rendered through the schema. Reserved ids
/// are written as an empty string for map vocabularies and as the id itself
/// for identity vocabularies.
pub fn write_csv(writer: impl Write, schema: &DatasetSchema, samples: &[Sample]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = schema
        .fields
        .iter()
        .map(|f| f.name.as_str())
        .chain([schema.click_column.as_str(), schema.conversion_column.as_str()])
        .collect();
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for s in samples {
        anyhow::ensure!(s.features().len() == schema.fields.len(), "sample has {} fields, schema {}", s.features().len(), schema.fields.len());
        row.clear();
        for (&id, f) in s.features().iter().zip(&schema.fields) {
            row.push(match &f.vocab {
                Vocab::Identity { .. } => id.to_string(),
                Vocab::Map { values } => values.get(id as usize).cloned().unwrap_or_default(),
            });
        }
        row.push(s.click().to_string());
        row.push(s.conversion().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, schema: &DatasetSchema, samples: &[Sample]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(std::io::BufWriter::new(file), schema, samples)
}
