//! Labelled sample container and its CSV form.
//!
//! The CSV header is exactly
//! `object_id,class_id,stiffness,viscosity,restitution,friction`, one row per
//! measurement. `class_id` is an opaque label; dense class indices are given
//! by order of first appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{self, PropertySample, DIM, FEATURE_NAMES};

pub const CSV_HEADER: [&str; 6] = [
    "object_id",
    "class_id",
    "stiffness",
    "viscosity",
    "restitution",
    "friction",
];

/// Dense, 0-based index into a dataset's class table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub object_id: String,
    pub class: ClassId,
    pub sample: PropertySample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Row>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking that every row refers to a listed class.
    pub fn new(rows: Vec<Row>, class_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(r) = rows.iter().find(|r| r.class.0 >= class_names.len()) {
            return Err(Error::invalid(format!(
                "row for object `{}` references class {} but only {} classes exist",
                r.object_id,
                r.class,
                class_names.len()
            )));
        }
        Ok(Dataset { rows, class_names })
    }

    /// Builds a dataset from `(object id, class label, sample)` triples,
    /// numbering classes by first appearance.
    pub fn from_labelled<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, S, PropertySample)>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, ClassId> = HashMap::new();
        let mut names = Vec::new();
        let rows = records
            .into_iter()
            .map(|(object_id, label, sample)| {
                let label = label.as_ref();
                let class = *index.entry(label.to_owned()).or_insert_with(|| {
                    names.push(label.to_owned());
                    ClassId(names.len() - 1)
                });
                Row {
                    object_id,
                    class,
                    sample,
                }
            })
            .collect();
        Dataset::new(rows, names)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class: ClassId) -> &str {
        &self.class_names[class.0]
    }

    /// Number of rows per class, indexed by `ClassId`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for r in &self.rows {
            counts[r.class.0] += 1;
        }
        counts
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Csv {
            row: 0,
            field: None,
            message: e.to_string(),
        })?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Header {
                expected: CSV_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }

        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Csv {
                row,
                field: None,
                message: e.to_string(),
            })?;
            if rec.len() != CSV_HEADER.len() {
                return Err(Error::Csv {
                    row,
                    field: None,
                    message: format!("expected {} columns, found {}", CSV_HEADER.len(), rec.len()),
                });
            }
            let mut values = [0.0; DIM];
            for (f, v) in values.iter_mut().enumerate() {
                let raw = &rec[f + 2];
                *v = raw.parse::<f64>().map_err(|_| Error::Csv {
                    row,
                    field: Some(FEATURE_NAMES[f].to_owned()),
                    message: format!("`{raw}` is not a number"),
                })?;
            }
            if let Some(f) = sample::check(&values) {
                return Err(Error::Csv {
                    row,
                    field: Some(FEATURE_NAMES[f].to_owned()),
                    message: sample::violation(f, values[f]),
                });
            }
            records.push((
                rec[0].to_owned(),
                rec[1].to_owned(),
                PropertySample::from_array_unchecked(values),
            ));
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::from_labelled(records)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save_csv_with_comments(path, "")
    }

    /// Like [`Dataset::save_csv`], preceded by each line of `comments` as a
    /// `# ` line. The reader skips those lines.
    pub fn save_csv_with_comments(&self, path: impl AsRef<Path>, comments: &str) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut write = || -> std::io::Result<()> {
            for line in comments.lines() {
                writeln!(file, "# {line}")?;
            }
            self.write_csv(&mut file)
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Writes the CSV form. Floats use Rust's shortest round-trip formatting,
    /// so reading the output back reproduces every value exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let v = r.sample.to_array();
            w.write_record([
                r.object_id.as_str(),
                self.class_name(r.class),
                &v[0].to_string(),
                &v[1].to_string(),
                &v[2].to_string(),
                &v[3].to_string(),
            ])?;
        }
        w.flush()
    }
}
