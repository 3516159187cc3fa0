use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Column roles for [`ingest_csv`]. Feature columns keep their header order; a categorical
/// column expands into one indicator per level, in the order given by `levels` or else sorted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    /// Class-label column. Exactly one of `label` and `outputs` must be set.
    pub label: Option<String>,
    /// Continuous per-arm targets.
    pub outputs: Vec<String>,
    pub categorical: Vec<String>,
    pub numeric: Vec<String>,
    pub drop: Vec<String>,
    /// Kind given to columns not named anywhere else; unnamed columns are an error when unset.
    pub rest: Option<ColumnKind>,
    /// Missing-value marker. Rows holding it in any used column are dropped and counted.
    pub na: Option<String>,
    pub classes: Vec<String>,
    pub levels: BTreeMap<String, Vec<String>>,
    pub expected_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Classes { labels: Vec<usize>, names: Vec<String> },
    Outputs(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub columns: Vec<String>,
    /// True for columns read as numbers, false for one-hot indicators.
    pub numeric: Vec<bool>,
    pub target: Target,
    /// Rows removed for holding the missing-value marker.
    pub dropped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn num_classes(&self) -> usize {
        match &self.target {
            Target::Classes { names, .. } => names.len(),
            Target::Outputs(o) => o.first().map_or(0, Vec::len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Label,
    Output(usize),
    Feature(ColumnKind),
    Skip,
}

fn ingest_err(row: usize, message: impl Into<String>) -> Error {
    Error::Ingest { row, message: message.into() }
}

fn parse_num(s: &str, row: usize, col: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ingest_err(row, format!("column `{col}`: `{s}` is not a finite number")))
}

/// Reads a headered CSV into a dense feature matrix and its targets.
///
/// Rows in errors are 1-based file lines, so the header is row 1.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, schema)
}

/// [`ingest_csv`] over any reader.
pub fn ingest_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    if schema.label.is_some() == !schema.outputs.is_empty() {
        return Err(Error::Config("schema needs exactly one of `label` and `outputs`".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();

    let listed = schema.categorical.iter().chain(&schema.numeric).chain(&schema.drop).chain(&schema.outputs);
    if let Some(name) = listed.chain(&schema.label).find(|n| !header.contains(n)) {
        return Err(ingest_err(1, format!("column `{name}` not in header")));
    }

    let roles = header
        .iter()
        .map(|h| {
            if schema.label.as_ref() == Some(h) {
                Ok(Role::Label)
            } else if let Some(i) = schema.outputs.iter().position(|o| o == h) {
                Ok(Role::Output(i))
            } else if schema.drop.contains(h) {
                Ok(Role::Skip)
            } else if schema.categorical.contains(h) {
                Ok(Role::Feature(ColumnKind::Categorical))
            } else if schema.numeric.contains(h) {
                Ok(Role::Feature(ColumnKind::Numeric))
            } else {
                schema
                    .rest
                    .map(Role::Feature)
                    .ok_or_else(|| ingest_err(1, format!("column `{h}` has no role in the schema")))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut dropped = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ingest_err(line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(ingest_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
        let missing = schema.na.as_ref().is_some_and(|na| {
            fields.iter().zip(&roles).any(|(f, r)| *r != Role::Skip && f == na)
        });
        if missing {
            dropped += 1;
        } else {
            rows.push((line, fields));
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }
    if rows.is_empty() {
        return Err(ingest_err(1, "no usable data rows"));
    }

    // Level lists per categorical column.
    let mut levels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (c, role) in roles.iter().enumerate() {
        if *role != Role::Feature(ColumnKind::Categorical) {
            continue;
        }
        let list = match schema.levels.get(&header[c]) {
            Some(declared) => declared.clone(),
            None => rows.iter().map(|(_, f)| f[c].clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        levels.insert(c, list);
    }

    let mut columns = Vec::new();
    let mut numeric = Vec::new();
    for (c, role) in roles.iter().enumerate() {
        match role {
            Role::Feature(ColumnKind::Numeric) => {
                columns.push(header[c].clone());
                numeric.push(true);
            }
            Role::Feature(ColumnKind::Categorical) => {
                columns.extend(levels[&c].iter().map(|l| format!("{}={l}", header[c])));
                numeric.resize(columns.len(), false);
            }
            _ => {}
        }
    }
    if let Some(d) = schema.expected_dim {
        if d != columns.len() {
            return Err(ingest_err(1, format!("shape mismatch: expected {d} feature columns, got {}", columns.len())));
        }
    }

    let label_col = roles.iter().position(|r| *r == Role::Label);
    let class_names: Vec<String> = match label_col {
        Some(_) if !schema.classes.is_empty() => schema.classes.clone(),
        Some(c) => rows.iter().map(|(_, f)| f[c].clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        None => Vec::new(),
    };

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::new();
    let mut outputs = Vec::new();
    for (line, fields) in &rows {
        let mut x = Vec::with_capacity(columns.len());
        let mut out = vec![0.0; schema.outputs.len()];
        for (c, role) in roles.iter().enumerate() {
            let v = &fields[c];
            match role {
                Role::Feature(ColumnKind::Numeric) => x.push(parse_num(v, *line, &header[c])?),
                Role::Feature(ColumnKind::Categorical) => {
                    let lv = &levels[&c];
                    let hit = lv
                        .iter()
                        .position(|l| l == v)
                        .ok_or_else(|| ingest_err(*line, format!("column `{}`: unknown level `{v}`", header[c])))?;
                    x.extend((0..lv.len()).map(|j| if j == hit { 1.0 } else { 0.0 }));
                }
                Role::Label => labels.push(
                    class_names
                        .iter()
                        .position(|n| n == v)
                        .ok_or_else(|| ingest_err(*line, format!("unknown label `{v}`")))?,
                ),
                Role::Output(i) => out[*i] = parse_num(v, *line, &header[c])?,
                Role::Skip => {}
            }
        }
        features.push(x);
        if !schema.outputs.is_empty() {
            outputs.push(out);
        }
    }

    let target = match label_col {
        Some(_) => Target::Classes { labels, names: class_names },
        None => Target::Outputs(outputs),
    };
    Ok(Dataset { features, columns, numeric, target, dropped })
}
