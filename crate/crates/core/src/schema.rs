//! Table model: feature schema, cells, rows and inventories.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Ordinal,
}

impl FeatureKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub allow_missing: bool,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            unit: String::new(),
            allow_missing: false,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            unit: String::new(),
            allow_missing: false,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn nullable(mut self) -> Self {
        self.allow_missing = true;
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Text token read as a missing cell, besides the empty string.
pub const MISSING_TOKEN: &str = "NA";

/// Ordered, validated list of feature specs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            features: Vec<FeatureSpec>,
        }
        let raw = Raw::deserialize(deserializer)?;
        FeatureSchema::new(raw.features).map_err(serde::de::Error::custom)
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for spec in &features {
            if spec.name.is_empty() {
                return Err(Error::Schema("empty feature name".into()));
            }
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", spec.name)));
            }
            match spec.kind {
                FeatureKind::Numeric => {
                    if !spec.categories.is_empty() {
                        return Err(Error::Schema(format!("numeric feature `{}` must not list categories", spec.name)));
                    }
                }
                FeatureKind::Categorical | FeatureKind::Ordinal => {
                    if spec.categories.is_empty() {
                        return Err(Error::Schema(format!("feature `{}` needs at least one category", spec.name)));
                    }
                    let mut labels = BTreeSet::new();
                    for label in &spec.categories {
                        if label.is_empty() || label == MISSING_TOKEN {
                            return Err(Error::Schema(format!(
                                "feature `{}`: category `{label}` reads as a missing value",
                                spec.name
                            )));
                        }
                        if !labels.insert(label.as_str()) {
                            return Err(Error::Schema(format!("feature `{}` repeats category `{label}`", spec.name)));
                        }
                    }
                }
            }
        }
        Ok(FeatureSchema { features })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn numeric_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.features[i].kind.is_numeric()).collect()
    }

    /// New schema with `spec` appended.
    pub fn with_feature(&self, spec: FeatureSpec) -> Result<Self> {
        let mut features = self.features.clone();
        features.push(spec);
        FeatureSchema::new(features)
    }

    /// Parse a textual cell under feature `index`; `""` and `"NA"` are missing.
    pub fn parse_cell(&self, index: usize, text: &str) -> core::result::Result<Cell, String> {
        let spec = &self.features[index];
        if text.is_empty() || text == MISSING_TOKEN {
            return Ok(Cell::Missing);
        }
        match spec.kind {
            FeatureKind::Numeric => match text.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Cell::Number(v)),
                _ => Err(format!("`{text}` is not a finite number")),
            },
            _ => spec.category_index(text).map(Cell::Category).ok_or_else(|| format!("unknown category `{text}`")),
        }
    }

    /// Check one cell against feature `index`.
    pub fn check_cell(&self, index: usize, cell: &Cell) -> core::result::Result<(), String> {
        let spec = &self.features[index];
        match (cell, spec.kind) {
            (Cell::Missing, _) if spec.allow_missing => Ok(()),
            (Cell::Missing, _) => Err("missing value in a non-nullable column".into()),
            (Cell::Number(v), FeatureKind::Numeric) if v.is_finite() => Ok(()),
            (Cell::Number(_), FeatureKind::Numeric) => Err("non-finite number".into()),
            (Cell::Category(c), FeatureKind::Categorical | FeatureKind::Ordinal) if *c < spec.categories.len() => {
                Ok(())
            }
            (Cell::Category(c), FeatureKind::Categorical | FeatureKind::Ordinal) => {
                Err(format!("category index {c} out of range"))
            }
            (Cell::Number(_), _) => Err("number in a categorical column".into()),
            (Cell::Category(_), FeatureKind::Numeric) => Err("category in a numeric column".into()),
        }
    }
}

/// One table cell. Categories are stored as indices into the feature's
/// category list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(usize),
    Missing,
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match *self {
            Cell::Number(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<usize> {
        match *self {
            Cell::Category(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Exact equality, with numbers compared bitwise.
    pub fn same_as(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

pub type Row = Vec<Cell>;

/// Immutable table whose rows conform to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    schema: FeatureSchema,
    rows: Vec<Row>,
}

impl Inventory {
    pub fn new(schema: FeatureSchema, rows: Vec<Row>) -> Result<Self> {
        let d = schema.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Cell {
                    row: r,
                    column: String::new(),
                    reason: format!("expected {d} cells, found {}", row.len()),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                schema.check_cell(c, cell).map_err(|reason| Error::Cell {
                    row: r,
                    column: schema.feature(c).name.clone(),
                    reason,
                })?;
            }
        }
        Ok(Inventory { schema, rows })
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        Inventory { schema, rows: Vec::new() }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn into_parts(self) -> (FeatureSchema, Vec<Row>) {
        (self.schema, self.rows)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    /// Non-missing numeric values of column `index`, in row order.
    pub fn numeric_values(&self, index: usize) -> Vec<f64> {
        self.column(index).filter_map(Cell::as_number).collect()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Cell::is_missing)
    }

    /// Inventory without the rows listed in `indices`.
    pub fn without_rows(&self, indices: &[usize]) -> Inventory {
        let drop: BTreeSet<usize> = indices.iter().copied().collect();
        let rows = self.rows.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, r)| r.clone()).collect();
        Inventory { schema: self.schema.clone(), rows }
    }

    /// Cell-for-cell equality with bitwise number comparison.
    pub fn same_as(&self, other: &Inventory) -> bool {
        self.schema == other.schema
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.same_as(y)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeViolation {
    pub row: usize,
    pub column: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub duplicate_row_indices: Vec<usize>,
    pub type_violations: Vec<TypeViolation>,
    pub missing_counts: Vec<usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.duplicate_row_indices.is_empty() && self.type_violations.is_empty()
    }
}

/// Report duplicate rows, type violations and per-column missing counts.
///
/// A row is a duplicate when every cell equals the cells of some earlier row.
pub fn validate(inv: &Inventory) -> ValidationReport {
    validate_rows(inv.schema(), inv.rows())
}

/// Same as [`validate`] but over rows that have not been checked yet.
pub fn validate_rows(schema: &FeatureSchema, rows: &[Row]) -> ValidationReport {
    let d = schema.len();
    let mut report = ValidationReport { missing_counts: alloc::vec![0; d], ..Default::default() };
    let mut seen: BTreeSet<Vec<RowKey>> = BTreeSet::new();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != d {
            report.type_violations.push(TypeViolation {
                row: r,
                column: row.len().min(d),
                description: format!("expected {d} cells, found {}", row.len()),
            });
        }
        for (c, cell) in row.iter().enumerate().take(d) {
            if cell.is_missing() {
                report.missing_counts[c] += 1;
            }
            if let Err(description) = schema.check_cell(c, cell) {
                report.type_violations.push(TypeViolation { row: r, column: c, description });
            }
        }
        let key: Vec<RowKey> = row.iter().map(RowKey::from).collect();
        if !seen.insert(key) {
            report.duplicate_row_indices.push(r);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RowKey {
    Missing,
    Number(u64),
    Category(usize),
}

impl From<&Cell> for RowKey {
    fn from(cell: &Cell) -> Self {
        match *cell {
            // -0.0 and 0.0 compare equal as values
            Cell::Number(v) => RowKey::Number(if v == 0.0 { 0 } else { v.to_bits() }),
            Cell::Category(c) => RowKey::Category(c),
            Cell::Missing => RowKey::Missing,
        }
    }
}
