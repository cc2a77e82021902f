//! CSV tables, schema sidecars, candidate pools and other JSON documents.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use invsynth_core::generate::{Candidate, CandidateMeta, GenerationConfig};
use invsynth_core::preprocess::TransformPipeline;
use invsynth_core::schema::{
    validate_rows, FeatureKind, FeatureSchema, FeatureSpec, Inventory, Row, TypeViolation, ValidationReport,
    MISSING_TOKEN,
};
use invsynth_core::Cell;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CANDIDATE_ID_COLUMN: &str = "__candidate_id";
pub const LOG_PLAUSIBILITY_COLUMN: &str = "__log_plausibility";
pub const ORDER_COLUMN: &str = "__order";

/// Format like C's `%.17g`: 17 significant digits, trailing zeros dropped,
/// exponent notation outside `1e-4 <= |v| < 1e17`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_fraction(&format!("{v:.*}", (16 - exp) as usize)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_cell(schema: &FeatureSchema, index: usize, cell: &Cell) -> String {
    match cell {
        Cell::Number(v) => format_number(*v),
        Cell::Category(c) => schema.feature(index).categories[*c].clone(),
        Cell::Missing => String::new(),
    }
}

/// Path of the schema sidecar that travels with `csv`.
pub fn schema_sidecar(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".schema.json");
    PathBuf::from(name)
}

/// Path of the metadata sidecar that travels with `csv`.
pub fn meta_sidecar(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::format(path, e))?.iter().map(str::to_string).collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::format(path, e))?;
    Ok((header, records))
}

fn parse_rows(path: &Path, schema: &FeatureSchema, records: &[csv::StringRecord], width: usize) -> Result<Vec<Row>> {
    records
        .iter()
        .enumerate()
        .map(|(r, record)| {
            (0..width)
                .map(|c| {
                    let field = record.get(c).unwrap_or("");
                    let cell = schema.parse_cell(c, field).and_then(|cell| schema.check_cell(c, &cell).map(|_| cell));
                    cell.map_err(|reason| {
                        Error::format(path, format!("row {}, column `{}`: {reason}", r + 1, schema.feature(c).name))
                    })
                })
                .collect()
        })
        .collect()
}

/// Load a CSV whose header lists the schema's feature names in order.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Inventory> {
    let (header, records) = read_table(path)?;
    let names: Vec<&str> = schema.names().collect();
    if header != names {
        return Err(Error::format(path, format!("header {header:?} does not match schema {names:?}")));
    }
    let rows = parse_rows(path, schema, &records, schema.len())?;
    Ok(Inventory::new(schema.clone(), rows)?)
}

/// Read a CSV without stopping at bad cells: cells that do not parse are
/// kept as missing and reported as type violations next to the duplicate
/// and missing-value findings.
pub fn load_csv_report(path: &Path, schema: &FeatureSchema) -> Result<(Vec<Row>, ValidationReport)> {
    let (header, records) = read_table(path)?;
    let names: Vec<&str> = schema.names().collect();
    if header != names {
        return Err(Error::format(path, format!("header {header:?} does not match schema {names:?}")));
    }
    let mut parse_failures = Vec::new();
    let rows: Vec<Row> = records
        .iter()
        .enumerate()
        .map(|(r, record)| {
            (0..schema.len())
                .map(|c| {
                    schema.parse_cell(c, record.get(c).unwrap_or("")).unwrap_or_else(|description| {
                        parse_failures.push(TypeViolation { row: r, column: c, description });
                        invsynth_core::Cell::Missing
                    })
                })
                .collect()
        })
        .collect();
    let mut report = validate_rows(schema, &rows);
    report.type_violations.retain(|v| !parse_failures.iter().any(|p| p.row == v.row && p.column == v.column));
    for p in &parse_failures {
        // placeholders are not real missing values
        report.missing_counts[p.column] -= 1;
    }
    report.type_violations.extend(parse_failures);
    report.type_violations.sort_by_key(|v| (v.row, v.column));
    Ok((rows, report))
}

fn write_record<W: Write>(w: &mut csv::Writer<W>, path: &Path, fields: &[String]) -> Result<()> {
    w.write_record(fields).map_err(|e| Error::format(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `inv` as CSV; missing cells become empty fields.
pub fn save_csv(inv: &Inventory, path: &Path) -> Result<()> {
    let schema = inv.schema();
    let mut w = csv_writer(path)?;
    write_record(&mut w, path, &schema.names().map(str::to_string).collect::<Vec<_>>())?;
    for row in inv.rows() {
        let fields: Vec<String> = row.iter().enumerate().map(|(c, cell)| format_cell(schema, c, cell)).collect();
        write_record(&mut w, path, &fields)?;
    }
    finish(w, path)
}

/// Infer a schema: a column is numeric when every non-missing cell parses as
/// a finite number, otherwise categorical with labels in order of first
/// appearance. Every column allows missing values.
pub fn infer_schema(path: &Path) -> Result<FeatureSchema> {
    let (header, records) = read_table(path)?;
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::format(path, "empty file"));
    }
    let mut features = Vec::with_capacity(header.len());
    for (c, name) in header.iter().enumerate() {
        let values: Vec<&str> =
            records.iter().map(|r| r.get(c).unwrap_or("")).filter(|v| !v.is_empty() && *v != MISSING_TOKEN).collect();
        let numeric = values.iter().all(|v| v.trim().parse::<f64>().is_ok_and(f64::is_finite));
        let spec = if numeric {
            FeatureSpec::numeric(name.clone())
        } else {
            let mut labels: Vec<&str> = Vec::new();
            for v in values {
                if !labels.contains(&v) {
                    labels.push(v);
                }
            }
            FeatureSpec::categorical(name.clone(), labels)
        };
        features.push(spec.nullable());
    }
    FeatureSchema::new(features).map_err(|e| Error::format(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_schema(path: &Path) -> Result<FeatureSchema> {
    read_json(path)
}

pub fn write_schema(schema: &FeatureSchema, path: &Path) -> Result<()> {
    write_json(path, schema)
}

/// Load a table, taking its schema from `schema` if given, else from the
/// sidecar next to it, else by inference.
pub fn load_inventory(path: &Path, schema: Option<&Path>) -> Result<Inventory> {
    let sidecar = schema_sidecar(path);
    let schema = match schema {
        Some(p) => read_schema(p)?,
        None if sidecar.exists() => read_schema(&sidecar)?,
        None => infer_schema(path)?,
    };
    load_csv(path, &schema)
}

/// Write a table together with its schema sidecar.
pub fn save_inventory(inv: &Inventory, path: &Path) -> Result<()> {
    save_csv(inv, path)?;
    write_schema(inv.schema(), &schema_sidecar(path))
}

pub fn read_pipeline(path: &Path) -> Result<TransformPipeline> {
    read_json(path)
}

pub fn write_pipeline(pipeline: &TransformPipeline, path: &Path) -> Result<()> {
    write_json(path, pipeline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CandidateRecord {
    id: usize,
    stream: u64,
    feature_log_probs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PoolMeta {
    schema: FeatureSchema,
    generation: GenerationConfig,
    candidates: Vec<CandidateRecord>,
}

/// Write a candidate pool: the rows plus `__candidate_id`,
/// `__log_plausibility` and `__order` columns, and a metadata sidecar.
pub fn write_pool(pool: &[Candidate], schema: &FeatureSchema, config: &GenerationConfig, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = schema.names().map(str::to_string).collect();
    header.extend([CANDIDATE_ID_COLUMN, LOG_PLAUSIBILITY_COLUMN, ORDER_COLUMN].map(String::from));
    write_record(&mut w, path, &header)?;
    for c in pool {
        let mut fields: Vec<String> = c.row.iter().enumerate().map(|(i, cell)| format_cell(schema, i, cell)).collect();
        fields.push(c.id.to_string());
        fields.push(format_number(c.log_plausibility));
        fields.push(c.meta.order.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
        write_record(&mut w, path, &fields)?;
    }
    finish(w, path)?;
    let meta = PoolMeta {
        schema: schema.clone(),
        generation: config.clone(),
        candidates: pool
            .iter()
            .map(|c| CandidateRecord {
                id: c.id,
                stream: c.meta.stream,
                feature_log_probs: c.meta.feature_log_probs.clone(),
            })
            .collect(),
    };
    write_json(&meta_sidecar(path), &meta)
}

/// Read a pool written by [`write_pool`]. Needs the metadata sidecar.
pub fn read_pool(path: &Path) -> Result<(FeatureSchema, GenerationConfig, Vec<Candidate>)> {
    let meta: PoolMeta = read_json(&meta_sidecar(path))?;
    let schema = meta.schema;
    let d = schema.len();
    let (header, records) = read_table(path)?;
    let mut expected: Vec<String> = schema.names().map(str::to_string).collect();
    expected.extend([CANDIDATE_ID_COLUMN, LOG_PLAUSIBILITY_COLUMN, ORDER_COLUMN].map(String::from));
    if header != expected {
        return Err(Error::format(path, format!("pool header {header:?} does not match {expected:?}")));
    }
    let rows = parse_rows(path, &schema, &records, d)?;
    let mut pool = Vec::with_capacity(rows.len());
    for (r, (row, record)) in rows.into_iter().zip(&records).enumerate() {
        let bad = |what: &str| Error::format(path, format!("row {}: bad {what}", r + 1));
        let id: usize = record[d].parse().map_err(|_| bad(CANDIDATE_ID_COLUMN))?;
        let score: f64 = record[d + 1].parse().map_err(|_| bad(LOG_PLAUSIBILITY_COLUMN))?;
        let order = record[d + 2]
            .split_whitespace()
            .map(|t| t.parse::<usize>().ok().filter(|i| *i < d))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(ORDER_COLUMN))?;
        let rec = meta
            .candidates
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::format(path, format!("candidate {id} missing from metadata")))?;
        pool.push(Candidate {
            id,
            row,
            log_plausibility: score,
            meta: CandidateMeta {
                config: meta.generation.clone(),
                order,
                feature_log_probs: rec.feature_log_probs.clone(),
                stream: rec.stream,
            },
        });
    }
    Ok((schema, meta.generation, pool))
}

/// Kind label used in flat outputs.
pub fn kind_label(kind: FeatureKind) -> &'static str {
    match kind {
        FeatureKind::Numeric => "numeric",
        FeatureKind::Categorical => "categorical",
        FeatureKind::Ordinal => "ordinal",
    }
}
