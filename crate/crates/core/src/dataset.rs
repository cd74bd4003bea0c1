//! Typed column stores, CSV ingestion and deterministic splitting.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{ColumnKind, ColumnSpec, TableSchema};

/// Values of one column. Categorical cells hold vocabulary indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Categorical(Vec<u32>),
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(v) => v.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// A table conforming to a [`TableSchema`], stored column-wise in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: TableSchema,
    columns: Vec<Column>,
    rows: usize,
}

impl Dataset {
    /// Checks column kinds, lengths, vocabulary bounds and finiteness.
    pub fn new(schema: TableSchema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} columns supplied for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let rows = columns.first().map_or(0, Column::len);
        for (spec, column) in schema.columns().iter().zip(&columns) {
            if column.len() != rows {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {rows}",
                    spec.name,
                    column.len()
                )));
            }
            match (&spec.kind, column) {
                (ColumnKind::Categorical { vocabulary }, Column::Categorical(values)) => {
                    if let Some(row) = values.iter().position(|&v| v as usize >= vocabulary.len()) {
                        return Err(Error::UnknownCategory {
                            column: spec.name.clone(),
                            row: row + 1,
                            value: values[row].to_string(),
                        });
                    }
                }
                (ColumnKind::Numeric, Column::Numeric(values)) => {
                    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                        return Err(Error::UnparseableNumeric {
                            column: spec.name.clone(),
                            row: row + 1,
                            value: values[row].to_string(),
                        });
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` has the wrong kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            rows,
        })
    }

    /// Zero-row table.
    pub fn empty(schema: TableSchema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Categorical { .. } => Column::Categorical(Vec::new()),
                ColumnKind::Numeric => Column::Numeric(Vec::new()),
            })
            .collect();
        Dataset {
            schema,
            columns,
            rows: 0,
        }
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    /// Categorical column by schema index. Panics on a numeric column.
    pub fn categorical(&self, index: usize) -> &[u32] {
        match &self.columns[index] {
            Column::Categorical(v) => v,
            Column::Numeric(_) => panic!("column {index} is numeric"),
        }
    }

    /// Numeric column by schema index. Panics on a categorical column.
    pub fn numeric(&self, index: usize) -> &[f64] {
        match &self.columns[index] {
            Column::Numeric(v) => v,
            Column::Categorical(_) => panic!("column {index} is categorical"),
        }
    }

    /// Label of each row, or all zeros for an unconditional schema.
    pub fn labels(&self) -> Vec<usize> {
        match self.schema.label_index() {
            Some(i) => self.categorical(i).iter().map(|&c| c as usize).collect(),
            None => vec![0; self.rows],
        }
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            rows: rows.len(),
        }
    }

    /// Same cells under a schema that differs only in its label column.
    pub fn with_schema(&self, schema: TableSchema) -> Result<Dataset> {
        if schema.columns() != self.schema.columns() {
            return Err(Error::SchemaMismatch("column declarations differ".into()));
        }
        Ok(Dataset {
            schema,
            columns: self.columns.clone(),
            rows: self.rows,
        })
    }

    /// Text form of one cell, as written to CSV.
    pub fn cell_text(&self, row: usize, column: usize) -> String {
        match (&self.columns[column], &self.schema.columns()[column].kind) {
            (Column::Categorical(v), ColumnKind::Categorical { vocabulary }) => {
                vocabulary[v[row] as usize].clone()
            }
            (Column::Numeric(v), _) => format!("{}", v[row]),
            _ => unreachable!("columns validated against schema"),
        }
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.schema.len());
        for row in 0..self.rows {
            record.clear();
            record.extend((0..self.schema.len()).map(|c| self.cell_text(row, c)));
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

/// Load a CSV file under `schema`. Header columns are matched by name; extra
/// columns are ignored.
pub fn load_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.is_empty() {
        return Err(Error::EmptyFile("<input>".into()));
    }
    let positions = schema
        .columns()
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| Error::MissingColumn(c.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .columns()
        .iter()
        .map(|c| {
            c.vocabulary().map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i as u32))
                    .collect()
            })
        })
        .collect();

    let mut columns: Vec<Column> = Dataset::empty(schema.clone()).columns;
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while csv.read_record(&mut record)? {
        row += 1;
        for (ci, spec) in schema.columns().iter().enumerate() {
            let raw = record.get(positions[ci]).unwrap_or("");
            match (&mut columns[ci], &lookups[ci]) {
                (Column::Categorical(values), Some(lookup)) => {
                    let index = lookup.get(raw).ok_or_else(|| Error::UnknownCategory {
                        column: spec.name.clone(),
                        row,
                        value: raw.to_string(),
                    })?;
                    values.push(*index);
                }
                (Column::Numeric(values), None) => {
                    let value = raw
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::UnparseableNumeric {
                            column: spec.name.clone(),
                            row,
                            value: raw.to_string(),
                        })?;
                    values.push(value);
                }
                _ => unreachable!("lookup tables follow the schema"),
            }
        }
    }
    if row == 0 {
        return Err(Error::EmptyFile("<input>".into()));
    }
    Dataset::new(schema.clone(), columns)
}

/// Deterministic shuffled split. The first part holds `⌊R · fraction⌋` rows.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // The small offset keeps products like 100 * 0.29 from flooring one short.
    let cut = ((data.n_rows() as f64 * train_fraction) + 1e-9).floor() as usize;
    let (train, test) = order.split_at(cut.min(data.n_rows()));
    Ok((data.select(train), data.select(test)))
}

/// Guess a schema from a CSV file: a column is numeric when every value
/// parses as a finite real, otherwise categorical with a sorted vocabulary.
pub fn infer_schema(path: impl AsRef<Path>, max_vocab: usize) -> Result<TableSchema> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut numeric = vec![true; header.len()];
    let mut distinct: Vec<BTreeSet<String>> = vec![BTreeSet::new(); header.len()];
    let mut rows = 0;
    for record in csv.records() {
        let record = record?;
        rows += 1;
        for (i, field) in record.iter().enumerate().take(header.len()) {
            if numeric[i] && !field.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                numeric[i] = false;
            }
            // Past the limit the column is rejected unless it turns out numeric.
            if distinct[i].len() <= max_vocab {
                distinct[i].insert(field.to_string());
            }
        }
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let columns = header
        .iter()
        .enumerate()
        .map(|(i, name)| {
            if numeric[i] {
                Ok(ColumnSpec::numeric(name))
            } else if distinct[i].len() > max_vocab {
                Err(Error::VocabularyOverflow {
                    column: name.clone(),
                    count: distinct[i].len(),
                    max: max_vocab,
                })
            } else {
                Ok(ColumnSpec::categorical(name, distinct[i].iter().cloned()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TableSchema::new(columns, None)
}
