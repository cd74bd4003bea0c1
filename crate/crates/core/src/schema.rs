//! Table schemas: ordered column declarations plus an optional conditioning
//! label column.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical { vocabulary: Vec<String> },
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn categorical<S: Into<String>>(name: &str, vocabulary: impl IntoIterator<Item = S>) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind: ColumnKind::Categorical {
                vocabulary: vocabulary.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn numeric(name: &str) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn vocabulary(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { vocabulary } => Some(vocabulary),
            ColumnKind::Numeric => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

/// Declared layout of a table. Construct through [`TableSchema::new`] or
/// [`TableSchema::from_json_file`]; both validate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    columns: Vec<ColumnSpec>,
    #[serde(default)]
    label_column: Option<String>,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>, label_column: Option<&str>) -> Result<Self> {
        let schema = TableSchema {
            columns,
            label_column: label_column.map(str::to_string),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: TableSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::SchemaNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn write_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidSchema("schema declares no columns".into()));
        }
        let mut names = HashSet::new();
        for column in &self.columns {
            if !names.insert(column.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column name `{}`",
                    column.name
                )));
            }
            if let Some(vocabulary) = column.vocabulary() {
                if vocabulary.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical column `{}` has an empty vocabulary",
                        column.name
                    )));
                }
                let mut seen = HashSet::new();
                for token in vocabulary {
                    if !seen.insert(token.as_str()) {
                        return Err(Error::InvalidSchema(format!(
                            "column `{}` repeats vocabulary entry `{token}`",
                            column.name
                        )));
                    }
                }
            }
        }
        if let Some(label) = &self.label_column {
            match self.column_index(label) {
                None => {
                    return Err(Error::InvalidSchema(format!(
                        "label column `{label}` is not declared"
                    )))
                }
                Some(i) if !self.columns[i].is_categorical() => {
                    return Err(Error::InvalidSchema(format!(
                        "label column `{label}` must be categorical"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn label_column(&self) -> Option<&str> {
        self.label_column.as_deref()
    }

    /// Schema-order index of the label column.
    pub fn label_index(&self) -> Option<usize> {
        self.label_column.as_deref().and_then(|l| self.column_index(l))
    }

    /// Copy of this schema with a different conditioning column.
    pub fn with_label_column(&self, label: Option<&str>) -> Result<Self> {
        TableSchema::new(self.columns.clone(), label)
    }

    /// Number of conditioning classes; 1 when the table is unconditional.
    pub fn num_classes(&self) -> usize {
        self.label_index()
            .and_then(|i| self.columns[i].vocabulary())
            .map_or(1, |v| v.len())
    }

    /// Schema-order indices of categorical columns.
    pub fn categorical_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].is_categorical())
            .collect()
    }

    /// Schema-order indices of numeric columns.
    pub fn numeric_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| !self.columns[i].is_categorical())
            .collect()
    }

    /// Hex SHA-256 of the canonical compact JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
