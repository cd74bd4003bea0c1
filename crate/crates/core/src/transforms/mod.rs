//! Mapping between table rows and the continuous space the diffusion model
//! works in. A row becomes `e(c_1) ⊕ … ⊕ e(c_N) ⊕ scaled numerics`.

mod embedding;
mod scaler;

pub use embedding::EmbeddingMatrix;
pub use scaler::{
    lambda_grid, reference_quantiles, yeo_johnson, yeo_johnson_log_likelihood, ColumnScaler,
    NumericScaler, ScalerMethod, DEFAULT_QUANTILES, QUANTILE_CLAMP,
};

use ndarray::{Array2, ArrayView2};

use crate::dataset::{Column, Dataset};
use crate::error::Result;
use crate::schema::TableSchema;

/// Width of an encoded row: `N·D` embedding slots plus one slot per numeric column.
pub fn encoded_width(schema: &TableSchema, dim: usize) -> usize {
    schema.categorical_indices().len() * dim + schema.numeric_indices().len()
}

/// Encoded rows plus the bookkeeping needed to route gradients back into the
/// embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBatch {
    /// `B × M` matrix in the concatenated layout.
    pub values: Array2<f64>,
    /// Conditioning class per row (0 for unconditional schemas).
    pub labels: Vec<usize>,
    /// `B × N` global embedding rows, row-major.
    pub tokens: Vec<usize>,
}

impl EncodedBatch {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }
}

/// A table with its numeric block scaled once, ready for repeated batch
/// assembly against an embedding table that changes during training.
#[derive(Clone, Debug)]
pub struct PreparedTable {
    n_categorical: usize,
    tokens: Vec<usize>,
    numeric: Array2<f64>,
    labels: Vec<usize>,
}

impl PreparedTable {
    pub fn new(data: &Dataset, embeddings: &EmbeddingMatrix, scaler: &NumericScaler) -> Self {
        let schema = data.schema();
        let cat_idx = schema.categorical_indices();
        let num_idx = schema.numeric_indices();
        let rows = data.n_rows();
        let mut tokens = Vec::with_capacity(rows * cat_idx.len());
        for r in 0..rows {
            for (k, &ci) in cat_idx.iter().enumerate() {
                tokens.push(embeddings.row_index(k, data.categorical(ci)[r]));
            }
        }
        let mut numeric = Array2::zeros((rows, num_idx.len()));
        for (k, &ci) in num_idx.iter().enumerate() {
            for (r, &x) in data.numeric(ci).iter().enumerate() {
                numeric[[r, k]] = scaler.scale(k, x);
            }
        }
        PreparedTable {
            n_categorical: cat_idx.len(),
            tokens,
            numeric,
            labels: data.labels(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Assemble the encoded rows at `rows` from the current embeddings.
    pub fn batch(&self, rows: &[usize], embeddings: &EmbeddingMatrix) -> EncodedBatch {
        let dim = embeddings.dim();
        let n = self.n_categorical;
        let width = n * dim + self.numeric.ncols();
        let weights = embeddings.weights();
        let mut values = Array2::zeros((rows.len(), width));
        let mut tokens = Vec::with_capacity(rows.len() * n);
        for (b, &r) in rows.iter().enumerate() {
            let mut out = values.row_mut(b);
            for k in 0..n {
                let token = self.tokens[r * n + k];
                tokens.push(token);
                for d in 0..dim {
                    out[k * dim + d] = f64::from(weights[[token, d]]);
                }
            }
            for (j, &z) in self.numeric.row(r).iter().enumerate() {
                out[n * dim + j] = z;
            }
        }
        EncodedBatch {
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            tokens,
        }
    }
}

/// Encode every row of `data`.
pub fn encode(data: &Dataset, embeddings: &EmbeddingMatrix, scaler: &NumericScaler) -> EncodedBatch {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    PreparedTable::new(data, embeddings, scaler).batch(&rows, embeddings)
}

/// Map encoded rows back to a table: nearest embedding per categorical slot,
/// inverse scaling for the numeric block. Non-finite numeric slots decode as
/// the column centre.
pub fn decode(
    encoded: ArrayView2<'_, f64>,
    schema: &TableSchema,
    embeddings: &EmbeddingMatrix,
    scaler: &NumericScaler,
) -> Result<Dataset> {
    let dim = embeddings.dim();
    let cat_idx = schema.categorical_indices();
    let num_idx = schema.numeric_indices();
    let offset = cat_idx.len() * dim;
    let mut columns: Vec<Option<Column>> = vec![None; schema.len()];
    for (k, &ci) in cat_idx.iter().enumerate() {
        let values = encoded
            .rows()
            .into_iter()
            .map(|row| {
                let slice: Vec<f64> = (0..dim).map(|d| row[k * dim + d]).collect();
                embeddings.nearest(k, &slice)
            })
            .collect();
        columns[ci] = Some(Column::Categorical(values));
    }
    for (k, &ci) in num_idx.iter().enumerate() {
        let values = encoded
            .column(offset + k)
            .iter()
            .map(|&z| scaler.unscale(k, if z.is_finite() { z } else { 0.0 }))
            .collect();
        columns[ci] = Some(Column::Numeric(values));
    }
    Dataset::new(
        schema.clone(),
        columns.into_iter().map(|c| c.expect("every column decoded")).collect(),
    )
}
