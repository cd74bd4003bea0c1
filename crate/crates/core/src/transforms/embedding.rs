use std::ops::Range;

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::schema::TableSchema;

/// Learned category vectors for every categorical column, stacked into one
/// `C × D` table. Column `k` owns the contiguous row range `ranges[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    weights: Array2<f32>,
    ranges: Vec<Range<usize>>,
}

impl EmbeddingMatrix {
    /// Rows drawn i.i.d. from N(0, 1); ranges follow schema order.
    pub fn init(schema: &TableSchema, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be at least 1".into()));
        }
        let ranges = category_ranges(schema);
        let total = ranges.last().map_or(0, |r| r.end);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Array2::from_shape_simple_fn((total, dim), || StandardNormal.sample(&mut rng));
        Ok(EmbeddingMatrix { weights, ranges })
    }

    /// Rebuild from stored weights; checks the layout against the schema.
    pub fn from_weights(schema: &TableSchema, weights: Array2<f32>) -> Result<Self> {
        let ranges = category_ranges(schema);
        let total = ranges.last().map_or(0, |r| r.end);
        if weights.nrows() != total || weights.ncols() == 0 {
            return Err(Error::InvalidConfig(format!(
                "embedding table is {}x{}, schema needs {total} rows",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("embedding table has non-finite entries".into()));
        }
        Ok(EmbeddingMatrix {
            weights: weights.as_standard_layout().into_owned(),
            ranges,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Total category count over all categorical columns.
    pub fn total_categories(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn weights(&self) -> &Array2<f32> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Array2<f32> {
        &mut self.weights
    }

    /// Global row of category `category` in categorical column `column`.
    pub fn row_index(&self, column: usize, category: u32) -> usize {
        self.ranges[column].start + category as usize
    }

    pub fn vector(&self, column: usize, category: u32) -> ArrayView1<'_, f32> {
        self.weights.row(self.row_index(column, category))
    }

    /// Category of `column` whose vector is nearest to `query` in Euclidean
    /// distance. Ties go to the lowest index.
    pub fn nearest(&self, column: usize, query: &[f64]) -> u32 {
        let mut best = (f64::INFINITY, 0u32);
        for (k, row) in self.ranges[column].clone().enumerate() {
            let d: f64 = self
                .weights
                .row(row)
                .iter()
                .zip(query)
                .map(|(&w, &q)| {
                    let diff = f64::from(w) - q;
                    diff * diff
                })
                .sum();
            if d < best.0 {
                best = (d, k as u32);
            }
        }
        best.1
    }

    /// Smallest distance between two categories of the same column, or
    /// infinity for single-category columns.
    pub fn min_pairwise_distance(&self, column: usize) -> f64 {
        let range = self.ranges[column].clone();
        let mut best = f64::INFINITY;
        for a in range.clone() {
            for b in (a + 1)..range.end {
                let d: f64 = self
                    .weights
                    .row(a)
                    .iter()
                    .zip(self.weights.row(b))
                    .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
                    .sum();
                best = best.min(d.sqrt());
            }
        }
        best
    }
}

fn category_ranges(schema: &TableSchema) -> Vec<Range<usize>> {
    let mut start = 0;
    schema
        .columns()
        .iter()
        .filter_map(|c| c.vocabulary())
        .map(|v| {
            let range = start..start + v.len();
            start = range.end;
            range
        })
        .collect()
}
