use std::collections::HashMap;

use rayon::prelude::*;

use super::fidelity::check_same_schema;
use super::stats::{mean_std, median};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance for a numeric cell to count as reproduced.
pub const SYNTHESIS_TOLERANCE: f64 = 0.01;
/// Absolute tolerance used instead when the real value is exactly zero.
pub const SYNTHESIS_ZERO_TOLERANCE: f64 = 1e-9;

/// Rows flattened for distance work: numerics standardized with the real
/// table's statistics, categoricals as raw codes.
struct Flat {
    numeric: Vec<f64>,
    categorical: Vec<u32>,
    p: usize,
    c: usize,
}

impl Flat {
    fn new(data: &Dataset, stats: &[(f64, f64)]) -> Self {
        let schema = data.schema();
        let num = schema.numeric_indices();
        let cat = schema.categorical_indices();
        let rows = data.n_rows();
        let mut numeric = Vec::with_capacity(rows * num.len());
        let mut categorical = Vec::with_capacity(rows * cat.len());
        for r in 0..rows {
            for (k, &ci) in num.iter().enumerate() {
                let (mean, std) = stats[k];
                numeric.push((data.numeric(ci)[r] - mean) / std);
            }
            for &ci in &cat {
                categorical.push(data.categorical(ci)[r]);
            }
        }
        Flat {
            numeric,
            categorical,
            p: num.len(),
            c: cat.len(),
        }
    }

    fn rows(&self) -> usize {
        if self.p > 0 {
            self.numeric.len() / self.p
        } else {
            self.categorical.len() / self.c.max(1)
        }
    }

    fn num(&self, r: usize) -> &[f64] {
        &self.numeric[r * self.p..(r + 1) * self.p]
    }

    fn cat(&self, r: usize) -> &[u32] {
        &self.categorical[r * self.c..(r + 1) * self.c]
    }
}

/// Squared distance, or `None` once it exceeds `bound`.
fn squared_distance(sn: &[f64], sc: &[u32], xn: &[f64], xc: &[u32], bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (a, b) in sn.iter().zip(xn) {
        acc += (a - b) * (a - b);
    }
    if acc > bound {
        return None;
    }
    for (a, b) in sc.iter().zip(xc) {
        if a != b {
            acc += 1.0;
        }
    }
    (acc <= bound).then_some(acc)
}

/// Distance from each synthetic row to its closest real row. Numeric cells
/// are standardized with the real table's mean and population std (std 0
/// is treated as 1); each categorical mismatch adds 1 to the squared
/// distance.
pub fn closest_record_distances(real: &Dataset, synth: &Dataset) -> Result<Vec<f64>> {
    check_same_schema(real, synth)?;
    if real.is_empty() || synth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats: Vec<(f64, f64)> = real
        .schema()
        .numeric_indices()
        .iter()
        .map(|&ci| {
            let (m, s) = mean_std(real.numeric(ci));
            (m, if s > 0.0 { s } else { 1.0 })
        })
        .collect();
    let x = Flat::new(real, &stats);
    let s = Flat::new(synth, &stats);
    let n_real = real.n_rows();
    Ok((0..synth.n_rows())
        .into_par_iter()
        .map(|i| {
            let (sn, sc) = (s.num(i), s.cat(i));
            let mut best = f64::INFINITY;
            for j in 0..n_real {
                if let Some(d) = squared_distance(sn, sc, x.num(j), x.cat(j), best) {
                    best = d;
                    if best == 0.0 {
                        break;
                    }
                }
            }
            best.sqrt()
        })
        .collect())
}

/// Median distance to the closest real record.
pub fn privacy_dcr(real: &Dataset, synth: &Dataset) -> Result<f64> {
    let mut d = closest_record_distances(real, synth)?;
    Ok(median(&mut d))
}

/// Whether synthetic numeric `s` reproduces real `x`.
pub fn numeric_match(s: f64, x: f64) -> bool {
    if x == 0.0 {
        s.abs() <= SYNTHESIS_ZERO_TOLERANCE
    } else {
        (s - x).abs() <= SYNTHESIS_TOLERANCE * x.abs()
    }
}

/// `1 −` the fraction of synthetic rows that reproduce some real row: equal
/// categorical cells and every numeric cell within 1% of the real value.
pub fn synthesis_score(real: &Dataset, synth: &Dataset) -> Result<f64> {
    check_same_schema(real, synth)?;
    if synth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if real.is_empty() {
        return Ok(1.0);
    }
    let unit = vec![(0.0, 1.0); real.schema().numeric_indices().len()];
    let x = Flat::new(real, &unit);
    let s = Flat::new(synth, &unit);

    // Bucket real rows by their categorical cells, each bucket sorted on the
    // first numeric cell so candidates can be located by binary search.
    let mut buckets: HashMap<&[u32], Vec<usize>> = HashMap::new();
    for j in 0..x.rows() {
        buckets.entry(x.cat(j)).or_default().push(j);
    }
    if x.p > 0 {
        for rows in buckets.values_mut() {
            rows.sort_by(|&a, &b| x.num(a)[0].total_cmp(&x.num(b)[0]));
        }
    }
    let matched = (0..s.rows())
        .into_par_iter()
        .filter(|&i| {
            let Some(rows) = buckets.get(s.cat(i)) else {
                return false;
            };
            let sn = s.num(i);
            if x.p == 0 {
                return true;
            }
            // |s − x| ≤ 0.01|x| implies |s − x| ≤ |s|/99.
            let s0 = sn[0];
            let half = (s0.abs() / 99.0).max(SYNTHESIS_ZERO_TOLERANCE) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
            let lo = rows.partition_point(|&j| x.num(j)[0] < s0 - half);
            rows[lo..]
                .iter()
                .take_while(|&&j| x.num(j)[0] <= s0 + half)
                .any(|&j| sn.iter().zip(x.num(j)).all(|(&a, &b)| numeric_match(a, b)))
        })
        .count();
    Ok(1.0 - matched as f64 / s.rows() as f64)
}
