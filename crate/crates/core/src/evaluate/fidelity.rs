use serde::{Deserialize, Serialize};

use super::stats::{ks_statistic, pearson, tvd, tvd_by};
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScore {
    pub column: String,
    /// `ks` for numeric columns, `tvd` for categorical ones.
    pub metric: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub columns: (String, String),
    /// `pearson` or `contingency`.
    pub metric: String,
    pub score: f64,
    /// Pearson was undefined on at least one side (a constant column).
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFidelity {
    /// Mean over scored pairs; `None` when the schema has no same-kind pair.
    pub aggregate: Option<f64>,
    pub pairs: Vec<PairScore>,
    /// Numeric/categorical pairs, which are not scored.
    pub mixed_pairs_excluded: usize,
}

pub(crate) fn check_same_schema(real: &Dataset, synth: &Dataset) -> Result<()> {
    if real.schema().columns() != synth.schema().columns() {
        return Err(Error::SchemaMismatch(
            "real and synthetic tables declare different columns".into(),
        ));
    }
    Ok(())
}

/// Per-column `1 − KS` (numeric) or `1 − ½·TVD` (categorical) and their mean.
pub fn fidelity_column(real: &Dataset, synth: &Dataset) -> Result<(f64, Vec<ColumnScore>)> {
    check_same_schema(real, synth)?;
    let mut scores = Vec::with_capacity(real.schema().len());
    for (i, spec) in real.schema().columns().iter().enumerate() {
        let score = match (real.column(i), synth.column(i)) {
            (Column::Numeric(a), Column::Numeric(b)) => ColumnScore {
                column: spec.name.clone(),
                metric: "ks".into(),
                score: 1.0 - ks_statistic(a, b).map_err(|_| Error::EmptyColumn(spec.name.clone()))?,
            },
            (Column::Categorical(a), Column::Categorical(b)) => ColumnScore {
                column: spec.name.clone(),
                metric: "tvd".into(),
                score: 1.0 - 0.5 * tvd(a, b).map_err(|_| Error::EmptyColumn(spec.name.clone()))?,
            },
            _ => unreachable!("schemas checked equal"),
        };
        scores.push(score);
    }
    let aggregate = scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64;
    Ok((aggregate, scores))
}

/// Pairwise dependence fidelity. Numeric pairs score
/// `1 − ½|ρ_real − ρ_synth|`; categorical pairs score `1 − ½·TVD` of the
/// joint category distribution. A pair whose Pearson is undefined on a side
/// scores 1 when both sides are undefined for the same columns and 0.5
/// otherwise.
pub fn fidelity_row(real: &Dataset, synth: &Dataset) -> Result<RowFidelity> {
    check_same_schema(real, synth)?;
    if real.is_empty() {
        return Err(Error::EmptyColumn("fidelity_row: real table is empty".into()));
    }
    if synth.is_empty() {
        return Err(Error::EmptyColumn("fidelity_row: synthetic table is empty".into()));
    }
    let cols = real.schema().columns();
    let mut pairs = Vec::new();
    let mut mixed = 0;
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            let names = (cols[a].name.clone(), cols[b].name.clone());
            match (real.column(a), real.column(b)) {
                (Column::Numeric(ra), Column::Numeric(rb)) => {
                    let sa = synth.numeric(a);
                    let sb = synth.numeric(b);
                    let (score, degenerate) = match (pearson(ra, rb), pearson(sa, sb)) {
                        (Some(x), Some(y)) => (1.0 - 0.5 * (x - y).abs(), false),
                        (None, None) => {
                            let same = constant(ra) == constant(sa) && constant(rb) == constant(sb);
                            (if same { 1.0 } else { 0.5 }, true)
                        }
                        _ => (0.5, true),
                    };
                    pairs.push(PairScore {
                        columns: names,
                        metric: "pearson".into(),
                        score,
                        degenerate,
                    });
                }
                (Column::Categorical(ra), Column::Categorical(rb)) => {
                    let sa = synth.categorical(a);
                    let sb = synth.categorical(b);
                    let d = tvd_by(
                        ra.iter().zip(rb).map(|(&x, &y)| (x, y)),
                        sa.iter().zip(sb).map(|(&x, &y)| (x, y)),
                    )?;
                    pairs.push(PairScore {
                        columns: names,
                        metric: "contingency".into(),
                        score: 1.0 - 0.5 * d,
                        degenerate: false,
                    });
                }
                _ => mixed += 1,
            }
        }
    }
    let aggregate = if pairs.is_empty() {
        None
    } else {
        Some(pairs.iter().map(|p| p.score).sum::<f64>() / pairs.len() as f64)
    };
    Ok(RowFidelity {
        aggregate,
        pairs,
        mixed_pairs_excluded: mixed,
    })
}

fn constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}
