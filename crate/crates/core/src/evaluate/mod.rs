//! Synthetic-data quality metrics: column and row fidelity, downstream
//! utility, novelty (synthesis) and distance to the closest record.

mod fidelity;
mod privacy;
mod stats;
mod utility;

pub use fidelity::{fidelity_column, fidelity_row, ColumnScore, PairScore, RowFidelity};
pub use privacy::{
    closest_record_distances, numeric_match, privacy_dcr, synthesis_score, SYNTHESIS_TOLERANCE,
    SYNTHESIS_ZERO_TOLERANCE,
};
pub use stats::{ks_statistic, pearson, tvd, tvd_by};
pub use utility::{utility, ClassifierScore, OMITTED_CLASSIFIERS};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub real_name: Option<String>,
    pub synth_name: Option<String>,
    pub real_train_rows: usize,
    pub real_test_rows: usize,
    pub synth_rows: usize,
    pub seed: u64,
    pub label_column: Option<String>,
    pub classifiers_omitted: Vec<String>,
    pub mixed_pairs_excluded: usize,
    pub degenerate_pairs: usize,
}

/// The five headline scores with their breakdowns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fidelity_column: f64,
    pub column_scores: Vec<ColumnScore>,
    pub fidelity_row: Option<f64>,
    pub pair_scores: Vec<PairScore>,
    /// `None` when no label column is declared.
    pub utility: Option<f64>,
    pub classifier_scores: Vec<ClassifierScore>,
    pub synthesis: f64,
    pub privacy_dcr: f64,
    pub metadata: ReportMetadata,
}

/// Score `synth` against a real train/test split. Fidelity and utility use
/// the test part; synthesis and DCR use the train part.
pub fn evaluate_all(real_train: &Dataset, real_test: &Dataset, synth: &Dataset, seed: u64) -> Result<EvaluationReport> {
    fidelity::check_same_schema(real_train, real_test)?;
    let (fidelity_column, column_scores) = fidelity_column(real_test, synth)?;
    let row = fidelity_row(real_test, synth)?;
    let label_column = synth.schema().label_column().map(str::to_owned);
    let (utility, classifier_scores) = match &label_column {
        Some(label) => {
            let (mean, per) = utility(synth, real_test, label)?;
            (Some(mean), per)
        }
        None => (None, Vec::new()),
    };
    let synthesis = synthesis_score(real_train, synth)?;
    let privacy_dcr = privacy_dcr(real_train, synth)?;
    Ok(EvaluationReport {
        fidelity_column,
        column_scores,
        fidelity_row: row.aggregate,
        metadata: ReportMetadata {
            real_name: None,
            synth_name: None,
            real_train_rows: real_train.n_rows(),
            real_test_rows: real_test.n_rows(),
            synth_rows: synth.n_rows(),
            seed,
            label_column,
            classifiers_omitted: OMITTED_CLASSIFIERS.iter().map(|s| s.to_string()).collect(),
            mixed_pairs_excluded: row.mixed_pairs_excluded,
            degenerate_pairs: row.pairs.iter().filter(|p| p.degenerate).count(),
        },
        pair_scores: row.pairs,
        utility,
        classifier_scores,
        synthesis,
        privacy_dcr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub fidelity_column: MeanStd,
    pub fidelity_row: Option<MeanStd>,
    pub utility: Option<MeanStd>,
    pub synthesis: MeanStd,
    pub privacy_dcr: MeanStd,
}

/// Reports from several seeds plus mean ± std of each headline score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReport {
    pub summary: ScoreSummary,
    pub runs: Vec<EvaluationReport>,
}

impl RepeatedReport {
    /// Panics on an empty run list.
    pub fn new(runs: Vec<EvaluationReport>) -> Self {
        let pick = |f: &dyn Fn(&EvaluationReport) -> Option<f64>| {
            let v: Option<Vec<f64>> = runs.iter().map(f).collect();
            v.and_then(|v| MeanStd::of(&v))
        };
        let summary = ScoreSummary {
            fidelity_column: pick(&|r| Some(r.fidelity_column)).expect("at least one run"),
            fidelity_row: pick(&|r| r.fidelity_row),
            utility: pick(&|r| r.utility),
            synthesis: pick(&|r| Some(r.synthesis)).expect("at least one run"),
            privacy_dcr: pick(&|r| Some(r.privacy_dcr)).expect("at least one run"),
        };
        RepeatedReport { summary, runs }
    }
}

const HEADERS: [&str; 6] = [
    "Model",
    "Fidelity Column ↑",
    "Fidelity Row ↑",
    "Utility ↑",
    "Synthesis ↑",
    "Privacy ↓",
];

fn render(rows: &[(String, [String; 5])]) -> String {
    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.chars().count()).collect();
    for (name, cells) in rows {
        widths[0] = widths[0].max(name.chars().count());
        for (i, c) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "| {} |", padded.join(" | "));
    };
    line(HEADERS.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for (name, cells) in rows {
        let mut all = vec![name.as_str()];
        all.extend(cells.iter().map(String::as_str));
        line(all, &mut out);
    }
    out
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "n/a".to_string(), f)
}

impl EvaluationReport {
    /// One-row text table in the usual model × five-score layout.
    pub fn render_table(&self, model: &str) -> String {
        render(&[(
            model.to_string(),
            [
                format!("{:.3}", self.fidelity_column),
                opt(self.fidelity_row, |v| format!("{v:.3}")),
                opt(self.utility, |v| format!("{v:.3}")),
                format!("{:.3}", self.synthesis),
                format!("{:.3}", self.privacy_dcr),
            ],
        )])
    }
}

impl RepeatedReport {
    pub fn render_table(&self, model: &str) -> String {
        let f = |m: MeanStd| format!("{:.3} ± {:.2}", m.mean, m.std);
        let s = &self.summary;
        render(&[(
            model.to_string(),
            [
                f(s.fidelity_column),
                s.fidelity_row.map_or("n/a".into(), f),
                s.utility.map_or("n/a".into(), f),
                f(s.synthesis),
                f(s.privacy_dcr),
            ],
        )])
    }
}
