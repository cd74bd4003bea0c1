//! File-to-file commands behind the CLI.

use std::fs;
use std::path::Path;

use crate::checkpoint;
use crate::dataset::{load_csv, split};
use crate::diffusion::{Conditioning, DiffusionModel, EpochLog, TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_all, EvaluationReport, RepeatedReport};
use crate::schema::TableSchema;

/// Share of rows used for training; the remainder is held out.
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub train_rows: usize,
    pub epochs_run: usize,
    pub final_loss: f64,
}

/// Split the table under `config.seed`, train on the first part and write
/// a checkpoint.
pub fn cmd_train(
    data: &Path,
    schema: &Path,
    config: TrainConfig,
    out: &Path,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainSummary> {
    let schema = TableSchema::from_json_file(schema)?;
    let table = load_csv(data, &schema)?;
    let (train, _) = split(&table, TRAIN_FRACTION, config.seed)?;
    let mut trainer = Trainer::new(&train, config)?;
    trainer.fit(on_epoch)?;
    let model = trainer.into_model();
    checkpoint::save(&model, out)?;
    let record = model.training.as_ref().expect("trainer records provenance");
    Ok(TrainSummary {
        train_rows: train.n_rows(),
        epochs_run: record.epochs_run,
        final_loss: record.final_loss,
    })
}

/// Map a label value from the label column's vocabulary to its class index.
pub fn label_index(model: &DiffusionModel, label: &str) -> Result<usize> {
    let column = model
        .schema
        .label_index()
        .ok_or_else(|| Error::UnknownLabel(format!("{label} (model has no label column)")))?;
    model.schema.columns()[column]
        .vocabulary()
        .and_then(|v| v.iter().position(|x| x == label))
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Draw `n` rows from a checkpoint and write them as CSV.
pub fn cmd_sample(model: &Path, n: usize, label: Option<&str>, seed: u64, out: &Path) -> Result<()> {
    let model = checkpoint::load(model)?;
    let conditioning = match label {
        Some(l) => Conditioning::Class(label_index(&model, l)?),
        None => Conditioning::Prior,
    };
    model.sample(n, &conditioning, seed)?.write_csv(out)
}

/// Either a single report or a multi-seed summary.
#[derive(Clone, Debug, PartialEq)]
pub enum EvaluateOutput {
    Single(EvaluationReport),
    Repeated(RepeatedReport),
}

impl EvaluateOutput {
    pub fn to_json(&self) -> String {
        match self {
            EvaluateOutput::Single(r) => serde_json::to_string_pretty(r),
            EvaluateOutput::Repeated(r) => serde_json::to_string_pretty(r),
        }
        .expect("report serializes")
    }

    pub fn render_table(&self, model: &str) -> String {
        match self {
            EvaluateOutput::Single(r) => r.render_table(model),
            EvaluateOutput::Repeated(r) => r.render_table(model),
        }
    }
}

/// Split the real table under `seed + i` for each repeat, score the
/// synthetic table against each split and write the JSON report.
pub fn cmd_evaluate(
    real: &Path,
    synth: &Path,
    schema: &Path,
    label_column: Option<&str>,
    seed: u64,
    repeats: usize,
    report: &Path,
) -> Result<EvaluateOutput> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let mut schema = TableSchema::from_json_file(schema)?;
    if let Some(label) = label_column {
        schema = schema.with_label_column(Some(label))?;
    }
    let real_table = load_csv(real, &schema)?;
    let synth_table = load_csv(synth, &schema)?;
    let name = |p: &Path| p.file_name().map(|f| f.to_string_lossy().into_owned());
    let mut runs = Vec::with_capacity(repeats);
    for i in 0..repeats as u64 {
        let run_seed = seed.wrapping_add(i);
        let (train, test) = split(&real_table, TRAIN_FRACTION, run_seed)?;
        let mut r = evaluate_all(&train, &test, &synth_table, run_seed)?;
        r.metadata.real_name = name(real);
        r.metadata.synth_name = name(synth);
        runs.push(r);
    }
    let output = if repeats == 1 {
        EvaluateOutput::Single(runs.pop().expect("one run"))
    } else {
        EvaluateOutput::Repeated(RepeatedReport::new(runs))
    };
    fs::write(report, output.to_json()).map_err(|e| Error::io(report, e))?;
    Ok(output)
}
