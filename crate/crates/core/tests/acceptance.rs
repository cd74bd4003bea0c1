//! Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exits nonzero
//! when a gating criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsynth::checkpoint;
use tabsynth::diffusion::{forward_sample, Conditioning, DiffusionModel, NoiseSchedule, TrainConfig, Trainer};
use tabsynth::evaluate::{
    evaluate_all, fidelity_column, fidelity_row, ks_statistic, pearson, privacy_dcr, synthesis_score, tvd, utility,
};
use tabsynth::transforms::{decode, encode, ColumnScaler, EmbeddingMatrix, NumericScaler, ScalerMethod, DEFAULT_QUANTILES};
use tabsynth::{load_csv, split, Column, Dataset, TableSchema};

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    id: u32,
    name: &'static str,
    gating: bool,
    status: Status,
    detail: String,
}

fn outcome(id: u32, name: &'static str, gating: bool, ok: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        gating,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for seed in 0..20 {
        let (n, err, at) = GradientCase::random(seed).check();
        checked += n;
        if err > worst.0 {
            worst = (err, format!("net {seed} {at}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        1,
        "gradient oracle",
        true,
        worst.0 <= FD_TOLERANCE && elapsed < Duration::from_secs(30),
        format!(
            "20 nets, {checked} entries, max rel err {:.2e} ({}) <= {FD_TOLERANCE:e}, {:.1}s < 30s",
            worst.0,
            worst.1,
            secs(elapsed)
        ),
    )
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut mismatched_none = 0;
    for _ in 0..50 {
        let schema = random_schema(&mut rng);
        let real = random_table(&schema, rng.random_range(1..=1000), &mut rng);
        let synth = random_table(&schema, rng.random_range(1..=1000), &mut rng);
        for i in 0..schema.len() {
            let d = match (real.column(i), synth.column(i)) {
                (Column::Numeric(a), Column::Numeric(b)) => ks_statistic(a, b).unwrap() - ks_oracle(a, b),
                (Column::Categorical(a), Column::Categorical(b)) => {
                    let k = schema.columns()[i].vocabulary().unwrap().len() as u32;
                    tvd(a, b).unwrap() - tvd_oracle(a, b, k)
                }
                _ => unreachable!(),
            };
            worst = worst.max(d.abs());
        }
        for &a in &schema.numeric_indices() {
            for &b in &schema.numeric_indices() {
                for t in [&real, &synth] {
                    match (pearson(t.numeric(a), t.numeric(b)), pearson_oracle(t.numeric(a), t.numeric(b))) {
                        (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
                        (None, None) => {}
                        _ => mismatched_none += 1,
                    }
                }
            }
        }
        worst = worst.max((fidelity_column(&real, &synth).unwrap().0 - fidelity_column_oracle(&real, &synth)).abs());
        match (fidelity_row(&real, &synth).unwrap().aggregate, fidelity_row_oracle(&real, &synth)) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (None, None) => {}
            _ => mismatched_none += 1,
        }
        worst = worst.max((privacy_dcr(&real, &synth).unwrap() - dcr_oracle(&real, &synth)).abs());
        worst = worst.max((synthesis_score(&real, &synth).unwrap() - synthesis_oracle(&real, &synth)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        2,
        "metric oracles",
        true,
        worst <= 1e-12 && mismatched_none == 0 && elapsed < Duration::from_secs(60),
        format!(
            "50 pairs, max |diff| {worst:.2e} <= 1e-12, {mismatched_none} undefined mismatches, {:.1}s < 60s",
            secs(elapsed)
        ),
    )
}

fn forward_process() -> Outcome {
    let schedule = NoiseSchedule::linear(500, 1e-4, 0.02).unwrap();
    let beta_hat = schedule.beta_hat(500);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (rows, cols) = (10_000, 8);
    let mut x0 = Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>().powi(3));
    for mut column in x0.columns_mut() {
        let mean = column.mean().unwrap();
        let std = column.std(0.0);
        column.mapv_inplace(|v| (v - mean) / std);
    }
    let steps = vec![500; rows];
    let (xt, _) = forward_sample(&schedule, x0.view(), &steps, &mut rng).unwrap();
    let mut worst_mean: f64 = 0.0;
    let (mut var_lo, mut var_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for column in xt.columns() {
        worst_mean = worst_mean.max(column.mean().unwrap().abs());
        let v = column.var(0.0);
        var_lo = var_lo.min(v);
        var_hi = var_hi.max(v);
    }
    outcome(
        3,
        "schedule and forward process",
        true,
        beta_hat > 0.99 && worst_mean < 0.05 && var_lo >= 0.9 && var_hi <= 1.1,
        format!(
            "beta_hat(500) {beta_hat:.5} > 0.99, max |mean| {worst_mean:.4} < 0.05, variance in [{var_lo:.4}, {var_hi:.4}] within [0.9, 1.1]"
        ),
    )
}

fn train(data: &Dataset, config: TrainConfig) -> DiffusionModel {
    let mut trainer = Trainer::new(data, config).unwrap();
    trainer.fit(|_| {}).unwrap();
    trainer.into_model()
}

fn class_accuracy(model: &DiffusionModel, label_column: usize, n: usize) -> f64 {
    let mut worst: f64 = 1.0;
    for k in 0..model.num_classes() {
        let rows = model.sample(n, &Conditioning::Class(k), 20 + k as u64).unwrap();
        let hits = rows.categorical(label_column).iter().filter(|&&c| c as usize == k).count();
        worst = worst.min(hits as f64 / n as f64);
    }
    worst
}

fn desk_scale() -> Outcome {
    let start = Instant::now();
    let real = correlated_table(5000, 1);
    let config = TrainConfig {
        epochs: 500,
        steps: 100,
        hidden_width: 256,
        hidden_layers: 4,
        seed: 3,
        patience: None,
        ..TrainConfig::default()
    };
    let model = train(&real, config);
    let synth = model.sample(5000, &Conditioning::Prior, 11).unwrap();
    let col = fidelity_column(&real, &synth).unwrap().0;
    let row = fidelity_row(&real, &synth).unwrap().aggregate.unwrap();
    let synthesis = synthesis_score(&real, &synth).unwrap();
    let accuracy = class_accuracy(&model, 4, 1000);
    let elapsed = start.elapsed();
    let baseline = synthesis_score(&real, &correlated_table(5000, 2)).unwrap();
    let holdout = correlated_table(2000, 99);
    let (util, _) = utility(&synth, &holdout, "label").unwrap();
    outcome(
        4,
        "desk-scale end-to-end fidelity",
        true,
        col >= 0.85 && row >= 0.85 && synthesis >= 0.95 && accuracy >= 0.9 && elapsed < Duration::from_secs(600),
        format!(
            "col {col:.3} >= 0.85, row {row:.3} >= 0.85, synthesis {synthesis:.3} >= 0.95 (fresh-draw {baseline:.3}), \
             label accuracy {accuracy:.3} >= 0.9, {:.0}s < 600s; utility {util:.3}",
            secs(elapsed)
        ),
    )
}

fn credit_default() -> Outcome {
    const NAME: &str = "credit default reference scores (not gating)";
    let (Ok(csv), Ok(schema)) = (std::env::var("TABSYNTH_CREDIT_CSV"), std::env::var("TABSYNTH_CREDIT_SCHEMA")) else {
        return Outcome {
            id: 5,
            name: NAME,
            gating: false,
            status: Status::Skip,
            detail: "set TABSYNTH_CREDIT_CSV and TABSYNTH_CREDIT_SCHEMA to run".into(),
        };
    };
    let schema = TableSchema::from_json_file(&schema).unwrap();
    let table = load_csv(&csv, &schema).unwrap();
    let (train_rows, test) = split(&table, 0.7, 0).unwrap();
    let model = train(&train_rows, TrainConfig::default());
    let synth = model.sample(train_rows.n_rows(), &Conditioning::Prior, 0).unwrap();
    let report = evaluate_all(&train_rows, &test, &synth, 0).unwrap();
    let util = report.utility.unwrap_or(f64::NAN);
    outcome(
        5,
        NAME,
        false,
        (report.fidelity_column - 0.931).abs() <= 0.05 && (util - 0.794).abs() <= 0.05,
        format!("col {:.3} vs 0.931 ± 0.05, utility {util:.3} vs 0.794 ± 0.05", report.fidelity_column),
    )
}

fn scaler_ablation() -> Outcome {
    let real = lognormal_table(3000, 1);
    let score = |scaler| {
        let config = TrainConfig {
            epochs: 300,
            steps: 100,
            hidden_width: 256,
            hidden_layers: 4,
            seed: 3,
            scaler,
            patience: None,
            ..TrainConfig::default()
        };
        let synth = train(&real, config).sample(3000, &Conditioning::Prior, 11).unwrap();
        fidelity_column(&real, &synth).unwrap().0
    };
    let standard = score(ScalerMethod::Standard);
    let quantile = score(ScalerMethod::Quantile);
    outcome(
        6,
        "scaler ablation direction",
        true,
        quantile - standard >= 0.05,
        format!(
            "quantile col {quantile:.3} - standard col {standard:.3} = {:.3} >= 0.05",
            quantile - standard
        ),
    )
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 64,
        steps: 20,
        hidden_width: 32,
        hidden_layers: 2,
        time_dim: 16,
        seed,
        patience: None,
        ..TrainConfig::default()
    }
}

fn csv_bytes(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    data.write_csv_to(&mut out).unwrap();
    out
}

fn determinism() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let data = correlated_table(400, 5);
        let (train_rows, test) = split(&data, 0.7, 5).unwrap();
        let a = train(&train_rows, tiny_config(7));
        let b = train(&train_rows, tiny_config(7));
        let checkpoints = checkpoint::to_bytes(&a) == checkpoint::to_bytes(&b);
        let sa = a.sample(300, &Conditioning::Prior, 9).unwrap();
        let sb = b.sample(300, &Conditioning::Prior, 9).unwrap();
        let samples = csv_bytes(&sa) == csv_bytes(&sb);
        let ra = serde_json::to_vec(&evaluate_all(&train_rows, &test, &sa, 1).unwrap()).unwrap();
        let rb = serde_json::to_vec(&evaluate_all(&train_rows, &test, &sb, 1).unwrap()).unwrap();
        let reports = ra == rb;
        outcome(
            7,
            "determinism",
            true,
            checkpoints && samples && reports,
            format!("single thread: checkpoints {checkpoints}, samples {samples}, reports {reports}"),
        )
    })
}

/// Whether `back` lies in the reference cell holding `x`, within 1e-6.
fn in_quantile_cell(references: &[f64], x: f64, back: f64) -> bool {
    let j = references.partition_point(|&r| r < x).clamp(1, references.len() - 1);
    back >= references[j - 1] - 1e-6 && back <= references[j] + 1e-6
}

fn round_trips() -> Outcome {
    let mut failures = Vec::new();
    for (name, data) in [("correlated", correlated_table(2000, 9)), ("lognormal", lognormal_table(2000, 9))] {
        let schema = data.schema().clone();
        for method in [ScalerMethod::Standard, ScalerMethod::YeoJohnson, ScalerMethod::Quantile] {
            let scaler = NumericScaler::fit(&data, method, DEFAULT_QUANTILES).unwrap();
            for (k, &ci) in schema.numeric_indices().iter().enumerate() {
                let ok = data.numeric(ci).iter().all(|&x| {
                    let back = scaler.unscale(k, scaler.scale(k, x));
                    match &scaler.columns()[k] {
                        ColumnScaler::Standard { .. } => (back - x).abs() <= 1e-9,
                        ColumnScaler::YeoJohnson { .. } => (back - x).abs() <= 1e-6 * x.abs().max(1.0),
                        ColumnScaler::Quantile { references } => in_quantile_cell(references, x, back),
                    }
                });
                if !ok {
                    failures.push(format!("{name}/{}/column {ci} scaler", method.name()));
                }
            }
            let embeddings = EmbeddingMatrix::init(&schema, 2, 4).unwrap();
            let encoded = encode(&data, &embeddings, &scaler);
            let decoded = decode(encoded.values.view(), &schema, &embeddings, &scaler).unwrap();
            for ci in schema.categorical_indices() {
                if decoded.categorical(ci) != data.categorical(ci) {
                    failures.push(format!("{name}/{}/column {ci} categorical", method.name()));
                }
            }
            if method != ScalerMethod::Quantile {
                for ci in schema.numeric_indices() {
                    let ok = decoded
                        .numeric(ci)
                        .iter()
                        .zip(data.numeric(ci))
                        .all(|(b, x)| (b - x).abs() <= 1e-6 * x.abs().max(1.0));
                    if !ok {
                        failures.push(format!("{name}/{}/column {ci} numeric", method.name()));
                    }
                }
            }
        }
    }

    let model = train(&correlated_table(300, 6), tiny_config(8));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.fndf");
    checkpoint::save(&model, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();
    for conditioning in [Conditioning::Prior, Conditioning::Class(1)] {
        let a = csv_bytes(&model.sample(200, &conditioning, 3).unwrap());
        let b = csv_bytes(&loaded.sample(200, &conditioning, 3).unwrap());
        if a != b {
            failures.push(format!("checkpoint sample {conditioning:?}"));
        }
    }
    let detail = if failures.is_empty() {
        "encode/decode, 3 scalers, checkpoint save/load/sample all identical within tolerance".into()
    } else {
        failures.join(", ")
    };
    outcome(8, "round trips", true, failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 8] = [
        gradient_oracle,
        metric_oracles,
        forward_process,
        desk_scale,
        credit_default,
        scaler_ablation,
        determinism,
        round_trips,
    ];
    let mut gating_failures = 0;
    for run in criteria {
        let o = run();
        let status = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        if o.gating && matches!(o.status, Status::Fail) {
            gating_failures += 1;
        }
        println!("criterion {} [{status}] {}: {}", o.id, o.name, o.detail);
    }
    if gating_failures == 0 {
        println!("acceptance: all gating criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {gating_failures} gating criteria failed");
        ExitCode::FAILURE
    }
}
