//! Independent reference implementations and table generators shared by
//! the integration tests.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tabsynth::diffusion::{denoising_loss, NoiseSchedule};
use tabsynth::nn::{Activation, Network, NetworkShape};
use tabsynth::{Column, ColumnSpec, Dataset, TableSchema};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
const FD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// One randomly shaped denoising problem in f64.
pub struct GradientCase {
    pub network: Network<f64>,
    pub schedule: NoiseSchedule,
    pub x0: Array2<f64>,
    pub steps: Vec<usize>,
    pub labels: Vec<usize>,
    pub noise: Array2<f64>,
    pub embed_width: usize,
}

impl GradientCase {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = NetworkShape {
            input_width: rng.random_range(1..=8),
            hidden_width: rng.random_range(1..=8),
            hidden_layers: rng.random_range(1..=3),
            num_classes: rng.random_range(1..=3),
            time_dim: 2 * rng.random_range(1..=4),
            activation: if rng.random_bool(0.5) { Activation::Relu } else { Activation::Silu },
        };
        let mut network = Network::init(shape, rng.random()).unwrap();
        // Biases start at zero, which parks dead ReLU units exactly on the
        // kink where a central difference sees half the slope.
        let names: Vec<String> = network.tensors().into_iter().map(|(n, _, _)| n).collect();
        for (name, tensor) in names.iter().zip(network.tensors_mut()) {
            if name.ends_with("bias") {
                tensor.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            }
        }
        let schedule = NoiseSchedule::linear(rng.random_range(2..=50), 1e-4, 0.02).unwrap();
        let rows = rng.random_range(1..=6);
        let m = shape.input_width;
        let normal = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
            Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal))
        };
        let x0 = normal(rows, m, &mut rng);
        let noise = normal(rows, m, &mut rng);
        let steps = (0..rows).map(|_| rng.random_range(1..=schedule.steps())).collect();
        let labels = (0..rows).map(|_| rng.random_range(0..shape.num_classes)).collect();
        let embed_width = rng.random_range(0..=m);
        GradientCase {
            network,
            schedule,
            x0,
            steps,
            labels,
            noise,
            embed_width,
        }
    }

    fn loss_with(&self, network: &Network<f64>, x0: &Array2<f64>) -> f64 {
        denoising_loss(
            network,
            &self.schedule,
            x0.view(),
            &self.steps,
            &self.labels,
            self.noise.view(),
            0,
        )
        .unwrap()
        .loss
    }

    /// Compare every analytic gradient with a central difference. Returns
    /// the number of checked entries and the worst relative error with its
    /// location.
    pub fn check(&self) -> (usize, f64, String) {
        let grads = denoising_loss(
            &self.network,
            &self.schedule,
            self.x0.view(),
            &self.steps,
            &self.labels,
            self.noise.view(),
            self.embed_width,
        )
        .unwrap();
        let mut worst = (0.0, String::new());
        let mut checked = 0;
        let mut record = |err: f64, at: String| {
            checked += 1;
            if err > worst.0 {
                worst = (err, at);
            }
        };

        let names: Vec<String> = self.network.tensors().into_iter().map(|(n, _, _)| n).collect();
        let analytic: Vec<Vec<f64>> = grads.network.tensors().into_iter().map(|(_, _, t)| t.to_vec()).collect();
        let mut probe = self.network.clone();
        for (k, name) in names.iter().enumerate() {
            for i in 0..analytic[k].len() {
                let original = probe.tensors_mut()[k][i];
                probe.tensors_mut()[k][i] = original + FD_STEP;
                let up = self.loss_with(&probe, &self.x0);
                probe.tensors_mut()[k][i] = original - FD_STEP;
                let down = self.loss_with(&probe, &self.x0);
                probe.tensors_mut()[k][i] = original;
                let numeric = (up - down) / (2.0 * FD_STEP);
                record(relative_error(analytic[k][i], numeric), format!("{name}[{i}]"));
            }
        }

        let mut x = self.x0.clone();
        for r in 0..x.nrows() {
            for c in 0..self.embed_width {
                let original = x[[r, c]];
                x[[r, c]] = original + FD_STEP;
                let up = self.loss_with(&self.network, &x);
                x[[r, c]] = original - FD_STEP;
                let down = self.loss_with(&self.network, &x);
                x[[r, c]] = original;
                let numeric = (up - down) / (2.0 * FD_STEP);
                record(relative_error(grads.clean_input[[r, c]], numeric), format!("x0[{r},{c}]"));
            }
        }
        (checked, worst.0, worst.1)
    }
}

pub fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], v: f64| s.iter().filter(|&&x| x <= v).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&v| (cdf(a, v) - cdf(b, v)).abs())
        .fold(0.0, f64::max)
}

pub fn tvd_oracle(a: &[u32], b: &[u32], categories: u32) -> f64 {
    (0..categories)
        .map(|c| {
            let pa = a.iter().filter(|&&x| x == c).count() as f64 / a.len() as f64;
            let pb = b.iter().filter(|&&x| x == c).count() as f64 / b.len() as f64;
            (pa - pb).abs()
        })
        .sum()
}

fn joint_tvd_oracle(a: (&[u32], &[u32]), b: (&[u32], &[u32]), ka: u32, kb: u32) -> f64 {
    let mut total = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let p = |x: (&[u32], &[u32])| {
                x.0.iter().zip(x.1).filter(|&(&u, &v)| u == i && v == j).count() as f64 / x.0.len() as f64
            };
            total += (p(a) - p(b)).abs();
        }
    }
    total
}

/// Two-pass textbook Pearson; `None` when either side has zero variance.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if x.windows(2).all(|w| w[0] == w[1]) || y.windows(2).all(|w| w[0] == w[1]) {
        return None;
    }
    Some((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

fn vocab_len(data: &Dataset, column: usize) -> u32 {
    data.schema().columns()[column].vocabulary().unwrap().len() as u32
}

pub fn fidelity_column_oracle(real: &Dataset, synth: &Dataset) -> f64 {
    let n = real.schema().len();
    (0..n)
        .map(|i| match real.column(i) {
            Column::Numeric(a) => 1.0 - ks_oracle(a, synth.numeric(i)),
            Column::Categorical(a) => 1.0 - 0.5 * tvd_oracle(a, synth.categorical(i), vocab_len(real, i)),
        })
        .sum::<f64>()
        / n as f64
}

pub fn fidelity_row_oracle(real: &Dataset, synth: &Dataset) -> Option<f64> {
    let n = real.schema().len();
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let mut scores = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            match (real.column(a), real.column(b)) {
                (Column::Numeric(ra), Column::Numeric(rb)) => {
                    let (sa, sb) = (synth.numeric(a), synth.numeric(b));
                    scores.push(match (pearson_oracle(ra, rb), pearson_oracle(sa, sb)) {
                        (Some(x), Some(y)) => 1.0 - 0.5 * (x - y).abs(),
                        (None, None) if constant(ra) == constant(sa) && constant(rb) == constant(sb) => 1.0,
                        _ => 0.5,
                    });
                }
                (Column::Categorical(ra), Column::Categorical(rb)) => {
                    let d = joint_tvd_oracle(
                        (ra, rb),
                        (synth.categorical(a), synth.categorical(b)),
                        vocab_len(real, a),
                        vocab_len(real, b),
                    );
                    scores.push(1.0 - 0.5 * d);
                }
                _ => {}
            }
        }
    }
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Median over synthetic rows of the nearest real row, all pairs compared.
pub fn dcr_oracle(real: &Dataset, synth: &Dataset) -> f64 {
    let schema = real.schema();
    let nums = schema.numeric_indices();
    let cats = schema.categorical_indices();
    let stats: Vec<(f64, f64)> = nums
        .iter()
        .map(|&c| {
            let v = real.numeric(c);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        })
        .collect();
    let mut distances: Vec<f64> = (0..synth.n_rows())
        .map(|i| {
            (0..real.n_rows())
                .map(|j| {
                    let mut d = 0.0;
                    for (k, &c) in nums.iter().enumerate() {
                        let (m, s) = stats[k];
                        let diff = (synth.numeric(c)[i] - m) / s - (real.numeric(c)[j] - m) / s;
                        d += diff * diff;
                    }
                    for &c in &cats {
                        if synth.categorical(c)[i] != real.categorical(c)[j] {
                            d += 1.0;
                        }
                    }
                    d.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    distances.sort_by(f64::total_cmp);
    let n = distances.len();
    if n % 2 == 1 {
        distances[n / 2]
    } else {
        0.5 * (distances[n / 2 - 1] + distances[n / 2])
    }
}

/// Share of synthetic rows with no real row matching every categorical cell
/// and every numeric cell within 1% (exact zero band at real value 0).
pub fn synthesis_oracle(real: &Dataset, synth: &Dataset) -> f64 {
    let schema = real.schema();
    let matches = |i: usize, j: usize| {
        schema.columns().iter().enumerate().all(|(c, _)| match real.column(c) {
            Column::Categorical(r) => r[j] == synth.categorical(c)[i],
            Column::Numeric(r) => {
                let (x, s) = (r[j], synth.numeric(c)[i]);
                if x == 0.0 {
                    s.abs() <= 1e-9
                } else {
                    (s - x).abs() <= 0.01 * x.abs()
                }
            }
        })
    };
    let copied = (0..synth.n_rows())
        .filter(|&i| (0..real.n_rows()).any(|j| matches(i, j)))
        .count();
    1.0 - copied as f64 / synth.n_rows() as f64
}

/// Random mixed schema with 1–3 categorical and 1–3 numeric columns.
pub fn random_schema(rng: &mut impl Rng) -> TableSchema {
    let mut columns = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let k = rng.random_range(1..=5);
        columns.push(ColumnSpec::categorical(&format!("c{i}"), (0..k).map(|j| format!("v{j}"))));
    }
    for i in 0..rng.random_range(1..=3) {
        columns.push(ColumnSpec::numeric(&format!("x{i}")));
    }
    TableSchema::new(columns, None).unwrap()
}

/// Random table over `schema`. Some numeric columns are drawn from a small
/// grid so ties, exact matches and constant columns all occur.
pub fn random_table(schema: &TableSchema, rows: usize, rng: &mut impl Rng) -> Dataset {
    let columns = schema
        .columns()
        .iter()
        .map(|spec| match spec.vocabulary() {
            Some(v) => {
                let skew: f64 = rng.random_range(0.2..3.0);
                let k = v.len() as f64;
                Column::Categorical(
                    (0..rows)
                        .map(|_| ((rng.random::<f64>().powf(skew) * k) as u32).min(v.len() as u32 - 1))
                        .collect(),
                )
            }
            None => match rng.random_range(0..6) {
                0 => Column::Numeric(vec![rng.random_range(-2.0..2.0); rows]),
                1 | 2 => Column::Numeric((0..rows).map(|_| f64::from(rng.random_range(-3..4i32))).collect()),
                _ => {
                    let (mu, sd) = (rng.random_range(-5.0..5.0), rng.random_range(0.1..10.0));
                    Column::Numeric((0..rows).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect())
                }
            },
        })
        .collect();
    Dataset::new(schema.clone(), columns).unwrap()
}

/// Ground-truth table with a 3-way and a 5-way categorical column, two
/// numeric columns with correlation 0.8 and a binary label.
pub fn correlated_table(rows: usize, seed: u64) -> Dataset {
    let schema = TableSchema::new(
        vec![
            ColumnSpec::categorical("c3", ["a", "b", "c"]),
            ColumnSpec::categorical("c5", ["p", "q", "r", "s", "t"]),
            ColumnSpec::numeric("x1"),
            ColumnSpec::numeric("x2"),
            ColumnSpec::categorical("label", ["0", "1"]),
        ],
        Some("label"),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut c3, mut c5, mut x1, mut x2, mut y) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..rows {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        x1.push(10.0 * z1);
        x2.push(3.0 * (0.8 * z1 + 0.6 * z2) - 1.0);
        let label = u32::from(z1 + 0.5 * rng.sample::<f64, _>(StandardNormal) > 0.0);
        y.push(label);
        let u: f64 = rng.random();
        let cuts = if label == 1 { [0.6, 0.9] } else { [0.2, 0.5] };
        c3.push(if u < cuts[0] { 0 } else if u < cuts[1] { 1 } else { 2 });
        let u: f64 = rng.random();
        c5.push((u * u * 5.0) as u32);
    }
    Dataset::new(
        schema,
        vec![
            Column::Categorical(c3),
            Column::Categorical(c5),
            Column::Numeric(x1),
            Column::Numeric(x2),
            Column::Categorical(y),
        ],
    )
    .unwrap()
}

/// Heavy-tailed table: two correlated log-normal columns (log-scale σ = 2)
/// beside a uniform categorical column and a label.
pub fn lognormal_table(rows: usize, seed: u64) -> Dataset {
    let schema = TableSchema::new(
        vec![
            ColumnSpec::categorical("kind", ["a", "b", "c"]),
            ColumnSpec::numeric("holding"),
            ColumnSpec::numeric("value"),
            ColumnSpec::categorical("label", ["0", "1"]),
        ],
        Some("label"),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut kind, mut holding, mut value, mut label) = (vec![], vec![], vec![], vec![]);
    for _ in 0..rows {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        holding.push((2.0 * z1).exp());
        value.push((2.0 * (0.6 * z1 + 0.8 * z2)).exp() * 100.0);
        label.push(u32::from(z1 > 0.3));
        kind.push(rng.random_range(0..3));
    }
    Dataset::new(
        schema,
        vec![
            Column::Categorical(kind),
            Column::Numeric(holding),
            Column::Numeric(value),
            Column::Categorical(label),
        ],
    )
    .unwrap()
}
