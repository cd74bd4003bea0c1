use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{denoising_loss, reverse_step, standard_normal, NoiseSchedule};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Network, NetworkShape, DEFAULT_TIME_DIM};
use crate::schema::TableSchema;
use crate::transforms::{
    decode, encoded_width, EmbeddingMatrix, NumericScaler, PreparedTable, ScalerMethod, DEFAULT_QUANTILES,
};

const SAMPLE_CHUNK: usize = 2048;

/// Everything that shapes a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub embed_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub scaler: ScalerMethod,
    pub quantile_count: usize,
    /// Keep the initial N(0, 1) category vectors fixed. Joint training lets
    /// the objective merge categories, so this is the default.
    pub freeze_embeddings: bool,
    pub beta_start: f64,
    pub beta_end: f64,
    pub activation: Activation,
    pub time_dim: usize,
    /// Stop after this many epochs without a new best epoch loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            batch_size: 512,
            steps: super::DEFAULT_STEPS,
            embed_dim: 2,
            hidden_width: 1024,
            hidden_layers: 6,
            learning_rate: 1e-3,
            seed: 0,
            scaler: ScalerMethod::Standard,
            quantile_count: DEFAULT_QUANTILES,
            freeze_embeddings: true,
            beta_start: super::DEFAULT_BETA_START,
            beta_end: super::DEFAULT_BETA_END,
            activation: Activation::Relu,
            time_dim: DEFAULT_TIME_DIM,
            patience: Some(200),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Independent seeds for each random consumer, derived from the master seed.
struct SubSeeds {
    embeddings: u64,
    network: u64,
    training: u64,
}

impl SubSeeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SubSeeds {
            embeddings: rng.next_u64(),
            network: rng.next_u64(),
            training: rng.next_u64(),
        }
    }
}

/// What a finished run leaves behind for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub final_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// How class labels are chosen for sampled rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conditioning {
    /// Draw labels from the training label frequencies.
    Prior,
    /// Every row gets this class index.
    Class(usize),
    /// One class index per row.
    PerRow(Vec<usize>),
}

/// A fitted model: transforms, denoiser and schedule.
#[derive(Clone, Debug)]
pub struct DiffusionModel {
    pub schema: TableSchema,
    pub scaler: NumericScaler,
    pub embeddings: EmbeddingMatrix,
    pub network: Network<f32>,
    pub schedule: NoiseSchedule,
    /// Training frequency of each class, used for [`Conditioning::Prior`].
    pub label_prior: Vec<f64>,
    pub training: Option<TrainingRecord>,
}

impl DiffusionModel {
    /// Fit transforms on `train` and initialise parameters under `config.seed`.
    pub fn new(train: &Dataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let schema = train.schema().clone();
        let seeds = SubSeeds::new(config.seed);
        let scaler = NumericScaler::fit(train, config.scaler, config.quantile_count)?;
        let embeddings = EmbeddingMatrix::init(&schema, config.embed_dim, seeds.embeddings)?;
        let shape = NetworkShape {
            input_width: encoded_width(&schema, config.embed_dim),
            hidden_width: config.hidden_width,
            hidden_layers: config.hidden_layers,
            num_classes: schema.num_classes(),
            time_dim: config.time_dim,
            activation: config.activation,
        };
        let network = Network::init(shape, seeds.network)?;
        let schedule = NoiseSchedule::linear(config.steps, config.beta_start, config.beta_end)?;
        let mut counts = vec![0usize; schema.num_classes()];
        for label in train.labels() {
            counts[label] += 1;
        }
        let label_prior = counts
            .iter()
            .map(|&c| c as f64 / train.n_rows() as f64)
            .collect();
        Ok(DiffusionModel {
            schema,
            scaler,
            embeddings,
            network,
            schedule,
            label_prior,
            training: None,
        })
    }

    /// Width M of an encoded row.
    pub fn width(&self) -> usize {
        self.network.shape().input_width
    }

    pub fn num_classes(&self) -> usize {
        self.network.shape().num_classes
    }

    fn resolve_labels(&self, n: usize, conditioning: &Conditioning, seed: u64) -> Result<Vec<usize>> {
        let k = self.num_classes();
        let check = |label: usize| {
            if label < k {
                Ok(label)
            } else {
                Err(Error::UnknownLabel(label.to_string()))
            }
        };
        match conditioning {
            Conditioning::Class(label) => Ok(vec![check(*label)?; n]),
            Conditioning::PerRow(labels) => {
                if labels.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "{} labels given for {n} rows",
                        labels.len()
                    )));
                }
                labels.iter().map(|&l| check(l)).collect()
            }
            Conditioning::Prior => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                Ok((0..n).map(|_| draw_category(&self.label_prior, rng.random())).collect())
            }
        }
    }

    /// Run the reverse chain for `n` rows and return the final encoded rows
    /// together with the labels used. Row `r` draws its noise from its own
    /// stream, so results do not depend on chunking or thread count.
    pub fn sample_encoded(&self, n: usize, conditioning: &Conditioning, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
        let labels = self.resolve_labels(n, conditioning, seed)?;
        let width = self.width();
        let chunks: Vec<(usize, usize)> = (0..n)
            .step_by(SAMPLE_CHUNK)
            .map(|start| (start, (start + SAMPLE_CHUNK).min(n)))
            .collect();
        let parts: Vec<Array2<f32>> = chunks
            .par_iter()
            .map(|&(start, end)| self.reverse_chain(start..end, &labels[start..end], seed))
            .collect();
        let mut out = Array2::zeros((n, width));
        for (&(start, end), part) in chunks.iter().zip(parts) {
            out.slice_mut(ndarray::s![start..end, ..])
                .assign(&part.mapv(f64::from));
        }
        Ok((out, labels))
    }

    fn reverse_chain(&self, rows: std::ops::Range<usize>, labels: &[usize], seed: u64) -> Array2<f32> {
        let width = self.width();
        let mut streams: Vec<ChaCha8Rng> = rows
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                rng
            })
            .collect();
        let b = streams.len();
        let draw = |streams: &mut [ChaCha8Rng]| {
            let mut z = Array2::<f32>::zeros((b, width));
            for (mut row, rng) in z.rows_mut().into_iter().zip(streams.iter_mut()) {
                row.assign(&standard_normal::<f32, _>(1, width, rng).row(0));
            }
            z
        };
        let mut x = draw(&mut streams);
        for t in (1..=self.schedule.steps()).rev() {
            let steps = vec![t; b];
            let eps = self.network.forward(x.view(), &steps, labels);
            if t > 1 {
                let z = draw(&mut streams);
                x = reverse_step(&self.schedule, x.view(), eps.view(), t, Some(z.view()));
            } else {
                x = reverse_step(&self.schedule, x.view(), eps.view(), t, None);
            }
        }
        x
    }

    /// Generate `n` decoded rows.
    pub fn sample(&self, n: usize, conditioning: &Conditioning, seed: u64) -> Result<Dataset> {
        if n == 0 {
            self.resolve_labels(0, conditioning, seed)?;
            return Ok(Dataset::empty(self.schema.clone()));
        }
        let (encoded, _) = self.sample_encoded(n, conditioning, seed)?;
        decode(encoded.view(), &self.schema, &self.embeddings, &self.scaler)
    }
}

/// Inverse-CDF draw from a discrete distribution given `u ∈ [0, 1)`.
fn draw_category(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(0)
}

/// Joint optimisation of the denoiser and the category embeddings.
pub struct Trainer {
    model: DiffusionModel,
    config: TrainConfig,
    table: PreparedTable,
    network_opt: Adam<f32>,
    embedding_opt: Adam<f32>,
    rng: ChaCha8Rng,
    epoch: usize,
    last_loss: f64,
}

impl Trainer {
    pub fn new(train: &Dataset, config: TrainConfig) -> Result<Self> {
        let model = DiffusionModel::new(train, &config)?;
        let table = PreparedTable::new(train, &model.embeddings, &model.scaler);
        let adam = AdamConfig::new(config.learning_rate, config.epochs);
        let network_opt = Adam::new(
            adam,
            model.network.tensors().iter().map(|(_, _, data)| data.len()),
        );
        let embedding_opt = Adam::new(adam, [model.embeddings.weights().len()]);
        let rng = ChaCha8Rng::seed_from_u64(SubSeeds::new(config.seed).training);
        Ok(Trainer {
            model,
            config,
            table,
            network_opt,
            embedding_opt,
            rng,
            epoch: 0,
            last_loss: f64::NAN,
        })
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One optimiser update on the training rows at `rows`; returns the
    /// batch loss before the update.
    pub fn training_step(&mut self, rows: &[usize]) -> Result<f64> {
        let batch = self.table.batch(rows, &self.model.embeddings);
        let x0 = batch.values.mapv(|v| v as f32);
        let t_max = self.model.schedule.steps();
        let steps: Vec<usize> = (0..rows.len()).map(|_| self.rng.random_range(1..=t_max)).collect();
        let noise = standard_normal::<f32, _>(x0.nrows(), x0.ncols(), &mut self.rng);
        let dim = self.model.embeddings.dim();
        let n_cat = self.model.embeddings.n_columns();
        let embed_width = if self.config.freeze_embeddings { 0 } else { n_cat * dim };
        let grads = denoising_loss(
            &self.model.network,
            &self.model.schedule,
            x0.view(),
            &steps,
            &batch.labels,
            noise.view(),
            embed_width,
        )?;

        let grad_tensors: Vec<&[f32]> = grads
            .network
            .tensors()
            .into_iter()
            .map(|(_, _, data)| data)
            .collect();
        self.network_opt
            .step(self.model.network.tensors_mut(), grad_tensors, self.epoch);

        if embed_width > 0 {
            let total = self.model.embeddings.total_categories();
            let mut grad = vec![0f32; total * dim];
            let mut active = vec![false; total];
            for (b, row) in grads.clean_input.rows().into_iter().enumerate() {
                for k in 0..n_cat {
                    let token = batch.tokens[b * n_cat + k];
                    active[token] = true;
                    for d in 0..dim {
                        grad[token * dim + d] += row[k * dim + d];
                    }
                }
            }
            let weights = self
                .model
                .embeddings
                .weights_mut()
                .as_slice_mut()
                .expect("embedding table is contiguous");
            self.embedding_opt
                .step_rows(weights, &grad, dim, &active, self.epoch);
        }

        if !self.model.network.is_finite() || self.model.embeddings.weights().iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss {
                loss: grads.loss,
                context: format!("parameters diverged in epoch {}", self.epoch),
            });
        }
        self.last_loss = grads.loss;
        Ok(grads.loss)
    }

    /// One shuffled pass over the training rows; the last batch may be
    /// short. Returns the row-weighted mean batch loss.
    pub fn train_epoch(&mut self) -> Result<EpochLog> {
        let lr = self.network_opt.learning_rate(self.epoch);
        let mut order: Vec<usize> = (0..self.table.n_rows()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for rows in order.chunks(self.config.batch_size) {
            total += self.training_step(rows)? * rows.len() as f64;
        }
        let log = EpochLog {
            epoch: self.epoch,
            loss: total / order.len() as f64,
            lr,
        };
        self.epoch += 1;
        Ok(log)
    }

    /// Train for the configured number of epochs, stopping early once the
    /// epoch loss has not reached a new best for `patience` epochs.
    pub fn fit(&mut self, mut on_epoch: impl FnMut(&EpochLog)) -> Result<f64> {
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        let mut last = f64::NAN;
        while self.epoch < self.config.epochs {
            let log = self.train_epoch()?;
            on_epoch(&log);
            last = log.loss;
            if log.loss < best {
                best = log.loss;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if self.config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
        Ok(last)
    }

    /// Finish training and attach provenance.
    pub fn into_model(self) -> DiffusionModel {
        let mut model = self.model;
        model.training = Some(TrainingRecord {
            config: self.config,
            epochs_run: self.epoch,
            final_loss: self.last_loss,
        });
        model
    }
}
