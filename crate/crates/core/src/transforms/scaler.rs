//! Per-column numeric scaling: standardization, Yeo–Johnson power transform
//! and a quantile transform onto the standard normal.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of reference quantiles kept by the quantile transform.
pub const DEFAULT_QUANTILES: usize = 1000;
/// CDF clamp applied before the normal inverse CDF.
pub const QUANTILE_CLAMP: f64 = 1e-7;

const LAMBDA_GRID_STEPS: i32 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalerMethod {
    Standard,
    YeoJohnson,
    Quantile,
}

impl ScalerMethod {
    pub fn name(self) -> &'static str {
        match self {
            ScalerMethod::Standard => "standard",
            ScalerMethod::YeoJohnson => "yeo-johnson",
            ScalerMethod::Quantile => "quantile",
        }
    }
}

impl std::str::FromStr for ScalerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ScalerMethod::Standard),
            "yeo-johnson" | "power" => Ok(ScalerMethod::YeoJohnson),
            "quantile" => Ok(ScalerMethod::Quantile),
            other => Err(Error::InvalidConfig(format!("unknown scaler `{other}`"))),
        }
    }
}

/// Fitted parameters for one numeric column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ColumnScaler {
    Standard {
        mean: f64,
        std: f64,
    },
    YeoJohnson {
        lambda: f64,
        mean: f64,
        std: f64,
        /// Training range; the inverse extrapolates linearly beyond it.
        min: f64,
        max: f64,
    },
    Quantile {
        references: Vec<f64>,
    },
}

/// Fitted scalers for every numeric column, in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericScaler {
    method: ScalerMethod,
    columns: Vec<ColumnScaler>,
}

impl NumericScaler {
    pub fn fit(train: &Dataset, method: ScalerMethod, quantile_count: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if method == ScalerMethod::Quantile && quantile_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "quantile count {quantile_count} must be at least 2"
            )));
        }
        let schema = train.schema();
        let columns = schema
            .numeric_indices()
            .into_iter()
            .map(|i| {
                let values = train.numeric(i);
                let name = &schema.columns()[i].name;
                let first = values[0];
                if values.iter().all(|&v| v == first) {
                    return Err(Error::ConstantColumn(name.clone()));
                }
                Ok(match method {
                    ScalerMethod::Standard => fit_standard(values),
                    ScalerMethod::YeoJohnson => fit_yeo_johnson(values),
                    ScalerMethod::Quantile => fit_quantile(values, quantile_count),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NumericScaler { method, columns })
    }

    /// Build from explicit per-column parameters (checkpoint loading).
    pub fn from_parts(method: ScalerMethod, columns: Vec<ColumnScaler>) -> Result<Self> {
        for column in &columns {
            let ok = match (method, column) {
                (ScalerMethod::Standard, ColumnScaler::Standard { mean, std }) => {
                    mean.is_finite() && *std > 0.0 && std.is_finite()
                }
                (ScalerMethod::YeoJohnson, ColumnScaler::YeoJohnson { lambda, mean, std, min, max }) => {
                    lambda.is_finite() && mean.is_finite() && *std > 0.0 && min <= max
                }
                (ScalerMethod::Quantile, ColumnScaler::Quantile { references }) => {
                    references.len() >= 2 && references.windows(2).all(|w| w[0] <= w[1])
                }
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "scaler parameters {column:?} are invalid for method {}",
                    method.name()
                )));
            }
        }
        Ok(NumericScaler { method, columns })
    }

    pub fn method(&self) -> ScalerMethod {
        self.method
    }

    pub fn columns(&self) -> &[ColumnScaler] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Scale one value of the `column`-th numeric column.
    pub fn scale(&self, column: usize, x: f64) -> f64 {
        self.columns[column].scale(x)
    }

    pub fn unscale(&self, column: usize, z: f64) -> f64 {
        self.columns[column].unscale(z)
    }

    /// Scale a full numeric row (one value per numeric column).
    pub fn scale_row(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(&self.columns).map(|(&x, c)| c.scale(x)).collect()
    }

    pub fn unscale_row(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(&self.columns).map(|(&z, c)| c.unscale(z)).collect()
    }
}

impl ColumnScaler {
    pub fn scale(&self, x: f64) -> f64 {
        match self {
            ColumnScaler::Standard { mean, std } => (x - mean) / std,
            ColumnScaler::YeoJohnson {
                lambda, mean, std, ..
            } => (yeo_johnson(x, *lambda) - mean) / std,
            ColumnScaler::Quantile { references } => {
                let p = empirical_cdf(references, x).clamp(QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP);
                standard_normal().inverse_cdf(p)
            }
        }
    }

    pub fn unscale(&self, z: f64) -> f64 {
        match self {
            ColumnScaler::Standard { mean, std } => z * std + mean,
            ColumnScaler::YeoJohnson {
                lambda,
                mean,
                std,
                min,
                max,
            } => {
                let y = z * std + mean;
                let (y_lo, y_hi) = (yeo_johnson(*min, *lambda), yeo_johnson(*max, *lambda));
                if y > y_hi {
                    max + (y - y_hi) / yeo_johnson_slope(*max, *lambda)
                } else if y < y_lo {
                    min + (y - y_lo) / yeo_johnson_slope(*min, *lambda)
                } else {
                    // Guards against round-off pushing the inverse a hair outside.
                    yeo_johnson_inverse(y, *lambda).clamp(*min, *max)
                }
            }
            ColumnScaler::Quantile { references } => {
                let p = standard_normal().cdf(z);
                let n = references.len();
                let pos = p * (n - 1) as f64;
                if pos <= 0.0 {
                    return references[0];
                }
                if pos >= (n - 1) as f64 {
                    return references[n - 1];
                }
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                references[lo] + frac * (references[lo + 1] - references[lo])
            }
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fit_standard(values: &[f64]) -> ColumnScaler {
    let (mean, std) = mean_std(values.iter().copied());
    ColumnScaler::Standard { mean, std }
}

/// Yeo–Johnson transform of `x` at `lambda`.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < 1e-12 {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < 1e-12 {
        -(-x).ln_1p()
    } else {
        let p = 2.0 - lambda;
        -((1.0 - x).powf(p) - 1.0) / p
    }
}

fn yeo_johnson_slope(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        (x + 1.0).powf(lambda - 1.0)
    } else {
        (1.0 - x).powf(1.0 - lambda)
    }
}

fn yeo_johnson_inverse(y: f64, lambda: f64) -> f64 {
    if y >= 0.0 {
        if lambda.abs() < 1e-12 {
            y.exp_m1()
        } else {
            (lambda * y + 1.0).powf(1.0 / lambda) - 1.0
        }
    } else if (lambda - 2.0).abs() < 1e-12 {
        -(-y).exp_m1()
    } else {
        let p = 2.0 - lambda;
        1.0 - (1.0 - p * y).powf(1.0 / p)
    }
}

/// Gaussian profile log-likelihood of the transformed column.
pub fn yeo_johnson_log_likelihood(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let (_, std) = mean_std(values.iter().map(|&x| yeo_johnson(x, lambda)));
    let jacobian: f64 = values.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * (std * std).ln() + (lambda - 1.0) * jacobian
}

/// λ grid in [-2, 2], step 0.01.
pub fn lambda_grid() -> impl Iterator<Item = f64> {
    (0..=LAMBDA_GRID_STEPS).map(|i| f64::from(i - LAMBDA_GRID_STEPS / 2) / 100.0)
}

fn fit_yeo_johnson(values: &[f64]) -> ColumnScaler {
    let mut best = (f64::NEG_INFINITY, 1.0);
    for lambda in lambda_grid() {
        let ll = yeo_johnson_log_likelihood(values, lambda);
        if ll > best.0 {
            best = (ll, lambda);
        }
    }
    let lambda = best.1;
    let (mean, std) = mean_std(values.iter().map(|&x| yeo_johnson(x, lambda)));
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    ColumnScaler::YeoJohnson {
        lambda,
        mean,
        std,
        min,
        max,
    }
}

/// `count` evenly spaced empirical quantiles with linear interpolation.
pub fn reference_quantiles(values: &[f64], count: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let denom = count - 1;
    (0..count)
        .map(|k| {
            // Integer arithmetic keeps grid points that land on samples exact.
            let num = k * (n - 1);
            let lo = num / denom;
            let rem = num % denom;
            if rem == 0 {
                sorted[lo]
            } else {
                let frac = rem as f64 / denom as f64;
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            }
        })
        .collect()
}

fn fit_quantile(values: &[f64], count: usize) -> ColumnScaler {
    ColumnScaler::Quantile {
        references: reference_quantiles(values, count),
    }
}

/// Piecewise-linear CDF through the reference quantiles. Runs of equal
/// references map to the middle of their probability interval.
fn empirical_cdf(references: &[f64], x: f64) -> f64 {
    let n = references.len();
    let step = 1.0 / (n - 1) as f64;
    let prob = |i: usize| i as f64 * step;

    let upper = {
        let j = references.partition_point(|&r| r <= x);
        if j == 0 {
            0.0
        } else if j == n {
            1.0
        } else {
            let i = j - 1;
            prob(i) + (x - references[i]) / (references[j] - references[i]) * step
        }
    };
    let lower = {
        let j = references.partition_point(|&r| r < x);
        if j == 0 {
            0.0
        } else if j == n {
            1.0
        } else {
            let i = j - 1;
            prob(j) - (references[j] - x) / (references[j] - references[i]) * step
        }
    };
    0.5 * (upper + lower)
}
