//! Dense noise-prediction network with hand-derived gradients, Adam with a
//! cosine learning-rate schedule, and sinusoidal time embeddings.

mod network;
mod optim;

pub use network::{Backward, Linear, Network, NetworkShape};
pub use optim::{cosine_learning_rate, Adam, AdamConfig};

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw sinusoidal width fed to the time projection.
pub const DEFAULT_TIME_DIM: usize = 128;

/// Floating-point element type the network can run in. Production uses
/// `f32`; gradient checks run in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// max(0, x); derivative at 0 taken as 0.
    #[default]
    Relu,
    /// x · sigmoid(x).
    Silu,
}

impl Activation {
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => {
                if x > F::zero() {
                    x
                } else {
                    F::zero()
                }
            }
            Activation::Silu => x / (F::one() + (-x).exp()),
        }
    }

    pub fn derivative<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => {
                if x > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Silu => {
                let s = F::one() / (F::one() + (-x).exp());
                s * (F::one() + x * (F::one() - s))
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "silu" => Ok(Activation::Silu),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

/// Sinusoidal encoding of step `t`: pairs `(sin tω_i, cos tω_i)` with
/// `ω_i = 10000^(-2i/dim)`.
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim % 2 != 0 {
        return Err(Error::OddDimension(dim));
    }
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(-2.0 * i as f64 / dim as f64);
        let angle = t as f64 * freq;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

/// Time embeddings for a batch of steps, one row each.
pub(crate) fn time_embedding_batch<F: Scalar>(steps: &[usize], dim: usize) -> Array2<F> {
    let mut out = Array2::zeros((steps.len(), dim));
    for (row, &t) in out.rows_mut().into_iter().zip(steps) {
        let emb = time_embedding(t, dim).expect("time dimension validated at construction");
        for (o, e) in row.into_iter().zip(emb) {
            *o = F::from_f64_lossy(e);
        }
    }
    out
}
