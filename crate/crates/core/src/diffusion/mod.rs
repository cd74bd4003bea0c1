//! Gaussian diffusion over encoded rows: closed-form forward corruption,
//! the ε-prediction objective, the ancestral reverse step, and the
//! training/sampling loops built on them.

mod model;
mod schedule;

pub use model::{Conditioning, DiffusionModel, EpochLog, TrainConfig, Trainer, TrainingRecord};
pub use schedule::{NoiseSchedule, ScheduleParams, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS};

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::nn::{Network, Scalar};

/// `x_t = √ᾱ_t · x_0 + √(1 − ᾱ_t) · ε`, row-wise with per-row steps.
pub fn q_sample<F: Scalar>(
    schedule: &NoiseSchedule,
    x0: ArrayView2<'_, F>,
    steps: &[usize],
    noise: ArrayView2<'_, F>,
) -> Result<Array2<F>> {
    assert_eq!(x0.dim(), noise.dim(), "noise shape");
    assert_eq!(x0.nrows(), steps.len(), "one step per row");
    for &t in steps {
        schedule.check_step(t)?;
    }
    let mut out = Array2::zeros(x0.dim());
    for (((mut row, x), e), &t) in out
        .rows_mut()
        .into_iter()
        .zip(x0.rows())
        .zip(noise.rows())
        .zip(steps)
    {
        let signal = F::from_f64_lossy(schedule.alpha_bar(t).sqrt());
        let spread = F::from_f64_lossy(schedule.beta_hat(t).sqrt());
        Zip::from(&mut row)
            .and(&x)
            .and(&e)
            .for_each(|o, &x, &e| *o = signal * x + spread * e);
    }
    Ok(out)
}

/// Draw `ε ~ N(0, I)` and return `(x_t, ε)`.
pub fn forward_sample<F: Scalar, R: Rng>(
    schedule: &NoiseSchedule,
    x0: ArrayView2<'_, F>,
    steps: &[usize],
    rng: &mut R,
) -> Result<(Array2<F>, Array2<F>)> {
    let noise = standard_normal(x0.nrows(), x0.ncols(), rng);
    let xt = q_sample(schedule, x0, steps, noise.view())?;
    Ok((xt, noise))
}

pub(crate) fn standard_normal<F: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = rng.sample(StandardNormal);
        F::from_f64_lossy(z)
    })
}

/// Loss and gradients of one ε-prediction batch.
#[derive(Clone, Debug)]
pub struct DenoisingGradients<F> {
    pub loss: f64,
    pub network: Network<F>,
    /// Gradient with respect to the leading `embed_width` columns of `x_0`.
    pub clean_input: Array2<F>,
}

/// `‖ε − ε_θ(x_t, t, y)‖²` averaged over batch and width, with gradients for
/// the network and for the embedding slots of the clean rows.
pub fn denoising_loss<F: Scalar>(
    network: &Network<F>,
    schedule: &NoiseSchedule,
    x0: ArrayView2<'_, F>,
    steps: &[usize],
    labels: &[usize],
    noise: ArrayView2<'_, F>,
    embed_width: usize,
) -> Result<DenoisingGradients<F>> {
    let xt = q_sample(schedule, x0, steps, noise)?;
    let back = network.backward(xt.view(), steps, labels, noise, embed_width)?;
    let mut clean_input = back.input_grad;
    for (mut row, &t) in clean_input.axis_iter_mut(Axis(0)).zip(steps) {
        let signal = F::from_f64_lossy(schedule.alpha_bar(t).sqrt());
        row.mapv_inplace(|g| g * signal);
    }
    Ok(DenoisingGradients {
        loss: back.loss,
        network: back.grads,
        clean_input,
    })
}

/// One ancestral step `x_t → x_{t-1}`:
/// `μ = (x_t − β_t/√(1−ᾱ_t) · ε̂)/√α_t`, plus `√β_t · z` when `t > 1`.
pub fn reverse_step<F: Scalar>(
    schedule: &NoiseSchedule,
    xt: ArrayView2<'_, F>,
    predicted_noise: ArrayView2<'_, F>,
    t: usize,
    fresh_noise: Option<ArrayView2<'_, F>>,
) -> Array2<F> {
    let coef = schedule.beta(t) / schedule.beta_hat(t).sqrt();
    let inv_sqrt_alpha = 1.0 / schedule.alpha(t).sqrt();
    let sigma = schedule.beta(t).sqrt();
    let mut out = Array2::zeros(xt.dim());
    Zip::from(&mut out)
        .and(&xt)
        .and(&predicted_noise)
        .for_each(|o, &x, &e| {
            let x = x.to_f64().unwrap_or(f64::NAN);
            let e = e.to_f64().unwrap_or(f64::NAN);
            *o = F::from_f64_lossy(inv_sqrt_alpha * (x - coef * e));
        });
    if t > 1 {
        if let Some(z) = fresh_noise {
            let s = F::from_f64_lossy(sigma);
            Zip::from(&mut out).and(&z).for_each(|o, &z| *o += s * z);
        }
    }
    out
}
