use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov statistic, `sup_x |F_real(x) − F_synth(x)|`,
/// by a merge scan over both sorted samples.
pub fn ks_statistic(real: &[f64], synth: &[f64]) -> Result<f64> {
    if real.is_empty() || synth.is_empty() {
        return Err(Error::EmptyColumn("ks_statistic".into()));
    }
    let mut a = real.to_vec();
    let mut b = synth.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(sup)
}

/// Unhalved total variation distance between two empirical distributions
/// over arbitrary keys: `Σ_c |p_real(c) − p_synth(c)|`, in `[0, 2]`.
pub fn tvd_by<K: Ord + Copy>(real: impl ExactSizeIterator<Item = K>, synth: impl ExactSizeIterator<Item = K>) -> Result<f64> {
    let (n, m) = (real.len(), synth.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyColumn("tvd".into()));
    }
    let mut counts: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for k in real {
        counts.entry(k).or_default().0 += 1;
    }
    for k in synth {
        counts.entry(k).or_default().1 += 1;
    }
    Ok(counts
        .values()
        .map(|&(r, s)| (r as f64 / n as f64 - s as f64 / m as f64).abs())
        .sum())
}

/// TVD between two categorical columns.
pub fn tvd(real: &[u32], synth: &[u32]) -> Result<f64> {
    tvd_by(real.iter().copied(), synth.iter().copied())
}

/// Pearson correlation via a one-pass co-moment update. `None` when either
/// column has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "paired columns");
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2x = 0.0;
    let mut m2y = 0.0;
    let mut cxy = 0.0;
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (k + 1) as f64;
        let dx = a - mean_x;
        let dy = b - mean_y;
        mean_x += dx / n;
        mean_y += dy / n;
        m2x += dx * (a - mean_x);
        m2y += dy * (b - mean_y);
        cxy += dx * (b - mean_y);
    }
    if !(m2x > 0.0 && m2y > 0.0) {
        return None;
    }
    Some((cxy / (m2x.sqrt() * m2y.sqrt())).clamp(-1.0, 1.0))
}

/// Median; mean of the two middle values for even lengths.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
