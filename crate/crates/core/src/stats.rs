//! Small-sample statistics.
//!
//! Sums run over values sorted ascending so results do not depend on input
//! order.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyGroup("mean of no values".into()));
    }
    Ok(sorted(values).iter().sum::<f64>() / values.len() as f64)
}

/// Unbiased sample variance; 0 for a single value.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Ok(0.0);
    }
    let mut sq: Vec<f64> = values.iter().map(|v| (v - m).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    Ok(sq.iter().sum::<f64>() / (values.len() - 1) as f64)
}

/// Quantile of Student's t distribution with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::invalid(format!("student-t with df={df}: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

/// Two-sided 95% Student-t half-width `t(0.975, n-1) * s / sqrt(n)`; 0 when n = 1.
pub fn ci95_half_width(n: usize, variance: f64) -> Result<f64> {
    if n < 2 {
        return Ok(0.0);
    }
    let t = t_quantile(0.975, (n - 1) as f64)?;
    Ok(t * variance.sqrt() / (n as f64).sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "spearman needs two equal-length samples of size >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let r = pearson(&ranks(x), &ranks(y));
    if r.is_nan() {
        return Err(Error::invalid("spearman undefined for a constant sample"));
    }
    Ok(r)
}
