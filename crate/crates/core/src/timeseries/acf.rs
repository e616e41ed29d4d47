use crate::error::{Error, Result};

use super::mean;

fn check_lag(n: usize, max_lag: usize) -> Result<()> {
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!(
            "max_lag {max_lag} must be below series length {n}"
        )));
    }
    Ok(())
}

/// Sample autocorrelations for lags `0..=max_lag`, each lag-k autocovariance
/// divided by the lag-0 autocovariance. A constant series has autocorrelation
/// 1 at lag 0 and 0 elsewhere.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_lag(x.len(), max_lag)?;
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    let mut out = vec![1.0];
    for k in 1..=max_lag {
        let ck: f64 = d[..d.len() - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum();
        out.push(if c0 > 0.0 { ck / c0 } else { 0.0 });
    }
    Ok(out)
}

/// Partial autocorrelations for lags `0..=max_lag` by the Durbin-Levinson
/// recursion on the sample autocorrelations.
pub fn pacf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let r = acf(x, max_lag)?;
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let mut next: Vec<f64> = (1..k).map(|j| phi[j - 1] - a * phi[k - j - 1]).collect();
        next.push(a);
        phi = next;
        v *= 1.0 - a * a;
        out.push(a);
    }
    Ok(out)
}
