use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagOrder {
    Fixed(usize),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub stat: f64,
    pub p: f64,
    pub lags: usize,
    pub nobs: usize,
}

/// `floor(12 * (N / 100)^(1/4))`.
pub fn auto_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant and no trend.
///
/// Regresses `dy_t` on `1, y_{t-1}, dy_{t-1}, ..., dy_{t-k}` by least
/// squares over `t = k+1 .. N-1` and returns the t-ratio of the `y_{t-1}`
/// coefficient with its MacKinnon approximate p-value.
pub fn adf_test(x: &[f64], lags: LagOrder) -> Result<AdfResult> {
    let n = x.len();
    let k = match lags {
        LagOrder::Fixed(k) => k,
        LagOrder::Auto => auto_lag(n),
    };
    if n <= 20 + k {
        return Err(Error::TooShort(format!(
            "ADF with {k} lags needs more than {} points, got {n}",
            20 + k
        )));
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let nobs = dx.len() - k;
    let p = k + 2;
    let mut design = DMatrix::<f64>::zeros(nobs, p);
    let mut target = DVector::<f64>::zeros(nobs);
    for row in 0..nobs {
        let i = k + row;
        target[row] = dx[i];
        design[(row, 0)] = x[i];
        for j in 1..=k {
            design[(row, j)] = dx[i - j];
        }
        design[(row, p - 1)] = 1.0;
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let rinv = r
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("ADF regression is singular".into()))?;
    let qty = qr.q().transpose() * &target;
    let beta = &rinv * qty;
    let resid = &target - &design * &beta;
    let dof = nobs as f64 - p as f64;
    let sigma2 = resid.norm_squared() / dof;
    let xtx_inv_00: f64 = rinv.row(0).iter().map(|v| v * v).sum();
    let se = (sigma2 * xtx_inv_00).sqrt();
    let stat = beta[0] / se;
    if !stat.is_finite() {
        return Err(Error::InvalidArgument(
            "ADF statistic is undefined (constant series?)".into(),
        ));
    }
    Ok(AdfResult {
        stat,
        p: mackinnon_p(stat),
        lags: k,
        nobs,
    })
}

// MacKinnon (1994) approximate asymptotic p-value surface for the
// constant-only Dickey-Fuller statistic with one I(1) series.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

/// MacKinnon approximate p-value for a constant-only ADF statistic.
pub fn mackinnon_p(stat: f64) -> f64 {
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let coef: &[f64] = if stat <= TAU_STAR { &SMALL_P } else { &LARGE_P };
    let z = coef.iter().rev().fold(0.0, |acc, c| acc * stat + c);
    Normal::standard().cdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 2);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn iid_noise_rejects_unit_root() {
        let r = adf_test(&white(10_000, 1), LagOrder::Auto).unwrap();
        assert_eq!(r.lags, 37);
        assert!(r.p < 0.01, "{r:?}");
    }

    #[test]
    fn random_walk_keeps_unit_root() {
        let mut acc = 0.0;
        let walk: Vec<f64> = white(10_000, 2)
            .into_iter()
            .map(|e| {
                acc += e;
                acc
            })
            .collect();
        let r = adf_test(&walk, LagOrder::Auto).unwrap();
        assert!(r.p > 0.10, "{r:?}");
    }

    #[test]
    fn level_shift_invariance() {
        let x = white(300, 3);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1234.5).collect();
        let a = adf_test(&x, LagOrder::Fixed(3)).unwrap();
        let b = adf_test(&shifted, LagOrder::Fixed(3)).unwrap();
        assert!((a.stat - b.stat).abs() < 1e-8 * a.stat.abs());
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            adf_test(&[0.0; 25], LagOrder::Fixed(5)),
            Err(Error::TooShort(_))
        ));
        assert!(adf_test(&white(26, 0), LagOrder::Fixed(5)).is_ok());
    }

    #[test]
    fn mackinnon_surface() {
        assert_eq!(mackinnon_p(3.0), 1.0);
        assert_eq!(mackinnon_p(-20.0), 0.0);
        // 5% and 1% asymptotic critical values of the constant-only case
        assert!((mackinnon_p(-2.8621) - 0.05).abs() < 2e-3);
        assert!((mackinnon_p(-3.4304) - 0.01).abs() < 1e-3);
        let mut prev = 0.0;
        for i in 0..200 {
            let p = mackinnon_p(-18.0 + 0.1 * i as f64);
            assert!(p >= prev);
            prev = p;
        }
    }
}
