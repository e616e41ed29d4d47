//! Statistics for per-call energy series.

mod acf;
mod adf;
mod ks;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acf::{acf, pacf};
pub use adf::{adf_test, auto_lag, mackinnon_p, AdfResult, LagOrder};
pub use ks::{kolmogorov_survival, ks_two_sample, KsResult};

/// An ordered sequence of per-call values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub label: String,
    pub values: Vec<f64>,
}

impl EnergySeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooShort("series must hold at least one value".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v} in series")));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn derived(&self, suffix: &str, values: Vec<f64>) -> EnergySeries {
        EnergySeries {
            label: format!("{}{suffix}", self.label),
            values,
        }
    }

    pub fn moving_average(&self, window: usize) -> Result<EnergySeries> {
        Ok(self.derived("_ma", moving_average(&self.values, window)?))
    }

    pub fn normalized(&self) -> EnergySeries {
        self.derived("_norm", minmax_normalize(&self.values))
    }

    /// Single-column CSV with the label as header.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", self.label);
        for v in &self.values {
            writeln!(s, "{v}").unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<EnergySeries> {
        let mut lines = text.lines();
        let label = lines
            .next()
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })?
            .trim()
            .to_string();
        let values = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| crate::textio::parse_field::<f64>(l.trim(), i + 2))
            .collect::<Result<Vec<_>>>()?;
        EnergySeries::new(label, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch(x.len(), y.len()))
    }
}

/// Element `i` is the mean of `x[i..i + w]`; output length `N - w + 1`.
pub fn moving_average(x: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 || w > x.len() {
        return Err(Error::InvalidArgument(format!("window {w} must be in 1..={}", x.len())));
    }
    let mut out = Vec::with_capacity(x.len() - w + 1);
    // recompute each window sum from scratch every `w` steps to bound drift
    let mut sum: f64 = x[..w].iter().sum();
    out.push(sum / w as f64);
    for i in w..x.len() {
        if (i - w + 1).is_multiple_of(w) {
            sum = x[i - w + 1..=i].iter().sum();
        } else {
            sum += x[i] - x[i - w];
        }
        out.push(sum / w as f64);
    }
    Ok(out)
}

/// `(v - min) / (max - min)`; a constant series maps to all 0.5.
pub fn minmax_normalize(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        x.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.5; x.len()]
    }
}

/// Shifts `x` so that its mean equals the mean of `y`.
pub fn mean_align(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    same_len(x, y)?;
    let shift = mean(x) - mean(y);
    Ok(x.iter().map(|v| v - shift).collect())
}

pub fn rmsd(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    if x.is_empty() {
        return Err(Error::TooShort("rmsd of empty series".into()));
    }
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    if x.len() < 2 {
        return Err(Error::TooShort("pearson needs at least two points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Quality bin of a normalized value: 0 best `[0, .25)`, 1 good `[.25, .5)`,
/// 2 bad `[.5, .75)`, 3 worst `[.75, 1]`.
pub fn quality_bin(v: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::OutOfUnitRange(v));
    }
    Ok(if v < 0.25 {
        0
    } else if v < 0.5 {
        1
    } else if v < 0.75 {
        2
    } else {
        3
    })
}

/// Fraction of indices at which both normalized series fall into the same
/// quality bin.
pub fn quartile_bin_agreement(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    if x.is_empty() {
        return Err(Error::TooShort("bin agreement of empty series".into()));
    }
    let mut same = 0usize;
    for (&a, &b) in x.iter().zip(y) {
        same += usize::from(quality_bin(a)? == quality_bin(b)?);
    }
    Ok(same as f64 / x.len() as f64)
}

/// Proportion of indices in each (problem bin, indicator bin) combination,
/// row-major over the problem bin.
pub fn bin_confusion(x: &[f64], y: &[f64]) -> Result<[[f64; 4]; 4]> {
    same_len(x, y)?;
    let mut counts = [[0usize; 4]; 4];
    for (&a, &b) in x.iter().zip(y) {
        counts[quality_bin(a)? as usize][quality_bin(b)? as usize] += 1;
    }
    let n = x.len().max(1) as f64;
    Ok(counts.map(|row| row.map(|c| c as f64 / n)))
}

/// Scores from comparing a problem series with an indicator series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pearson: Option<f64>,
    pub rmsd: f64,
    pub bin_agreement: f64,
}

/// Normalize both series, align the problem to the indicator's mean, then
/// score. Pearson is `None` when either series is constant.
pub fn compare(problem: &[f64], indicator: &[f64]) -> Result<Comparison> {
    same_len(problem, indicator)?;
    let x = minmax_normalize(problem);
    let y = minmax_normalize(indicator);
    let aligned = mean_align(&x, &y)?;
    Ok(Comparison {
        pearson: if x.len() >= 2 { pearson(&x, &y).ok() } else { None },
        rmsd: rmsd(&aligned, &y)?,
        bin_agreement: quartile_bin_agreement(&x, &y)?,
    })
}

/// Flat summary of one analysis; absent entries were not computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmsd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmsd_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_agreement_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_lags: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator_adf_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator_adf_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calls: Option<usize>,
}

impl StatReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<StatReport> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.adf_p, self.ks_p, self.bin_agreement, self.bin_agreement_raw];
        if let Some(p) = probs.into_iter().flatten().find(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::OutOfUnitRange(p));
        }
        let corr = [self.pearson, self.pearson_raw];
        if let Some(r) = corr.into_iter().flatten().find(|r| !(-1.0..=1.0).contains(r)) {
            return Err(Error::InvalidArgument(format!("correlation {r} outside [-1, 1]")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[2.0; 6], 3).unwrap(), vec![2.0; 4]);
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.5, 2.5]);
        let x = [0.3, -1.0, 7.5, 2.0];
        assert_eq!(moving_average(&x, 1).unwrap(), x.to_vec());
        assert!(moving_average(&x, 5).is_err());
        assert!(moving_average(&x, 0).is_err());
    }

    #[test]
    fn moving_average_matches_direct_means() {
        let x: Vec<f64> = (0..2000).map(|i| ((i * 37 % 101) as f64).sin() * 1e3).collect();
        let ma = moving_average(&x, 500).unwrap();
        assert_eq!(ma.len(), 1501);
        for (i, v) in ma.iter().enumerate() {
            let direct = mean(&x[i..i + 500]);
            assert!((v - direct).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(minmax_normalize(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[3.0, 3.0, 3.0]), vec![0.5; 3]);
    }

    #[test]
    fn align_cases() {
        assert_eq!(mean_align(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), vec![-1.0, 0.0, 1.0]);
        let x = [0.2, 0.4, 0.9];
        assert_eq!(mean_align(&x, &x).unwrap(), x.to_vec());
        assert!(mean_align(&x, &[1.0]).is_err());
    }

    #[test]
    fn rmsd_cases() {
        assert_eq!(rmsd(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmsd(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmsd(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(rmsd(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 7.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        // direct evaluation: means 2 and 7/3, sxy = 3, sxx = 2, syy = 14/3
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        assert!((r - expected).abs() < 1e-14);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn bin_agreement_cases() {
        let x = [0.1, 0.3, 0.6, 0.8, 1.0];
        assert_eq!(quartile_bin_agreement(&x, &x).unwrap(), 1.0);
        assert_eq!(quartile_bin_agreement(&[0.1], &[0.9]).unwrap(), 0.0);
        assert_eq!(quality_bin(0.25).unwrap(), 1);
        assert_eq!(quality_bin(0.5).unwrap(), 2);
        assert_eq!(quality_bin(0.75).unwrap(), 3);
        assert_eq!(quality_bin(1.0).unwrap(), 3);
        assert_eq!(quartile_bin_agreement(&[0.25], &[0.49]).unwrap(), 1.0);
        assert_eq!(quartile_bin_agreement(&[0.25], &[0.2499]).unwrap(), 0.0);
        assert!(quartile_bin_agreement(&[1.2], &[0.5]).is_err());
        let c = bin_confusion(&[0.1, 0.9], &[0.1, 0.6]).unwrap();
        assert_eq!(c[0][0], 0.5);
        assert_eq!(c[3][2], 0.5);
    }

    #[test]
    fn series_csv_round_trip() {
        let s = EnergySeries::new("problem", vec![1.5, -2.25, 1e-17, 3.0]).unwrap();
        assert_eq!(EnergySeries::from_csv(&s.to_csv()).unwrap(), s);
        assert!(EnergySeries::new("x", vec![]).is_err());
        assert!(EnergySeries::new("x", vec![f64::NAN]).is_err());
    }

    #[test]
    fn report_json_is_flat() {
        let r = StatReport {
            pearson: Some(0.5),
            ks_p: Some(0.2),
            ..StatReport::default()
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 2);
        assert!(obj.values().all(|x| x.is_number()));
        assert_eq!(StatReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        assert!(StatReport { adf_p: Some(1.5), ..r }.validate().is_err());
    }

    fn series(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, n)
    }

    proptest! {
        #[test]
        fn rmsd_symmetric_nonnegative(x in series(20), y in series(20)) {
            let a = rmsd(&x, &y).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a, rmsd(&y, &x).unwrap());
            prop_assert_eq!(rmsd(&x, &x).unwrap(), 0.0);
            if x != y { prop_assert!(a > 0.0); }
        }

        #[test]
        fn pearson_affine_invariant(x in series(30), y in series(30), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let r = pearson(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn comparison_affine_invariant(x in series(40), y in series(40), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let c = compare(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| a * v - b).collect();
            let d = compare(&xs, &ys).unwrap();
            prop_assert!((c.rmsd - d.rmsd).abs() < 1e-9);
        }

        #[test]
        fn normalize_spans_unit_interval(x in series(10)) {
            let n = minmax_normalize(&x);
            let lo = n.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if x.iter().any(|v| *v != x[0]) {
                prop_assert_eq!((lo, hi), (0.0, 1.0));
            }
        }

        #[test]
        fn aligned_mean_matches(x in series(25), y in series(25)) {
            let a = mean_align(&x, &y).unwrap();
            prop_assert!((mean(&a) - mean(&y)).abs() < 1e-9);
        }
    }
}
