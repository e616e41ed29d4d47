//! Two-phase use of the indicator: collect a burn-in history of indicator
//! energies, then rank or gate each new call against that history.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STORE_SCHEMA: &str = "idlepi.burnin.v1";

#[derive(Clone, Debug, PartialEq)]
pub struct BurnInStore {
    history: VecDeque<f64>,
    burn_in: usize,
    cap: Option<usize>,
    min: f64,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct StoreDoc {
    schema: String,
    burn_in: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    history: Vec<f64>,
}

impl BurnInStore {
    pub fn new(burn_in: usize) -> Self {
        Self {
            history: VecDeque::new(),
            burn_in,
            cap: None,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    /// Keeps only the most recent `cap` observations.
    pub fn with_cap(burn_in: usize, cap: usize) -> Result<Self> {
        if cap == 0 || cap < burn_in {
            return Err(Error::InvalidArgument(format!(
                "history cap {cap} must be at least the burn-in length {burn_in}"
            )));
        }
        Ok(Self {
            cap: Some(cap),
            ..Self::new(burn_in)
        })
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn min(&self) -> Option<f64> {
        (!self.history.is_empty()).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (!self.history.is_empty()).then_some(self.max)
    }

    pub fn is_ready(&self) -> bool {
        self.history.len() >= self.burn_in
    }

    pub fn observe(&mut self, value: f64) {
        self.history.push_back(value);
        let mut evicted = false;
        if let Some(cap) = self.cap {
            while self.history.len() > cap {
                self.history.pop_front();
                evicted = true;
            }
        }
        if evicted {
            self.recompute_range();
        } else {
            self.min = self.min.min(value);
            self.max = self.max.max(value);
        }
    }

    pub fn observed(&self, value: f64) -> Self {
        let mut next = self.clone();
        next.observe(value);
        next
    }

    fn recompute_range(&mut self) {
        self.min = self.history.iter().copied().fold(f64::INFINITY, f64::min);
        self.max = self.history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }

    fn ensure_ready(&self) -> Result<()> {
        if self.is_ready() && !self.history.is_empty() {
            Ok(())
        } else {
            Err(Error::NotReady(format!(
                "burn-in incomplete: {} of {} observations",
                self.history.len(),
                self.burn_in
            )))
        }
    }

    /// Fraction of stored values strictly below `value`, ties counted half.
    pub fn percentile_rank(&self, value: f64) -> Result<f64> {
        self.ensure_ready()?;
        let (mut below, mut equal) = (0usize, 0usize);
        for &h in &self.history {
            if h < value {
                below += 1;
            } else if h == value {
                equal += 1;
            }
        }
        Ok((below as f64 + 0.5 * equal as f64) / self.history.len() as f64)
    }

    /// `(value - min) / (max - min)` over the history, clamped to `[0, 1]`.
    pub fn normalize(&self, value: f64) -> Result<f64> {
        self.ensure_ready()?;
        if self.max <= self.min {
            return Err(Error::NotReady("history has no spread (min == max)".into()));
        }
        Ok(((value - self.min) / (self.max - self.min)).clamp(0.0, 1.0))
    }

    /// Empirical quantile of the history (linear interpolation).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.ensure_ready()?;
        let mut v: Vec<f64> = self.history.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
    }

    /// Accepts when the normalized indicator energy is below `tau`.
    pub fn gate(&self, indicator_energy: f64, tau: f64) -> Result<GateDecision> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {tau} outside (0, 1)")));
        }
        let e = self.normalize(indicator_energy)?;
        Ok(GateDecision {
            accept: e < tau,
            normalized_e: e,
            percentile: self.percentile_rank(indicator_energy)?,
            threshold: tau,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = StoreDoc {
            schema: STORE_SCHEMA.into(),
            burn_in: self.burn_in,
            cap: self.cap,
            min: self.min(),
            max: self.max(),
            history: self.history.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StoreDoc = serde_json::from_str(text)?;
        if doc.schema != STORE_SCHEMA {
            return Err(Error::Config(format!("unsupported store schema '{}'", doc.schema)));
        }
        let mut store = match doc.cap {
            Some(cap) => Self::with_cap(doc.burn_in, cap)?,
            None => Self::new(doc.burn_in),
        };
        for v in doc.history {
            store.observe(v);
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub accept: bool,
    pub normalized_e: f64,
    pub percentile: f64,
    pub threshold: f64,
}

/// How the acceptance threshold is chosen at each gated call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum ThresholdRule {
    Fixed(f64),
    /// Normalized position of the given history quantile.
    HistoryQuantile(f64),
}

impl ThresholdRule {
    pub fn resolve(&self, store: &BurnInStore) -> Result<f64> {
        match *self {
            ThresholdRule::Fixed(t) => Ok(t),
            ThresholdRule::HistoryQuantile(q) => {
                let t = store.normalize(store.quantile(q)?)?;
                Ok(t.clamp(1e-9, 1.0 - 1e-9))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ThresholdRule::Fixed(t) => t > 0.0 && t < 1.0,
            ThresholdRule::HistoryQuantile(q) => (0.0..=1.0).contains(&q),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid threshold rule {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateEntry {
    pub call: usize,
    pub indicator: f64,
    pub problem: f64,
    /// `None` while the history is still being collected.
    pub decision: Option<GateDecision>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateLog {
    pub entries: Vec<GateEntry>,
}

impl GateLog {
    pub fn accepted(&self) -> impl Iterator<Item = &GateEntry> {
        self.entries.iter().filter(|e| e.decision.is_some_and(|d| d.accept))
    }

    pub fn accepted_mean(&self) -> Option<f64> {
        let (n, s) = self.accepted().fold((0usize, 0.0), |(n, s), e| (n + 1, s + e.problem));
        (n > 0).then(|| s / n as f64)
    }

    pub fn overall_mean(&self) -> Option<f64> {
        let n = self.entries.len();
        (n > 0).then(|| self.entries.iter().map(|e| e.problem).sum::<f64>() / n as f64)
    }

    /// Problem energies and normalized indicator energies of gated calls.
    pub fn gated_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        self.entries
            .iter()
            .filter_map(|e| e.decision.map(|d| (e.problem, d.normalized_e)))
            .unzip()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("call,indicator,problem,phase,normalized_e,percentile,threshold,accept\n");
        for e in &self.entries {
            match e.decision {
                Some(d) => s.push_str(&format!(
                    "{},{},{},usage,{},{},{},{}\n",
                    e.call, e.indicator, e.problem, d.normalized_e, d.percentile, d.threshold, d.accept
                )),
                None => s.push_str(&format!("{},{},{},burn_in,,,,\n", e.call, e.indicator, e.problem)),
            }
        }
        s
    }
}

/// Replays a call sequence through the two-phase procedure. Each call is
/// gated against the history of earlier calls and then added to it.
pub fn run_two_phase(
    problem: &[f64],
    indicator: &[f64],
    mut store: BurnInStore,
    rule: ThresholdRule,
) -> Result<(GateLog, BurnInStore)> {
    if problem.len() != indicator.len() {
        return Err(Error::LengthMismatch(problem.len(), indicator.len()));
    }
    rule.validate()?;
    let mut entries = Vec::with_capacity(problem.len());
    for (call, (&p, &v)) in problem.iter().zip(indicator).enumerate() {
        let decision = match rule.resolve(&store) {
            Ok(tau) => match store.gate(v, tau) {
                Ok(d) => Some(d),
                Err(Error::NotReady(_)) => None,
                Err(e) => return Err(e),
            },
            Err(Error::NotReady(_)) => None,
            Err(e) => return Err(e),
        };
        entries.push(GateEntry {
            call,
            indicator: v,
            problem: p,
            decision,
        });
        store.observe(v);
    }
    Ok((GateLog { entries }, store))
}

/// Problem energies split by the normalized indicator energy `e`:
/// `e <= low_cut` and `e >= high_cut`; the middle band is discarded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedHistogram {
    pub low_set: Vec<f64>,
    pub high_set: Vec<f64>,
    pub low_cut: f64,
    pub high_cut: f64,
}

pub const DEFAULT_CUTS: (f64, f64) = (0.2, 0.8);

pub fn stratify(problem: &[f64], indicator_e: &[f64], low: f64, high: f64) -> Result<StratifiedHistogram> {
    if problem.len() != indicator_e.len() {
        return Err(Error::LengthMismatch(problem.len(), indicator_e.len()));
    }
    if !(0.0 <= low && low < high && high <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cuts ({low}, {high}) must satisfy 0 <= low < high <= 1"
        )));
    }
    let mut out = StratifiedHistogram {
        low_set: Vec::new(),
        high_set: Vec::new(),
        low_cut: low,
        high_cut: high,
    };
    for (&p, &e) in problem.iter().zip(indicator_e) {
        if e <= low {
            out.low_set.push(p);
        } else if e >= high {
            out.high_set.push(p);
        }
    }
    Ok(out)
}

/// Shared-edge histogram of both strata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramCounts {
    pub edges: Vec<f64>,
    pub low: Vec<usize>,
    pub high: Vec<usize>,
}

impl StratifiedHistogram {
    pub fn low_mean(&self) -> Option<f64> {
        (!self.low_set.is_empty()).then(|| crate::timeseries::mean(&self.low_set))
    }

    pub fn high_mean(&self) -> Option<f64> {
        (!self.high_set.is_empty()).then(|| crate::timeseries::mean(&self.high_set))
    }

    pub fn histogram(&self, bins: usize) -> HistogramCounts {
        let bins = bins.max(1);
        let all = self.low_set.iter().chain(&self.high_set);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        } else {
            (0.0, 1.0)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let count = |set: &[f64]| {
            let mut c = vec![0usize; bins];
            for &v in set {
                let i = (((v - lo) / width).floor() as usize).min(bins - 1);
                c[i] += 1;
            }
            c
        };
        HistogramCounts {
            edges,
            low: count(&self.low_set),
            high: count(&self.high_set),
        }
    }
}
