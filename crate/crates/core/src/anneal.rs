//! Annealer emulation.
//!
//! Each read is a single-flip Metropolis chain. Device noise is modelled as a
//! drifting effective inverse temperature: an Ornstein-Uhlenbeck process that
//! advances once per call, so every read of a call (and every disjoint
//! sub-problem inside it) sees the same temperature.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{CompiledModel, QuboModel, Sample, Var};
use crate::rng::{derive_seed, substream, StreamRng};

const READ_TAG: u64 = 0x5245_4144;
const NOISE_TAG: u64 = 0x4e4f_4953;

/// How the inverse temperature evolves over the sweeps of one read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    /// Every sweep at the target beta.
    Constant,
    /// Sweep `s` of `n` runs at `beta * (s + 1) / n`.
    #[default]
    LinearRamp,
}

/// Runs `sweeps` Metropolis passes over all variables (in index order),
/// modifying `state` in place.
pub fn metropolis_run<R: Rng + ?Sized>(
    model: &CompiledModel,
    state: &mut [u8],
    beta: f64,
    sweeps: usize,
    schedule: BetaSchedule,
    rng: &mut R,
) {
    for s in 0..sweeps {
        let b = match schedule {
            BetaSchedule::Constant => beta,
            BetaSchedule::LinearRamp => beta * (s + 1) as f64 / sweeps as f64,
        };
        for i in 0..state.len() {
            let delta = model.flip_delta(state, i);
            if delta <= 0.0 || rng.random::<f64>() < (-b * delta).exp() {
                state[i] ^= 1;
            }
        }
    }
}

/// One read from a uniform random start.
pub fn metropolis_sample<R: Rng + ?Sized>(
    model: &CompiledModel,
    beta: f64,
    sweeps: usize,
    schedule: BetaSchedule,
    rng: &mut R,
) -> Vec<u8> {
    assert!(beta >= 0.0, "beta must be non-negative");
    let mut state: Vec<u8> = (0..model.len()).map(|_| u8::from(rng.random::<bool>())).collect();
    metropolis_run(model, &mut state, beta, sweeps, schedule, rng);
    state
}

/// [`metropolis_sample`] on a sparse model, returning a QUBO-frame sample.
pub fn metropolis_sample_model<R: Rng + ?Sized>(
    model: &QuboModel,
    beta: f64,
    sweeps: usize,
    schedule: BetaSchedule,
    rng: &mut R,
) -> Sample {
    let cm = model.compile();
    let x = metropolis_sample(&cm, beta, sweeps, schedule, rng);
    cm.to_sample(&x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Long-run mean of the inverse temperature.
    pub beta_mean: f64,
    pub reversion: f64,
    pub volatility: f64,
    pub dt: f64,
    pub floor: f64,
    /// Starting value; `beta_mean` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_beta: Option<f64>,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            beta_mean: 10.0,
            reversion: 0.005,
            volatility: 0.3,
            dt: 1.0,
            floor: 0.05,
            initial_beta: None,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta_mean > 0.0
            && self.reversion >= 0.0
            && self.volatility >= 0.0
            && self.dt > 0.0
            && self.floor > 0.0
            && self.initial_beta.is_none_or(|b| b > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise parameters {self:?}")))
        }
    }

    pub fn frozen(beta: f64) -> Self {
        Self {
            beta_mean: beta,
            reversion: 0.0,
            volatility: 0.0,
            initial_beta: Some(beta),
            ..Self::default()
        }
    }
}

/// Ornstein-Uhlenbeck inverse temperature:
/// `b <- b + reversion * (mean - b) * dt + volatility * sqrt(dt) * xi`,
/// clamped below at `floor`.
#[derive(Clone, Debug)]
pub struct NoiseProcess {
    pub params: NoiseParams,
    pub current_beta: f64,
    rng: StreamRng,
}

impl NoiseProcess {
    pub fn new(params: NoiseParams, seed: u64) -> Self {
        let start = params.initial_beta.unwrap_or(params.beta_mean);
        Self {
            params,
            current_beta: start.max(params.floor),
            rng: substream(derive_seed(seed, NOISE_TAG), 0),
        }
    }

    pub fn advance(&mut self) -> f64 {
        let p = &self.params;
        let xi: f64 = self.rng.sample(StandardNormal);
        let next = self.current_beta
            + p.reversion * (p.beta_mean - self.current_beta) * p.dt
            + p.volatility * p.dt.sqrt() * xi;
        self.current_beta = next.max(p.floor);
        self.current_beta
    }

    pub fn advanced(&self) -> Self {
        let mut next = self.clone();
        next.advance();
        next
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealCallConfig {
    pub num_reads: usize,
    pub sweeps: usize,
    /// Independent random start (and RNG substream) for every read. When
    /// off, each read continues from the previous read's final state.
    pub reduce_intersample_correlation: bool,
    pub seed: u64,
    #[serde(default)]
    pub schedule: BetaSchedule,
}

impl Default for AnnealCallConfig {
    fn default() -> Self {
        Self {
            num_reads: 100,
            sweeps: 8,
            reduce_intersample_correlation: true,
            seed: 0,
            schedule: BetaSchedule::LinearRamp,
        }
    }
}

impl AnnealCallConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(Error::Config("num_reads and sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// A hardware-level model ready for sampling.
#[derive(Clone, Debug)]
pub struct Program {
    model: QuboModel,
    compiled: CompiledModel,
}

impl Program {
    pub fn new(model: QuboModel) -> Self {
        let compiled = model.compile();
        Self { model, compiled }
    }

    pub fn model(&self) -> &QuboModel {
        &self.model
    }

    pub fn compiled(&self) -> &CompiledModel {
        &self.compiled
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// Variable order of every state vector.
    pub variables: Vec<Var>,
    pub states: Vec<Vec<u8>>,
    pub energies: Vec<f64>,
    pub call_index: u64,
    pub beta_used: f64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample::qubo(self.variables.iter().copied().zip(self.states[i].iter().copied()))
    }

    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }
}

/// Draws `num_reads` reads at a fixed inverse temperature.
pub fn sample_at_beta(program: &Program, cfg: &AnnealCallConfig, call_index: u64, beta: f64) -> SampleBatch {
    let cm = program.compiled();
    let seed = derive_seed(cfg.seed, READ_TAG);
    let states: Vec<Vec<u8>> = if cfg.reduce_intersample_correlation {
        (0..cfg.num_reads as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, (call_index << 24) | r);
                metropolis_sample(cm, beta, cfg.sweeps, cfg.schedule, &mut rng)
            })
            .collect()
    } else {
        let mut rng = substream(seed, call_index << 24);
        let mut out: Vec<Vec<u8>> = Vec::with_capacity(cfg.num_reads);
        let mut state = metropolis_sample(cm, beta, cfg.sweeps, cfg.schedule, &mut rng);
        out.push(state.clone());
        for _ in 1..cfg.num_reads {
            metropolis_run(cm, &mut state, beta, cfg.sweeps, cfg.schedule, &mut rng);
            out.push(state.clone());
        }
        out
    };
    let energies = states.iter().map(|s| cm.energy(s)).collect();
    SampleBatch {
        variables: cm.vars.clone(),
        states,
        energies,
        call_index,
        beta_used: beta,
    }
}

/// One call: advance the noise once, then sample at the new temperature.
pub fn run_call(program: &Program, cfg: &AnnealCallConfig, call_index: u64, noise: &mut NoiseProcess) -> SampleBatch {
    let beta = noise.advance();
    sample_at_beta(program, cfg, call_index, beta)
}

/// A source of sample batches. The simulator is the only implementation; a
/// hardware client would implement the same trait.
pub trait SamplerBackend: Send {
    fn name(&self) -> &str;
    fn sample(&mut self, program: &Program, cfg: &AnnealCallConfig) -> Result<SampleBatch>;
}

#[derive(Clone, Debug)]
pub struct Simulator {
    noise: NoiseProcess,
    calls: u64,
}

impl Simulator {
    pub fn new(noise: NoiseParams, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            noise: NoiseProcess::new(noise, seed),
            calls: 0,
        })
    }

    pub fn beta(&self) -> f64 {
        self.noise.current_beta
    }
}

impl SamplerBackend for Simulator {
    fn name(&self) -> &str {
        "sim"
    }

    fn sample(&mut self, program: &Program, cfg: &AnnealCallConfig) -> Result<SampleBatch> {
        cfg.validate()?;
        let batch = run_call(program, cfg, self.calls, &mut self.noise);
        self.calls += 1;
        Ok(batch)
    }
}

pub const BACKENDS: &[&str] = &["sim"];

/// Resolves a backend by its configured name.
pub fn resolve_backend(name: &str, noise: NoiseParams, seed: u64) -> Result<Box<dyn SamplerBackend>> {
    match name {
        "sim" => Ok(Box::new(Simulator::new(noise, seed)?)),
        other => Err(Error::UnknownBackend(other.to_string())),
    }
}
