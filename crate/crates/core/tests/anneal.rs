mod common;

use idlepi::anneal::{
    metropolis_sample, resolve_backend, run_call, sample_at_beta, AnnealCallConfig, BetaSchedule, NoiseParams,
    NoiseProcess, Program, Simulator,
};
use idlepi::qubo::Var;
use idlepi::rng::substream;
use idlepi::Error;

use common::*;

fn program(n: u32, seed: u64) -> Program {
    let vars: Vec<Var> = (0..n).collect();
    Program::new(random_model(&vars, 0.6, seed))
}

#[test]
fn beta_zero_is_uniform() {
    let vars: Vec<Var> = (0..4).collect();
    let cm = random_model(&vars, 1.0, 2).compile();
    let mut counts = [0usize; 16];
    let mut rng = substream(1, 1);
    for _ in 0..16_000 {
        let x = metropolis_sample(&cm, 0.0, 3, BetaSchedule::Constant, &mut rng);
        counts[x.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>()] += 1;
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
    // 15 degrees of freedom, alpha 0.01
    assert!(chi2 < 30.578, "{chi2}");
}

#[test]
fn boltzmann_at_moderate_beta() {
    let vars: Vec<Var> = (0..3).collect();
    let m = random_model(&vars, 1.0, 5);
    let cm = m.compile();
    let beta = 1.5;
    let weights: Vec<f64> = (0..8u32)
        .map(|b| {
            let x: Vec<u8> = (0..3).map(|i| ((b >> i) & 1) as u8).collect();
            (-beta * cm.energy(&x)).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let mut counts = [0usize; 8];
    let mut rng = substream(2, 2);
    let draws = 20_000;
    for _ in 0..draws {
        let x = metropolis_sample(&cm, beta, 20, BetaSchedule::Constant, &mut rng);
        counts[x.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>()] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, w)| {
            let e = draws as f64 * w / z;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 7 degrees of freedom, alpha 0.001
    assert!(chi2 < 24.322, "{chi2}");
}

#[test]
fn noise_process_statistics() {
    let params = NoiseParams {
        beta_mean: 5.0,
        reversion: 0.1,
        volatility: 0.2,
        dt: 1.0,
        floor: 0.05,
        initial_beta: None,
    };
    let mut p = NoiseProcess::new(params, 3);
    let xs: Vec<f64> = (0..50_000).map(|_| p.advance()).collect();
    // stationary OU: mean mu, variance sigma^2 / (2 theta - theta^2) for the discrete recursion
    let var_want = 0.04 / (0.2 - 0.01);
    let m = mean(&xs);
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!((m - 5.0).abs() < 0.05, "{m}");
    assert!((v / var_want - 1.0).abs() < 0.1, "{v} vs {var_want}");
}

#[test]
fn frozen_noise_and_floor() {
    let mut p = NoiseProcess::new(NoiseParams::frozen(2.5), 0);
    assert!((0..100).all(|_| p.advance() == 2.5));
    let params = NoiseParams {
        beta_mean: 0.1,
        reversion: 0.0,
        volatility: 5.0,
        ..NoiseParams::default()
    };
    let mut p = NoiseProcess::new(params, 0);
    assert!((0..1000).all(|_| p.advance() >= 0.05));
    let bad = NoiseParams {
        floor: 0.0,
        ..NoiseParams::default()
    };
    assert!(Simulator::new(bad, 0).is_err());
}

#[test]
fn calls_are_reproducible_and_distinct() {
    let prog = program(10, 1);
    let cfg = AnnealCallConfig {
        num_reads: 8,
        seed: 4,
        ..AnnealCallConfig::default()
    };
    let a = sample_at_beta(&prog, &cfg, 3, 2.0);
    assert_eq!(a, sample_at_beta(&prog, &cfg, 3, 2.0));
    assert_ne!(a.states, sample_at_beta(&prog, &cfg, 4, 2.0).states);
    assert_eq!(a.len(), 8);
    for i in 0..a.len() {
        assert!((prog.model().energy(&a.sample(i)).unwrap() - a.energies[i]).abs() < 1e-12);
    }
    let chained = AnnealCallConfig {
        reduce_intersample_correlation: false,
        ..cfg.clone()
    };
    let b = sample_at_beta(&prog, &chained, 3, 2.0);
    assert_eq!(b, sample_at_beta(&prog, &chained, 3, 2.0));
}

#[test]
fn run_call_advances_noise_once() {
    let prog = program(6, 2);
    let cfg = AnnealCallConfig {
        num_reads: 2,
        ..AnnealCallConfig::default()
    };
    let mut noise = NoiseProcess::new(NoiseParams::default(), 9);
    let expected = noise.advanced().current_beta;
    let batch = run_call(&prog, &cfg, 0, &mut noise);
    assert_eq!(batch.beta_used, expected);
    assert_eq!(noise.current_beta, expected);
}

#[test]
fn backend_resolution() {
    let mut sim = resolve_backend("sim", NoiseParams::default(), 1).unwrap();
    assert_eq!(sim.name(), "sim");
    let prog = program(4, 3);
    let cfg = AnnealCallConfig {
        num_reads: 3,
        ..AnnealCallConfig::default()
    };
    let first = sim.sample(&prog, &cfg).unwrap();
    let second = sim.sample(&prog, &cfg).unwrap();
    assert_eq!((first.call_index, second.call_index), (0, 1));
    assert!(matches!(
        resolve_backend("qpu", NoiseParams::default(), 1),
        Err(Error::UnknownBackend(_))
    ));
    let zero = AnnealCallConfig { num_reads: 0, ..cfg };
    assert!(sim.sample(&prog, &zero).is_err());
}
