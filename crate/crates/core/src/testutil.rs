//! Brute-force oracles for unit tests.

use std::collections::BTreeSet;

use rand::Rng;

use crate::qubo::{QuboModel, Sample, Var};
use crate::rng::substream;

pub fn all_assignments(vars: &BTreeSet<Var>) -> Vec<Sample> {
    let vars: Vec<Var> = vars.iter().copied().collect();
    assert!(vars.len() <= 20);
    (0u32..(1 << vars.len()))
        .map(|bits| Sample::qubo(vars.iter().enumerate().map(|(i, &v)| (v, ((bits >> i) & 1) as u8))))
        .collect()
}

/// Minimum energy and every minimizing assignment (ties within 1e-9).
pub fn brute_force_min(m: &QuboModel) -> (f64, Vec<Sample>) {
    let all = all_assignments(m.variables());
    let energies: Vec<f64> = all.iter().map(|s| m.energy(s).unwrap()).collect();
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * emin.abs().max(1.0);
    let argmins = all
        .into_iter()
        .zip(energies)
        .filter(|(_, e)| *e <= emin + tol)
        .map(|(s, _)| s)
        .collect();
    (emin, argmins)
}

/// Random model on variables 0..n with uniform(-1,1) coefficients; each pair
/// present with probability `density`.
pub fn random_model(n: u32, density: f64, seed: u64) -> QuboModel {
    let mut rng = substream(seed, 0xabc);
    let mut m = QuboModel::with_variables(0..n);
    for v in 0..n {
        m.add_linear(v, rng.random_range(-1.0..1.0)).unwrap();
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                m.add_quadratic(u, v, rng.random_range(-1.0..1.0)).unwrap();
            }
        }
    }
    m
}

/// Random model with integer coefficients in `-2..=2`, so every excited
/// state lies at least 1 above the ground energy.
pub fn random_integer_model(n: u32, density: f64, seed: u64) -> QuboModel {
    let mut rng = substream(seed, 0xdef);
    let mut m = QuboModel::with_variables(0..n);
    for v in 0..n {
        m.add_linear(v, rng.random_range(-2..=2) as f64).unwrap();
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                m.add_quadratic(u, v, rng.random_range(-2..=2) as f64).unwrap();
            }
        }
    }
    m
}
