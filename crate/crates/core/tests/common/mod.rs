//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use idlepi::problems::GraphInstance;
use idlepi::qubo::Var;
use idlepi::rng::substream;
use idlepi::{QuboModel, Sample};
use rand::Rng;

/// Every 0/1 assignment of `vars`, in binary counting order.
pub fn assignments(vars: &[Var]) -> impl Iterator<Item = Sample> + '_ {
    assert!(vars.len() <= 22);
    (0u64..(1 << vars.len()))
        .map(move |bits| Sample::qubo(vars.iter().enumerate().map(|(i, &v)| (v, ((bits >> i) & 1) as u8))))
}

/// Minimum energy and the set of minimizers (as sets of variables at 1).
pub fn argmin_sets(m: &QuboModel) -> (f64, BTreeSet<BTreeSet<Var>>) {
    let vars: Vec<Var> = m.variables().iter().copied().collect();
    let scored: Vec<(f64, Sample)> = assignments(&vars).map(|s| (m.energy(&s).unwrap(), s)).collect();
    let emin = scored.iter().map(|(e, _)| *e).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * emin.abs().max(1.0);
    let sets = scored
        .into_iter()
        .filter(|(e, _)| *e <= emin + tol)
        .map(|(_, s)| ones(&s))
        .collect();
    (emin, sets)
}

pub fn ones(s: &Sample) -> BTreeSet<Var> {
    s.values.iter().filter(|(_, &x)| x == 1).map(|(&v, _)| v).collect()
}

fn subsets(n: u32) -> impl Iterator<Item = BTreeSet<u32>> {
    (0u32..(1 << n)).map(move |bits| (0..n).filter(|i| bits >> i & 1 == 1).collect())
}

fn is_clique(g: &GraphInstance, s: &BTreeSet<u32>) -> bool {
    s.iter().all(|&u| s.iter().all(|&v| u >= v || g.has_edge(u, v)))
}

fn is_cover(g: &GraphInstance, s: &BTreeSet<u32>) -> bool {
    g.edges.iter().all(|(u, v)| s.contains(u) || s.contains(v))
}

/// All maximum cliques, found by enumerating vertex subsets.
pub fn maximum_cliques(g: &GraphInstance) -> BTreeSet<BTreeSet<u32>> {
    let cliques: Vec<BTreeSet<u32>> = subsets(g.n).filter(|s| is_clique(g, s)).collect();
    let best = cliques.iter().map(BTreeSet::len).max().unwrap_or(0);
    cliques.into_iter().filter(|s| s.len() == best).collect()
}

/// All minimum vertex covers, found by enumerating vertex subsets.
pub fn minimum_vertex_covers(g: &GraphInstance) -> BTreeSet<BTreeSet<u32>> {
    let covers: Vec<BTreeSet<u32>> = subsets(g.n).filter(|s| is_cover(g, s)).collect();
    let best = covers.iter().map(BTreeSet::len).min().unwrap_or(0);
    covers.into_iter().filter(|s| s.len() == best).collect()
}

/// Random model on `vars` with coefficients uniform in `(-1, 1)`.
pub fn random_model(vars: &[Var], density: f64, seed: u64) -> QuboModel {
    let mut rng = substream(seed, 0x7e57);
    let mut m = QuboModel::with_variables(vars.iter().copied());
    for &v in vars {
        m.add_linear(v, rng.random_range(-1.0..1.0)).unwrap();
    }
    for (i, &u) in vars.iter().enumerate() {
        for &v in &vars[i + 1..] {
            if rng.random::<f64>() < density {
                m.add_quadratic(u, v, rng.random_range(-1.0..1.0)).unwrap();
            }
        }
    }
    m
}

/// Random model with integer coefficients in `-2..=2`: any excited state is
/// at least 1 above the ground energy.
pub fn random_integer_model(vars: &[Var], density: f64, seed: u64) -> QuboModel {
    let mut rng = substream(seed, 0x1a7);
    let mut m = QuboModel::with_variables(vars.iter().copied());
    for &v in vars {
        m.add_linear(v, rng.random_range(-2..=2) as f64).unwrap();
    }
    for (i, &u) in vars.iter().enumerate() {
        for &v in &vars[i + 1..] {
            if rng.random::<f64>() < density {
                m.add_quadratic(u, v, rng.random_range(-2..=2) as f64).unwrap();
            }
        }
    }
    m
}

/// Maximum absolute coefficient, computed independently of the library.
pub fn max_abs(m: &QuboModel) -> f64 {
    m.linear_terms()
        .map(|(_, c)| c.abs())
        .chain(m.quadratic_terms().map(|(_, c)| c.abs()))
        .fold(0.0, f64::max)
}

/// Restriction of a sample to `vars`.
pub fn project(s: &Sample, vars: &BTreeSet<Var>) -> Sample {
    Sample {
        values: s
            .values
            .iter()
            .filter(|(v, _)| vars.contains(v))
            .map(|(&v, &x)| (v, x))
            .collect(),
        frame: s.frame,
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation, written out directly.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Standard-normal draws from a seeded stream.
pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 0x6e);
    (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}

pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    normals(n, seed)
        .into_iter()
        .scan(0.0, |s, e| {
            *s += e;
            Some(*s)
        })
        .collect()
}

pub fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    normals(n, seed)
        .into_iter()
        .scan(0.0, |s, e| {
            *s = phi * *s + e;
            Some(*s)
        })
        .collect()
}
