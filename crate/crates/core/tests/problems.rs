mod common;

use std::collections::BTreeSet;

use idlepi::problems::{
    gen_er_graph, gen_indicator, mc_qubo, mvc_qubo, GraphInstance, IndicatorKind, IndicatorSpec, PenaltyWeights,
};
use idlepi::topology::chimera;
use proptest::prelude::*;

use common::*;

const MC: PenaltyWeights = PenaltyWeights { a: 1.0, b: 2.0 };
const MVC: PenaltyWeights = PenaltyWeights { a: 2.0, b: 1.0 };

#[test]
fn er_graph_is_seeded_and_simple() {
    let a = gen_er_graph(30, 0.4, 5).unwrap();
    assert_eq!(a, gen_er_graph(30, 0.4, 5).unwrap());
    assert_ne!(a, gen_er_graph(30, 0.4, 6).unwrap());
    assert!(a.edges.iter().all(|&(u, v)| u < v && v < 30));
    assert_eq!(gen_er_graph(10, 0.0, 1).unwrap().edges.len(), 0);
    assert_eq!(gen_er_graph(10, 1.0, 1).unwrap().edges.len(), 45);
    assert!(gen_er_graph(10, 1.5, 1).is_err());
}

#[test]
fn edge_density_matches_on_average() {
    let n = 60u32;
    let pairs = (n * (n - 1) / 2) as f64;
    let mean: f64 = (0..20)
        .map(|s| gen_er_graph(n, 0.3, s).unwrap().edges.len() as f64 / pairs)
        .sum::<f64>()
        / 20.0;
    assert!((mean - 0.3).abs() < 0.01, "{mean}");
}

#[test]
fn clique_minimum_energy_is_minus_clique_size() {
    for seed in 0..20 {
        let g = gen_er_graph(7, 0.5, seed).unwrap();
        let (e, _) = argmin_sets(&mc_qubo(&g, MC).unwrap());
        let best = maximum_cliques(&g).iter().next().unwrap().len();
        assert_eq!(e, -(best as f64));
    }
}

#[test]
fn cover_energy_with_offset_is_cover_size() {
    for seed in 0..20 {
        let g = gen_er_graph(7, 0.5, seed).unwrap();
        let (m, offset) = mvc_qubo(&g, MVC).unwrap();
        assert_eq!(offset, 2.0 * g.edges.len() as f64);
        let (e, _) = argmin_sets(&m);
        let best = minimum_vertex_covers(&g).iter().next().unwrap().len();
        assert_eq!(e + offset, best as f64);
    }
}

#[test]
fn complete_and_empty_graphs() {
    let k5 = GraphInstance::new(5, (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v)))).unwrap();
    let (_, sets) = argmin_sets(&mc_qubo(&k5, MC).unwrap());
    assert_eq!(sets, BTreeSet::from([(0..5).collect()]));
    let empty = GraphInstance::new(4, []).unwrap();
    let (m, offset) = mvc_qubo(&empty, MVC).unwrap();
    assert_eq!(offset, 0.0);
    assert_eq!(argmin_sets(&m).1, BTreeSet::from([BTreeSet::new()]));
}

#[test]
fn graph_text_round_trip() {
    let g = gen_er_graph(12, 0.5, 3).unwrap();
    let back = GraphInstance::from_text(&g.to_text()).unwrap();
    assert_eq!((back.n, &back.edges), (g.n, &g.edges));
    assert!(GraphInstance::new(3, [(0, 3)]).is_err());
    assert!(GraphInstance::new(3, [(1, 1)]).is_err());
}

#[test]
fn indicators_cover_the_region() {
    let g = chimera(3, 4).unwrap();
    let used: BTreeSet<u32> = (0..24).collect();
    let region = g.idle_region(&used).unwrap();
    for kind in [IndicatorKind::Pi1, IndicatorKind::Pi2] {
        let spec = IndicatorSpec {
            kind,
            region: region.clone(),
            seed: 8,
        };
        let m = gen_indicator(&spec).unwrap();
        assert_eq!(m, gen_indicator(&spec).unwrap());
        assert_eq!(m.variables(), &region.nodes);
        assert_eq!(m.num_interactions(), region.couplers.len());
        let coeffs: Vec<f64> = m
            .linear_terms()
            .map(|(_, c)| c)
            .chain(m.quadratic_terms().map(|(_, c)| c))
            .collect();
        assert_eq!(coeffs.len(), region.nodes.len() + region.couplers.len());
        match kind {
            IndicatorKind::Pi1 => assert!(coeffs.iter().all(|c| c.abs() < 1.0)),
            IndicatorKind::Pi2 => assert!(coeffs.iter().all(|c| c.abs() == 1.0)),
        }
    }
}

#[test]
fn pi2_weights_are_balanced() {
    let g = chimera(16, 4).unwrap();
    let region = g.idle_region(&BTreeSet::new()).unwrap();
    let m = gen_indicator(&IndicatorSpec {
        kind: IndicatorKind::Pi2,
        region,
        seed: 1,
    })
    .unwrap();
    let coeffs: Vec<f64> = m
        .linear_terms()
        .map(|(_, c)| c)
        .chain(m.quadratic_terms().map(|(_, c)| c))
        .collect();
    let n = coeffs.len() as f64;
    let plus = coeffs.iter().filter(|&&c| c > 0.0).count() as f64;
    // binomial(n, 1/2), four standard deviations
    assert!((plus - n / 2.0).abs() < 4.0 * (n / 4.0).sqrt(), "{plus} of {n}");
}

#[test]
fn empty_region_is_rejected() {
    let g = chimera(1, 4).unwrap();
    let region = g.induced(BTreeSet::new());
    assert!(gen_indicator(&IndicatorSpec {
        kind: IndicatorKind::Pi1,
        region,
        seed: 0
    })
    .is_err());
}

proptest! {
    #[test]
    fn encodings_match_brute_force(n in 1u32..8, density in 0.0f64..1.0, seed in 0u64..10_000) {
        let g = gen_er_graph(n, density, seed).unwrap();
        prop_assert_eq!(argmin_sets(&mc_qubo(&g, MC).unwrap()).1, maximum_cliques(&g));
        prop_assert_eq!(argmin_sets(&mvc_qubo(&g, MVC).unwrap().0).1, minimum_vertex_covers(&g));
    }
}
