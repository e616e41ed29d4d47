use std::collections::BTreeSet;

use idlepi::topology::{chimera, chimera_coord, chimera_index, import_graph, HardwareGraph, TopologyKind};
use idlepi::Error;
use proptest::prelude::*;

#[test]
fn chimera_counts() {
    for m in 1..=16u32 {
        let g = chimera(m, 4).unwrap();
        let m = m as usize;
        assert_eq!(g.num_nodes(), 8 * m * m);
        // 16 intra-cell couplers per cell, 4 per neighbouring cell pair in each direction
        assert_eq!(g.num_couplers(), 16 * m * m + 2 * 4 * m * (m - 1));
        assert_eq!(g.kind(), TopologyKind::Chimera { m: m as u32, t: 4 });
    }
    assert!(chimera(0, 4).is_err());
}

#[test]
fn degrees_are_bounded_by_six() {
    let g = chimera(4, 4).unwrap();
    assert!(g.nodes().iter().all(|&q| (4..=6).contains(&g.degree(q))));
    assert_eq!(g.nodes().iter().filter(|&&q| g.degree(q) == 6).count(), 2 * 4 * 2 * 4);
}

#[test]
fn defects_remove_qubits_and_couplers() {
    let g = chimera(2, 4).unwrap();
    let defects: BTreeSet<u32> = [0, 5].into();
    let d = g.apply_defects(&defects).unwrap();
    assert_eq!(d.num_nodes(), 30);
    assert!(d
        .couplers()
        .iter()
        .all(|(u, v)| !defects.contains(u) && !defects.contains(v)));
    assert_eq!(d.defects(), &defects);
    assert!(g.apply_defects(&[999].into()).is_err());
}

#[test]
fn idle_region_is_the_complement() {
    let g = chimera(2, 4).unwrap();
    let used: BTreeSet<u32> = (0..8).collect();
    let r = g.idle_region(&used).unwrap();
    assert_eq!(r.nodes.len(), 24);
    assert!(r.nodes.is_disjoint(&used));
    assert!(r
        .couplers
        .iter()
        .all(|(u, v)| r.nodes.contains(u) && r.nodes.contains(v)));
    let all: BTreeSet<u32> = g.nodes().clone();
    assert!(matches!(g.idle_region(&all), Err(Error::EmptyRegion(_))));
    assert!(matches!(g.idle_region(&[999].into()), Err(Error::UnknownNode(999))));
}

#[test]
fn graph_file_round_trip_and_import() {
    let g = chimera(3, 4).unwrap().apply_defects(&[7].into()).unwrap();
    let back = HardwareGraph::from_text(&g.to_text()).unwrap();
    assert_eq!(back.nodes(), g.nodes());
    assert_eq!(back.couplers(), g.couplers());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    g.write_file(&path).unwrap();
    assert_eq!(import_graph(&path).unwrap().couplers(), g.couplers());
    assert!(HardwareGraph::from_text("0 1\n1 oops\n").is_err());
}

proptest! {
    #[test]
    fn index_coordinate_bijection(m in 1u32..12, q in 0u32..10_000) {
        let q = q % (8 * m * m);
        prop_assert_eq!(chimera_index(m, 4, chimera_coord(m, 4, q)), q);
    }

    #[test]
    fn couplers_connect_existing_nodes(m in 1u32..6) {
        let g = chimera(m, 4).unwrap();
        for &(u, v) in g.couplers() {
            prop_assert!(u < v && g.nodes().contains(&u) && g.nodes().contains(&v));
        }
    }
}
