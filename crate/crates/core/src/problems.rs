//! Problem instances and their QUBO encodings, plus indicator generation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{QuboModel, Var};
use crate::rng::substream;
use crate::textio::{parse_field, records};
use crate::topology::Region;

/// An undirected simple graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphInstance {
    pub n: u32,
    pub edges: BTreeSet<(u32, u32)>,
    pub density: f64,
    pub seed: u64,
}

impl GraphInstance {
    pub fn new(n: u32, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v || u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) invalid for {n} vertices"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let pairs = f64::from(n) * f64::from(n.saturating_sub(1)) / 2.0;
        let density = if pairs > 0.0 { set.len() as f64 / pairs } else { 0.0 };
        Ok(Self {
            n,
            edges: set,
            density,
            seed: 0,
        })
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    /// Non-edges of the graph, in lexicographic order.
    pub fn complement_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n).flat_map(move |u| {
            (u + 1..self.n)
                .filter(move |&v| !self.edges.contains(&(u, v)))
                .map(move |v| (u, v))
        })
    }

    /// Edge-list text: `n <count>` header, then `u v` per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for (u, v) in &self.edges {
            writeln!(s, "{u} {v}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (line, rec) in records(text) {
            let f: Vec<&str> = rec.split_whitespace().collect();
            match f.as_slice() {
                ["n", c] if n.is_none() => n = Some(parse_field::<u32>(c, line)?),
                [u, v] if n.is_some() => edges.push((parse_field::<u32>(u, line)?, parse_field::<u32>(v, line)?)),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unexpected record `{rec}`"),
                    })
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            msg: "missing `n <count>` header".into(),
        })?;
        GraphInstance::new(n, edges)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// G(n, p): every pair included independently with probability `density`.
pub fn gen_er_graph(n: u32, density: f64, seed: u64) -> Result<GraphInstance> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} outside [0, 1]")));
    }
    let mut rng = substream(seed, 0);
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                edges.insert((u, v));
            }
        }
    }
    Ok(GraphInstance {
        n,
        edges,
        density,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub a: f64,
    pub b: f64,
}

impl PenaltyWeights {
    pub const MAX_CLIQUE: PenaltyWeights = PenaltyWeights { a: 1.0, b: 2.0 };
    pub const VERTEX_COVER: PenaltyWeights = PenaltyWeights { a: 2.0, b: 1.0 };
}

/// `-A * sum_v x_v + B * sum_{(u,v) not in E} x_u x_v`, requires `0 < A < B`.
pub fn mc_qubo(g: &GraphInstance, w: PenaltyWeights) -> Result<QuboModel> {
    if !(w.a > 0.0 && w.a < w.b) {
        return Err(Error::InvalidArgument(format!(
            "max-clique weights need 0 < A < B (A={}, B={})",
            w.a, w.b
        )));
    }
    let mut m = QuboModel::with_variables(0..g.n);
    for v in 0..g.n {
        m.add_linear(v, -w.a)?;
    }
    for (u, v) in g.complement_edges() {
        m.add_quadratic(u, v, w.b)?;
    }
    Ok(m)
}

/// `A * sum_{(u,v) in E} (1 - x_u)(1 - x_v) + B * sum_v x_v`, requires
/// `0 < B < A`. Returns the expanded model and its constant `A * |E|`.
pub fn mvc_qubo(g: &GraphInstance, w: PenaltyWeights) -> Result<(QuboModel, f64)> {
    if !(w.b > 0.0 && w.b < w.a) {
        return Err(Error::InvalidArgument(format!(
            "vertex-cover weights need 0 < B < A (A={}, B={})",
            w.a, w.b
        )));
    }
    let mut m = QuboModel::with_variables(0..g.n);
    for v in 0..g.n {
        m.add_linear(v, w.b)?;
    }
    for &(u, v) in &g.edges {
        m.add_linear(u, -w.a)?;
        m.add_linear(v, -w.a)?;
        m.add_quadratic(u, v, w.a)?;
    }
    Ok((m, w.a * g.edges.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndicatorKind {
    /// Weights uniform in the open interval (-1, 1).
    #[serde(rename = "PI1")]
    Pi1,
    /// Weights -1 or +1 with equal probability.
    #[serde(rename = "PI2")]
    Pi2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSpec {
    pub kind: IndicatorKind,
    pub region: Region,
    pub seed: u64,
}

/// One random weight per region node (linear) and per region coupler
/// (quadratic). Coefficient `i` (nodes in ascending order, then couplers in
/// ascending order) is drawn from its own substream `i` of `seed`.
pub fn gen_indicator(spec: &IndicatorSpec) -> Result<QuboModel> {
    if spec.region.nodes.is_empty() {
        return Err(Error::EmptyRegion("indicator region has no qubits".into()));
    }
    let draw = |index: u64| -> f64 {
        let mut rng = substream(spec.seed, index);
        match spec.kind {
            IndicatorKind::Pi1 => loop {
                let x: f64 = rng.random_range(-1.0..1.0);
                if x > -1.0 && x != 0.0 {
                    break x;
                }
            },
            IndicatorKind::Pi2 => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    };
    let mut m = QuboModel::with_variables(spec.region.nodes.iter().copied());
    let mut index = 0u64;
    for &v in &spec.region.nodes {
        m.add_linear(v, draw(index))?;
        index += 1;
    }
    for &(u, v) in &spec.region.couplers {
        m.add_quadratic(u as Var, v as Var, draw(index))?;
        index += 1;
    }
    Ok(m)
}
