//! Hardware connectivity graphs.
//!
//! Chimera qubits are indexed as `2*t*(m*row + col) + (t*side + k)` where
//! `side = 0` is the vertical half of a cell and `side = 1` the horizontal
//! half. Vertical qubits couple to the same position in the row-adjacent
//! cells, horizontal qubits to the same position in the column-adjacent cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::Var;
use crate::textio::{parse_field, records};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologyKind {
    Chimera { m: u32, t: u32 },
    Imported,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardwareGraph {
    nodes: BTreeSet<Var>,
    couplers: BTreeSet<(Var, Var)>,
    kind: TopologyKind,
    defects: BTreeSet<Var>,
}

/// Position of a Chimera qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChimeraCoord {
    pub row: u32,
    pub col: u32,
    pub side: u32,
    pub k: u32,
}

pub fn chimera_index(m: u32, t: u32, c: ChimeraCoord) -> Var {
    2 * t * (m * c.row + c.col) + (t * c.side + c.k)
}

pub fn chimera_coord(m: u32, t: u32, q: Var) -> ChimeraCoord {
    let cell = q / (2 * t);
    let within = q % (2 * t);
    ChimeraCoord {
        row: cell / m,
        col: cell % m,
        side: within / t,
        k: within % t,
    }
}

fn edge(u: Var, v: Var) -> (Var, Var) {
    (u.min(v), u.max(v))
}

/// `m x m` grid of `K_{t,t}` cells.
pub fn chimera(m: u32, t: u32) -> Result<HardwareGraph> {
    if m == 0 || t == 0 {
        return Err(Error::InvalidArgument(format!(
            "chimera dimensions must be positive (m={m}, t={t})"
        )));
    }
    let idx = |row, col, side, k| chimera_index(m, t, ChimeraCoord { row, col, side, k });
    let nodes: BTreeSet<Var> = (0..2 * t * m * m).collect();
    let mut couplers = BTreeSet::new();
    for row in 0..m {
        for col in 0..m {
            for a in 0..t {
                for b in 0..t {
                    couplers.insert(edge(idx(row, col, 0, a), idx(row, col, 1, b)));
                }
                if row + 1 < m {
                    couplers.insert(edge(idx(row, col, 0, a), idx(row + 1, col, 0, a)));
                }
                if col + 1 < m {
                    couplers.insert(edge(idx(row, col, 1, a), idx(row, col + 1, 1, a)));
                }
            }
        }
    }
    Ok(HardwareGraph {
        nodes,
        couplers,
        kind: TopologyKind::Chimera { m, t },
        defects: BTreeSet::new(),
    })
}

impl HardwareGraph {
    /// Builds an imported graph, validating coupler endpoints.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = Var>,
        couplers: impl IntoIterator<Item = (Var, Var)>,
    ) -> Result<HardwareGraph> {
        let nodes: BTreeSet<Var> = nodes.into_iter().collect();
        let mut set = BTreeSet::new();
        for (u, v) in couplers {
            if u == v {
                return Err(Error::InvalidArgument(format!("self-coupler on {u}")));
            }
            if !nodes.contains(&u) || !nodes.contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "coupler ({u}, {v}) references an unknown node"
                )));
            }
            set.insert(edge(u, v));
        }
        Ok(HardwareGraph {
            nodes,
            couplers: set,
            kind: TopologyKind::Imported,
            defects: BTreeSet::new(),
        })
    }

    pub fn nodes(&self) -> &BTreeSet<Var> {
        &self.nodes
    }

    pub fn couplers(&self) -> &BTreeSet<(Var, Var)> {
        &self.couplers
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn defects(&self) -> &BTreeSet<Var> {
        &self.defects
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_couplers(&self) -> usize {
        self.couplers.len()
    }

    pub fn has_coupler(&self, u: Var, v: Var) -> bool {
        self.couplers.contains(&edge(u, v))
    }

    pub fn adjacency(&self) -> BTreeMap<Var, Vec<Var>> {
        let mut adj: BTreeMap<Var, Vec<Var>> = self.nodes.iter().map(|&v| (v, Vec::new())).collect();
        for &(u, v) in &self.couplers {
            adj.get_mut(&u).expect("valid coupler").push(v);
            adj.get_mut(&v).expect("valid coupler").push(u);
        }
        adj
    }

    pub fn degree(&self, v: Var) -> usize {
        self.couplers.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// Removes the given qubits and every coupler touching them.
    pub fn apply_defects(&self, defects: &BTreeSet<Var>) -> Result<HardwareGraph> {
        if let Some(&bad) = defects.iter().find(|d| !self.nodes.contains(d)) {
            return Err(Error::UnknownNode(bad));
        }
        let mut out = self.clone();
        out.nodes.retain(|v| !defects.contains(v));
        out.couplers
            .retain(|(u, v)| !defects.contains(u) && !defects.contains(v));
        out.defects.extend(defects.iter().copied());
        Ok(out)
    }

    /// The induced subgraph on all nodes not in `used`.
    pub fn idle_region(&self, used: &BTreeSet<Var>) -> Result<Region> {
        if let Some(&bad) = used.iter().find(|d| !self.nodes.contains(d)) {
            return Err(Error::UnknownNode(bad));
        }
        let nodes: BTreeSet<Var> = self.nodes.difference(used).copied().collect();
        if nodes.is_empty() {
            return Err(Error::EmptyRegion("every hardware qubit is in use".into()));
        }
        Ok(self.induced(nodes))
    }

    pub fn induced(&self, nodes: BTreeSet<Var>) -> Region {
        let couplers = self
            .couplers
            .iter()
            .filter(|(u, v)| nodes.contains(u) && nodes.contains(v))
            .copied()
            .collect();
        Region { nodes, couplers }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "hw {}", self.nodes.len()).unwrap();
        if let TopologyKind::Chimera { m, t } = self.kind {
            writeln!(s, "topology chimera {m} {t}").unwrap();
        }
        for v in &self.nodes {
            writeln!(s, "n {v}").unwrap();
        }
        for (u, v) in &self.couplers {
            writeln!(s, "c {u} {v}").unwrap();
        }
        for d in &self.defects {
            writeln!(s, "d {d}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<HardwareGraph> {
        let mut declared: Option<(usize, usize)> = None;
        let mut kind = TopologyKind::Imported;
        let mut nodes = BTreeSet::new();
        let mut couplers = Vec::new();
        let mut defects = BTreeSet::new();
        for (line, rec) in records(text) {
            let f: Vec<&str> = rec.split_whitespace().collect();
            let bad = || Error::Parse {
                line,
                msg: format!("malformed record `{rec}`"),
            };
            match (f[0], f.len()) {
                ("hw", 2) => declared = Some((parse_field(f[1], line)?, line)),
                ("topology", 4) if f[1] == "chimera" => {
                    kind = TopologyKind::Chimera {
                        m: parse_field(f[2], line)?,
                        t: parse_field(f[3], line)?,
                    }
                }
                ("n", 2) => {
                    nodes.insert(parse_field::<Var>(f[1], line)?);
                }
                ("c", 3) => couplers.push((line, parse_field::<Var>(f[1], line)?, parse_field::<Var>(f[2], line)?)),
                ("d", 2) => {
                    defects.insert(parse_field::<Var>(f[1], line)?);
                }
                _ => return Err(bad()),
            }
        }
        let Some((count, hw_line)) = declared else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `hw <node_count>` header".into(),
            });
        };
        if count != nodes.len() {
            return Err(Error::Parse {
                line: hw_line,
                msg: format!("header declares {count} nodes, found {}", nodes.len()),
            });
        }
        let mut set = BTreeSet::new();
        for (line, u, v) in couplers {
            if u == v || !nodes.contains(&u) || !nodes.contains(&v) {
                return Err(Error::Parse {
                    line,
                    msg: format!("coupler ({u}, {v}) references an unknown node"),
                });
            }
            set.insert(edge(u, v));
        }
        if let Some(d) = defects.intersection(&nodes).next() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("defect {d} is also listed as a node"),
            });
        }
        Ok(HardwareGraph {
            nodes,
            couplers: set,
            kind,
            defects,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<HardwareGraph> {
        HardwareGraph::from_text(&std::fs::read_to_string(path)?)
    }
}

pub fn import_graph(path: impl AsRef<Path>) -> Result<HardwareGraph> {
    HardwareGraph::read_file(path)
}

/// An induced subgraph of a hardware graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub nodes: BTreeSet<Var>,
    pub couplers: BTreeSet<(Var, Var)>,
}

impl Region {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
