//! Minor embeddings: clique construction on Chimera, validation, chain
//! strength, coefficient distribution over chains, and majority-vote
//! unembedding.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{CompiledModel, QuboModel, Sample, Var};
use crate::textio::{parse_field, records};
use crate::topology::{chimera_index, ChimeraCoord, HardwareGraph, TopologyKind};

/// Logical variable -> chain of physical qubits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub chains: BTreeMap<Var, Vec<Var>>,
}

impl Embedding {
    pub fn new(chains: BTreeMap<Var, Vec<Var>>) -> Self {
        Self { chains }
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn chain(&self, v: Var) -> Option<&[Var]> {
        self.chains.get(&v).map(Vec::as_slice)
    }

    /// Every physical qubit used by some chain.
    pub fn footprint(&self) -> BTreeSet<Var> {
        self.chains.values().flatten().copied().collect()
    }

    pub fn max_chain_length(&self) -> usize {
        self.chains.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Keeps only the chains of the given logical variables.
    pub fn restrict(&self, vars: &BTreeSet<Var>) -> Embedding {
        Embedding {
            chains: self
                .chains
                .iter()
                .filter(|(v, _)| vars.contains(v))
                .map(|(&v, c)| (v, c.clone()))
                .collect(),
        }
    }

    /// `em <k>` header, then `chain <logical_id> <q1> <q2> ...` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("em {}\n", self.chains.len());
        for (v, chain) in &self.chains {
            write!(s, "chain {v}").unwrap();
            for q in chain {
                write!(s, " {q}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Embedding> {
        let mut declared = None;
        let mut chains = BTreeMap::new();
        for (line, rec) in records(text) {
            let f: Vec<&str> = rec.split_whitespace().collect();
            match f.as_slice() {
                ["em", k] if declared.is_none() => declared = Some((parse_field::<usize>(k, line)?, line)),
                ["chain", v, qs @ ..] if declared.is_some() && !qs.is_empty() => {
                    let v: Var = parse_field(v, line)?;
                    let qs = qs
                        .iter()
                        .map(|q| parse_field::<Var>(q, line))
                        .collect::<Result<Vec<_>>>()?;
                    if chains.insert(v, qs).is_some() {
                        return Err(Error::Parse {
                            line,
                            msg: format!("duplicate chain for variable {v}"),
                        });
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unexpected record `{rec}`"),
                    })
                }
            }
        }
        let (k, line) = declared.ok_or(Error::Parse {
            line: 1,
            msg: "missing `em <k>` header".into(),
        })?;
        if k != chains.len() {
            return Err(Error::Parse {
                line,
                msg: format!("header declares {k} chains, found {}", chains.len()),
            });
        }
        Ok(Embedding { chains })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Embedding> {
        Embedding::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Number of logical variables a clique construction on `chimera(m, t)` can
/// hold.
pub fn chimera_clique_capacity(m: u32, t: u32) -> usize {
    (m * t) as usize
}

/// Clique embedding of `K_k` on a defect-free Chimera graph.
///
/// Uses the smallest `s x s` corner block (`s = ceil(k / t)`) starting at
/// cell `(0, 0)`; see [`chimera_clique_embedding_at`].
pub fn chimera_clique_embedding(g: &HardwareGraph, k: usize) -> Result<Embedding> {
    let TopologyKind::Chimera { m, t } = g.kind() else {
        return Err(Error::InvalidArgument(
            "clique construction needs a Chimera graph".into(),
        ));
    };
    let cap = chimera_clique_capacity(m, t);
    if k > cap {
        return Err(Error::Capacity { requested: k, max: cap });
    }
    let size = (k as u32).div_ceil(t).max(1);
    chimera_clique_embedding_at(g, k, 0, 0, size)
}

/// Clique embedding of `K_k` inside the `size x size` block of cells whose
/// top-left cell is `(row0, col0)`.
///
/// Variable `t*i + j` owns the horizontal qubits `j` of block row `i`, block
/// columns `0..=i`, and the vertical qubits `j` of block column `i`, block
/// rows `i..size`. The two segments meet in diagonal cell `(i, i)`, giving
/// chains of length `size + 1`. Variables `(i, a)` and `(i', b)` with
/// `i < i'` meet in cell `(i', i)`; variables sharing `i` meet in `(i, i)`.
pub fn chimera_clique_embedding_at(g: &HardwareGraph, k: usize, row0: u32, col0: u32, size: u32) -> Result<Embedding> {
    let TopologyKind::Chimera { m, t } = g.kind() else {
        return Err(Error::InvalidArgument(
            "clique construction needs a Chimera graph".into(),
        ));
    };
    if !g.defects().is_empty() {
        return Err(Error::InvalidArgument(
            "clique construction needs a defect-free graph; import an embedding instead".into(),
        ));
    }
    if row0 + size > m || col0 + size > m {
        return Err(Error::InvalidArgument(format!(
            "block ({row0}, {col0}) of size {size} does not fit in chimera({m})"
        )));
    }
    let cap = chimera_clique_capacity(size, t);
    if k > cap {
        return Err(Error::Capacity { requested: k, max: cap });
    }
    let q = |row: u32, col: u32, side: u32, kk: u32| {
        chimera_index(
            m,
            t,
            ChimeraCoord {
                row: row0 + row,
                col: col0 + col,
                side,
                k: kk,
            },
        )
    };
    let mut chains = BTreeMap::new();
    if k == 1 {
        chains.insert(0, vec![q(0, 0, 0, 0)]);
        return Ok(Embedding { chains });
    }
    for var in 0..k as u32 {
        let (i, j) = (var / t, var % t);
        let mut chain: Vec<Var> = (0..=i).map(|c| q(i, c, 1, j)).collect();
        chain.extend((i..size).map(|r| q(r, i, 0, j)));
        chains.insert(var, chain);
    }
    Ok(Embedding { chains })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyChain(Var),
    UnknownQubit { var: Var, qubit: Var },
    Disconnected(Var),
    SharedQubit { qubit: Var, vars: (Var, Var) },
    MissingCoupler(Var, Var),
    MissingChain(Var),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyChain(v) => write!(f, "chain {v} is empty"),
            Violation::UnknownQubit { var, qubit } => {
                write!(f, "chain {var} uses qubit {qubit} absent from the hardware")
            }
            Violation::Disconnected(v) => write!(f, "chain {v} is not connected"),
            Violation::SharedQubit { qubit, vars } => {
                write!(f, "qubit {qubit} shared by chains {} and {}", vars.0, vars.1)
            }
            Violation::MissingCoupler(u, v) => {
                write!(f, "no coupler between chains {u} and {v}")
            }
            Violation::MissingChain(v) => write!(f, "no chain for logical variable {v}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmbeddingReport {
    pub violations: Vec<Violation>,
}

impl EmbeddingReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn chain_connected(chain: &[Var], g: &HardwareGraph) -> bool {
    let members: BTreeSet<Var> = chain.iter().copied().collect();
    spanning_tree(chain, g).len() + 1 == members.len()
}

/// BFS spanning tree of the subgraph induced by `chain`, rooted at its first
/// qubit. Returns tree edges; fewer than `len - 1` edges means disconnected.
fn spanning_tree(chain: &[Var], g: &HardwareGraph) -> Vec<(Var, Var)> {
    let members: BTreeSet<Var> = chain.iter().copied().collect();
    let Some(&root) = chain.first() else {
        return Vec::new();
    };
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    let mut edges = Vec::new();
    while let Some(u) = queue.pop_front() {
        for &v in &members {
            if !seen.contains(&v) && g.has_coupler(u, v) {
                seen.insert(v);
                edges.push((u, v));
                queue.push_back(v);
            }
        }
    }
    edges
}

fn chains_touch(a: &[Var], b: &[Var], g: &HardwareGraph) -> bool {
    a.iter().any(|&p| b.iter().any(|&q| g.has_coupler(p, q)))
}

/// Lists every violated embedding condition for the given logical edges.
pub fn validate_embedding(e: &Embedding, g: &HardwareGraph, logical_edges: &BTreeSet<(Var, Var)>) -> EmbeddingReport {
    let mut violations = Vec::new();
    let mut owner: BTreeMap<Var, Var> = BTreeMap::new();
    for (&v, chain) in &e.chains {
        if chain.is_empty() {
            violations.push(Violation::EmptyChain(v));
            continue;
        }
        let mut known = true;
        for &q in chain {
            if !g.nodes().contains(&q) {
                violations.push(Violation::UnknownQubit { var: v, qubit: q });
                known = false;
            }
            if let Some(&w) = owner.get(&q) {
                if w != v {
                    violations.push(Violation::SharedQubit { qubit: q, vars: (w, v) });
                }
            } else {
                owner.insert(q, v);
            }
        }
        if known && !chain_connected(chain, g) {
            violations.push(Violation::Disconnected(v));
        }
    }
    for &(u, v) in logical_edges {
        match (e.chain(u), e.chain(v)) {
            (Some(a), Some(b)) => {
                if !chains_touch(a, b, g) {
                    violations.push(Violation::MissingCoupler(u, v));
                }
            }
            (a, b) => {
                if a.is_none() {
                    violations.push(Violation::MissingChain(u));
                }
                if b.is_none() {
                    violations.push(Violation::MissingChain(v));
                }
            }
        }
    }
    EmbeddingReport { violations }
}

/// Logical edges of a complete graph on `0..k`.
pub fn complete_edges(k: usize) -> BTreeSet<(Var, Var)> {
    let k = k as Var;
    (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ChainStrengthPolicy {
    Fixed(f64),
    /// Uniform torque compensation with the given prefactor.
    Utc(f64),
}

impl ChainStrengthPolicy {
    pub fn resolve(&self, model: &QuboModel) -> Result<f64> {
        let cs = match *self {
            ChainStrengthPolicy::Fixed(v) => v,
            ChainStrengthPolicy::Utc(p) => utc_chain_strength(model, p)?,
        };
        if cs > 0.0 && cs.is_finite() {
            Ok(cs)
        } else {
            Err(Error::InvalidArgument(format!("chain strength {cs} must be positive")))
        }
    }
}

/// `prefactor * rms(J) * sqrt(average interaction degree)`.
pub fn utc_chain_strength(model: &QuboModel, prefactor: f64) -> Result<f64> {
    let n_int = model.num_interactions();
    if n_int == 0 {
        return Err(Error::InvalidModel(
            "uniform torque compensation needs at least one quadratic term".into(),
        ));
    }
    if prefactor <= 0.0 {
        return Err(Error::InvalidArgument("UTC prefactor must be positive".into()));
    }
    let mean_sq = model.quadratic_terms().map(|(_, j)| j * j).sum::<f64>() / n_int as f64;
    let avg_degree = 2.0 * n_int as f64 / model.num_variables() as f64;
    Ok(prefactor * mean_sq.sqrt() * avg_degree.sqrt())
}

/// Splits a logical model over an embedding without chain couplings: each
/// `h_i` is shared equally by the qubits of chain `i`, each `J_ij` equally by
/// all physical couplers between chains `i` and `j`.
pub fn distribute(model: &QuboModel, e: &Embedding, g: &HardwareGraph) -> Result<QuboModel> {
    let mut hw = QuboModel::new();
    for &v in model.variables() {
        let chain = e
            .chain(v)
            .ok_or_else(|| Error::InvalidEmbedding(format!("no chain for logical variable {v}")))?;
        for &q in chain {
            hw.add_variable(q);
        }
        let share = model.linear(v) / chain.len() as f64;
        for &q in chain {
            hw.add_linear(q, share)?;
        }
    }
    for ((u, v), j) in model.quadratic_terms() {
        let (a, b) = (e.chain(u).unwrap(), e.chain(v).unwrap());
        let couplers: Vec<(Var, Var)> = a
            .iter()
            .flat_map(|&p| b.iter().map(move |&q| (p, q)))
            .filter(|&(p, q)| g.has_coupler(p, q))
            .collect();
        if couplers.is_empty() {
            return Err(Error::InvalidEmbedding(format!(
                "no coupler between chains {u} and {v}"
            )));
        }
        let share = j / couplers.len() as f64;
        for (p, q) in couplers {
            hw.add_quadratic(p, q, share)?;
        }
    }
    Ok(hw)
}

/// A hardware-level model together with the chain couplings it contains.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedModel {
    pub model: QuboModel,
    pub chain_strength: f64,
    pub chain_edges: Vec<(Var, Var)>,
}

/// Maps a logical model onto the hardware.
///
/// Chain integrity is the Ising coupling `-cs * s_a * s_b` along a BFS
/// spanning tree of each chain. In the QUBO frame that is
/// `-4cs x_a x_b + 2cs x_a + 2cs x_b` (constant `-cs` dropped), which is zero
/// on aligned qubits and `2cs` on a broken edge, so for unbroken chains the
/// hardware energy equals the logical energy.
pub fn embed_qubo(
    model: &QuboModel,
    e: &Embedding,
    g: &HardwareGraph,
    policy: ChainStrengthPolicy,
) -> Result<EmbeddedModel> {
    let cs = policy.resolve(model)?;
    let mut hw = distribute(model, e, g)?;
    let mut chain_edges = Vec::new();
    for &v in model.variables() {
        let chain = e.chain(v).expect("checked by distribute");
        let tree = spanning_tree(chain, g);
        if tree.len() + 1 != chain.len() {
            return Err(Error::InvalidEmbedding(format!("chain {v} is not connected")));
        }
        for (a, b) in tree {
            hw.add_quadratic(a, b, -4.0 * cs)?;
            hw.add_linear(a, 2.0 * cs)?;
            hw.add_linear(b, 2.0 * cs)?;
            chain_edges.push((a.min(b), a.max(b)));
        }
    }
    Ok(EmbeddedModel {
        model: hw,
        chain_strength: cs,
        chain_edges,
    })
}

fn majority<R: Rng + ?Sized>(ones: usize, len: usize, rng: &mut R) -> (u8, bool) {
    let broken = ones != 0 && ones != len;
    let value = match (2 * ones).cmp(&len) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => u8::from(rng.random::<bool>()),
    };
    (value, broken)
}

/// Majority-vote decoding. Ties are broken by a fair coin from `rng`.
/// Returns the logical sample and the fraction of broken chains.
pub fn unembed<R: Rng + ?Sized>(hw: &Sample, e: &Embedding, rng: &mut R) -> Result<(Sample, f64)> {
    let hw = hw.to_frame(crate::qubo::Frame::Qubo);
    let mut out = Vec::with_capacity(e.len());
    let mut broken = 0usize;
    for (&v, chain) in &e.chains {
        let mut ones = 0;
        for &q in chain {
            match hw.get(q) {
                Some(x) => ones += x as usize,
                None => return Err(Error::MissingVariable(q)),
            }
        }
        let (value, b) = majority(ones, chain.len(), rng);
        broken += usize::from(b);
        out.push((v, value));
    }
    let frac = if e.is_empty() {
        0.0
    } else {
        broken as f64 / e.len() as f64
    };
    Ok((Sample::qubo(out), frac))
}

/// Index-based decoder for dense hardware states of a [`CompiledModel`].
#[derive(Clone, Debug)]
pub struct ChainDecoder {
    pub logical: Vec<Var>,
    chains: Vec<Vec<usize>>,
}

impl ChainDecoder {
    pub fn new(e: &Embedding, hw: &CompiledModel) -> Result<Self> {
        let mut logical = Vec::new();
        let mut chains = Vec::new();
        for (&v, chain) in &e.chains {
            logical.push(v);
            chains.push(
                chain
                    .iter()
                    .map(|q| hw.index.get(q).copied().ok_or(Error::MissingVariable(*q)))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(Self { logical, chains })
    }

    /// Decodes into `out` (indexed like `self.logical`); returns the number of
    /// broken chains.
    pub fn decode<R: Rng + ?Sized>(&self, state: &[u8], out: &mut Vec<u8>, rng: &mut R) -> usize {
        out.clear();
        let mut broken = 0;
        for chain in &self.chains {
            let ones = chain.iter().map(|&i| state[i] as usize).sum();
            let (value, b) = majority(ones, chain.len(), rng);
            broken += usize::from(b);
            out.push(value);
        }
        broken
    }
}
