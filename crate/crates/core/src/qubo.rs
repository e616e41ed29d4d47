//! Sparse QUBO / Ising models.
//!
//! A [`QuboModel`] stores `E(x) = sum_i h_i x_i + sum_{i<j} J_ij x_i x_j`.
//! The coefficient maps do not carry a frame; the values fed to
//! [`QuboModel::energy`] decide whether the model is read as a QUBO
//! (`x in {0,1}`) or an Ising model (`s in {-1,+1}`). Zero coefficients are
//! never stored, so an absent term and a zero term are the same thing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Var = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Qubo,
    Ising,
}

/// Direction of a frame conversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    QuboToIsing,
    IsingToQubo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuboModel {
    variables: BTreeSet<Var>,
    linear: BTreeMap<Var, f64>,
    quadratic: BTreeMap<(Var, Var), f64>,
}

#[inline]
fn pair(u: Var, v: Var) -> (Var, Var) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn check_finite(c: f64) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("non-finite coefficient {c}")))
    }
}

impl QuboModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variables(vars: impl IntoIterator<Item = Var>) -> Self {
        Self {
            variables: vars.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn add_variable(&mut self, v: Var) {
        self.variables.insert(v);
    }

    /// Adds `c` to the linear coefficient of `v`, registering `v`.
    pub fn add_linear(&mut self, v: Var, c: f64) -> Result<()> {
        check_finite(c)?;
        self.variables.insert(v);
        let slot = self.linear.entry(v).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.linear.remove(&v);
        }
        Ok(())
    }

    /// Adds `c` to the coupling of the unordered pair `{u, v}`.
    pub fn add_quadratic(&mut self, u: Var, v: Var, c: f64) -> Result<()> {
        if u == v {
            return Err(Error::InvalidModel(format!("quadratic term on a single variable {u}")));
        }
        check_finite(c)?;
        self.variables.insert(u);
        self.variables.insert(v);
        let key = pair(u, v);
        let slot = self.quadratic.entry(key).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.quadratic.remove(&key);
        }
        Ok(())
    }

    pub fn linear(&self, v: Var) -> f64 {
        self.linear.get(&v).copied().unwrap_or(0.0)
    }

    pub fn quadratic(&self, u: Var, v: Var) -> f64 {
        self.quadratic.get(&pair(u, v)).copied().unwrap_or(0.0)
    }

    pub fn variables(&self) -> &BTreeSet<Var> {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_interactions(&self) -> usize {
        self.quadratic.len()
    }

    pub fn linear_terms(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        self.linear.iter().map(|(&v, &c)| (v, c))
    }

    pub fn quadratic_terms(&self) -> impl Iterator<Item = ((Var, Var), f64)> + '_ {
        self.quadratic.iter().map(|(&k, &c)| (k, c))
    }

    pub fn max_abs_linear(&self) -> f64 {
        self.linear.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_quadratic(&self) -> f64 {
        self.quadratic.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `|Q|`: the largest absolute coefficient over both term classes.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.max_abs_linear().max(self.max_abs_quadratic())
    }

    pub fn is_zero(&self) -> bool {
        self.linear.is_empty() && self.quadratic.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> QuboModel {
        let mut out = QuboModel::with_variables(self.variables.iter().copied());
        if factor == 0.0 {
            return out;
        }
        out.linear = self.linear.iter().map(|(&v, &c)| (v, c * factor)).collect();
        out.quadratic = self.quadratic.iter().map(|(&k, &c)| (k, c * factor)).collect();
        out
    }

    /// Interaction-graph degree of every variable (isolated variables get 0).
    pub fn degrees(&self) -> BTreeMap<Var, usize> {
        let mut deg: BTreeMap<Var, usize> = self.variables.iter().map(|&v| (v, 0)).collect();
        for &(u, v) in self.quadratic.keys() {
            *deg.get_mut(&u).expect("registered") += 1;
            *deg.get_mut(&v).expect("registered") += 1;
        }
        deg
    }

    /// Evaluates the model on the sample's values, read in the sample's frame.
    pub fn energy(&self, sample: &Sample) -> Result<f64> {
        for &v in &self.variables {
            if !sample.values.contains_key(&v) {
                return Err(Error::MissingVariable(v));
            }
        }
        let val = |v: Var| f64::from(sample.values[&v]);
        let mut e = 0.0;
        for (&v, &h) in &self.linear {
            e += h * val(v);
        }
        for (&(u, v), &j) in &self.quadratic {
            e += j * val(u) * val(v);
        }
        Ok(e)
    }

    /// Converts between frames under `x = (s + 1) / 2`.
    ///
    /// Returns the converted model and an `offset` such that for every
    /// assignment `a`, `E_source(a) = E_target(a') + offset`, where `a'` is
    /// `a` mapped into the target frame.
    pub fn convert(&self, direction: Direction) -> (QuboModel, f64) {
        let mut out = QuboModel::with_variables(self.variables.iter().copied());
        let mut offset = 0.0;
        match direction {
            Direction::QuboToIsing => {
                for (&v, &h) in &self.linear {
                    out.add_linear(v, h / 2.0).expect("finite");
                    offset += h / 2.0;
                }
                for (&(u, v), &j) in &self.quadratic {
                    out.add_quadratic(u, v, j / 4.0).expect("finite");
                    out.add_linear(u, j / 4.0).expect("finite");
                    out.add_linear(v, j / 4.0).expect("finite");
                    offset += j / 4.0;
                }
            }
            Direction::IsingToQubo => {
                for (&v, &h) in &self.linear {
                    out.add_linear(v, 2.0 * h).expect("finite");
                    offset -= h;
                }
                for (&(u, v), &j) in &self.quadratic {
                    out.add_quadratic(u, v, 4.0 * j).expect("finite");
                    out.add_linear(u, -2.0 * j).expect("finite");
                    out.add_linear(v, -2.0 * j).expect("finite");
                    offset += j;
                }
                // E_ising(s) = E_qubo(x) + offset
            }
        }
        (out, offset)
    }

    pub fn to_ising(&self) -> (QuboModel, f64) {
        self.convert(Direction::QuboToIsing)
    }

    pub fn from_ising(&self) -> (QuboModel, f64) {
        self.convert(Direction::IsingToQubo)
    }

    /// Rescales so that linear terms lie in `[-1, 1]` and quadratic terms in
    /// `[-2, 2]`, with at least one bound tight. An absent term class does not
    /// bind; an all-zero model is returned unchanged with factor 1.
    pub fn autoscale(&self) -> (QuboModel, f64) {
        let hmax = self.max_abs_linear();
        let jmax = self.max_abs_quadratic();
        let mut factor = f64::INFINITY;
        if hmax > 0.0 {
            factor = factor.min(1.0 / hmax);
        }
        if jmax > 0.0 {
            factor = factor.min(2.0 / jmax);
        }
        if !factor.is_finite() {
            return (self.clone(), 1.0);
        }
        (self.scaled(factor), factor)
    }

    pub fn is_disjoint(&self, other: &QuboModel) -> bool {
        self.variables.is_disjoint(&other.variables)
    }

    /// Coefficient-wise union of two models on disjoint variable sets.
    pub fn disjoint_union(&self, other: &QuboModel) -> Result<QuboModel> {
        if let Some(&v) = self.variables.intersection(&other.variables).next() {
            return Err(Error::OverlappingVariables(v));
        }
        let mut out = self.clone();
        out.variables.extend(other.variables.iter().copied());
        out.linear.extend(other.linear.iter().map(|(&k, &c)| (k, c)));
        out.quadratic.extend(other.quadratic.iter().map(|(&k, &c)| (k, c)));
        Ok(out)
    }

    /// Restriction to a subset of variables (terms with any endpoint outside
    /// `keep` are dropped).
    pub fn restrict(&self, keep: &BTreeSet<Var>) -> QuboModel {
        let mut out = QuboModel::with_variables(self.variables.intersection(keep).copied());
        out.linear = self
            .linear
            .iter()
            .filter(|(v, _)| keep.contains(v))
            .map(|(&v, &c)| (v, c))
            .collect();
        out.quadratic = self
            .quadratic
            .iter()
            .filter(|((u, v), _)| keep.contains(u) && keep.contains(v))
            .map(|(&k, &c)| (k, c))
            .collect();
        out
    }

    /// Line-oriented text: `i j coeff` per term, `i == j` for linear terms.
    /// Variables without any nonzero term are written as `i i 0`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# qubo: i j coeff (i == j is linear)\n");
        for &v in &self.variables {
            let h = self.linear(v);
            if h != 0.0 || !self.has_terms(v) {
                writeln!(s, "{v} {v} {h}").expect("write to string");
            }
        }
        for (&(u, v), &j) in &self.quadratic {
            writeln!(s, "{u} {v} {j}").expect("write to string");
        }
        s
    }

    fn has_terms(&self, v: Var) -> bool {
        self.linear.contains_key(&v) || self.quadratic.keys().any(|&(a, b)| a == v || b == v)
    }

    pub fn from_text(text: &str) -> Result<QuboModel> {
        let mut m = QuboModel::new();
        for (lineno, line) in crate::textio::records(text) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected `i j coeff`, got `{line}`"),
                });
            }
            let i: Var = crate::textio::parse_field(parts[0], lineno)?;
            let j: Var = crate::textio::parse_field(parts[1], lineno)?;
            let c: f64 = crate::textio::parse_field(parts[2], lineno)?;
            let res = if i == j {
                m.add_linear(i, c)
            } else {
                m.add_quadratic(i, j, c)
            };
            res.map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        }
        Ok(m)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<QuboModel> {
        QuboModel::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn compile(&self) -> CompiledModel {
        CompiledModel::new(self)
    }
}

/// An assignment of values to variables, tagged with its frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub values: BTreeMap<Var, i8>,
    pub frame: Frame,
}

impl Sample {
    pub fn qubo(values: impl IntoIterator<Item = (Var, u8)>) -> Sample {
        Sample {
            values: values.into_iter().map(|(v, x)| (v, x as i8)).collect(),
            frame: Frame::Qubo,
        }
    }

    pub fn get(&self, v: Var) -> Option<i8> {
        self.values.get(&v).copied()
    }

    pub fn to_frame(&self, frame: Frame) -> Sample {
        let values = match (self.frame, frame) {
            (a, b) if a == b => self.values.clone(),
            (Frame::Qubo, Frame::Ising) => self.values.iter().map(|(&v, &x)| (v, 2 * x - 1)).collect(),
            (Frame::Ising, Frame::Qubo) => self.values.iter().map(|(&v, &s)| (v, (s + 1) / 2)).collect(),
            _ => unreachable!(),
        };
        Sample { values, frame }
    }
}

/// The problem model, the indicator model, and their weighted union
/// `combined = problem + C * indicator` with `C = |problem| / |indicator|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedProgram {
    pub problem: QuboModel,
    pub indicator: QuboModel,
    pub scale_constant: f64,
    pub combined: QuboModel,
}

pub fn combine_with_indicator(problem: &QuboModel, indicator: &QuboModel) -> Result<CombinedProgram> {
    if let Some(&v) = problem.variables.intersection(&indicator.variables).next() {
        return Err(Error::OverlappingVariables(v));
    }
    let qi = indicator.max_abs_coefficient();
    if qi == 0.0 {
        return Err(Error::ZeroIndicator);
    }
    let c = problem.max_abs_coefficient() / qi;
    let combined = problem.disjoint_union(&indicator.scaled(c))?;
    Ok(CombinedProgram {
        problem: problem.clone(),
        indicator: indicator.clone(),
        scale_constant: c,
        combined,
    })
}

/// Dense, index-based view of a model for inner loops.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub vars: Vec<Var>,
    pub index: HashMap<Var, usize>,
    pub linear: Vec<f64>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl CompiledModel {
    fn new(model: &QuboModel) -> Self {
        let vars: Vec<Var> = model.variables.iter().copied().collect();
        let index: HashMap<Var, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut linear = vec![0.0; vars.len()];
        for (&v, &h) in &model.linear {
            linear[index[&v]] = h;
        }
        let mut adjacency = vec![Vec::new(); vars.len()];
        for (&(u, v), &j) in &model.quadratic {
            let (a, b) = (index[&u], index[&v]);
            adjacency[a].push((b, j));
            adjacency[b].push((a, j));
        }
        Self {
            vars,
            index,
            linear,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Energy of a dense 0/1 state.
    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            e += self.linear[i];
            for &(j, c) in &self.adjacency[i] {
                if j > i && x[j] == 1 {
                    e += c;
                }
            }
        }
        e
    }

    /// Energy change from flipping variable `i` in state `x`.
    #[inline]
    pub fn flip_delta(&self, x: &[u8], i: usize) -> f64 {
        let mut field = self.linear[i];
        for &(j, c) in &self.adjacency[i] {
            if x[j] == 1 {
                field += c;
            }
        }
        if x[i] == 0 {
            field
        } else {
            -field
        }
    }

    pub fn to_sample(&self, x: &[u8]) -> Sample {
        Sample::qubo(self.vars.iter().copied().zip(x.iter().copied()))
    }

    pub fn from_sample(&self, s: &Sample) -> Result<Vec<u8>> {
        let s = s.to_frame(Frame::Qubo);
        self.vars
            .iter()
            .map(|&v| s.get(v).map(|x| x as u8).ok_or(Error::MissingVariable(v)))
            .collect()
    }
}
