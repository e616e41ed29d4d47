//! End-to-end experiment runner.
//!
//! A run builds the hardware program (problem chains plus an indicator on the
//! idle qubits), submits `calls` batches to a backend, decodes every read and
//! records per-call mean energies. Everything downstream (report, gate log,
//! strata, plot data) is computed from the raw per-call table alone, so it
//! can be recomputed from `raw.csv` and the config.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anneal::{resolve_backend, AnnealCallConfig, BetaSchedule, NoiseParams, Program, BACKENDS};
use crate::embedding::{
    chimera_clique_embedding, chimera_clique_embedding_at, embed_qubo, validate_embedding, ChainDecoder,
    ChainStrengthPolicy, Embedding,
};
use crate::error::{Error, Result, StageExt};
use crate::monitor::{run_two_phase, stratify, BurnInStore, GateLog, StratifiedHistogram, ThresholdRule};
use crate::problems::{gen_er_graph, gen_indicator, mc_qubo, mvc_qubo, IndicatorKind, IndicatorSpec, PenaltyWeights};
use crate::qubo::{combine_with_indicator, CompiledModel, QuboModel, Var};
use crate::rng::{derive_seed, substream};
use crate::textio::{parse_field, records};
use crate::timeseries::{
    acf, adf_test, bin_confusion, compare, ks_two_sample, mean, mean_align, minmax_normalize, moving_average, pearson,
    LagOrder, StatReport,
};
use crate::topology::{chimera, import_graph, HardwareGraph, TopologyKind};

pub const CONFIG_SCHEMA: &str = "idlepi.experiment.v1";
const DECODE_TAG: u64 = 0x4445_434f;

pub const RAW_FILE: &str = "raw.csv";
pub const READS_FILE: &str = "reads.csv";
pub const REPORT_FILE: &str = "report.json";
pub const GATE_FILE: &str = "gate_log.csv";
pub const STORE_FILE: &str = "burnin_store.json";
pub const STRATA_FILE: &str = "strata.csv";
pub const ACF_FILE: &str = "acf.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One problem next to the indicator.
    #[default]
    Single,
    /// Several disjoint problems sharing every call.
    Trend,
    /// Two problems of equal size submitted on alternate calls.
    Alternate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Chimera {
        m: u32,
        #[serde(default = "default_shore")]
        t: u32,
    },
    Import {
        path: PathBuf,
    },
}

fn default_shore() -> u32 {
    4
}

impl TopologySpec {
    pub fn build(&self) -> Result<HardwareGraph> {
        match self {
            TopologySpec::Chimera { m, t } => chimera(*m, *t),
            TopologySpec::Import { path } => import_graph(path),
        }
    }
}

/// Either a clique size for the built-in construction or an embedding file.
/// With neither, the clique size is the largest problem size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "MC")]
    MaxClique,
    #[serde(rename = "MVC")]
    MinVertexCover,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: u32,
    pub density: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl ProblemSpec {
    pub fn weights(&self) -> PenaltyWeights {
        let d = match self.kind {
            ProblemKind::MaxClique => PenaltyWeights::MAX_CLIQUE,
            ProblemKind::MinVertexCover => PenaltyWeights::VERTEX_COVER,
        };
        PenaltyWeights {
            a: self.a.unwrap_or(d.a),
            b: self.b.unwrap_or(d.b),
        }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            ProblemKind::MaxClique => "MC",
            ProblemKind::MinVertexCover => "MVC",
        };
        format!("{kind}(n={}, p={}, seed={})", self.n, self.density, self.seed)
    }

    /// The logical QUBO and the constant to add to its energies.
    pub fn build(&self) -> Result<(QuboModel, f64)> {
        let g = gen_er_graph(self.n, self.density, self.seed)?;
        match self.kind {
            ProblemKind::MaxClique => Ok((mc_qubo(&g, self.weights())?, 0.0)),
            ProblemKind::MinVertexCover => mvc_qubo(&g, self.weights()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorConfig {
    pub kind: IndicatorKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSpec {
    pub num_reads: usize,
    pub sweeps: usize,
    pub reduce_intersample_correlation: bool,
    #[serde(default)]
    pub schedule: BetaSchedule,
}

impl Default for AnnealSpec {
    fn default() -> Self {
        let d = AnnealCallConfig::default();
        Self {
            num_reads: d.num_reads,
            sweeps: d.sweeps,
            reduce_intersample_correlation: d.reduce_intersample_correlation,
            schedule: d.schedule,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Moving-average window; shortened to the number of calls if larger.
    pub window: usize,
    pub acf_lags: usize,
    /// ADF lag order; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adf_lags: Option<usize>,
    pub bins: usize,
    pub burn_in: usize,
    pub threshold: ThresholdRule,
    pub low_cut: f64,
    pub high_cut: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_cap: Option<usize>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            window: 500,
            acf_lags: 40,
            adf_lags: None,
            bins: 20,
            burn_in: 10,
            threshold: ThresholdRule::HistoryQuantile(0.5),
            low_cut: crate::monitor::DEFAULT_CUTS.0,
            high_cut: crate::monitor::DEFAULT_CUTS.1,
            history_cap: None,
        }
    }
}

impl AnalysisSpec {
    fn lag_order(&self) -> LagOrder {
        self.adf_lags.map_or(LagOrder::Auto, LagOrder::Fixed)
    }

    fn new_store(&self) -> Result<BurnInStore> {
        match self.history_cap {
            Some(cap) => BurnInStore::with_cap(self.burn_in, cap),
            None => Ok(BurnInStore::new(self.burn_in)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub mode: Mode,
    /// Seeds the backend (noise and reads) and chain-break tie breaking.
    pub seed: u64,
    pub backend: String,
    pub calls: usize,
    pub output_dir: PathBuf,
    /// Also write every read's energies to `reads.csv`.
    #[serde(default)]
    pub persist_reads: bool,
    pub topology: TopologySpec,
    #[serde(default)]
    pub embedding: EmbeddingSpec,
    pub chain_strength: ChainStrengthPolicy,
    #[serde(default)]
    pub anneal: AnnealSpec,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    pub indicator: IndicatorConfig,
    pub problems: Vec<ProblemSpec>,
}

impl ExperimentConfig {
    /// Chimera(4) with a 16-variable max-clique problem, 2,000 calls of 100
    /// reads.
    pub fn single_default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            mode: Mode::Single,
            seed: 1,
            backend: "sim".into(),
            calls: 2000,
            output_dir: PathBuf::from("out"),
            persist_reads: false,
            topology: TopologySpec::Chimera { m: 4, t: 4 },
            embedding: EmbeddingSpec::default(),
            chain_strength: ChainStrengthPolicy::Utc(1.414),
            anneal: AnnealSpec::default(),
            noise: NoiseParams::default(),
            analysis: AnalysisSpec::default(),
            indicator: IndicatorConfig {
                kind: IndicatorKind::Pi1,
                seed: 7,
            },
            problems: vec![ProblemSpec {
                kind: ProblemKind::MaxClique,
                n: 16,
                density: 0.5,
                seed: 3,
                a: None,
                b: None,
            }],
        }
    }

    /// Small configuration that finishes in well under a second.
    pub fn smoke() -> Self {
        let mut cfg = Self::single_default();
        cfg.topology = TopologySpec::Chimera { m: 2, t: 4 };
        cfg.embedding.k = Some(6);
        cfg.problems[0].n = 6;
        cfg.calls = 50;
        cfg.anneal.num_reads = 20;
        cfg.analysis.window = 10;
        cfg
    }

    /// Four disjoint 8-variable cliques on chimera(4): max clique and vertex
    /// cover at densities 0.3 and 0.7.
    pub fn trend_default() -> Self {
        let mut cfg = Self::single_default();
        cfg.mode = Mode::Trend;
        cfg.chain_strength = ChainStrengthPolicy::Fixed(5.0);
        cfg.analysis.window = 100;
        cfg.problems = [
            (ProblemKind::MaxClique, 0.3),
            (ProblemKind::MaxClique, 0.7),
            (ProblemKind::MinVertexCover, 0.3),
            (ProblemKind::MinVertexCover, 0.7),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (kind, density))| ProblemSpec {
            kind,
            n: 8,
            density,
            seed: 11 + i as u64,
            a: None,
            b: None,
        })
        .collect();
        cfg
    }

    /// Two max-clique instances of the same size and density on alternate
    /// calls.
    pub fn alternate_default() -> Self {
        let mut cfg = Self::single_default();
        cfg.mode = Mode::Alternate;
        cfg.topology = TopologySpec::Chimera { m: 2, t: 4 };
        cfg.anneal.num_reads = 20;
        cfg.problems = (0..2)
            .map(|i| ProblemSpec {
                kind: ProblemKind::MaxClique,
                n: 8,
                density: 0.5,
                seed: 21 + i,
                a: None,
                b: None,
            })
            .collect();
        cfg
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn anneal_config(&self) -> AnnealCallConfig {
        AnnealCallConfig {
            num_reads: self.anneal.num_reads,
            sweeps: self.anneal.sweeps,
            reduce_intersample_correlation: self.anneal.reduce_intersample_correlation,
            seed: self.seed,
            schedule: self.anneal.schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!(
                "unsupported schema '{}', expected '{CONFIG_SCHEMA}'",
                self.schema
            ));
        }
        if !BACKENDS.contains(&self.backend.as_str()) {
            return Err(Error::UnknownBackend(self.backend.clone()));
        }
        if self.calls == 0 {
            return bad("calls must be at least 1".into());
        }
        let want = match self.mode {
            Mode::Single => 1..=1,
            Mode::Trend => 1..=4,
            Mode::Alternate => 2..=2,
        };
        if !want.contains(&self.problems.len()) {
            return bad(format!(
                "{:?} mode takes {}..={} problems, got {}",
                self.mode,
                want.start(),
                want.end(),
                self.problems.len()
            ));
        }
        if self.mode == Mode::Alternate && self.problems[0].n != self.problems[1].n {
            return bad("alternating problems must have the same size".into());
        }
        for p in &self.problems {
            if p.n == 0 || !(0.0..=1.0).contains(&p.density) {
                return bad(format!("problem {} has invalid size or density", p.label()));
            }
            let w = p.weights();
            let ok = match p.kind {
                ProblemKind::MaxClique => 0.0 < w.a && w.a < w.b,
                ProblemKind::MinVertexCover => 0.0 < w.b && w.b < w.a,
            };
            if !ok {
                return bad(format!("penalty weights {w:?} invalid for {}", p.label()));
            }
        }
        match &self.topology {
            TopologySpec::Chimera { m, t } if *m == 0 || *t == 0 => {
                return bad("chimera m and t must be positive".into())
            }
            TopologySpec::Import { path } if !path.is_file() => {
                return bad(format!("topology file {} not found", path.display()))
            }
            _ => {}
        }
        if let Some(path) = &self.embedding.path {
            if self.embedding.k.is_some() {
                return bad("give either embedding.k or embedding.path, not both".into());
            }
            if !path.is_file() {
                return bad(format!("embedding file {} not found", path.display()));
            }
            if self.mode == Mode::Trend {
                return bad("trend runs place their own clique embeddings".into());
            }
        }
        match self.chain_strength {
            ChainStrengthPolicy::Fixed(v) | ChainStrengthPolicy::Utc(v) if !(v > 0.0 && v.is_finite()) => {
                return bad("chain strength must be positive".into())
            }
            _ => {}
        }
        self.anneal_config().validate()?;
        self.noise.validate()?;
        let a = &self.analysis;
        if a.window == 0 || a.bins == 0 || a.burn_in == 0 {
            return bad("window, bins and burn_in must be at least 1".into());
        }
        if !(0.0 <= a.low_cut && a.low_cut < a.high_cut && a.high_cut <= 1.0) {
            return bad("cuts must satisfy 0 <= low_cut < high_cut <= 1".into());
        }
        a.threshold.validate()?;
        if let Some(cap) = a.history_cap {
            if cap < a.burn_in {
                return bad("history_cap must be at least burn_in".into());
            }
        }
        Ok(())
    }

    fn effective_window(&self) -> usize {
        self.analysis.window.min(self.calls)
    }
}

/// One logical problem with its chains.
#[derive(Clone, Debug)]
pub struct PreparedProblem {
    pub spec: ProblemSpec,
    pub model: QuboModel,
    pub offset: f64,
    pub embedding: Embedding,
    compiled: CompiledModel,
}

/// One submittable hardware program and what is needed to decode it.
#[derive(Clone, Debug)]
pub struct PreparedProgram {
    pub program: Program,
    pub chain_strength: f64,
    pub scale_constant: f64,
    pub autoscale_factor: f64,
    /// Problems present in this program.
    pub members: Vec<usize>,
    decoders: Vec<ChainDecoder>,
    indicator_index: Vec<usize>,
}

/// Everything built before the first call.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graph: HardwareGraph,
    pub problems: Vec<PreparedProblem>,
    /// Indicator on the idle qubits, before scaling.
    pub indicator: QuboModel,
    pub programs: Vec<PreparedProgram>,
    indicator_compiled: CompiledModel,
}

fn problem_embeddings(cfg: &ExperimentConfig, g: &HardwareGraph) -> Result<Vec<Embedding>> {
    let n_max = cfg.problems.iter().map(|p| p.n as usize).max().unwrap_or(0);
    if let Some(path) = &cfg.embedding.path {
        let e = Embedding::read_file(path)?;
        return Ok(vec![e; cfg.problems.len()]);
    }
    let k = cfg.embedding.k.unwrap_or(n_max);
    if k < n_max {
        return Err(Error::Config(format!(
            "clique size {k} is smaller than problem size {n_max}"
        )));
    }
    if cfg.mode != Mode::Trend {
        let e = chimera_clique_embedding(g, k)?;
        return Ok(vec![e; cfg.problems.len()]);
    }
    let TopologyKind::Chimera { m, t } = g.kind() else {
        return Err(Error::InvalidArgument("trend runs need a Chimera topology".into()));
    };
    let size = (k as u32).div_ceil(t).max(1);
    let per_row = m / size;
    if (per_row * per_row) < cfg.problems.len() as u32 {
        return Err(Error::InvalidEmbedding(format!(
            "{} disjoint cliques of size {k} do not fit in chimera({m})",
            cfg.problems.len()
        )));
    }
    (0..cfg.problems.len() as u32)
        .map(|i| chimera_clique_embedding_at(g, k, (i / per_row) * size, (i % per_row) * size, size))
        .collect()
}

/// Builds the hardware graph, embeddings, indicator and programs.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate().stage("config")?;
    let graph = cfg.topology.build().stage("topology")?;
    let embeddings = problem_embeddings(cfg, &graph).stage("embedding")?;

    let mut problems = Vec::new();
    for (spec, e) in cfg.problems.iter().zip(embeddings) {
        let (model, offset) = spec.build().stage("problem")?;
        let vars: BTreeSet<Var> = model.variables().clone();
        let e = e.restrict(&vars);
        let edges: BTreeSet<(Var, Var)> = model.quadratic_terms().map(|(p, _)| p).collect();
        let report = validate_embedding(&e, &graph, &edges);
        if !report.is_valid() || e.len() != vars.len() {
            let first = report.violations.first().map(|v| v.to_string());
            return Err(Error::InvalidEmbedding(
                first.unwrap_or_else(|| "embedding misses variables".into()),
            ))
            .stage("embedding");
        }
        let compiled = model.compile();
        problems.push(PreparedProblem {
            spec: spec.clone(),
            model,
            offset,
            embedding: e,
            compiled,
        });
    }

    let mut used = BTreeSet::new();
    for (i, p) in problems.iter().enumerate() {
        let fp = p.embedding.footprint();
        let shared = cfg.mode == Mode::Alternate;
        if !shared {
            if let Some(&q) = used.intersection(&fp).next() {
                return Err(Error::InvalidEmbedding(format!("problem {i} reuses qubit {q}"))).stage("embedding");
            }
        }
        used.extend(fp);
    }
    let region = graph.idle_region(&used).stage("idle region")?;
    let indicator = gen_indicator(&IndicatorSpec {
        kind: cfg.indicator.kind,
        region,
        seed: cfg.indicator.seed,
    })
    .stage("indicator")?;
    let indicator_compiled = indicator.compile();

    let groups: Vec<Vec<usize>> = match cfg.mode {
        Mode::Single | Mode::Trend => vec![(0..problems.len()).collect()],
        Mode::Alternate => vec![vec![0], vec![1]],
    };
    // Alternating programs share one chain strength and one scale factor so
    // the indicator is submitted with identical coefficients every call.
    let shared_cs = match cfg.mode {
        Mode::Alternate => {
            let mut cs: f64 = 0.0;
            for p in &problems {
                cs = cs.max(cfg.chain_strength.resolve(&p.model).stage("chain strength")?);
            }
            Some(ChainStrengthPolicy::Fixed(cs))
        }
        _ => None,
    };

    let mut staged = Vec::new();
    for members in groups {
        let mut hw = QuboModel::new();
        let mut cs = 0.0f64;
        for &i in &members {
            let policy = shared_cs.unwrap_or(cfg.chain_strength);
            let em = embed_qubo(&problems[i].model, &problems[i].embedding, &graph, policy).stage("embed")?;
            cs = cs.max(em.chain_strength);
            hw = hw.disjoint_union(&em.model).stage("embed")?;
        }
        let combined = combine_with_indicator(&hw, &indicator).stage("combine")?;
        let (_, factor) = combined.combined.autoscale();
        staged.push((members, combined, cs, factor));
    }
    let common_factor = staged.iter().map(|s| s.3).fold(f64::INFINITY, f64::min);
    let common_c = staged.iter().map(|s| s.1.scale_constant).fold(f64::INFINITY, f64::min);

    let mut programs = Vec::new();
    for (members, combined, cs, factor) in staged {
        let (c, model) = match cfg.mode {
            Mode::Alternate => {
                let hw = combined.problem.disjoint_union(&indicator.scaled(common_c))?;
                (common_c, hw.scaled(common_factor))
            }
            _ => (combined.scale_constant, combined.combined.scaled(factor)),
        };
        let autoscale_factor = if cfg.mode == Mode::Alternate {
            common_factor
        } else {
            factor
        };
        let program = Program::new(model);
        let decoders = members
            .iter()
            .map(|&i| ChainDecoder::new(&problems[i].embedding, program.compiled()))
            .collect::<Result<Vec<_>>>()
            .stage("decode")?;
        let indicator_index = indicator_compiled
            .vars
            .iter()
            .map(|q| {
                program
                    .compiled()
                    .index
                    .get(q)
                    .copied()
                    .ok_or(Error::MissingVariable(*q))
            })
            .collect::<Result<Vec<_>>>()
            .stage("decode")?;
        programs.push(PreparedProgram {
            program,
            chain_strength: cs,
            scale_constant: c,
            autoscale_factor,
            members,
            decoders,
            indicator_index,
        });
    }
    Ok(Prepared {
        graph,
        problems,
        indicator,
        programs,
        indicator_compiled,
    })
}

/// Per-call table: one row per call.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawSeries {
    /// Index of the program submitted at each call.
    pub partner: Vec<usize>,
    /// Backend temperature at each call (diagnostic only).
    pub beta: Vec<f64>,
    /// Mean fraction of broken chains over reads.
    pub chain_break: Vec<f64>,
    pub indicator: Vec<f64>,
    /// Mean logical energy of each problem; `NaN` where absent from a call.
    pub problems: Vec<Vec<f64>>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator.is_empty()
    }

    fn header(n_problems: usize) -> String {
        let mut h = String::from("call,partner,beta,chain_break,indicator");
        for i in 0..n_problems {
            write!(h, ",problem_{i}").unwrap();
        }
        h
    }

    fn row(&self, call: usize) -> String {
        let mut s = format!(
            "{call},{},{},{},{}",
            self.partner[call], self.beta[call], self.chain_break[call], self.indicator[call]
        );
        for p in &self.problems {
            write!(s, ",{}", p[call]).unwrap();
        }
        s
    }

    fn push(&mut self, partner: usize, beta: f64, chain_break: f64, indicator: f64, problems: &[f64]) {
        if self.problems.is_empty() {
            self.problems = vec![Vec::new(); problems.len()];
        }
        self.partner.push(partner);
        self.beta.push(beta);
        self.chain_break.push(chain_break);
        self.indicator.push(indicator);
        for (col, &v) in self.problems.iter_mut().zip(problems) {
            col.push(v);
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::header(self.problems.len());
        s.push('\n');
        for call in 0..self.len() {
            s.push_str(&self.row(call));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = records(text);
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let n_problems = cols.len().saturating_sub(5);
        if cols.len() < 6 || header != Self::header(n_problems) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected header '{header}'"),
            });
        }
        let mut out = RawSeries {
            problems: vec![Vec::new(); n_problems],
            ..Default::default()
        };
        for (line, rec) in lines {
            let f: Vec<&str> = rec.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, got {}", cols.len(), f.len()),
                });
            }
            let call: usize = parse_field(f[0], line)?;
            if call != out.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("call {call} out of order"),
                });
            }
            out.partner.push(parse_field(f[1], line)?);
            out.beta.push(parse_field(f[2], line)?);
            out.chain_break.push(parse_field(f[3], line)?);
            out.indicator.push(parse_field(f[4], line)?);
            for (i, col) in out.problems.iter_mut().enumerate() {
                col.push(parse_field(f[5 + i], line)?);
            }
        }
        Ok(out)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Where per-call rows and per-read rows go while the run is in progress.
struct Sinks {
    raw: Option<BufWriter<File>>,
    reads: Option<BufWriter<File>>,
}

impl Sinks {
    fn flush(&mut self) -> Result<()> {
        for w in [&mut self.raw, &mut self.reads].into_iter().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}

fn simulate_into(cfg: &ExperimentConfig, prep: &Prepared, sinks: &mut Sinks) -> Result<RawSeries> {
    let acfg = cfg.anneal_config();
    let mut backend = resolve_backend(&cfg.backend, cfg.noise, cfg.seed).stage("backend")?;
    let n_problems = prep.problems.len();
    if let Some(w) = sinks.raw.as_mut() {
        writeln!(w, "{}", RawSeries::header(n_problems))?;
    }
    if let Some(w) = sinks.reads.as_mut() {
        let mut h = String::from("call,read,indicator");
        for i in 0..n_problems {
            write!(h, ",problem_{i}").unwrap();
        }
        writeln!(w, "{h}")?;
    }
    let decode_seed = derive_seed(cfg.seed, DECODE_TAG);
    let mut raw = RawSeries::default();
    let mut logical = Vec::new();
    let mut ind_state = vec![0u8; prep.indicator_compiled.len()];
    for call in 0..cfg.calls {
        let partner = match cfg.mode {
            Mode::Alternate => call % 2,
            _ => 0,
        };
        let prog = &prep.programs[partner];
        let batch = backend.sample(&prog.program, &acfg).stage("sample")?;
        let mut rng = substream(decode_seed, call as u64);
        let mut sums = vec![0.0; n_problems];
        let mut ind_sum = 0.0;
        let mut broken = 0usize;
        let n_chains: usize = prog.members.iter().map(|&i| prep.problems[i].embedding.len()).sum();
        let mut read_energies = vec![f64::NAN; n_problems];
        for (r, state) in batch.states.iter().enumerate() {
            for (&i, dec) in prog.members.iter().zip(&prog.decoders) {
                broken += dec.decode(state, &mut logical, &mut rng);
                let p = &prep.problems[i];
                let e = p.compiled.energy(&logical) + p.offset;
                sums[i] += e;
                read_energies[i] = e;
            }
            for (slot, &hw) in ind_state.iter_mut().zip(&prog.indicator_index) {
                *slot = state[hw];
            }
            let ie = prep.indicator_compiled.energy(&ind_state);
            ind_sum += ie;
            if let Some(w) = sinks.reads.as_mut() {
                write!(w, "{call},{r},{ie}")?;
                for e in &read_energies {
                    write!(w, ",{e}")?;
                }
                writeln!(w)?;
            }
        }
        let reads = batch.len() as f64;
        let means: Vec<f64> = (0..n_problems)
            .map(|i| {
                if prog.members.contains(&i) {
                    sums[i] / reads
                } else {
                    f64::NAN
                }
            })
            .collect();
        let chain_break = if n_chains == 0 {
            0.0
        } else {
            broken as f64 / (n_chains as f64 * reads)
        };
        raw.push(partner, batch.beta_used, chain_break, ind_sum / reads, &means);
        if let Some(w) = sinks.raw.as_mut() {
            writeln!(w, "{}", raw.row(call))?;
        }
    }
    Ok(raw)
}

/// Runs all calls without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RawSeries> {
    let prep = prepare(cfg)?;
    simulate_into(cfg, &prep, &mut Sinks { raw: None, reads: None })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub label: String,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_lags: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: String,
    pub b: String,
    /// Pearson correlation of the moving-averaged series.
    pub pearson: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub burn_in: usize,
    pub gated: usize,
    pub accepted: usize,
    pub accepted_mean: Option<f64>,
    pub overall_mean: Option<f64>,
    pub low_count: usize,
    pub high_count: usize,
    pub low_mean: Option<f64>,
    pub high_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub stats: StatReport,
    pub series: Vec<SeriesStats>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pairwise: Vec<PairCorrelation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gate: Option<GateSummary>,
    pub mean_chain_break: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Autocorrelation table for lags `0..=max_lag`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AcfTable {
    pub labels: Vec<String>,
    pub acf: Vec<Vec<f64>>,
    pub pacf: Vec<Vec<f64>>,
}

impl AcfTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag");
        for l in &self.labels {
            write!(s, ",{l}_acf,{l}_pacf").unwrap();
        }
        s.push('\n');
        let n = self.acf.first().map_or(0, Vec::len);
        for k in 0..n {
            write!(s, "{k}").unwrap();
            for (a, p) in self.acf.iter().zip(&self.pacf) {
                write!(s, ",{},{}", a[k], p[k]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Outcome of analysing a raw table.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub report: RunReport,
    pub gate_log: Option<GateLog>,
    pub store: Option<BurnInStore>,
    pub strata: Option<StratifiedHistogram>,
    pub acf: AcfTable,
}

fn series_stats(label: &str, x: &[f64], lags: LagOrder) -> SeriesStats {
    let adf = adf_test(x, lags).ok();
    SeriesStats {
        label: label.to_string(),
        mean: mean(x),
        adf_stat: adf.map(|r| r.stat),
        adf_p: adf.map(|r| r.p),
        adf_lags: adf.map(|r| r.lags),
    }
}

fn problem_labels(cfg: &ExperimentConfig) -> Vec<String> {
    (0..cfg.problems.len()).map(|i| format!("problem_{i}")).collect()
}

/// Computes every derived statistic from the raw per-call table.
pub fn analyze(cfg: &ExperimentConfig, raw: &RawSeries) -> Result<Analysis> {
    if raw.problems.len() != cfg.problems.len() {
        return Err(Error::Config(format!(
            "raw table has {} problem columns, config has {} problems",
            raw.problems.len(),
            cfg.problems.len()
        )));
    }
    if raw.is_empty() {
        return Err(Error::TooShort("raw table has no calls".into()));
    }
    let a = &cfg.analysis;
    let n = raw.len();
    let w = a.window.min(n);
    let lags = a.lag_order();
    let labels = problem_labels(cfg);
    let mut stats = StatReport {
        window: Some(w),
        calls: Some(n),
        ..Default::default()
    };
    let mut series: Vec<SeriesStats> = Vec::new();
    let mut pairwise = Vec::new();
    let mut gate_log = None;
    let mut store = None;
    let mut strata = None;
    let mut gate = None;

    let ind_stats = series_stats("indicator", &raw.indicator, lags);
    stats.indicator_adf_stat = ind_stats.adf_stat;
    stats.indicator_adf_p = ind_stats.adf_p;

    match cfg.mode {
        Mode::Single | Mode::Trend => {
            for (label, col) in labels.iter().zip(&raw.problems) {
                series.push(series_stats(label, col, lags));
            }
            let p0 = &raw.problems[0];
            stats.adf_stat = series[0].adf_stat;
            stats.adf_p = series[0].adf_p;
            stats.adf_lags = series[0].adf_lags;
            let ma_i = moving_average(&raw.indicator, w)?;
            let ma_p = moving_average(p0, w)?;
            let c = compare(&ma_p, &ma_i)?;
            stats.pearson = c.pearson;
            stats.rmsd = Some(c.rmsd);
            stats.bin_agreement = Some(c.bin_agreement);
            let c = compare(p0, &raw.indicator)?;
            stats.pearson_raw = c.pearson;
            stats.rmsd_raw = Some(c.rmsd);
            stats.bin_agreement_raw = Some(c.bin_agreement);

            if cfg.mode == Mode::Trend {
                let mas = raw
                    .problems
                    .iter()
                    .map(|col| moving_average(col, w))
                    .collect::<Result<Vec<_>>>()?;
                for i in 0..mas.len() {
                    for j in i + 1..mas.len() {
                        pairwise.push(PairCorrelation {
                            a: labels[i].clone(),
                            b: labels[j].clone(),
                            pearson: if w < n { pearson(&mas[i], &mas[j]).ok() } else { None },
                        });
                    }
                }
            } else {
                let (log, final_store) = run_two_phase(p0, &raw.indicator, a.new_store()?, a.threshold)?;
                let (gp, ge) = log.gated_pairs();
                let st = stratify(&gp, &ge, a.low_cut, a.high_cut)?;
                gate = Some(GateSummary {
                    burn_in: a.burn_in,
                    gated: gp.len(),
                    accepted: log.accepted().count(),
                    accepted_mean: log.accepted_mean(),
                    overall_mean: log.overall_mean(),
                    low_count: st.low_set.len(),
                    high_count: st.high_set.len(),
                    low_mean: st.low_mean(),
                    high_mean: st.high_mean(),
                });
                gate_log = Some(log);
                store = Some(final_store);
                strata = Some(st);
            }
        }
        Mode::Alternate => {
            let col = &raw.problems;
            let mut tagged: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for (call, &p) in raw.partner.iter().enumerate() {
                if p > 1 {
                    return Err(Error::Config(format!("partner {p} at call {call} in alternating run")));
                }
                tagged[p].push(raw.indicator[call]);
            }
            for (i, label) in labels.iter().enumerate() {
                let own: Vec<f64> = (0..n).filter(|&c| raw.partner[c] == i).map(|c| col[i][c]).collect();
                series.push(series_stats(label, &own, lags));
            }
            if let Ok(ks) = ks_two_sample(&tagged[0], &tagged[1]) {
                stats.ks_stat = Some(ks.stat);
                stats.ks_p = Some(ks.p);
            }
        }
    }
    series.push(ind_stats);

    let acf_lags = a.acf_lags.min(n.saturating_sub(1));
    let mut table = AcfTable::default();
    let cols: Vec<(&str, &[f64])> = match cfg.mode {
        Mode::Alternate => vec![("indicator", &raw.indicator)],
        _ => std::iter::once(("indicator", raw.indicator.as_slice()))
            .chain(
                labels
                    .iter()
                    .map(String::as_str)
                    .zip(raw.problems.iter().map(Vec::as_slice)),
            )
            .collect(),
    };
    for (label, x) in cols {
        table.labels.push(label.to_string());
        table.acf.push(acf(x, acf_lags)?);
        table.pacf.push(crate::timeseries::pacf(x, acf_lags)?);
    }

    stats.validate()?;
    Ok(Analysis {
        report: RunReport {
            mode: cfg.mode,
            stats,
            series,
            pairwise,
            gate,
            mean_chain_break: mean(&raw.chain_break),
        },
        gate_log,
        store,
        strata,
        acf: table,
    })
}

/// Files written by a run, plus their in-memory contents.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub raw: RawSeries,
    pub analysis: Analysis,
    pub files: Vec<PathBuf>,
}

impl RunArtifacts {
    pub fn report(&self) -> &RunReport {
        &self.analysis.report
    }
}

fn strata_csv(st: &StratifiedHistogram) -> String {
    let mut s = String::from("stratum,energy\n");
    for v in &st.low_set {
        writeln!(s, "low,{v}").unwrap();
    }
    for v in &st.high_set {
        writeln!(s, "high,{v}").unwrap();
    }
    s
}

fn write_analysis(dir: &Path, analysis: &Analysis) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    put(REPORT_FILE, analysis.report.to_json()?)?;
    put(ACF_FILE, analysis.acf.to_csv())?;
    if let Some(log) = &analysis.gate_log {
        put(GATE_FILE, log.to_csv())?;
    }
    if let Some(store) = &analysis.store {
        put(STORE_FILE, store.to_json()?)?;
    }
    if let Some(st) = &analysis.strata {
        put(STRATA_FILE, strata_csv(st))?;
    }
    Ok(files)
}

/// Runs the experiment described by `cfg` and writes its artifacts to
/// `cfg.output_dir`. On a failure during the calls, the rows written so far
/// stay in `raw.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let prep = prepare(cfg)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).stage("output")?;
    let mut files = vec![dir.join(CONFIG_FILE), dir.join(RAW_FILE)];
    cfg.save(&files[0]).stage("output")?;
    let mut sinks = Sinks {
        raw: Some(BufWriter::new(File::create(&files[1]).stage("output")?)),
        reads: None,
    };
    if cfg.persist_reads {
        let path = dir.join(READS_FILE);
        sinks.reads = Some(BufWriter::new(File::create(&path).stage("output")?));
        files.push(path);
    }
    let result = simulate_into(cfg, &prep, &mut sinks);
    sinks.flush().stage("output")?;
    drop(sinks);
    let raw = result?;
    let analysis = analyze(cfg, &raw).stage("analysis")?;
    files.extend(write_analysis(&dir, &analysis).stage("output")?);
    Ok(RunArtifacts {
        dir,
        raw,
        analysis,
        files,
    })
}

/// [`run_experiment`] with the mode forced to [`Mode::Trend`].
pub fn run_parallel_trend(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Trend;
    run_experiment(&cfg)
}

/// [`run_experiment`] with the mode forced to [`Mode::Alternate`].
pub fn run_alternating(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Alternate;
    run_experiment(&cfg)
}

/// Recomputes the analysis of a finished run from its `config.toml` and
/// `raw.csv` and rewrites the derived files.
pub fn reanalyze(dir: impl AsRef<Path>) -> Result<RunArtifacts> {
    let dir = dir.as_ref();
    let cfg = ExperimentConfig::load(dir.join(CONFIG_FILE)).stage("config")?;
    let raw = RawSeries::read_file(dir.join(RAW_FILE)).stage("raw")?;
    let analysis = analyze(&cfg, &raw).stage("analysis")?;
    let files = write_analysis(dir, &analysis).stage("output")?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        raw,
        analysis,
        files,
    })
}

pub const PLOTS: &[&str] = &["timeseries", "histogram", "agreement", "acf"];

fn pair_csv(x: &[f64], y: &[f64]) -> String {
    let mut s = String::from("problem_norm,indicator_norm\n");
    for (a, b) in x.iter().zip(y) {
        writeln!(s, "{a},{b}").unwrap();
    }
    s
}

/// Writes plot-ready CSVs for `which` (one of [`PLOTS`]) into the run
/// directory and returns their paths.
pub fn export_plot_data(dir: impl AsRef<Path>, which: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if !PLOTS.contains(&which) {
        return Err(Error::InvalidArgument(format!(
            "unknown plot '{which}'; expected one of {}",
            PLOTS.join(", ")
        )));
    }
    let cfg = ExperimentConfig::load(dir.join(CONFIG_FILE)).stage("config")?;
    let raw = RawSeries::read_file(dir.join(RAW_FILE)).stage("raw")?;
    let mut out = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        out.push(path);
        Ok(())
    };
    let aligned = |p: &[f64], i: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let y = minmax_normalize(i);
        let x = mean_align(&minmax_normalize(p), &y)?;
        Ok((x, y))
    };
    let problem = raw
        .problems
        .first()
        .filter(|_| cfg.mode != Mode::Alternate)
        .ok_or_else(|| Error::InvalidArgument(format!("plot '{which}' needs a single or trend run")));
    match which {
        "timeseries" => {
            let p = problem?;
            let (x, y) = aligned(p, &raw.indicator)?;
            put("plot_timeseries_raw.csv".into(), pair_csv(&x, &y))?;
            let w = cfg.effective_window();
            let (x, y) = aligned(&moving_average(p, w)?, &moving_average(&raw.indicator, w)?)?;
            put("plot_timeseries_ma.csv".into(), pair_csv(&x, &y))?;
        }
        "histogram" => {
            let analysis = analyze(&cfg, &raw)?;
            let st = analysis
                .strata
                .ok_or_else(|| Error::InvalidArgument("histogram needs a single-problem run".into()))?;
            let h = st.histogram(cfg.analysis.bins);
            let mut s = String::from("bin_lo,bin_hi,low_count,high_count\n");
            for b in 0..h.low.len() {
                writeln!(s, "{},{},{},{}", h.edges[b], h.edges[b + 1], h.low[b], h.high[b]).unwrap();
            }
            put("plot_histogram.csv".into(), s)?;
        }
        "agreement" => {
            let p = problem?;
            let w = cfg.effective_window();
            let x = minmax_normalize(&moving_average(p, w)?);
            let y = minmax_normalize(&moving_average(&raw.indicator, w)?);
            let m = bin_confusion(&x, &y)?;
            let mut s = String::from("problem_bin,indicator_bin,proportion\n");
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    writeln!(s, "{i},{j},{v}").unwrap();
                }
            }
            put("plot_agreement.csv".into(), s)?;
        }
        _ => {
            let analysis = analyze(&cfg, &raw)?;
            put("plot_acf.csv".into(), analysis.acf.to_csv())?;
        }
    }
    Ok(out)
}
