use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use idlepi::embedding::{chimera_clique_embedding, complete_edges, validate_embedding};
use idlepi::experiment::{export_plot_data, reanalyze, run_experiment, ExperimentConfig, Mode, RunArtifacts, PLOTS};
use idlepi::monitor::BurnInStore;
use idlepi::topology::{chimera, HardwareGraph};

#[derive(Parser)]
#[command(name = "idlepi", version, about = "Noise indicators on idle annealer qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Chimera hardware graph file.
    Topology {
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 4)]
        t: u32,
        /// Comma-separated qubits to remove.
        #[arg(long, value_delimiter = ',')]
        defects: Vec<u32>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build and validate a clique embedding.
    Embed {
        #[arg(long)]
        k: usize,
        /// Chimera size (ignored when --graph is given).
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Run several disjoint problems on shared calls.
    Trend(RunArgs),
    /// Run two problems on alternate calls.
    Alternate(RunArgs),
    /// Recompute report and derived files of a finished run.
    Analyze { dir: PathBuf },
    /// Rank or gate indicator energies against a stored history.
    Monitor {
        #[arg(long)]
        store: PathBuf,
        /// Burn-in length for a new store.
        #[arg(long, default_value_t = 10)]
        burn_in: usize,
        /// Acceptance threshold in (0, 1); without it only ranks are printed.
        #[arg(long)]
        tau: Option<f64>,
        /// Report without adding the values to the history.
        #[arg(long)]
        dry_run: bool,
        #[arg(required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Write plot-ready CSVs for a finished run.
    Export {
        dir: PathBuf,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PLOTS))]
        plot: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; built-in defaults for the subcommand when omitted.
    config: Option<PathBuf>,
    #[arg(long)]
    calls: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reads: Option<usize>,
    /// Metropolis sweeps per read.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Noise volatility (0 freezes the temperature).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn resolve(&self, mode: Option<Mode>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("config: {}", path.display()))?,
            None => match mode {
                Some(Mode::Trend) => ExperimentConfig::trend_default(),
                Some(Mode::Alternate) => ExperimentConfig::alternate_default(),
                _ => ExperimentConfig::single_default(),
            },
        };
        if let Some(mode) = mode {
            cfg.mode = mode;
        }
        if let Some(v) = self.calls {
            cfg.calls = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.reads {
            cfg.anneal.num_reads = v;
        }
        if let Some(v) = self.sweeps {
            cfg.anneal.sweeps = v;
        }
        if let Some(v) = self.sigma {
            cfg.noise.volatility = v;
        }
        if let Some(v) = &self.output {
            cfg.output_dir = v.clone();
        }
        cfg.validate().context("config")?;
        Ok(cfg)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn summarize(a: &RunArtifacts) {
    let r = a.report();
    let s = &r.stats;
    println!("wrote {} files to {}", a.files.len(), a.dir.display());
    println!(
        "calls {}  window {}  chain breaks {:.4}",
        a.raw.len(),
        s.window.unwrap_or(0),
        r.mean_chain_break
    );
    match r.mode {
        Mode::Single => {
            println!(
                "pearson {}  rmsd {}  bin agreement {}",
                fmt_opt(s.pearson),
                fmt_opt(s.rmsd),
                fmt_opt(s.bin_agreement)
            );
            if let Some(g) = &r.gate {
                println!(
                    "gate: {} of {} accepted, accepted mean {}, overall mean {}",
                    g.accepted,
                    g.gated,
                    fmt_opt(g.accepted_mean),
                    fmt_opt(g.overall_mean)
                );
            }
        }
        Mode::Trend => {
            for p in &r.pairwise {
                println!("{} ~ {}: pearson {}", p.a, p.b, fmt_opt(p.pearson));
            }
        }
        Mode::Alternate => {
            println!("ks stat {}  p {}", fmt_opt(s.ks_stat), fmt_opt(s.ks_p));
        }
    }
    for st in &r.series {
        println!("{}: mean {:.4}  adf p {}", st.label, st.mean, fmt_opt(st.adf_p));
    }
}

fn run_mode(args: &RunArgs, mode: Option<Mode>) -> Result<()> {
    let cfg = args.resolve(mode)?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let artifacts = run_experiment(&cfg)?;
    summarize(&artifacts);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Topology { m, t, defects, output } => {
            let mut g = chimera(m, t).context("topology")?;
            if !defects.is_empty() {
                g = g.apply_defects(&defects.into_iter().collect()).context("topology")?;
            }
            g.write_file(&output).context("output")?;
            println!(
                "{} qubits, {} couplers -> {}",
                g.num_nodes(),
                g.num_couplers(),
                output.display()
            );
        }
        Command::Embed { k, m, graph, output } => {
            let g = match graph {
                Some(path) => HardwareGraph::read_file(&path).context("topology")?,
                None => chimera(m, 4).context("topology")?,
            };
            let e = chimera_clique_embedding(&g, k).context("embedding")?;
            let report = validate_embedding(&e, &g, &complete_edges(k));
            if !report.is_valid() {
                bail!("embedding: {}", report.violations[0]);
            }
            e.write_file(&output).context("output")?;
            println!(
                "K_{k}: {} qubits, max chain length {} -> {}",
                e.footprint().len(),
                e.max_chain_length(),
                output.display()
            );
        }
        Command::Run(args) => run_mode(&args, None)?,
        Command::Trend(args) => run_mode(&args, Some(Mode::Trend))?,
        Command::Alternate(args) => run_mode(&args, Some(Mode::Alternate))?,
        Command::Analyze { dir } => summarize(&reanalyze(&dir)?),
        Command::Monitor {
            store,
            burn_in,
            tau,
            dry_run,
            values,
        } => {
            let mut s = if store.exists() {
                BurnInStore::load(&store).context("store")?
            } else {
                BurnInStore::new(burn_in)
            };
            for v in values {
                let line = match tau {
                    Some(tau) if s.is_ready() => match s.gate(v, tau) {
                        Ok(d) => format!(
                            "{v}\t{}\te={:.4}\tpercentile={:.4}",
                            if d.accept { "accept" } else { "reject" },
                            d.normalized_e,
                            d.percentile
                        ),
                        Err(e) => format!("{v}\tburn-in\t{e}"),
                    },
                    _ => match s.percentile_rank(v) {
                        Ok(p) => format!("{v}\tpercentile={p:.4}"),
                        Err(_) => format!("{v}\tburn-in\t{}/{}", s.len(), s.burn_in()),
                    },
                };
                println!("{line}");
                if !dry_run {
                    s.observe(v);
                }
            }
            if !dry_run {
                s.save(&store).context("store")?;
            }
        }
        Command::Export { dir, plot } => {
            let plots: BTreeSet<&str> = if plot.is_empty() {
                PLOTS.iter().copied().collect()
            } else {
                plot.iter().map(String::as_str).collect()
            };
            for which in plots {
                match export_plot_data(&dir, which) {
                    Ok(files) => files.iter().for_each(|f| println!("{}", f.display())),
                    Err(e) if plot.is_empty() => eprintln!("skipped {which}: {e}"),
                    Err(e) => return Err(e).context("export"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
