//! Command-line front end for `percolate`.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use percolate::graph::{read_edge_list, read_gml, read_labels};
use percolate::{
    estimate_block_probs, generate_sbm, load_partitioned_edge_list, meanfield_trajectory,
    percolation_threshold, Estimator, Graph, IngestOptions, Simulator,
};
use serde::Serialize;
use toml::{Table, Value};

pub mod config;
pub mod output;
pub mod sweep;

use config::{merge, parse_override, preset, set_path, Config};
use output::{resolve, CsvTable};
use sweep::{run_sweep, Parallelism, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<percolate::Error> for CliError {
    fn from(e: percolate::Error) -> Self {
        use percolate::Error as E;
        match e {
            E::Parameter { .. } | E::Placement(_) | E::NotProbability(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "percolate",
    version,
    about = "Competitive influence dynamics and percolation thresholds on block-model networks",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Only print warnings and errors on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Built-in scenario applied before the config file: one-eager,
    /// two-competing or polblogs.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a dotted key, e.g. `scenario.block_seed_fractions.3.1=0.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// scenario.beta
    #[arg(long)]
    pub beta: Option<f64>,
    /// scenario.theta
    #[arg(long)]
    pub theta: Option<f64>,
    /// scenario.rng_seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// graph.seed
    #[arg(long)]
    pub graph_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    PerPair,
    EdgeFraction,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a block-model graph and write it as JSON.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Read a labeled edge list (or GML), clean and prune it, write a graph.
    Ingest {
        /// Whitespace-separated node pairs, `#` comments.
        #[arg(long, requires = "labels", conflicts_with = "gml")]
        edges: Option<PathBuf>,
        /// `node block` lines, blocks numbered from 1.
        #[arg(long, requires = "edges")]
        labels: Option<PathBuf>,
        /// GML file whose node `value` (0-based) is the block label.
        #[arg(long, required_unless_present = "edges")]
        gml: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        min_degree: usize,
        /// Prune low-degree nodes once instead of until stable.
        #[arg(long)]
        single_pass: bool,
        #[arg(long, short)]
        output: PathBuf,
        /// Dense id to original id table; defaults next to the output.
        #[arg(long)]
        id_map: Option<PathBuf>,
    },
    /// Estimate block probabilities of a graph file.
    Estimate {
        #[arg(long, short)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorChoice::PerPair)]
        estimator: EstimatorChoice,
        /// Shorthand for `--estimator edge-fraction`.
        #[arg(long, conflicts_with = "estimator")]
        edge_fraction: bool,
    },
    /// Run one simulation.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Graph file; otherwise a graph is generated from `graph.*`.
        #[arg(long, short)]
        graph: Option<PathBuf>,
        /// Result JSON; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Trajectory CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Run until `scenario.end_time` regardless of convergence.
        #[arg(long)]
        full_time: bool,
    },
    /// Mean-field percolation threshold.
    Threshold {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Candidate solving for its threshold (threshold.candidate).
        #[arg(long)]
        candidate: Option<usize>,
        /// Print the JSON report instead of the number.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Mean-field trajectory of the average undecided preference.
    Trajectory {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// CSV file; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a parameter sweep with replicas.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        graph: Option<PathBuf>,
        /// CSV file (sweep.output); a JSON summary is written beside it.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, conflicts_with = "threads")]
        serial: bool,
        /// Worker threads; all cores by default.
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn layered(args: &ConfigArgs, quiet: bool) -> Result<(Table, Config), CliError> {
    let mut table = Table::new();
    if let Some(name) = &args.preset {
        merge(&mut table, preset(name)?);
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        merge(&mut table, file);
    }
    for s in &args.sets {
        let (k, v) = parse_override(s)?;
        set_path(&mut table, &k, v)?;
    }
    let flags = [
        ("scenario.beta", args.beta.map(Value::Float)),
        ("scenario.theta", args.theta.map(Value::Float)),
        (
            "scenario.rng_seed",
            args.seed.map(|s| Value::Integer(s as i64)),
        ),
        (
            "graph.seed",
            args.graph_seed.map(|s| Value::Integer(s as i64)),
        ),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            set_path(&mut table, key, v)?;
        }
    }
    let cfg = Config::from_table(&table)?;
    if !quiet {
        eprintln!("# resolved configuration\n{}", cfg.to_toml().trim_end());
    }
    Ok((table, cfg))
}

fn read_graph(path: &Path) -> Result<Graph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(Graph::from_json(&text)?)
}

fn load_graph(cfg: &Config, flag: Option<&Path>) -> Result<Graph, CliError> {
    match flag.or(cfg.graph.file.as_deref()) {
        Some(path) => read_graph(path),
        None => {
            let params = cfg.params()?.ok_or_else(|| {
                CliError::Usage("missing required key graph.n (or pass --graph)".into())
            })?;
            Ok(generate_sbm(&params, cfg.graph.seed)?)
        }
    }
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| CliError::Runtime(e.to_string()))
}

fn say(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct GraphSummary {
    nodes: usize,
    edges: usize,
    block_sizes: Vec<usize>,
}

impl GraphSummary {
    fn of(g: &Graph) -> Self {
        GraphSummary {
            nodes: g.node_count(),
            edges: g.edge_count(),
            block_sizes: g.block_sizes(),
        }
    }
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    parameters: &'a Config,
    candidates: usize,
    votes: Vec<usize>,
    vote_fractions: Vec<f64>,
    seeded_votes: Vec<usize>,
    undecided_count: usize,
    event_count: u64,
    final_time: f64,
    early_stopped: bool,
    wall_time_secs: f64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Generate { cfg, output } => {
            let (_, cfg) = layered(&cfg, quiet)?;
            let params = cfg.require_params()?;
            let g = generate_sbm(&params, cfg.graph.seed)?;
            let path = resolve(&output);
            let mut w = output::create(&path)?;
            w.write_all(g.to_json().as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(&path, e))?;
            print_json(out, &GraphSummary::of(&g))
        }
        Command::Ingest {
            edges,
            labels,
            gml,
            min_degree,
            single_pass,
            output,
            id_map,
        } => {
            let (edge_list, label_map) = match (edges, labels, gml) {
                (Some(e), Some(l), None) => {
                    let open = |p: &Path| {
                        fs::File::open(p)
                            .map(BufReader::new)
                            .map_err(|e| CliError::io(p, e))
                    };
                    (read_edge_list(open(&e)?)?, read_labels(open(&l)?)?)
                }
                (None, None, Some(g)) => {
                    let text = fs::read_to_string(&g).map_err(|e| CliError::io(&g, e))?;
                    read_gml(&text)?
                }
                _ => {
                    return Err(CliError::Usage(
                        "give --edges with --labels, or --gml".into(),
                    ))
                }
            };
            let opts = IngestOptions {
                min_degree,
                iterative: !single_pass,
            };
            let loaded = load_partitioned_edge_list(edge_list, &label_map, opts)?;
            let path = resolve(&output);
            let mut w = output::create(&path)?;
            w.write_all(loaded.graph.to_json().as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(&path, e))?;
            let map_path = id_map
                .map(|p| resolve(&p))
                .unwrap_or_else(|| path.with_extension("ids.csv"));
            let mut ids = CsvTable::new(vec!["id".into(), "original_id".into(), "block".into()]);
            for (i, orig) in loaded.original_ids.iter().enumerate() {
                ids.push(vec![
                    i.to_string(),
                    orig.clone(),
                    (loaded.graph.block_of(i) + 1).to_string(),
                ]);
            }
            ids.write(&map_path)?;
            #[derive(Serialize)]
            struct Ingested<'a> {
                #[serde(flatten)]
                summary: GraphSummary,
                stats: &'a percolate::PruneStats,
                id_map: String,
            }
            print_json(
                out,
                &Ingested {
                    summary: GraphSummary::of(&loaded.graph),
                    stats: &loaded.stats,
                    id_map: map_path.display().to_string(),
                },
            )
        }
        Command::Estimate {
            graph,
            estimator,
            edge_fraction,
        } => {
            let g = read_graph(&graph)?;
            let choice = if edge_fraction {
                EstimatorChoice::EdgeFraction
            } else {
                estimator
            };
            match choice {
                EstimatorChoice::PerPair => {
                    print_json(out, &estimate_block_probs(&g, Estimator::PerPair)?)
                }
                EstimatorChoice::EdgeFraction => {
                    print_json(out, &estimate_block_probs(&g, Estimator::EdgeFraction)?)
                }
                EstimatorChoice::Both => print_json(
                    out,
                    &[
                        estimate_block_probs(&g, Estimator::PerPair)?,
                        estimate_block_probs(&g, Estimator::EdgeFraction)?,
                    ],
                ),
            }
        }
        Command::Simulate {
            cfg,
            graph,
            output,
            trajectory,
            full_time,
        } => {
            let (_, cfg) = layered(&cfg, quiet)?;
            let g = load_graph(&cfg, graph.as_deref())?;
            let mut sc = cfg.scenario_config(&g)?;
            if full_time {
                sc.early_stop = None;
            }
            let traj_path = trajectory.map(|p| resolve(&p));
            let out_path = output.map(|p| resolve(&p));
            for p in traj_path.iter().chain(&out_path) {
                output::ensure_writable(p)?;
            }
            let k = sc.candidates;
            let res = Simulator::new(&g, sc)?.run()?;
            if let Some(p) = &traj_path {
                output::trajectory_table(
                    res.trajectory.iter().map(|tp| (tp.time, tp.h.clone())),
                    k,
                )
                .write(p)?;
            }
            let report = SimulationReport {
                parameters: &cfg,
                candidates: k,
                vote_fractions: res.vote_fractions(),
                votes: res.votes,
                seeded_votes: res.seeded_votes,
                undecided_count: res.undecided_count,
                event_count: res.event_count,
                final_time: res.final_time,
                early_stopped: res.early_stopped,
                wall_time_secs: res.wall_time_secs,
            };
            match &out_path {
                Some(p) => output::write_json(p, &report),
                None => print_json(out, &report),
            }
        }
        Command::Threshold {
            cfg,
            candidate,
            json,
            output,
        } => {
            let (_, cfg) = layered(&cfg, quiet)?;
            let sc = cfg.meanfield()?;
            let k = candidate.unwrap_or(cfg.threshold.candidate);
            if k == 0 || k > sc.candidates() {
                return Err(CliError::Usage(format!(
                    "candidate {k} is not in 1..={}",
                    sc.candidates()
                )));
            }
            let report = percolation_threshold(&sc, k - 1, None)?;
            if !report.condition_holds {
                warn!(
                    "theorem assumptions unmet: nonnegativity margin {} < 0",
                    report.condition_margin
                );
            }
            if !report.initially_top {
                warn!("theorem assumptions unmet: candidate {k} is not initially top-ranked");
            }
            if let Some(p) = &output {
                output::write_json(&resolve(p), &report)?;
            }
            if json {
                print_json(out, &report)
            } else {
                match report.threshold {
                    Some(t) => say(out, t),
                    None => say(out, "infeasible"),
                }
            }
        }
        Command::Trajectory {
            cfg,
            max_iters,
            eps,
            output,
        } => {
            let (_, cfg) = layered(&cfg, quiet)?;
            let sc = cfg.meanfield()?;
            let tr = meanfield_trajectory(
                &sc,
                max_iters.unwrap_or(cfg.trajectory.max_iters),
                eps.unwrap_or(cfg.trajectory.eps),
            )?;
            if !tr.converged {
                warn!("no convergence within {} iterations", tr.iterations);
            }
            let table = output::trajectory_table(
                tr.h.iter().enumerate().map(|(i, h)| (i as f64, h.clone())),
                sc.candidates(),
            );
            match output {
                Some(p) => table.write(&resolve(&p)),
                None => table.write_to(out),
            }
        }
        Command::Sweep {
            cfg,
            graph,
            output,
            serial,
            threads,
        } => {
            let (table, cfg) = layered(&cfg, quiet)?;
            let spec = SweepSpec::from_config(&table, &cfg)?;
            let path = output.or_else(|| cfg.sweep.output.clone()).ok_or_else(|| {
                CliError::Usage("missing required key sweep.output (or pass --output)".into())
            })?;
            let path = resolve(&path);
            output::ensure_writable(&path)?;
            output::ensure_writable(&sweep::summary_path(&path))?;
            let g = load_graph(&cfg, graph.as_deref())?;
            let par = if serial {
                Parallelism::Serial
            } else {
                Parallelism::Threads(threads)
            };
            let result = run_sweep(&spec, &g, par)?;
            result.write(&path)?;
            for m in &result.measured {
                let theory = result
                    .theory
                    .iter()
                    .find(|t| t.beta == m.beta)
                    .and_then(|t| t.threshold)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "n/a".into());
                let measured = m
                    .threshold
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "none".into());
                say(
                    out,
                    format!(
                        "beta={} measured={} (+/- {}) theory={}",
                        m.beta, measured, m.uncertainty, theory
                    ),
                )?;
            }
            Ok(())
        }
    }
}
