use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use graphmix_core::diagnostics::SweepOptions;
use graphmix_core::edge_model::{gamma_lower_bound, stopping_steps};
use graphmix_core::ensemble::{
    continuous_ensemble, diagnose, generate_replica, gelman_rubin_run, DiagnoseOptions, GrOptions, Track,
};
use graphmix_core::graph::write_edge_list;
use graphmix_core::metrics::{all_metrics, diameter, global_clustering};
use graphmix_core::{load_graph, ChainStats, Error, LoadedGraph, Mode};

const MANIFEST_SCHEMA: u32 = 1;
const SEED_SCHEME: &str = "splitmix64 finalizer of master + (index + 1) * 0x9E3779B97F4A7C15";

#[derive(Parser)]
#[command(name = "graphmix", version, about = "Edge-swap Markov chains over simple graphs")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "GRAPHMIX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the stopping time for a target accuracy.
    Plan(PlanArgs),
    /// Generate an ensemble of rewired graphs.
    Generate(GenerateArgs),
    /// Run the edge independence sweep on one long chain.
    Diagnose(DiagnoseArgs),
    /// Multi-chain Gelman-Rubin check.
    Gr(GrArgs),
    /// Clustering, diameter and largest Laplacian eigenvalue per graph.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    input: PathBuf,
    /// Reject self-loops and repeated pairs instead of dropping them.
    #[arg(long)]
    strict: bool,
}

impl InputArgs {
    fn load(&self) -> graphmix_core::Result<LoadedGraph> {
        let loaded = load_graph(&self.input, !self.strict)?;
        let r = &loaded.report;
        if r.self_loops + r.duplicates > 0 {
            eprintln!(
                "note: dropped {} self-loops and {} repeated pairs from {}",
                r.self_loops,
                r.duplicates,
                self.input.display()
            );
        }
        Ok(loaded)
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Number of undirected edges.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    edges: Option<u64>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,
    #[arg(long, default_value = "dd")]
    mode: Mode,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "dd")]
    mode: Mode,
    #[arg(long)]
    count: usize,
    /// Target accuracy; sets the chain length from the stopping rule.
    #[arg(long, value_parser = parse_epsilon, conflicts_with = "steps", required_unless_present = "steps")]
    epsilon: Option<f64>,
    /// Explicit chain length.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Sample one long chain every N steps instead of restarting from the input.
    #[arg(long)]
    continuous: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "dd")]
    mode: Mode,
    /// Comma-separated thinning factors; a trailing `m` multiplies by the edge
    /// count (e.g. `1m,2m,4m`). Default: 1m,2m,4m (dd) or 1m,5m,10m,15m (jdd).
    #[arg(long)]
    k_schedule: Option<String>,
    /// `all` or `sample:p`. Default: all up to 10^4 edges, else sample:0.1.
    #[arg(long)]
    track: Option<String>,
    /// Chain length. Default: 2000 times the largest thinning factor.
    #[arg(long)]
    chain_steps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report.json and fraction.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GrArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "dd")]
    mode: Mode,
    /// Burn between consecutive starting graphs. Default: 100 m.
    #[arg(long)]
    disperse_steps: Option<u64>,
    #[arg(long, default_value_t = 3, value_parser = parse_chains)]
    chains: usize,
    /// Recorded values per chain.
    #[arg(long, default_value_t = 2000)]
    series_length: u64,
    /// Steps between recorded values. Default: m.
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    track: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 3 when the largest R-hat exceeds this.
    #[arg(long, default_value_t = 1.1)]
    threshold: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Edge-list files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let e: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if e > 0.0 && e < 1.0 {
        Ok(e)
    } else {
        Err(format!("epsilon must lie in (0, 1), got {s}"))
    }
}

fn parse_chains(s: &str) -> Result<usize, String> {
    let c: usize = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if c < 2 {
        return Err("at least two chains are needed".into());
    }
    Ok(c)
}

/// Data and I/O failures exit with 2, usage problems with 1.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Usage(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

/// 0 on success, 3 when results were written but a convergence check failed.
type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Generate(a) => generate(a),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Gr(a) => gr(a),
        Command::Metrics(a) => metrics(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn track_for(policy: Option<&str>, m: usize) -> graphmix_core::Result<Track> {
    policy.map_or(Ok(Track::default_for(m)), Track::parse)
}

fn plan(a: PlanArgs) -> Outcome {
    let m = match (a.edges, &a.input) {
        (Some(m), _) => m,
        (None, Some(path)) => load_graph(path, true)?.graph.m() as u64,
        (None, None) => unreachable!("clap requires one of --edges and --input"),
    };
    if m == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("edge count must be positive")));
    }
    let n = stopping_steps(m, a.epsilon, a.mode)?;
    let gamma = gamma_lower_bound(m, a.mode);
    let mut out = io::stdout().lock();
    let res: io::Result<()> = (|| {
        writeln!(out, "mode            {}", a.mode)?;
        writeln!(out, "edges (m)       {m}")?;
        writeln!(out, "epsilon         {:e}", a.epsilon)?;
        writeln!(out, "gamma bound     {gamma:e}")?;
        writeln!(out, "N               {n}  (~{:.3} m)", n as f64 / m as f64)?;
        writeln!(out)?;
        writeln!(out, "multiple   steps        epsilon")?;
        for mult in [0.5, 1.0, 5.0, 7.5, 10.0, 15.0] {
            let steps = (mult * m as f64).round();
            let eps = (-steps * gamma).exp();
            writeln!(out, "{mult:>6} m  {steps:<11}  {eps:.3e}")?;
        }
        Ok(())
    })();
    res.context("writing to stdout")?;
    Ok(0)
}

#[derive(Serialize)]
struct ReplicaEntry {
    index: usize,
    file: String,
    stats: ChainStats,
}

#[derive(Serialize)]
struct Manifest {
    schema: u32,
    tool: &'static str,
    version: &'static str,
    input: String,
    mode: Mode,
    seed: u64,
    seed_scheme: &'static str,
    epsilon: Option<f64>,
    steps: u64,
    count: usize,
    continuous: bool,
    m: usize,
    n: usize,
    replicas: Vec<ReplicaEntry>,
}

fn replica_file(index: usize) -> String {
    format!("replica_{index:05}.edges")
}

fn generate(a: GenerateArgs) -> Outcome {
    let loaded = a.input.load()?;
    let g = &loaded.graph;
    let steps = match (a.steps, a.epsilon) {
        (Some(s), _) => s,
        (None, Some(eps)) => stopping_steps(g.m() as u64, eps, a.mode)?,
        (None, None) => unreachable!("clap requires one of --epsilon and --steps"),
    };
    create_dir(&a.out_dir)?;
    let ids = Some(loaded.ids.as_slice());
    let replicas: Vec<ReplicaEntry> = if a.continuous {
        let mut entries = Vec::with_capacity(a.count);
        continuous_ensemble(g, a.mode, steps, a.count, a.seed, |r| {
            let file = replica_file(r.index);
            write_edge_list(a.out_dir.join(&file), &r.graph, ids)?;
            entries.push(ReplicaEntry {
                index: r.index,
                file,
                stats: r.stats,
            });
            Ok(())
        })?;
        entries
    } else {
        (0..a.count)
            .into_par_iter()
            .map(|i| {
                let r = generate_replica(g, a.mode, steps, a.seed, i)?;
                let file = replica_file(i);
                write_edge_list(a.out_dir.join(&file), &r.graph, ids)?;
                Ok(ReplicaEntry {
                    index: i,
                    file,
                    stats: r.stats,
                })
            })
            .collect::<graphmix_core::Result<_>>()?
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        input: a.input.input.display().to_string(),
        mode: a.mode,
        seed: a.seed,
        seed_scheme: SEED_SCHEME,
        epsilon: a.epsilon,
        steps,
        count: a.count,
        continuous: a.continuous,
        m: g.m(),
        n: g.n(),
        replicas,
    };
    let json = serde_json::to_vec_pretty(&manifest).context("serializing manifest")?;
    write_file(&a.out_dir.join("manifest.json"), &json)?;
    eprintln!("wrote {} graphs of {steps} steps to {}", a.count, a.out_dir.display());
    Ok(0)
}

fn parse_schedule(s: &str, m: u64) -> anyhow::Result<Vec<u64>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (num, scale) = match tok.strip_suffix('m') {
                Some(n) => (n, m as f64),
                None => (tok, 1.0),
            };
            let x: f64 = num
                .parse()
                .with_context(|| format!("thinning factor `{tok}` is not a number"))?;
            let k = (x * scale).round();
            if k.is_nan() || k < 1.0 {
                bail!("thinning factor `{tok}` is below 1");
            }
            Ok(k as u64)
        })
        .collect()
}

fn diagnose_cmd(a: DiagnoseArgs) -> Outcome {
    let loaded = a.input.load()?;
    let g = &loaded.graph;
    let m = g.m() as u64;
    let default_schedule = match a.mode {
        Mode::Dd => "1m,2m,4m",
        Mode::Jdd => "1m,5m,10m,15m",
    };
    let schedule = parse_schedule(a.k_schedule.as_deref().unwrap_or(default_schedule), m).map_err(Failure::Usage)?;
    let sweep = SweepOptions::new(schedule)?;
    let top = *sweep.schedule.last().unwrap();
    let steps = a.chain_steps.unwrap_or(top.saturating_mul(2000));
    let opts = DiagnoseOptions {
        mode: a.mode,
        steps,
        sweep,
        track: track_for(a.track.as_deref(), g.m())?,
        seed: a.seed,
    };
    let mut report = diagnose(g, &opts)?;
    // report vertices under their original ids
    let id = |v: u32| loaded.ids[v as usize] as u32;
    let relabel_ok = loaded.ids.iter().all(|&x| x <= u32::MAX as u64);
    if relabel_ok {
        for e in &mut report.sweep.edges {
            (e.u, e.v) = (id(e.u), id(e.v));
        }
        for p in &mut report.frozen {
            *p = (id(p.0), id(p.1));
        }
    }
    create_dir(&a.out)?;
    let json = serde_json::to_vec_pretty(&report).context("serializing report")?;
    write_file(&a.out.join("report.json"), &json)?;
    write_file(&a.out.join("fraction.csv"), report.sweep.curve_csv().as_bytes())?;
    println!("tracked {} edges ({} frozen), {} steps", report.tracked, report.frozen.len(), steps);
    for (k, f) in report.sweep.schedule.iter().zip(&report.sweep.fraction_independent) {
        println!("k = {k:<10} ({:.2} m)  independent {f:.4}", *k as f64 / m as f64);
    }
    println!("unresolved {}", report.sweep.unresolved);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if report.warnings.is_empty() { 0 } else { 3 })
}

fn gr(a: GrArgs) -> Outcome {
    let loaded = a.input.load()?;
    let g = &loaded.graph;
    let m = g.m() as u64;
    let disperse_steps = a.disperse_steps.unwrap_or_else(|| {
        eprintln!("warning: using a desk-scale burn of 100 m steps between starts; the full protocol uses 10000 m");
        100 * m
    });
    let opts = GrOptions {
        mode: a.mode,
        chains: a.chains,
        disperse_steps,
        series_length: a.series_length,
        stride: a.stride.unwrap_or(m.max(1)),
        track: track_for(a.track.as_deref(), g.m())?,
        seed: a.seed,
    };
    let report = gelman_rubin_run(g, &opts)?;
    if let Some(path) = &a.out {
        let json = serde_json::to_vec_pretty(&report).context("serializing report")?;
        write_file(path, &json)?;
    }
    println!("chains {}  edges {}  frozen {}", report.chains, report.edges.len(), report.frozen);
    println!("median R-hat {:.4}", report.median);
    println!("max R-hat    {:.4}", report.max);
    if report.max > a.threshold {
        eprintln!("warning: max R-hat {:.4} exceeds {}", report.max, a.threshold);
        return Ok(3);
    }
    Ok(0)
}

struct MetricsRow {
    file: String,
    clustering: Option<f64>,
    diameter: u32,
    exact: bool,
    lambda_max: Option<f64>,
}

fn metrics(a: MetricsArgs) -> Outcome {
    let rows = a
        .files
        .par_iter()
        .map(|path| -> Result<MetricsRow, Failure> {
            let g = load_graph(path, true)?.graph;
            let file = path.display().to_string();
            match all_metrics(&g) {
                Ok(mt) => Ok(MetricsRow {
                    file,
                    clustering: mt.clustering,
                    diameter: mt.diameter.value,
                    exact: mt.diameter.exact,
                    lambda_max: Some(mt.lambda_max),
                }),
                Err(Error::Convergence { .. }) => {
                    let d = diameter(&g);
                    Ok(MetricsRow {
                        file,
                        clustering: global_clustering(&g).ok(),
                        diameter: d.value,
                        exact: d.exact,
                        lambda_max: None,
                    })
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("file,clustering,diameter,diameter_exactness,lambda_max\n");
    let fmt = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x}"));
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.file,
            fmt(r.clustering),
            r.diameter,
            if r.exact { "exact" } else { "lower-bound" },
            fmt(r.lambda_max)
        ));
    }
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => io::stdout().write_all(csv.as_bytes()).context("writing to stdout")?,
    }
    let failed = rows.iter().filter(|r| r.lambda_max.is_none()).count();
    if failed > 0 {
        eprintln!("warning: eigenvalue iteration did not converge for {failed} graphs");
        return Ok(3);
    }
    Ok(0)
}
