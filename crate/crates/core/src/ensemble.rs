//! Ensemble generation and the multi-chain checks built on top of the
//! swap engine.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::gelman_rubin::{gelman_rubin, summarize};
use crate::diagnostics::series::{CountsRecorder, EdgeSeries, SeriesRecorder};
use crate::diagnostics::sweep::{independence_sweep, EdgeStatus, SweepOptions, SweepReport};
use crate::error::{Error, Result};
use crate::graph::{degree_profile, Graph, Vertex};
use crate::rewire::{run_chain, ChainStats, Mode};

/// Seed of replica `index`: the splitmix64 finalizer applied to
/// `master + (index + 1) * 0x9E3779B97F4A7C15`. Distinct indices give
/// unrelated streams.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct Replica {
    pub index: usize,
    pub graph: Graph,
    pub stats: ChainStats,
}

/// One independent replica: a fresh copy of `g` run for `steps` steps with
/// the seed derived for `index`.
pub fn generate_replica(g: &Graph, mode: Mode, steps: u64, master_seed: u64, index: usize) -> Result<Replica> {
    let seed = split_seed(master_seed, index as u64);
    let mut graph = g.clone();
    let mut rng = seeded_rng(seed);
    let mut stats = run_chain(&mut graph, mode, steps, &mut rng, &mut [])?;
    stats.seed = Some(seed);
    Ok(Replica { index, graph, stats })
}

/// `count` independent replicas, computed in parallel and returned in index
/// order.
pub fn generate_ensemble(g: &Graph, mode: Mode, steps: u64, count: usize, master_seed: u64) -> Result<Vec<Replica>> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_replica(g, mode, steps, master_seed, i))
        .collect()
}

/// One long chain sampled every `steps` steps; `visit` sees the samples in
/// order. Each sample's stats cover only its own segment.
pub fn continuous_ensemble<F>(g: &Graph, mode: Mode, steps: u64, count: usize, master_seed: u64, mut visit: F) -> Result<()>
where
    F: FnMut(Replica) -> Result<()>,
{
    let seed = split_seed(master_seed, 0);
    let mut rng = seeded_rng(seed);
    let mut graph = g.clone();
    for index in 0..count {
        let mut stats = run_chain(&mut graph, mode, steps, &mut rng, &mut [])?;
        stats.seed = Some(seed);
        visit(Replica {
            index,
            graph: graph.clone(),
            stats,
        })?;
    }
    Ok(())
}

/// Which vertex pairs to follow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    /// Every edge of the starting graph.
    All,
    /// A uniform random fraction of the starting graph's edges.
    Sample(f64),
}

impl Track {
    /// All edges up to 10^4 of them, a 10% sample beyond.
    pub fn default_for(m: usize) -> Track {
        if m <= 10_000 {
            Track::All
        } else {
            Track::Sample(0.1)
        }
    }

    pub fn parse(s: &str) -> Result<Track> {
        if s == "all" {
            return Ok(Track::All);
        }
        let p = s
            .strip_prefix("sample:")
            .and_then(|p| p.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("track policy `{s}` (expected all or sample:p)")))?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidInput(format!("sample fraction {p} outside (0, 1]")));
        }
        Ok(Track::Sample(p))
    }
}

/// Starting-graph edges selected by `track`, in sorted order.
pub fn tracked_pairs(g: &Graph, track: Track, seed: u64) -> Vec<(Vertex, Vertex)> {
    let edges = g.sorted_edges();
    match track {
        Track::All => edges,
        Track::Sample(p) => {
            let want = ((p * edges.len() as f64).round() as usize).clamp(1, edges.len());
            let mut rng = seeded_rng(seed);
            let mut picked = index::sample(&mut rng, edges.len(), want).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| edges[i]).collect()
        }
    }
}

type Pair = (Vertex, Vertex);

/// Under JDD preservation an edge between two vertices whose degrees are
/// both unique can never move.
pub fn split_frozen(g: &Graph, mode: Mode, pairs: &[(Vertex, Vertex)]) -> (Vec<Pair>, Vec<Pair>) {
    if mode == Mode::Dd {
        return (pairs.to_vec(), Vec::new());
    }
    let profile = degree_profile(g);
    let unique = |v: Vertex| profile.vertices_of_degree(g.degree(v)) == 1;
    pairs.iter().partition(|&&(u, v)| !(unique(u) && unique(v)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub mode: Mode,
    /// Length `K` of the recorded chain.
    pub steps: u64,
    pub sweep: SweepOptions,
    pub track: Track,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub mode: Mode,
    pub steps: u64,
    pub seed: u64,
    pub m: usize,
    pub tracked: usize,
    /// Tracked pairs excluded because they can never change.
    pub frozen: Vec<(Vertex, Vertex)>,
    pub stats: ChainStats,
    pub sweep: SweepReport,
    pub warnings: Vec<String>,
}

/// Runs one chain of `steps` steps from `g`, records thinned counts for the
/// tracked edges and runs the independence sweep on them.
pub fn diagnose(g: &Graph, opts: &DiagnoseOptions) -> Result<DiagnoseReport> {
    let pairs = tracked_pairs(g, opts.track, split_seed(opts.seed, u64::MAX));
    let (live, frozen) = split_frozen(g, opts.mode, &pairs);
    let mut warnings = Vec::new();
    let top = *opts.sweep.schedule.last().expect("schedule is non-empty");
    let samples_at_top = (opts.steps + 1) / top;
    if samples_at_top < 100 {
        warnings.push(format!(
            "only {samples_at_top} samples at thinning {top}; lengthen the chain"
        ));
    }
    let mut recorder = CountsRecorder::counts(g, &live, opts.steps, &opts.sweep.factors())?;
    let mut graph = g.clone();
    let mut rng = seeded_rng(opts.seed);
    let mut stats = run_chain(&mut graph, opts.mode, opts.steps, &mut rng, &mut [&mut recorder])?;
    stats.seed = Some(opts.seed);
    let counts = recorder.into_counts();
    let sweep = independence_sweep(&counts, &opts.sweep)?;
    let short = sweep
        .edges
        .iter()
        .filter(|e| e.status == EdgeStatus::Unresolved && e.n_prime.is_some())
        .count();
    if short > 0 {
        warnings.push(format!("{short} edges have fewer samples than their required length"));
    }
    Ok(DiagnoseReport {
        mode: opts.mode,
        steps: opts.steps,
        seed: opts.seed,
        m: g.m(),
        tracked: pairs.len(),
        frozen,
        stats,
        sweep,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrOptions {
    pub mode: Mode,
    pub chains: usize,
    /// Steps between consecutive starting graphs.
    pub disperse_steps: u64,
    /// Values per recorded series.
    pub series_length: u64,
    /// Steps between recorded values.
    pub stride: u64,
    pub track: Track,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRhat {
    pub u: Vertex,
    pub v: Vertex,
    pub rhat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrReport {
    pub mode: Mode,
    pub chains: usize,
    pub disperse_steps: u64,
    pub series_length: u64,
    pub stride: u64,
    pub seed: u64,
    pub edges: Vec<EdgeRhat>,
    pub frozen: usize,
    pub median: f64,
    pub max: f64,
    pub stats: Vec<ChainStats>,
}

/// Starting graphs: the input, then each next one `disperse_steps` further
/// along a single chain.
pub fn overdispersed_starts(g: &Graph, mode: Mode, chains: usize, disperse_steps: u64, seed: u64) -> Result<Vec<Graph>> {
    let mut rng = seeded_rng(split_seed(seed, u64::MAX - 1));
    let mut starts = vec![g.clone()];
    while starts.len() < chains {
        let mut next = starts.last().unwrap().clone();
        run_chain(&mut next, mode, disperse_steps, &mut rng, &mut [])?;
        starts.push(next);
    }
    Ok(starts)
}

/// Runs concurrent chains from `starts`, records the tracked pairs every
/// `stride` steps and computes R-hat per pair.
pub fn gelman_rubin_chains(starts: &[Graph], pairs: &[(Vertex, Vertex)], opts: &GrOptions) -> Result<(Vec<EdgeRhat>, Vec<ChainStats>)> {
    if starts.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least two chains, got {}", starts.len())));
    }
    if opts.stride == 0 || opts.series_length == 0 {
        return Err(Error::InvalidInput("stride and series length must be positive".into()));
    }
    let steps = opts.series_length * opts.stride - 1;
    let runs = starts
        .par_iter()
        .enumerate()
        .map(|(i, start)| -> Result<(Vec<EdgeSeries>, ChainStats)> {
            let seed = split_seed(opts.seed, i as u64);
            let mut rec = SeriesRecorder::series(start, pairs)?;
            let mut graph = start.clone();
            let mut rng = seeded_rng(seed);
            let mut stats = run_chain(&mut graph, opts.mode, steps, &mut rng, &mut [&mut rec])?;
            stats.seed = Some(seed);
            let series = rec
                .into_series()
                .into_iter()
                .map(|s| s.thin(opts.stride))
                .collect::<Result<Vec<_>>>()?;
            Ok((series, stats))
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = runs.iter().map(|(_, s)| s.clone()).collect();
    let edges = (0..pairs.len())
        .into_par_iter()
        .map(|j| {
            let chains: Vec<EdgeSeries> = runs.iter().map(|(s, _)| s[j].clone()).collect();
            let (u, v) = chains[0].pair;
            Ok(EdgeRhat {
                u,
                v,
                rhat: gelman_rubin(&chains)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((edges, stats))
}

/// Overdispersed starts followed by the multi-chain check on the tracked
/// edges of `g`.
pub fn gelman_rubin_run(g: &Graph, opts: &GrOptions) -> Result<GrReport> {
    let pairs = tracked_pairs(g, opts.track, split_seed(opts.seed, u64::MAX));
    let (live, frozen) = split_frozen(g, opts.mode, &pairs);
    if live.is_empty() {
        return Err(Error::InsufficientData("no tracked edge can move".into()));
    }
    let starts = overdispersed_starts(g, opts.mode, opts.chains, opts.disperse_steps, opts.seed)?;
    let (edges, stats) = gelman_rubin_chains(&starts, &live, opts)?;
    let values: Vec<f64> = edges.iter().map(|e| e.rhat).collect();
    let (median, max) = summarize(&values).expect("at least one edge");
    Ok(GrReport {
        mode: opts.mode,
        chains: opts.chains,
        disperse_steps: opts.disperse_steps,
        series_length: opts.series_length,
        stride: opts.stride,
        seed: opts.seed,
        edges,
        frozen: frozen.len(),
        median,
        max,
        stats,
    })
}
