//! Degree- and joint-degree-preserving edge-swap chains.
//!
//! A proposal that would create a self-loop or a parallel edge is rejected:
//! the graph stays put and the attempt still counts as a step.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Slot, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Preserve the degree distribution.
    Dd,
    /// Preserve the joint degree distribution.
    Jdd,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dd => "dd",
            Mode::Jdd => "jdd",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dd" => Ok(Mode::Dd),
            "jdd" => Ok(Mode::Jdd),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}` (expected dd or jdd)"))),
        }
    }
}

/// Edges removed and added by one applied swap, as `(min, max)` pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeDelta {
    pub removed: [(Vertex, Vertex); 2],
    pub added: [(Vertex, Vertex); 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    /// Both draws landed on the same edge.
    SameEdge,
    /// JDD draw picked the same vertex twice.
    SameVertex,
    SelfLoop,
    ParallelEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied(EdgeDelta),
    Rejected(Rejection),
}

impl StepOutcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, StepOutcome::Applied(_))
    }
}

fn ordered(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    (u.min(v), u.max(v))
}

fn require_two_edges(g: &Graph) -> Result<()> {
    if g.m() < 2 {
        return Err(Error::InvalidState(format!(
            "a swap needs at least two edges, graph has {}",
            g.m()
        )));
    }
    Ok(())
}

/// Exchanges the far ends of `s1` and `s2` if the result stays simple.
fn try_exchange(g: &mut Graph, s1: Slot, s2: Slot) -> StepOutcome {
    let (a, b) = (g.endpoint(s1), g.far_end(s1));
    let (c, d) = (g.endpoint(s2), g.far_end(s2));
    if s1.edge() == s2.edge() {
        return StepOutcome::Rejected(Rejection::SameEdge);
    }
    if a == d || c == b {
        return StepOutcome::Rejected(Rejection::SelfLoop);
    }
    if g.has_edge(a, d) || g.has_edge(c, b) {
        return StepOutcome::Rejected(Rejection::ParallelEdge);
    }
    g.exchange_far_ends(s1, s2);
    StepOutcome::Applied(EdgeDelta {
        removed: [ordered(a, b), ordered(c, d)],
        added: [ordered(a, d), ordered(c, b)],
    })
}

/// One DD-preserving step: two oriented edges `(a,b)`, `(c,d)` drawn
/// uniformly and independently from the `2m` orientations become `(a,d)`,
/// `(c,b)`.
pub fn dd_swap_step<R: Rng + ?Sized>(g: &mut Graph, rng: &mut R) -> Result<StepOutcome> {
    require_two_edges(g)?;
    let s1 = g.sample_uniform_edge_endpoint(rng)?;
    let s2 = g.sample_uniform_edge_endpoint(rng)?;
    Ok(try_exchange(g, s1, s2))
}

/// One JDD-preserving step: a uniform endpoint `u1` with its edge `(u1,v)`,
/// then a uniform endpoint slot `(u2,w)` among vertices of degree `d(u1)`;
/// the edges become `(u1,w)`, `(u2,v)`.
pub fn jdd_swap_step<R: Rng + ?Sized>(g: &mut Graph, rng: &mut R) -> Result<StepOutcome> {
    require_two_edges(g)?;
    let s1 = g.sample_uniform_edge_endpoint(rng)?;
    let u1 = g.endpoint(s1);
    let s2 = g.sample_edge_at_degree(g.degree(u1), None, rng)?;
    if g.endpoint(s2) == u1 {
        return Ok(StepOutcome::Rejected(Rejection::SameVertex));
    }
    let outcome = try_exchange(g, s1, s2);
    debug_assert!(!outcome.is_applied() || g.degree(u1) == g.degree(g.endpoint(s2)));
    Ok(outcome)
}

pub fn swap_step<R: Rng + ?Sized>(g: &mut Graph, mode: Mode, rng: &mut R) -> Result<StepOutcome> {
    match mode {
        Mode::Dd => dd_swap_step(g, rng),
        Mode::Jdd => jdd_swap_step(g, rng),
    }
}

/// Receives every step of a chain. `step` counts from 1; the graph is the
/// state after the step.
pub trait StepObserver {
    fn on_step(&mut self, step: u64, graph: &Graph, outcome: &StepOutcome);
}

impl<F> StepObserver for F
where
    F: FnMut(u64, &Graph, &StepOutcome),
{
    fn on_step(&mut self, step: u64, graph: &Graph, outcome: &StepOutcome) {
        self(step, graph, outcome)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub steps: u64,
    pub applied: u64,
    pub rejected: u64,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
}

impl ChainStats {
    pub fn new(mode: Mode, seed: Option<u64>) -> Self {
        ChainStats {
            mode: Some(mode),
            seed,
            ..Default::default()
        }
    }

    pub fn record(&mut self, outcome: &StepOutcome) {
        self.steps += 1;
        if outcome.is_applied() {
            self.applied += 1;
        } else {
            self.rejected += 1;
        }
    }
}

/// Runs exactly `steps` attempts in place, handing each outcome to the
/// observers.
pub fn run_chain<R: Rng + ?Sized>(
    g: &mut Graph,
    mode: Mode,
    steps: u64,
    rng: &mut R,
    observers: &mut [&mut dyn StepObserver],
) -> Result<ChainStats> {
    let mut stats = ChainStats::new(mode, None);
    if steps == 0 {
        return Ok(stats);
    }
    require_two_edges(g)?;
    for step in 1..=steps {
        let outcome = swap_step(g, mode, rng)?;
        stats.record(&outcome);
        for obs in observers.iter_mut() {
            obs.on_step(step, g, &outcome);
        }
    }
    Ok(stats)
}
