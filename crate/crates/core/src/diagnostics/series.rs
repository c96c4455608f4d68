//! Binary edge-occupancy series and their recording from a running chain.
//!
//! Series are stored run-length encoded: the first value plus the indices at
//! which the value flips. Edges toggle rarely (a few times per `m` steps), so
//! this is far smaller than one bit per step.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_key, Graph, Vertex};
use crate::rewire::{StepObserver, StepOutcome};

use super::tables::{Table2, Table3};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSeries {
    pub pair: (Vertex, Vertex),
    first: bool,
    /// Strictly increasing indices `t` with `Z_t != Z_{t-1}`.
    toggles: Vec<u64>,
    len: u64,
}

impl EdgeSeries {
    pub fn from_bits(pair: (Vertex, Vertex), bits: &[bool]) -> Self {
        let first = bits.first().copied().unwrap_or(false);
        let toggles = (1..bits.len())
            .filter(|&t| bits[t] != bits[t - 1])
            .map(|t| t as u64)
            .collect();
        EdgeSeries {
            pair,
            first,
            toggles,
            len: bits.len() as u64,
        }
    }

    /// Parses a string of `0` and `1` characters.
    pub fn parse(pair: (Vertex, Vertex), text: &str) -> Result<Self> {
        let bits = text
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("series character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(pair, &bits))
    }

    /// A series of `len` copies of `value`.
    pub fn constant(pair: (Vertex, Vertex), value: bool, len: u64) -> Self {
        EdgeSeries {
            pair,
            first: value,
            toggles: Vec::new(),
            len,
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn toggle_count(&self) -> usize {
        self.toggles.len()
    }

    pub fn is_constant(&self) -> bool {
        self.toggles.is_empty()
    }

    pub fn get(&self, t: u64) -> Option<bool> {
        if t >= self.len {
            return None;
        }
        let flips = self.toggles.partition_point(|&x| x <= t);
        Some(self.first ^ (flips % 2 == 1))
    }

    /// Maximal constant runs as `(start, end_exclusive, value)`.
    pub fn runs(&self) -> impl Iterator<Item = (u64, u64, bool)> + '_ {
        let bounds = std::iter::once(0)
            .chain(self.toggles.iter().copied())
            .chain(std::iter::once(self.len));
        let mut value = !self.first;
        bounds
            .clone()
            .zip(bounds.skip(1))
            .filter(|(a, b)| a < b)
            .map(move |(a, b)| {
                value = !value;
                (a, b, value)
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.runs()
            .flat_map(|(a, b, v)| std::iter::repeat_n(v, (b - a) as usize))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Number of ones in `[start, end)`.
    pub fn ones_in(&self, start: u64, end: u64) -> u64 {
        self.runs()
            .filter(|&(_, _, v)| v)
            .map(|(a, b, _)| b.min(end).saturating_sub(a.max(start)))
            .sum()
    }

    pub fn ones(&self) -> u64 {
        self.ones_in(0, self.len)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.len > 0).then(|| self.ones() as f64 / self.len as f64)
    }

    /// Keeps indices `0, k, 2k, ...`; the result has `floor(len / k)`
    /// elements.
    pub fn thin(&self, k: u64) -> Result<EdgeSeries> {
        check_factor(k)?;
        let len = self.len / k;
        let mut toggles = Vec::new();
        // a flip at raw index t shows up at thinned index ceil(t / k); flips
        // landing on the same thinned index cancel in pairs
        let mut i = 0;
        while i < self.toggles.len() {
            let j = self.toggles[i].div_ceil(k);
            let mut count = 0;
            while i < self.toggles.len() && self.toggles[i].div_ceil(k) == j {
                count += 1;
                i += 1;
            }
            if j >= len {
                break;
            }
            if count % 2 == 1 {
                toggles.push(j);
            }
        }
        Ok(EdgeSeries {
            pair: self.pair,
            first: if len > 0 { self.first } else { false },
            toggles,
            len,
        })
    }

    /// Transition counts of the `k`-thinned series without materializing it.
    pub fn counts(&self, k: u64) -> Result<ThinnedCounts> {
        let mut c = ThinnedCounter::new(k, self.len)?;
        for (a, b, v) in self.runs() {
            c.feed_run(a, b, v);
        }
        Ok(c.finish())
    }

    pub fn table2(&self) -> Table2 {
        self.counts(1).expect("k = 1 is valid").pairs
    }

    pub fn table3(&self) -> Table3 {
        self.counts(1).expect("k = 1 is valid").triples
    }
}

fn check_factor(k: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("thinning factor must be at least 1".into()));
    }
    Ok(())
}

/// Pair and triple transition counts of one thinned view of a series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinnedCounts {
    pub k: u64,
    /// Length of the thinned series.
    pub len: u64,
    pub ones: u64,
    pub pairs: Table2,
    pub triples: Table3,
}

/// Accumulates [`ThinnedCounts`] from runs fed in time order.
#[derive(Clone, Debug)]
pub struct ThinnedCounter {
    k: u64,
    samples: u64,
    next: u64,
    prev: Option<bool>,
    prev2: Option<bool>,
    counts: ThinnedCounts,
}

impl ThinnedCounter {
    /// `len` is the length of the raw series the runs will cover.
    pub fn new(k: u64, len: u64) -> Result<Self> {
        check_factor(k)?;
        Ok(ThinnedCounter {
            k,
            samples: len / k,
            next: 0,
            prev: None,
            prev2: None,
            counts: ThinnedCounts {
                k,
                ..Default::default()
            },
        })
    }

    fn push(&mut self, v: bool) {
        if let Some(p) = self.prev {
            self.counts.pairs.x[p as usize][v as usize] += 1;
            if let Some(pp) = self.prev2 {
                self.counts.triples.x[pp as usize][p as usize][v as usize] += 1;
            }
        }
        self.prev2 = self.prev;
        self.prev = Some(v);
        self.counts.len += 1;
        self.counts.ones += v as u64;
    }

    /// Raw indices `[start, end)` all hold `value`.
    pub fn feed_run(&mut self, start: u64, end: u64, value: bool) {
        let lo = self.next.max(start.div_ceil(self.k));
        let hi = self.samples.min(end.div_ceil(self.k));
        if lo >= hi {
            return;
        }
        let mut c = hi - lo;
        while c > 0 && (self.prev != Some(value) || self.prev2 != Some(value)) {
            self.push(value);
            c -= 1;
        }
        let s = value as usize;
        self.counts.pairs.x[s][s] += c;
        self.counts.triples.x[s][s][s] += c;
        self.counts.len += c;
        self.counts.ones += if value { c } else { 0 };
        self.next = hi;
    }

    pub fn finish(self) -> ThinnedCounts {
        self.counts
    }
}

/// Receives the constant runs of every tracked pair.
pub trait RunSink {
    fn run(&mut self, index: usize, start: u64, end: u64, value: bool);
}

/// Follows the occupancy of a fixed set of vertex pairs along a chain in
/// O(1) per step, using the edge delta of each applied swap.
#[derive(Clone, Debug)]
pub struct PairTracker<S> {
    pairs: Vec<(Vertex, Vertex)>,
    index: FxHashMap<u64, usize>,
    state: Vec<bool>,
    run_start: Vec<u64>,
    steps: u64,
    sink: S,
}

impl<S: RunSink> PairTracker<S> {
    pub fn new(graph: &Graph, pairs: &[(Vertex, Vertex)], sink: S) -> Result<Self> {
        let n = graph.n() as u64;
        let mut index = FxHashMap::default();
        let mut ordered = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs {
            if u as u64 >= n || v as u64 >= n || u == v {
                return Err(Error::InvalidInput(format!("cannot track pair ({u}, {v})")));
            }
            let p = (u.min(v), u.max(v));
            if index.insert(edge_key(p.0, p.1), ordered.len()).is_some() {
                return Err(Error::InvalidInput(format!("pair ({u}, {v}) tracked twice")));
            }
            ordered.push(p);
        }
        let state = ordered.iter().map(|&(u, v)| graph.has_edge(u, v)).collect();
        Ok(PairTracker {
            run_start: vec![0; ordered.len()],
            pairs: ordered,
            index,
            state,
            steps: 0,
            sink,
        })
    }

    pub fn pairs(&self) -> &[(Vertex, Vertex)] {
        &self.pairs
    }

    fn set(&mut self, (u, v): (Vertex, Vertex), value: bool, t: u64) {
        if let Some(&i) = self.index.get(&edge_key(u, v)) {
            if self.state[i] != value {
                self.sink.run(i, self.run_start[i], t, self.state[i]);
                self.state[i] = value;
                self.run_start[i] = t;
            }
        }
    }

    /// Closes every open run; the series cover indices `0..=steps`.
    pub fn finish(mut self) -> (Vec<(Vertex, Vertex)>, u64, S) {
        let end = self.steps + 1;
        for i in 0..self.pairs.len() {
            self.sink.run(i, self.run_start[i], end, self.state[i]);
        }
        (self.pairs, self.steps, self.sink)
    }
}

impl<S: RunSink> StepObserver for PairTracker<S> {
    fn on_step(&mut self, step: u64, _graph: &Graph, outcome: &StepOutcome) {
        self.steps = step;
        if let StepOutcome::Applied(delta) = outcome {
            for &p in &delta.removed {
                self.set(p, false, step);
            }
            for &p in &delta.added {
                self.set(p, true, step);
            }
        }
    }
}

/// Sink that keeps full run-length encoded series.
#[derive(Clone, Debug, Default)]
pub struct SeriesSink {
    firsts: Vec<Option<bool>>,
    toggles: Vec<Vec<u64>>,
}

impl RunSink for SeriesSink {
    fn run(&mut self, index: usize, start: u64, _end: u64, value: bool) {
        if self.firsts.len() <= index {
            self.firsts.resize(index + 1, None);
            self.toggles.resize(index + 1, Vec::new());
        }
        if start == 0 {
            self.firsts[index] = Some(value);
        } else {
            self.toggles[index].push(start);
        }
    }
}

/// Records full [`EdgeSeries`] for each tracked pair.
pub type SeriesRecorder = PairTracker<SeriesSink>;

impl SeriesRecorder {
    pub fn series(graph: &Graph, pairs: &[(Vertex, Vertex)]) -> Result<Self> {
        PairTracker::new(graph, pairs, SeriesSink::default())
    }

    pub fn into_series(self) -> Vec<EdgeSeries> {
        let (pairs, steps, sink) = self.finish();
        let mut firsts = sink.firsts;
        let mut toggles = sink.toggles;
        firsts.resize(pairs.len(), None);
        toggles.resize(pairs.len(), Vec::new());
        pairs
            .into_iter()
            .zip(firsts.into_iter().zip(toggles))
            .map(|(pair, (first, toggles))| EdgeSeries {
                pair,
                first: first.unwrap_or(false),
                toggles,
                len: steps + 1,
            })
            .collect()
    }
}

/// Sink that only accumulates thinned transition counts for a fixed set of
/// factors, so memory does not grow with chain length.
#[derive(Clone, Debug)]
pub struct CountsSink {
    factors: Vec<u64>,
    counters: Vec<Vec<ThinnedCounter>>,
}

impl RunSink for CountsSink {
    fn run(&mut self, index: usize, start: u64, end: u64, value: bool) {
        for c in &mut self.counters[index] {
            c.feed_run(start, end, value);
        }
    }
}

pub type CountsRecorder = PairTracker<CountsSink>;

impl CountsRecorder {
    /// `steps` must be the exact number of steps the chain will run.
    pub fn counts(graph: &Graph, pairs: &[(Vertex, Vertex)], steps: u64, factors: &[u64]) -> Result<Self> {
        let mut factors = factors.to_vec();
        factors.sort_unstable();
        factors.dedup();
        let template = factors
            .iter()
            .map(|&k| ThinnedCounter::new(k, steps + 1))
            .collect::<Result<Vec<_>>>()?;
        let sink = CountsSink {
            counters: vec![template; pairs.len()],
            factors,
        };
        PairTracker::new(graph, pairs, sink)
    }

    pub fn into_counts(self) -> Vec<PairCounts> {
        let (pairs, _, sink) = self.finish();
        let factors = sink.factors;
        pairs
            .into_iter()
            .zip(sink.counters)
            .map(|(pair, cs)| PairCounts {
                pair,
                factors: factors.clone(),
                counts: cs.into_iter().map(ThinnedCounter::finish).collect(),
            })
            .collect()
    }
}

/// Precomputed thinned counts for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    pub pair: (Vertex, Vertex),
    factors: Vec<u64>,
    counts: Vec<ThinnedCounts>,
}

/// Anything that can produce thinned transition counts for a vertex pair.
pub trait CountSource {
    fn pair(&self) -> (Vertex, Vertex);
    fn counts(&self, k: u64) -> Result<ThinnedCounts>;
}

impl CountSource for EdgeSeries {
    fn pair(&self) -> (Vertex, Vertex) {
        self.pair
    }

    fn counts(&self, k: u64) -> Result<ThinnedCounts> {
        EdgeSeries::counts(self, k)
    }
}

impl CountSource for PairCounts {
    fn pair(&self) -> (Vertex, Vertex) {
        self.pair
    }

    fn counts(&self, k: u64) -> Result<ThinnedCounts> {
        match self.factors.binary_search(&k) {
            Ok(i) => Ok(self.counts[i]),
            Err(_) => Err(Error::InvalidInput(format!("thinning factor {k} was not recorded"))),
        }
    }
}

/// Writes series as a `# pair u v K` header followed by one line of `0`/`1`
/// characters. `ids` maps compact vertex ids back to file ids.
pub fn write_series<W: Write>(out: &mut W, series: &[EdgeSeries], ids: Option<&[u64]>) -> std::io::Result<()> {
    let name = |v: Vertex| ids.map_or(v as u64, |ids| ids[v as usize]);
    let mut line = String::new();
    for s in series {
        writeln!(
            out,
            "# pair {} {} {}",
            name(s.pair.0),
            name(s.pair.1),
            s.len.saturating_sub(1)
        )?;
        line.clear();
        for b in s.iter() {
            line.push(if b { '1' } else { '0' });
        }
        let _ = writeln!(line);
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads the format produced by [`write_series`]. Pair ids are returned as
/// written.
pub fn read_series<R: BufRead>(input: R) -> Result<Vec<EdgeSeries>> {
    let mut out = Vec::new();
    let mut header: Option<((Vertex, Vertex), u64, usize)> = None;
    for (no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<series>", e))?;
        let line_no = no + 1;
        let bad = |message: String| Error::Parse {
            path: "<series>".into(),
            line: line_no,
            message,
        };
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            let tok: Vec<&str> = rest.split_whitespace().collect();
            if tok.len() != 4 || tok[0] != "pair" {
                return Err(bad(format!("expected `# pair u v K`, got `{text}`")));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad number `{s}`")));
            let (u, v, k) = (num(tok[1])?, num(tok[2])?, num(tok[3])?);
            let u = Vertex::try_from(u).map_err(|_| bad(format!("vertex id {u} too large")))?;
            let v = Vertex::try_from(v).map_err(|_| bad(format!("vertex id {v} too large")))?;
            header = Some(((u, v), k, line_no));
            continue;
        }
        let (pair, k, _) = header.take().ok_or_else(|| bad("series line without header".into()))?;
        let s = EdgeSeries::parse(pair, text).map_err(|e| bad(e.to_string()))?;
        if s.len() != k + 1 {
            return Err(bad(format!("header declares K = {k} but series has {} values", s.len())));
        }
        out.push(s);
    }
    if let Some((_, _, line)) = header {
        return Err(Error::Parse {
            path: "<series>".into(),
            line,
            message: "header without series".into(),
        });
    }
    Ok(out)
}
