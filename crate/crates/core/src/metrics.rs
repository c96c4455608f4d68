//! Observables compared across graph ensembles.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};

/// `3 * triangles / wedges`, wedges counted as `sum_v C(d_v, 2)`.
pub fn global_clustering(g: &Graph) -> Result<f64> {
    let wedges: u64 = g.degrees().map(|d| (d as u64) * (d as u64).saturating_sub(1) / 2).sum();
    if wedges == 0 {
        return Err(Error::UndefinedMetric("graph has no wedges".into()));
    }
    Ok(3.0 * triangle_count(g) as f64 / wedges as f64)
}

/// Counts each triangle once by orienting edges from lower to higher
/// `(degree, id)` rank and intersecting sorted out-lists.
pub fn triangle_count(g: &Graph) -> u64 {
    let n = g.n();
    let rank = |v: Vertex| (g.degree(v), v);
    let out: Vec<Vec<Vertex>> = (0..n as Vertex)
        .map(|v| {
            let mut o: Vec<Vertex> = g.neighbors(v).filter(|&w| rank(w) > rank(v)).collect();
            o.sort_unstable();
            o
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|v| {
            let mut t = 0u64;
            for &w in &out[v] {
                t += sorted_intersection(&out[v], &out[w as usize]);
            }
            t
        })
        .sum()
}

fn sorted_intersection(a: &[Vertex], b: &[Vertex]) -> u64 {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: u32,
    /// `false` when the search budget ran out and `value` is a lower bound.
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiameterOptions {
    /// Components up to this size get one BFS per vertex.
    pub exhaustive_limit: usize,
    /// BFS budget for the bounding search on larger components.
    pub bfs_budget: usize,
}

impl Default for DiameterOptions {
    fn default() -> Self {
        DiameterOptions {
            exhaustive_limit: 20_000,
            bfs_budget: 2_000,
        }
    }
}

/// Vertices of the largest connected component, ties going to the component
/// with the smallest vertex id.
pub fn largest_component(g: &Graph) -> Vec<Vertex> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut best: Vec<Vertex> = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        queue.push_back(s as Vertex);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for w in g.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// BFS distances from `s`; unreachable vertices get `u32::MAX`.
fn bfs(g: &Graph, s: Vertex, dist: &mut [u32], queue: &mut VecDeque<Vertex>) -> (u32, Vertex) {
    dist.fill(u32::MAX);
    dist[s as usize] = 0;
    queue.clear();
    queue.push_back(s);
    let mut far = (0, s);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v as usize];
        if dv > far.0 {
            far = (dv, v);
        }
        for w in g.neighbors(v) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = dv + 1;
                queue.push_back(w);
            }
        }
    }
    far
}

fn eccentricity(g: &Graph, s: Vertex) -> u32 {
    let mut dist = vec![0; g.n()];
    bfs(g, s, &mut dist, &mut VecDeque::new()).0
}

pub fn diameter(g: &Graph) -> Diameter {
    diameter_with(g, DiameterOptions::default())
}

/// Longest shortest path inside the largest connected component.
pub fn diameter_with(g: &Graph, opts: DiameterOptions) -> Diameter {
    let comp = largest_component(g);
    if comp.len() <= 1 {
        return Diameter { value: 0, exact: true };
    }
    if comp.len() <= opts.exhaustive_limit {
        let value = comp
            .par_iter()
            .map_init(
                || (vec![0u32; g.n()], VecDeque::new()),
                |(dist, queue), &s| bfs(g, s, dist, queue).0,
            )
            .max()
            .unwrap_or(0);
        return Diameter { value, exact: true };
    }
    ifub(g, &comp, opts.bfs_budget)
}

/// iFUB from the midpoint of a double sweep started at the highest-degree
/// vertex.
fn ifub(g: &Graph, comp: &[Vertex], budget: usize) -> Diameter {
    let n = g.n();
    let mut dist = vec![0u32; n];
    let mut queue = VecDeque::new();
    let hub = *comp.iter().max_by_key(|&&v| (g.degree(v), std::cmp::Reverse(v))).unwrap();
    let (_, a) = bfs(g, hub, &mut dist, &mut queue);
    let (d_ab, b) = bfs(g, a, &mut dist, &mut queue);
    // walk back from b to the middle of the a-b path
    let mut mid = b;
    let mut steps = d_ab / 2;
    while steps > 0 {
        let dm = dist[mid as usize];
        mid = g.neighbors(mid).find(|&w| dist[w as usize] + 1 == dm).unwrap();
        steps -= 1;
    }
    let mut used = 3;
    let (ecc_u, _) = bfs(g, mid, &mut dist, &mut queue);
    let mut levels: Vec<Vec<Vertex>> = vec![Vec::new(); ecc_u as usize + 1];
    for &v in comp {
        levels[dist[v as usize] as usize].push(v);
    }
    let mut lb = d_ab.max(ecc_u);
    let mut i = ecc_u;
    let mut ub = 2 * i;
    while ub > lb {
        for &x in &levels[i as usize] {
            if used >= budget {
                return Diameter { value: lb, exact: false };
            }
            lb = lb.max(eccentricity(g, x));
            used += 1;
        }
        if lb > 2 * (i - 1) {
            return Diameter { value: lb, exact: true };
        }
        i -= 1;
        ub = 2 * i;
    }
    Diameter { value: lb, exact: true }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    /// Relative residual `||L x - lambda x|| / lambda` to stop at.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-8,
            max_iterations: 200_000,
        }
    }
}

fn laplacian_apply(g: &Graph, x: &[f64], y: &mut [f64]) {
    let row = |(v, yv): (usize, &mut f64)| {
        let s: f64 = g.neighbors(v as Vertex).map(|w| x[w as usize]).sum();
        *yv = g.degree(v as Vertex) as f64 * x[v] - s;
    };
    if y.len() < 1 << 14 {
        y.iter_mut().enumerate().for_each(row);
    } else {
        y.par_iter_mut().enumerate().for_each(row);
    }
}

pub fn max_laplacian_eigenvalue(g: &Graph) -> Result<f64> {
    max_laplacian_eigenvalue_with(g, PowerOptions::default())
}

/// Largest eigenvalue of `L = D - A` by power iteration on `L`, which is
/// positive semidefinite so its dominant eigenvalue is the largest one. The
/// start vector is all ones plus a small index-dependent perturbation.
pub fn max_laplacian_eigenvalue_with(g: &Graph, opts: PowerOptions) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    if g.m() == 0 {
        return Ok(0.0);
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / n as f64).collect();
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        laplacian_apply(g, &x, &mut y);
        lambda = dot(&x, &y);
        residual = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - lambda * xi).powi(2))
            .sum::<f64>()
            .sqrt()
            / lambda;
        if residual <= opts.tol {
            return Ok(lambda);
        }
        std::mem::swap(&mut x, &mut y);
        normalize(&mut x);
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        estimate: lambda,
        residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub clustering: Option<f64>,
    pub diameter: Diameter,
    pub lambda_max: f64,
}

pub fn all_metrics(g: &Graph) -> Result<GraphMetrics> {
    Ok(GraphMetrics {
        clustering: global_clustering(g).ok(),
        diameter: diameter(g),
        lambda_max: max_laplacian_eigenvalue(g)?,
    })
}
