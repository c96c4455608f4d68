//! Edge-by-edge independence sweep over a schedule of thinning factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Vertex;

use super::estimate::{mcest_table, required_length};
use super::series::CountSource;
use super::tables::{delta_bic, markov_order_test, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Thinning factors tested for independence, ascending.
    pub schedule: Vec<u64>,
    /// Candidate factors for making a series first order, ascending.
    pub order_ladder: Vec<u64>,
    /// Tolerance on the edge mean.
    pub r: f64,
    /// Confidence of the mean estimate.
    pub s: f64,
}

impl SweepOptions {
    /// Defaults: `r = 0.01`, `s = 0.95`, and an order ladder of powers of two
    /// up to the largest scheduled factor.
    pub fn new(schedule: Vec<u64>) -> Result<Self> {
        let mut schedule = schedule;
        schedule.sort_unstable();
        schedule.dedup();
        if schedule.is_empty() {
            return Err(Error::InvalidInput("empty thinning schedule".into()));
        }
        if schedule[0] == 0 {
            return Err(Error::InvalidInput("thinning factors must be at least 1".into()));
        }
        let top = *schedule.last().unwrap();
        let order_ladder = std::iter::successors(Some(1u64), |k| k.checked_mul(2))
            .take_while(|&k| k <= top)
            .collect();
        Ok(SweepOptions {
            schedule,
            order_ladder,
            r: 0.01,
            s: 0.95,
        })
    }

    /// Geometric schedule `{1, 2, 4, ..., 2^doublings} * m`.
    pub fn geometric(m: u64, doublings: u32) -> Result<Self> {
        Self::new((0..=doublings).map(|i| m << i).collect())
    }

    /// Every factor a recorder must keep counts for.
    pub fn factors(&self) -> Vec<u64> {
        let mut f: Vec<u64> = self.schedule.iter().chain(&self.order_ladder).copied().collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeStatus {
    /// Some scheduled factor gives a negative delta BIC.
    Independent,
    /// Enough data, but no scheduled factor gives independence.
    Dependent,
    /// No first-order thinning found, rates not estimable, or the series is
    /// shorter than the required length.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeResult {
    pub u: Vertex,
    pub v: Vertex,
    pub status: EdgeStatus,
    pub k_independent: Option<u64>,
    /// Thinning factor at which the series is first order.
    pub k_first_order: Option<u64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub n_prime: Option<u64>,
    /// Delta BIC per scheduled factor; `None` where the table is degenerate.
    pub delta_bic_at_k: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schedule: Vec<u64>,
    pub edges: Vec<EdgeResult>,
    /// Fraction of edges with `k_independent <= k`, per scheduled `k`.
    pub fraction_independent: Vec<f64>,
    pub unresolved: usize,
}

impl SweepReport {
    pub fn fraction_at(&self, k: u64) -> Option<f64> {
        let i = self.schedule.iter().position(|&x| x == k)?;
        Some(self.fraction_independent[i])
    }

    /// `k,fraction_independent` rows.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("k,fraction_independent\n");
        for (k, f) in self.schedule.iter().zip(&self.fraction_independent) {
            out.push_str(&format!("{k},{f}\n"));
        }
        out
    }
}

pub fn analyze_edge<S: CountSource + ?Sized>(source: &S, opts: &SweepOptions) -> Result<EdgeResult> {
    let (u, v) = source.pair();
    let mut delta_bic_at_k = Vec::with_capacity(opts.schedule.len());
    for &k in &opts.schedule {
        delta_bic_at_k.push(delta_bic(&source.counts(k)?.pairs).ok());
    }
    let k_independent = opts
        .schedule
        .iter()
        .zip(&delta_bic_at_k)
        .find(|(_, d)| d.is_some_and(|d| d < 0.0))
        .map(|(&k, _)| k);
    let mut result = EdgeResult {
        u,
        v,
        status: EdgeStatus::Unresolved,
        k_independent,
        k_first_order: None,
        alpha_hat: None,
        beta_hat: None,
        n_prime: None,
        delta_bic_at_k,
        note: None,
    };

    let mut first_order = None;
    for &k in &opts.order_ladder {
        let c = source.counts(k)?;
        if let Ok(r) = markov_order_test(&c.triples) {
            if r.verdict == Verdict::FirstOrder {
                first_order = Some(c);
                break;
            }
        }
    }
    let Some(c) = first_order else {
        result.note = Some("no thinning factor makes the series first order".into());
        return Ok(result);
    };
    result.k_first_order = Some(c.k);
    let est = match mcest_table(&c.pairs) {
        Ok(e) => e,
        Err(e) => {
            result.note = Some(e.to_string());
            return Ok(result);
        }
    };
    result.alpha_hat = Some(est.alpha);
    result.beta_hat = Some(est.beta);
    let n_prime = match required_length(est.alpha, est.beta, opts.r, opts.s) {
        Ok(n) => n,
        Err(e) => {
            result.note = Some(e.to_string());
            return Ok(result);
        }
    };
    result.n_prime = Some(n_prime);
    if c.len < n_prime {
        result.note = Some(format!(
            "series has {} values at thinning {}, needs {n_prime}",
            c.len, c.k
        ));
        return Ok(result);
    }
    result.status = if k_independent.is_some() {
        EdgeStatus::Independent
    } else {
        EdgeStatus::Dependent
    };
    Ok(result)
}

/// Runs [`analyze_edge`] on every source in parallel. Unresolved edges stay
/// in the denominator of the independence fractions.
pub fn independence_sweep<S: CountSource + Sync>(sources: &[S], opts: &SweepOptions) -> Result<SweepReport> {
    if opts.schedule.is_empty() {
        return Err(Error::InvalidInput("empty thinning schedule".into()));
    }
    let edges = sources
        .par_iter()
        .map(|s| analyze_edge(s, opts))
        .collect::<Result<Vec<_>>>()?;
    let total = edges.len();
    let fraction_independent = opts
        .schedule
        .iter()
        .map(|&k| {
            if total == 0 {
                return 0.0;
            }
            let hits = edges
                .iter()
                .filter(|e| e.status == EdgeStatus::Independent && e.k_independent.is_some_and(|ki| ki <= k))
                .count();
            hits as f64 / total as f64
        })
        .collect();
    let unresolved = edges.iter().filter(|e| e.status == EdgeStatus::Unresolved).count();
    Ok(SweepReport {
        schedule: opts.schedule.clone(),
        edges,
        fraction_independent,
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::series::EdgeSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn markov(alpha: f64, beta: f64, len: usize, rng: &mut impl Rng) -> EdgeSeries {
        let mut z = rng.random_bool(alpha / (alpha + beta));
        let bits: Vec<bool> = (0..len)
            .map(|_| {
                let out = z;
                z = if z { !rng.random_bool(beta) } else { rng.random_bool(alpha) };
                out
            })
            .collect();
        EdgeSeries::from_bits((0, 1), &bits)
    }

    #[test]
    fn options() {
        assert!(SweepOptions::new(vec![]).is_err());
        assert!(SweepOptions::new(vec![0, 4]).is_err());
        let o = SweepOptions::geometric(100, 3).unwrap();
        assert_eq!(o.schedule, vec![100, 200, 400, 800]);
        assert_eq!(o.order_ladder.last(), Some(&512));
        assert_eq!((o.r, o.s), (0.01, 0.95));
        assert!(o.factors().contains(&100) && o.factors().contains(&64));
    }

    #[test]
    fn iid_series_are_independent_at_first_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let series: Vec<_> = (0..100).map(|_| markov(0.5, 0.5, 40_000, &mut rng)).collect();
        let opts = SweepOptions::new(vec![1, 2, 4]).unwrap();
        let report = independence_sweep(&series, &opts).unwrap();
        let at_first = report.edges.iter().filter(|e| e.k_independent == Some(1)).count();
        assert!(at_first >= 95, "{at_first}");
        assert!(report.fraction_at(1).unwrap() >= 0.95);
        assert_eq!(report.unresolved, 0);
    }

    #[test]
    fn sticky_series_need_thinning() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let series: Vec<_> = (0..20).map(|_| markov(0.02, 0.02, 800_000, &mut rng)).collect();
        let opts = SweepOptions::new(vec![1, 50, 400]).unwrap();
        let report = independence_sweep(&series, &opts).unwrap();
        assert_eq!(report.fraction_at(1), Some(0.0));
        assert!(report.fraction_at(400).unwrap() >= 0.9);
        let f = &report.fraction_independent;
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
        for e in &report.edges {
            let a = e.alpha_hat.unwrap();
            assert!((a - 0.02).abs() < 0.005);
        }
        assert!(report.curve_csv().starts_with("k,fraction_independent\n1,0\n"));
    }

    #[test]
    fn short_or_constant_series_are_unresolved() {
        let constant = EdgeSeries::constant((2, 3), true, 10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        // needs about 4e4 values at these rates but only has 2000
        let short = markov(0.05, 0.05, 2_000, &mut rng);
        let opts = SweepOptions::new(vec![1, 8]).unwrap();
        let report = independence_sweep(&[constant, short], &opts).unwrap();
        assert_eq!(report.unresolved, 2);
        assert_eq!(report.edges[0].delta_bic_at_k, vec![None, None]);
        assert!(report.edges[1].n_prime.unwrap() > 2_000);
        assert!(report.edges.iter().all(|e| e.note.is_some()));
        assert_eq!(report.fraction_independent, vec![0.0, 0.0]);
    }
}
