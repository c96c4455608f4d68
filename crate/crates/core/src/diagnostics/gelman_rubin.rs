//! Split-chain potential scale reduction factor for binary series.

use crate::error::{Error, Result};

use super::series::EdgeSeries;

/// Shortest series accepted per chain.
pub const MIN_CHAIN_LENGTH: u64 = 100;

/// Split-chain R-hat. Each chain is cut into a first and last half of
/// `n = len / 2` values (the middle value is dropped for odd lengths), and
/// `R = sqrt((n - 1) / n + B / (n W))` with `B` and `W` the between- and
/// within-half variances.
///
/// Returns `1.0` when every half is the same constant and `f64::INFINITY`
/// when the halves are constant but disagree.
pub fn gelman_rubin(chains: &[EdgeSeries]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two chains, got {}",
            chains.len()
        )));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidInput("chains differ in length".into()));
    }
    if len < MIN_CHAIN_LENGTH {
        return Err(Error::InsufficientData(format!(
            "chains have {len} values, need at least {MIN_CHAIN_LENGTH}"
        )));
    }
    let n = len / 2;
    let nf = n as f64;
    let mut means = Vec::with_capacity(2 * chains.len());
    let mut within = 0.0;
    for c in chains {
        for (start, end) in [(0, n), (len - n, len)] {
            let p = c.ones_in(start, end) as f64 / nf;
            means.push(p);
            // unbiased sample variance of n binary values with mean p
            within += p * (1.0 - p) * nf / (nf - 1.0);
        }
    }
    let halves = means.len() as f64;
    let w = within / halves;
    let grand = means.iter().sum::<f64>() / halves;
    let b = nf * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (halves - 1.0);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((nf - 1.0) / nf + b / (nf * w)).sqrt())
}

/// Median and maximum of a set of R-hat values; infinite values sort last.
pub fn summarize(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    };
    Some((median, v[v.len() - 1]))
}
