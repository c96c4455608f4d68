//! Two-state Markov chain for the presence of a single labeled edge.
//!
//! State 0 is "no edge". `alpha` is the per-step probability that the edge
//! appears, `beta` the probability that it disappears. The chain contracts
//! towards its stationary law at rate `1 - (alpha + beta)` per step, which is
//! what the stopping rule is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewire::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JddContext {
    pub f_du: u64,
    pub f_dv: u64,
    pub joint: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeChainModel {
    pub alpha: f64,
    pub beta: f64,
    pub mode: Mode,
    pub degrees: (u64, u64),
    pub m: u64,
    pub jdd: Option<JddContext>,
}

/// Transition rates under DD preservation.
pub fn dd_alpha_beta(du: u64, dv: u64, m: u64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidInput("edge count must be positive".into()));
    }
    if du == 0 || dv == 0 {
        return Err(Error::InvalidInput("degrees must be positive".into()));
    }
    let m = m as f64;
    let alpha = (du as f64) * (dv as f64) / (2.0 * m * m);
    // 1 - (1 - 1/m)^2 expanded, avoiding the cancellation for large m
    let beta = (2.0 - 1.0 / m) / m;
    Ok((alpha, beta))
}

/// Transition rates under JDD preservation; `alpha` is the mean-field
/// approximation that replaces each vertex's count of neighbors of a given
/// degree by its average over the degree class.
pub fn jdd_alpha_beta(
    du: u64,
    dv: u64,
    m: u64,
    f_du: u64,
    f_dv: u64,
    joint: u64,
) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidInput("edge count must be positive".into()));
    }
    if du == 0 || dv == 0 {
        return Err(Error::InvalidInput("degrees must be positive".into()));
    }
    if f_du == 0 || f_dv == 0 {
        return Err(Error::InvalidInput("degree classes must be non-empty".into()));
    }
    let (m, fu, fv) = (m as f64, f_du as f64, f_dv as f64);
    let beta = 1.0 / m + (fu - 1.0) / (2.0 * m * fu) + (fv - 1.0) / (2.0 * m * fv);
    let alpha = 2.0 * joint as f64 / (m * fu * fv);
    Ok((alpha, beta))
}

impl EdgeChainModel {
    pub fn dd(du: u64, dv: u64, m: u64) -> Result<Self> {
        let (alpha, beta) = dd_alpha_beta(du, dv, m)?;
        Self::new(alpha, beta, Mode::Dd, (du, dv), m, None)
    }

    /// Fails with [`Error::FrozenEdge`] when both degree classes are
    /// singletons: such an edge can never be swapped out.
    pub fn jdd(du: u64, dv: u64, m: u64, f_du: u64, f_dv: u64, joint: u64) -> Result<Self> {
        let (alpha, beta) = jdd_alpha_beta(du, dv, m, f_du, f_dv, joint)?;
        if f_du == 1 && f_dv == 1 {
            return Err(Error::FrozenEdge);
        }
        let ctx = JddContext { f_du, f_dv, joint };
        Self::new(alpha, beta, Mode::Jdd, (du, dv), m, Some(ctx))
    }

    fn new(
        alpha: f64,
        beta: f64,
        mode: Mode,
        degrees: (u64, u64),
        m: u64,
        jdd: Option<JddContext>,
    ) -> Result<Self> {
        let valid = |p: f64| p > 0.0 && p <= 1.0;
        if !valid(alpha) || !valid(beta) {
            return Err(Error::InvalidInput(format!(
                "rates out of (0, 1]: alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(EdgeChainModel {
            alpha,
            beta,
            mode,
            degrees,
            m,
            jdd,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Row-stochastic transition matrix, row = current state.
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [
            [1.0 - self.alpha, self.alpha],
            [self.beta, 1.0 - self.beta],
        ]
    }

    /// The two eigenvalues of the transition matrix.
    pub fn eigenvalues(&self) -> (f64, f64) {
        (1.0, 1.0 - self.gamma())
    }
}

/// `(p0, p1)` with `p1 = alpha / (alpha + beta)`.
pub fn stationary(model: &EdgeChainModel) -> Result<(f64, f64)> {
    stationary_of(model.alpha, model.beta)
}

fn stationary_of(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let gamma = alpha + beta;
    if gamma <= 0.0 {
        return Err(Error::DegenerateChain);
    }
    Ok((beta / gamma, alpha / gamma))
}

/// Lower bound on `alpha + beta` that the stopping rule relies on.
pub fn gamma_lower_bound(m: u64, mode: Mode) -> f64 {
    match mode {
        Mode::Dd => 2.0 / m as f64,
        Mode::Jdd => 1.0 / m as f64,
    }
}

/// Steps multiplier per edge: `N / m = ln(1/eps) / (m * gamma_min)`.
pub fn steps_per_edge(epsilon: f64, mode: Mode) -> Result<f64> {
    check_epsilon(epsilon)?;
    let per_edge = match mode {
        Mode::Dd => 0.5,
        Mode::Jdd => 1.0,
    };
    Ok(per_edge * (1.0 / epsilon).ln())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// `ceil((m/2) ln(1/eps))` for DD chains and `ceil(m ln(1/eps))` for JDD.
pub fn stopping_steps(m: u64, epsilon: f64, mode: Mode) -> Result<u64> {
    let n = m as f64 * steps_per_edge(epsilon, mode)?;
    Ok(n.ceil() as u64)
}

/// Euclidean distance between the state law after `steps` steps from
/// `initial` and the stationary law.
///
/// The deviation from stationarity lives in the second eigenspace, so the
/// closed form is `|1 - gamma|^N * ||initial - pi||_2`.
pub fn decay_error(model: &EdgeChainModel, steps: u64, initial: (f64, f64)) -> Result<f64> {
    decay_error_for_rates(model.alpha, model.beta, steps, initial)
}

/// [`decay_error`] for raw rates; `alpha` or `beta` may be zero as long as
/// their sum is not.
pub fn decay_error_for_rates(alpha: f64, beta: f64, steps: u64, initial: (f64, f64)) -> Result<f64> {
    let (p0, p1) = stationary_of(alpha, beta)?;
    let offset = ((initial.0 - p0).powi(2) + (initial.1 - p1).powi(2)).sqrt();
    Ok(offset * contraction(alpha + beta, steps))
}

/// `|1 - gamma|^n`. For small `gamma` the power is taken through `ln_1p`,
/// since rounding `1 - gamma` first would lose about `n` ulps.
fn contraction(gamma: f64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if gamma < 1.0 {
        (n as f64 * (-gamma).ln_1p()).exp()
    } else {
        (gamma - 1.0).powf(n as f64)
    }
}
