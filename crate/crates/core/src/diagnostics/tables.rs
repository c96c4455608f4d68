//! Log-linear fits to transition contingency tables.
//!
//! A 2x2 table of consecutive pairs compares an independence model with the
//! saturated first-order Markov model; a 2x2x2 table of consecutive triples
//! compares first- with second-order Markov models. Models are scored by
//! `BIC = G^2 + q ln(N)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table2 {
    /// `x[i][j]` counts transitions `i -> j`.
    pub x: [[u64; 2]; 2],
}

impl Table2 {
    pub fn new(x: [[u64; 2]; 2]) -> Self {
        Table2 { x }
    }

    pub fn total(&self) -> u64 {
        self.x.iter().flatten().sum()
    }

    pub fn row(&self, i: usize) -> u64 {
        self.x[i][0] + self.x[i][1]
    }

    pub fn col(&self, j: usize) -> u64 {
        self.x[0][j] + self.x[1][j]
    }

    /// Relabels states 0 and 1.
    pub fn swapped_labels(&self) -> Self {
        let x = self.x;
        Table2 {
            x: [[x[1][1], x[1][0]], [x[0][1], x[0][0]]],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table3 {
    /// `x[i][j][k]` counts patterns `i -> j -> k`.
    pub x: [[[u64; 2]; 2]; 2],
}

impl Table3 {
    pub fn new(x: [[[u64; 2]; 2]; 2]) -> Self {
        Table3 { x }
    }

    pub fn total(&self) -> u64 {
        self.x.iter().flatten().flatten().sum()
    }

    /// `x_{ij+}`
    pub fn head(&self, i: usize, j: usize) -> u64 {
        self.x[i][j][0] + self.x[i][j][1]
    }

    /// `x_{+jk}`
    pub fn tail(&self, j: usize, k: usize) -> u64 {
        self.x[0][j][k] + self.x[1][j][k]
    }

    /// `x_{+j+}`
    pub fn middle(&self, j: usize) -> u64 {
        self.head(0, j) + self.head(1, j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLinearModel {
    /// Consecutive states are independent.
    Independent,
    /// Saturated first-order Markov model.
    Markov,
}

impl LogLinearModel {
    /// Free parameters; only the difference between the two matters.
    pub fn parameters(self) -> u32 {
        match self {
            LogLinearModel::Independent => 2,
            LogLinearModel::Markov => 3,
        }
    }
}

/// Extra free parameters of a second-order binary chain over a first-order one.
pub const ORDER_PARAMETER_GAP: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Independent,
    Markov,
    FirstOrder,
    SecondOrder,
}

/// Outcome of a nested model comparison. The reduced model is the
/// independence model for pair tables and the first-order chain for triple
/// tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub g2_reduced: f64,
    pub g2_full: f64,
    pub bic_reduced: f64,
    pub bic_full: f64,
    /// `bic_reduced - bic_full`; negative favors the reduced model.
    pub delta_bic: f64,
    pub samples: u64,
    pub verdict: Verdict,
}

/// `-2 sum x ln(xhat / x)` with empty cells contributing nothing.
fn g2_term(observed: u64, expected: f64) -> f64 {
    if observed == 0 {
        0.0
    } else {
        let x = observed as f64;
        2.0 * x * (x / expected).ln()
    }
}

fn check_table2(t: &Table2) -> Result<()> {
    if t.total() == 0 {
        return Err(Error::InsufficientData("empty transition table".into()));
    }
    Ok(())
}

fn g2_independent(t: &Table2) -> Result<f64> {
    check_table2(t)?;
    if (0..2).any(|i| t.row(i) == 0 || t.col(i) == 0) {
        return Err(Error::InsufficientData(format!(
            "transition table {:?} has an empty row or column",
            t.x
        )));
    }
    let n = t.total() as f64;
    let mut g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = t.row(i) as f64 * t.col(j) as f64 / n;
            g2 += g2_term(t.x[i][j], expected);
        }
    }
    // rounding can leave a tiny negative value on a perfectly balanced table
    Ok(g2.max(0.0))
}

/// Likelihood-ratio statistic and BIC of `model` fitted to `table`.
pub fn g2_and_bic(table: &Table2, model: LogLinearModel) -> Result<(f64, f64)> {
    let g2 = match model {
        LogLinearModel::Independent => g2_independent(table)?,
        LogLinearModel::Markov => {
            check_table2(table)?;
            0.0
        }
    };
    let bic = g2 + model.parameters() as f64 * (table.total() as f64).ln();
    Ok((g2, bic))
}

/// `BIC(independent) - BIC(Markov) = G^2 - ln(N)`.
pub fn delta_bic(table: &Table2) -> Result<f64> {
    let (_, bic_i) = g2_and_bic(table, LogLinearModel::Independent)?;
    let (_, bic_m) = g2_and_bic(table, LogLinearModel::Markov)?;
    Ok(bic_i - bic_m)
}

pub fn independence_test(table: &Table2) -> Result<TestReport> {
    let (g2_reduced, bic_reduced) = g2_and_bic(table, LogLinearModel::Independent)?;
    let (g2_full, bic_full) = g2_and_bic(table, LogLinearModel::Markov)?;
    let delta_bic = bic_reduced - bic_full;
    Ok(TestReport {
        g2_reduced,
        g2_full,
        bic_reduced,
        bic_full,
        delta_bic,
        samples: table.total(),
        verdict: if delta_bic < 0.0 {
            Verdict::Independent
        } else {
            Verdict::Markov
        },
    })
}

/// First- versus second-order Markov comparison on a triple table. The
/// first-order fit makes the first and third symbol independent given the
/// middle one.
pub fn markov_order_test(table: &Table3) -> Result<TestReport> {
    let total = table.total();
    if total == 0 {
        return Err(Error::InsufficientData("empty triple table".into()));
    }
    if (0..2).any(|j| table.middle(j) == 0) {
        return Err(Error::InsufficientData(
            "series never visits one of the states".into(),
        ));
    }
    let mut g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let expected = table.head(i, j) as f64 * table.tail(j, k) as f64 / table.middle(j) as f64;
                g2 += g2_term(table.x[i][j][k], expected);
            }
        }
    }
    let g2 = g2.max(0.0);
    let ln_n = (total as f64).ln();
    let delta_bic = g2 - ORDER_PARAMETER_GAP * ln_n;
    Ok(TestReport {
        g2_reduced: g2,
        g2_full: 0.0,
        bic_reduced: g2 + ln_n,
        bic_full: (1.0 + ORDER_PARAMETER_GAP) * ln_n,
        delta_bic,
        samples: total,
        verdict: if delta_bic < 0.0 {
            Verdict::FirstOrder
        } else {
            Verdict::SecondOrder
        },
    })
}
