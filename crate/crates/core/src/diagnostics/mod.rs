//! Time-series checks that sampled graphs are independent of each other.

pub mod estimate;
pub mod gelman_rubin;
pub mod series;
pub mod sweep;
pub mod tables;

pub use estimate::{mcest, mcest_table, normal_quantile, required_length, RateEstimate};
pub use gelman_rubin::gelman_rubin;
pub use series::{
    read_series, write_series, CountSource, CountsRecorder, EdgeSeries, PairCounts, SeriesRecorder, ThinnedCounts,
};
pub use sweep::{independence_sweep, EdgeResult, EdgeStatus, SweepOptions, SweepReport};
pub use tables::{
    delta_bic, g2_and_bic, independence_test, markov_order_test, LogLinearModel, Table2, Table3, TestReport, Verdict,
};
