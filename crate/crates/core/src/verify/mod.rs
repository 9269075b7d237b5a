//! Forecast verification: marginal and multivariate scores, PIT and
//! band-depth rank histograms.

mod band_depth;
mod histogram;
mod report;
mod scores;

pub use band_depth::{band_depth_rank, modified_band_depth_counts};
pub use histogram::{make_histogram, rank_bin_probabilities, rank_position, HistogramBins};
pub use report::{
    aggregate_scores, write_report_csv, AggregateScores, MarginalScores, PathStatistic, ScoreAccumulator,
    ScoreReport, DAY_BLOCKS, INTERVAL_LEVEL,
};
pub use scores::{crps_gaussian, crps_sample, interval_score, mean, median, pit, point_scores, quantile_sorted, PointScores};

/// Bins used for PIT and band-depth rank histograms.
pub const HISTOGRAM_BINS: usize = 20;
