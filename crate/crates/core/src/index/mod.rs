//! Ratio index: grouping, weights, group statistics, calibration and series.

mod grouping;
mod hci;
mod ratios;
mod series;
mod stats;
mod weights;

pub use grouping::{assign_group, CaratClass, GroupingScheme, CARAT_CLASS_BOUNDS, N_CARAT_CLASSES};
pub use hci::{
    calibrate, compute_hci, compute_subindices, index_point, policy_weights, snapshot_value,
    subindices_from_stats, weighted_centre, BaselineCalibration, Calibration, IndexOptions,
    IndexPoint, StreamingIndex, WeightingPolicy, BASE_LEVEL,
};
pub use ratios::{compute_ratios, ratio_of, score_records, RatioRecord};
pub use series::{
    align_series_for_comparison, read_index_csv, read_index_jsonl, smooth_series, splice_series,
    write_index_csv, write_index_jsonl, AlignedSeries, IndexSeries, SeriesMeta, Smoothing,
};
pub use stats::{
    deterministic_sum, group_stats, median_in_place, CompensatedSum, GroupStats, GroupSummary,
    Statistic, StatsAccumulator, CHUNK,
};
pub use weights::{final_weights, proportional_weights, weights_from_totals, WeightVector};
