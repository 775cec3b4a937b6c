//! Event indicators over replicate ensembles, probability surfaces,
//! spatial extents, yearly extent trends, empirical station extents and
//! posterior summaries.
//!
//! All estimators are pure functions of an ensemble. Probabilities are
//! replicate fractions; extents are region-weighted sums of indicators;
//! period averages run over the slots where an event is defined, so a
//! persistence window that would leave the period drops that day from the
//! divisor.

mod csv_out;
mod estimators;
mod events;
mod summary;

pub use estimators::{
    average_extent, average_probability, daily_increment, empirical_extent, event_indicator, event_probability,
    extent, reference_mean, reference_mean_per_replicate, station_reference_mean, yearly_extent_trend,
    ExtentSample, ProbabilitySurface, ReferenceSurface, TrendEstimate,
};
pub use csv_out::{summary_row, write_extent_csv, write_surface_csv, write_trend_csv, SUMMARY_HEADER};
pub use events::{period_mean, EventKind, EventSpec, Slot};
pub use summary::{posterior_summary, quantile, Histogram, Summary, DEFAULT_QUANTILES};
