//! Dynamic inter-company relationship graphs and the FRI indicator set.
//!
//! The crate builds daily relationship graph sets for a stock universe —
//! from news co-occurrence, from rolling return correlation, or as a
//! constant baseline — and scores them with four indicators that do not
//! depend on any downstream model:
//!
//! * **CSS** — per-day hypothesis test that connected pairs show larger
//!   correlation changes than unconnected pairs, averaged over days.
//! * **AECR** — fraction of co-occurrence event periods that capture a
//!   large swing of the pair's rolling correlation.
//! * **Δβ** — slope trend of group regressions on an edge-density
//!   "high minus low" correlation factor.
//! * **Δ_DCC** — DCC-GARCH contrast between densely and sparsely
//!   connected pair groups.
//!
//! [`synth`] generates markets with planted relationship events so all of
//! the above can be validated against a known ground truth.

pub mod aecr;
pub mod calendar;
pub mod css;
pub mod dcc;
pub mod error;
pub mod factor;
pub mod graph;
pub mod market;
pub mod optim;
pub mod report;
pub mod rolling;
pub mod seed;
pub mod stats;
pub mod synth;

pub use calendar::TradingCalendar;
pub use error::FriError;
pub use graph::{EdgeSeries, GraphSet, NodePartition};
pub use market::{NewsRecord, Panel};
pub use rolling::RollingCorrSeries;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, FriError>;

/// Rolling-correlation window length in trading days.
pub const DEFAULT_EPSILON: usize = 21;
/// Significance level for the per-day correlation stability test.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Correlation threshold for the correlation-based graph variant.
pub const DEFAULT_THETA: f64 = 0.6;
