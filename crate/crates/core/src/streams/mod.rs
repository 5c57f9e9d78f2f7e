//! Data sources: seeded synthetic environments, CSV ingestion and running
//! standardization.

mod csv_io;
mod standardize;
mod synthetic;

pub use csv_io::{export_csv, ingest_csv, ColumnSelector, CsvOptions, LabelMapping};
pub use standardize::{RunningStandardizer, DEFAULT_VARIANCE_FLOOR};
pub use synthetic::{generate, preset, PhaseDistribution, PhaseSpec, SyntheticStream, PRESETS};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Outlier,
}

/// One time step of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub index: u64,
    pub x_raw: Vec<f64>,
    pub label: Option<Label>,
    /// Phase identifier of synthetic environments; never shown to learners.
    pub phase_id: Option<usize>,
}

impl StreamEvent {
    pub fn is_labeled_outlier(&self) -> bool {
        self.label == Some(Label::Outlier)
    }
}

/// Indices at which the phase identifier changes.
pub fn phase_changepoints(events: &[StreamEvent]) -> Vec<u64> {
    events
        .windows(2)
        .filter(|w| w[0].phase_id != w[1].phase_id)
        .map(|w| w[1].index)
        .collect()
}
