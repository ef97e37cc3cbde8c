//! Scenario files, trace CSVs and SVG figures.

pub mod csv;
pub mod plots;
pub mod scenario;
pub mod svg;

pub use self::csv::{fmt_g9, parse_trace_csv, write_trace_csv, CsvError};
pub use scenario::{load_scenario, parse_scenario, ScenarioError, ScenarioFile};
