//! File formats, configuration and report tables.

pub mod config;
pub mod report;
pub mod trace;

pub use config::{CampaignConfig, DEFAULT_CONFIG};
pub use report::{emit_report, ReportFormat, Table};
pub use trace::{emit_campaign, emit_trace, parse_campaign, parse_trace, CampaignFile};
