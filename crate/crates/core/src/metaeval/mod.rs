//! Meta-evaluation: how well metric scores agree with human judgements.

pub mod correlation;
pub mod kendall;
pub mod report;

pub use correlation::{doc_pearson, pearson, pearson_abs, DocAverage};
pub use kendall::{
    kendall_darr, kendall_darr_with, top_systems, topn_pairwise_kendall, KendallResult, MetricScores, Orientation,
};
pub use report::{build_report, format_value, Cell, EvalReport, Measurement, ReportLayout, ReportMetadata, ReportRow, ReportSection, Section};
