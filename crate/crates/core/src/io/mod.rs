//! File formats: rules and matrix configuration, edge lists, report CSV
//! and pixmap snapshots.

pub mod config;
pub mod relations;
pub mod report;
pub mod snapshot;

pub use config::{parse_matrix, parse_rules, print_matrix, print_rules, ParseError};
pub use relations::{
    build_relation_model, parse_edge_list, EdgeList, RelationModel, RelationOptions,
    RelationSetKind,
};
pub use report::{read_report_csv, write_report_csv, ReportError};
pub use snapshot::render_snapshot;
