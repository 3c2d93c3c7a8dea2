//! Monte-Carlo coverage studies: data generation, replications, aggregation and reports.

pub mod config;
pub mod generate;
pub mod report;
pub mod run;

pub use config::{BetaSpec, DesignSpec, LambdaChoice, SimConfig, TestedCoords};
pub use generate::{generate_instance, Instance, Simulator};
pub use report::{emit_report, parse_csv_report, ReportFormat};
pub use run::{aggregate, run_replication, run_simulation, ReplicationRecord, SimulationReport};
