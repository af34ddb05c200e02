//! Scenario files, verbs and reports for the `ncpb` command.

pub mod generate;
pub mod report;
pub mod run;
pub mod scenario;

pub use generate::{generate_scenario, GenerateKind, Generated};
pub use report::{render, Check, Format, Report, Verdict};
pub use run::{load, run, run_file, Flags};
pub use scenario::{emit, parse_scenario, parse_str, scenario_hash, InputError, Scenario, Verb};

/// Exit code for unreadable or invalid scenarios.
pub const EXIT_INPUT: i32 = 3;
