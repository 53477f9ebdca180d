//! Experiment driver for `rispart`: experiment files, Monte-Carlo sweeps with CSV
//! output, the SNR region scan and the seeded verification suites.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fig3;
pub mod problem;
pub mod verify;

pub use config::{ExperimentSpec, PsiMode, Sweep};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, write_outputs, ExperimentOutput, ResultRow, SummaryRow};
pub use fig3::{fig3_regions, RegionTable};
pub use verify::{run_suite, Check, Suite};
