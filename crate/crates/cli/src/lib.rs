//! Batch front door for the amalgam toolkit: load instance files, run the
//! constructions and their verification suites, emit deterministic
//! machine-readable reports, and generate seeded random instances.

pub mod error;
pub mod gen;
pub mod instance;
pub mod report;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use gen::{gen_instance, Profile};
pub use instance::{InstanceFile, Mode};
pub use report::Report;
pub use scenario::{run_instance, run_scenario, RunFlags};
