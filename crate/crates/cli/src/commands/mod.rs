mod evaluate;
mod map_voi;
mod phantom;
mod segment;
mod stats;

use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::Command;

pub use evaluate::{load_cases, CaseSpec};

pub fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Segment(a) => segment::run(a),
        Command::MapVoi(a) => map_voi::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Stats(a) => stats::run(a),
        Command::Phantom(a) => phantom::run(a),
    }
}

/// Run `f` on a dedicated pool of `threads` workers, or on the global
/// pool when unset.
pub(crate) fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::failure(format!("cannot start thread pool: {e}")))?
            .install(f),
    }
}

pub(crate) fn require_file(role: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{role} input {} does not exist", path.display())))
    }
}

pub(crate) fn create_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", dir.display())))
}
