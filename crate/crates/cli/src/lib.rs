//! Configuration, figure presets and the run pipeline behind the `tcqd`
//! command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub use config::SimConfig;
pub use error::CliError;
pub use run::{execute, RunOutput};

/// Run every config and write each into `root/<name>`. Runs proceed
/// concurrently; the first failure in config order is returned.
pub fn run_batch(configs: &[SimConfig], root: &Path) -> Result<Vec<(String, Vec<PathBuf>)>, CliError> {
    #[cfg(feature = "parallel")]
    let iter = configs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = configs.iter();
    iter.map(|cfg| {
        let out = execute(cfg)?;
        let dir = root.join(&cfg.name);
        Ok((cfg.name.clone(), output::write_run(&out, &dir)?))
    })
    .collect::<Vec<Result<_, CliError>>>()
    .into_iter()
    .collect()
}
