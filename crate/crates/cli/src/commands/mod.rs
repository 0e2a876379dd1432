pub mod bench;
pub mod convert;
pub mod eval;
pub mod interpret;
pub mod synth;
pub mod train;

use std::path::PathBuf;

use crate::config::FileConfig;

/// Settings shared by every command after merging flags and config file.
#[derive(Debug)]
pub struct Context {
    pub file: FileConfig,
    pub out: PathBuf,
    pub jobs: usize,
}
