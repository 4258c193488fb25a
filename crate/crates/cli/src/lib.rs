//! File formats, the token/tag interchange format and the command-line
//! front-end for [`candyspan_core`].

pub mod cli;
pub mod interchange;
pub mod report;
pub mod tsv;

pub use cli::{run, RunConfig};
