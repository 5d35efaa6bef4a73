//! File formats and command-line front end for `opacity-core`.

pub mod cli;
pub mod format;
pub mod project_file;

pub use format::{parse_automaton, write_automaton, FormatError};
pub use project_file::{load_project, parse_project_file, read_automaton, write_project_file, ProjectFile};
