//! Incremental porting of C code to Checked C, one declaration at a time.

pub mod checkedc;
pub mod depgraph;
pub mod eval;
pub mod gateway;
pub mod orchestrator;
pub mod patch;
pub mod prompt;
pub mod source;
