//! Library side of the `crisiscnn` command-line tool: run configuration, the
//! model container format, dataset preparation, training pipelines, and the
//! synthetic-corpus generator. The binary in `main.rs` is a thin argument
//! parser over these.

pub mod commands;
pub mod config;
pub mod container;
pub mod io;
pub mod pipeline;
pub mod synth;
