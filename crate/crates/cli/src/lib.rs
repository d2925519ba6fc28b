//! Session simulator, data ingestion, and file formats around
//! `fairbundle-core`.
//!
//! The core crate holds the pure solvers and scoring; this crate adds
//! everything that touches the outside world: rating and metadata files, the
//! catalog and model archives, the TOML experiment configuration, the
//! session runner with its trace formats, and the `fairbundle` command-line
//! front end.

pub mod archive;
pub mod config;
pub mod error;
pub mod ingest;
pub mod session;
pub mod trace;

pub use error::AppError;
