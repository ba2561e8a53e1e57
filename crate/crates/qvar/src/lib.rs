//! File formats, configuration and the study runner behind the `qvar`
//! command-line tool.

pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod spec;
pub mod study;

pub use error::{AppError, AppResult};
