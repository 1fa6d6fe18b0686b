//! CLI, HTTP service, session persistence and reports for the debias workbench.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod render;
pub mod server;
pub mod session;
pub mod workspace;

use serde::{Deserialize, Serialize};

pub use error::{Result, WorkbenchError};
pub use session::SCHEMA_VERSION;

/// Wrapper every JSON response and CLI output uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub data: T,
}

impl<T> Envelope<T> {
    pub fn new(data: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub schema_version: u32,
    pub error: ErrorBody,
}

impl From<&WorkbenchError> for ErrorEnvelope {
    fn from(e: &WorkbenchError) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            error: ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

/// Parses `category<sep>theta` items separated by commas, e.g.
/// `politics:0.7,science:1`. The category `*` means every category.
pub fn parse_theta_list(text: &str, sep: char) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (cat, value) = item.rsplit_once(sep).ok_or_else(|| {
                WorkbenchError::Invalid(format!("expected category{sep}theta, got {item:?}"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| WorkbenchError::Invalid(format!("bad theta in {item:?}")))?;
            Ok((cat.trim().to_string(), value))
        })
        .collect()
}
