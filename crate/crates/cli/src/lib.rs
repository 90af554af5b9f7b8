//! Command-line driver and HTTP front end for the workbench.

pub mod commands;
pub mod http;

use nudge_core::Error;
use serde_json::{json, Value};

/// Machine-readable error body shared by the CLI (stderr) and the HTTP API.
pub fn error_json(err: &Error) -> Value {
    let mut body = json!({ "kind": err.kind(), "message": err.to_string() });
    match err {
        Error::Validation(fields) => body["fields"] = json!(fields),
        Error::MissingArtifacts(files) => body["missing"] = json!(files),
        _ => {}
    }
    json!({ "error": body })
}
