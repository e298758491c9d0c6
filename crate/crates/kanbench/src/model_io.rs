//! Trained-network persistence.
//!
//! A model file is a JSON object `{format, version, spec, params}` where
//! `params` is the flat parameter vector in the layout of
//! [`Network::flatten_params`].

use std::fs;
use std::path::Path;

use kanbench_core::network::{Network, NetworkSpec};
use kanbench_core::numerics::RngStream;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const MODEL_FORMAT: &str = "kanbench-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    spec: NetworkSpec,
    params: Vec<f64>,
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        spec: net.spec().clone(),
        params: net.flatten_params(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|source| BenchError::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let doc: ModelFile = serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: path.into(),
        source,
    })?;
    if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
        return Err(BenchError::data(
            path,
            format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                doc.format, doc.version
            ),
        ));
    }
    // Any stream works: every initialized parameter is overwritten below.
    let mut net = Network::init(&doc.spec, &mut RngStream::derive(0, 0))?;
    net.set_params(&doc.params)?;
    Ok(net)
}
