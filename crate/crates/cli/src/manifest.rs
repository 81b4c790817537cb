// SPDX-License-Identifier: Apache-2.0

//! Run manifests appended to every file the CLI writes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce an output. Thread counts are not recorded:
/// they never change results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub params: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: BTreeMap::new(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn param(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.params.insert(name.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) -> &mut Self {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        self
    }

    /// Comment block, every line prefixed with `prefix` (`#` for most
    /// formats, `%` for ABC).
    pub fn to_block(&self, prefix: &str) -> String {
        let mut out = format!("{prefix} manifest\n");
        out.push_str(&format!("{prefix} command: {}\n", self.command));
        out.push_str(&format!("{prefix} version: {}\n", self.version));
        for (k, v) in &self.params {
            out.push_str(&format!("{prefix} param {k}: {v}\n"));
        }
        for (k, v) in &self.seeds {
            out.push_str(&format!("{prefix} seed {k}: {v}\n"));
        }
        for i in &self.inputs {
            out.push_str(&format!("{prefix} input {}: sha256:{}\n", i.path, i.sha256));
        }
        out
    }
}

/// Reads a file and records its digest.
pub fn read_input(manifest: &mut RunManifest, path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| crate::error::CliError::io(path, e))?;
    manifest.input(path, &bytes);
    String::from_utf8(bytes)
        .map_err(|_| crate::error::CliError::Data(format!("{}: not valid UTF-8", path.display())))
}
