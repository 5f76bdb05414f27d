use std::fmt::Write as _;
use std::path::Path;

use lindblad_green::dicke::ModelParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize)]
struct Fingerprint<'a, O: Serialize> {
    command: &'a str,
    params: &'a ModelParams,
    options: &'a O,
}

/// SHA-256 of the canonical JSON of the command, parameters and options.
pub fn config_hash<O: Serialize>(command: &str, params: &ModelParams, options: &O) -> String {
    let json = serde_json::to_string(&Fingerprint { command, params, options }).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV document assembled in memory and written in one piece.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(hash: &str, command: &str, method: &str, header: &[String]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# provenance: command={command} method={method} config_sha256={hash}");
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let fields: Vec<String> = fields.into_iter().collect();
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
        }
    }
}
