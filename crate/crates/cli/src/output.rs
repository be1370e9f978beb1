use std::io::Write;
use std::path::{Path, PathBuf};

use fractal_calculus::CurveSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::{Format, OutputArgs};

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Debug, Clone, Serialize)]
pub struct CurveInfo {
    /// Hex SHA-256 of the spec's JSON encoding.
    pub hash: String,
    pub spec: CurveSpec,
}

impl CurveInfo {
    pub fn new(spec: &CurveSpec) -> Result<Self, CliError> {
        Ok(Self {
            hash: sha256_hex(&serde_json::to_vec(spec)?),
            spec: spec.clone(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun a command, plus its result.
#[derive(Debug, Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub tool: Tool,
    pub command: &'a str,
    pub seed: u64,
    pub curve: &'a CurveInfo,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<&'a R>,
}

impl<'a, C: Serialize, R: Serialize> Document<'a, C, R> {
    pub fn new(command: &'a str, seed: u64, curve: &'a CurveInfo, config: &'a C, result: &'a R) -> Self {
        Self {
            tool: TOOL,
            command,
            seed,
            curve,
            config,
            result: Some(result),
        }
    }

    fn metadata_only(&self) -> Document<'a, C, R> {
        Document {
            tool: TOOL,
            command: self.command,
            seed: self.seed,
            curve: self.curve,
            config: self.config,
            result: None,
        }
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes(
    write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Emits the primary output: the JSON document, or the CSV produced by
/// `csv` with the document (minus the result) in a sidecar file.
pub fn emit<C: Serialize, R: Serialize>(
    out: &OutputArgs,
    doc: &Document<'_, C, R>,
    csv: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
) -> Result<(), CliError> {
    let bytes = match out.format {
        Format::Json => to_json_bytes(doc)?,
        Format::Csv => csv_bytes(csv)?,
    };
    match &out.out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            if out.format == Format::Csv {
                write_atomic(&sidecar_path(path), &to_json_bytes(&doc.metadata_only())?)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    Ok(())
}
