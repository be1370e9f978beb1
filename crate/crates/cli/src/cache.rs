//! On-disk cache of staircase tables, enabled by `FRACTAL_CALC_CACHE_DIR`.

use std::path::PathBuf;

use fractal_calculus::StaircaseTable;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{sha256_hex, to_json_bytes, write_atomic};

pub const CACHE_ENV: &str = "FRACTAL_CALC_CACHE_DIR";

#[derive(Debug, Serialize)]
struct Key<'a, C: Serialize> {
    curve_hash: &'a str,
    config: &'a C,
}

fn entry_path<C: Serialize>(curve_hash: &str, config: &C) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) else {
        return Ok(None);
    };
    let key = serde_json::to_vec(&Key { curve_hash, config })?;
    Ok(Some(PathBuf::from(dir).join(format!("staircase-{}.json", sha256_hex(&key)))))
}

/// Returns the cached table for `(curve_hash, config)` or computes and
/// stores it. Unreadable entries are recomputed and overwritten.
pub fn staircase_cached<C: Serialize>(
    curve_hash: &str,
    config: &C,
    compute: impl FnOnce() -> Result<StaircaseTable, CliError>,
) -> Result<StaircaseTable, CliError> {
    let Some(path) = entry_path(curve_hash, config)? else {
        return compute();
    };
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok(table) = serde_json::from_slice::<StaircaseTable>(&bytes) {
            return Ok(table);
        }
    }
    let table = compute()?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_atomic(&path, &to_json_bytes(&table)?)?;
    Ok(table)
}
