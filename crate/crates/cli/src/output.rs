//! Summary/profile writers with a provenance block and deterministic bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use hylo_core::grid::RadialGrid;

/// FNV-1a over the mesh parameters; stable across runs and platforms.
pub fn grid_hash(grid: &RadialGrid) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&(grid.dim() as u64).to_le_bytes());
    eat(&(grid.ell() as i64).to_le_bytes());
    eat(&grid.r_max().to_bits().to_le_bytes());
    eat(&(grid.n_cells() as u64).to_le_bytes());
    format!("{h:016x}")
}

#[derive(Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_hash: Option<String>,
}

#[derive(Serialize)]
pub struct Summary<T: Serialize> {
    pub task: &'static str,
    pub provenance: Provenance,
    pub result: T,
}

fn check_finite(v: &Value, path: &str) -> Result<()> {
    match v {
        Value::Number(n) => {
            if n.as_f64().map(|x| !x.is_finite()).unwrap_or(false) {
                bail!("non-finite number at {path}");
            }
            Ok(())
        }
        // serde_json encodes NaN/Inf as null; summaries must never carry them.
        Value::Null => bail!("null (likely a non-finite number) at {path}"),
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                check_finite(x, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        Value::Object(o) => {
            for (k, x) in o {
                check_finite(x, &format!("{path}.{k}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Writes `summary.json`, refusing NaN/Inf anywhere in the tree.
pub fn write_summary<T: Serialize>(out_dir: &Path, summary: &Summary<T>) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let value = serde_json::to_value(summary)?;
    check_finite(&value, "summary")?;
    let path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_profile(out_dir: &Path, name: &str, field: &hylo_core::grid::Field) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    let mut buf = Vec::new();
    hylo_core::grid::write_profile_csv(field, &mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}
