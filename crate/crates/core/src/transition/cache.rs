//! On-disk cache for transition functions ("MWTF1" files).
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size      field
//! 0       5         magic b"MWTF1"
//! 5       4         u32 header length H
//! 9       H         UTF-8 JSON header {key, config, grid, settings, inputs}
//! 9+H     ...       one record per column, input-major then grid index:
//!                     u32 n_max
//!                     f64 truncation difference (NaN when n_max was fixed)
//!                     (2·n_max+1)·S pairs of f64 (re, im), g block then e block,
//!                     S = 1 (Bragg) or 2 (Raman)
//! end−32  32        SHA-256 of every preceding byte
//! ```
//!
//! The key is the hex SHA-256 of the canonical JSON of
//! {format, config, grid, inputs, settings}.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Column, ColumnInput, TransitionFunction};
use crate::error::{Error, Result};
use crate::physics::{internal_states, AmplitudeState, DiffractionConfig, MomentumGrid, C64};
use crate::solver::SolverSettings;

pub const MAGIC: &[u8; 5] = b"MWTF1";
/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "MATTERWAVE_CACHE_DIR";

#[derive(Serialize, Deserialize)]
struct Header {
    key: String,
    config: DiffractionConfig,
    grid: MomentumGrid,
    settings: SolverSettings,
    inputs: Vec<ColumnInput>,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    format: &'static str,
    config: &'a DiffractionConfig,
    grid: &'a MomentumGrid,
    inputs: &'a [ColumnInput],
    settings: &'a SolverSettings,
}

pub fn cache_key(config: &DiffractionConfig, grid: &MomentumGrid, inputs: &[ColumnInput], settings: &SolverSettings) -> String {
    let material = KeyMaterial {
        format: "MWTF1",
        config,
        grid,
        inputs,
        settings,
    };
    let json = serde_json::to_vec(&material).expect("key material serialises");
    hex::encode(Sha256::digest(&json))
}

/// Cache directory from the environment, if set and non-empty.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn encode(tf: &TransitionFunction) -> Vec<u8> {
    let header = Header {
        key: cache_key(&tf.config, &tf.grid, &tf.inputs, &tf.settings),
        config: tf.config,
        grid: tf.grid,
        settings: tf.settings,
        inputs: tf.inputs.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(64 + json.len() + tf.columns.len() * 128);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for column in &tf.columns {
        out.extend_from_slice(&(column.state.n_max() as u32).to_le_bytes());
        out.extend_from_slice(&column.difference.to_le_bytes());
        for a in column.state.to_flat() {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Cache("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<TransitionFunction> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Cache("not an MWTF1 file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: MAGIC.len() };
    let len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| Error::Cache(format!("bad header: {e}")))?;
    if header.key != cache_key(&header.config, &header.grid, &header.inputs, &header.settings) {
        return Err(Error::Cache("header key does not match its contents".into()));
    }
    let count = header.inputs.len() * header.grid.points_per_hbark;
    let mechanism = header.config.mechanism;
    let mut columns = Vec::with_capacity(count);
    for j in 0..count {
        let n_max = r.u32()? as usize;
        let difference = r.f64()?;
        let dim = (2 * n_max + 1) * internal_states(mechanism);
        let mut flat = Vec::with_capacity(dim);
        for _ in 0..dim {
            let re = r.f64()?;
            let im = r.f64()?;
            flat.push(C64::new(re, im));
        }
        let q = header.grid.quasi_momentum(j % header.grid.points_per_hbark);
        columns.push(Column {
            state: AmplitudeState::from_flat(mechanism, n_max, q, &flat)?,
            difference,
        });
    }
    if r.pos != body.len() {
        return Err(Error::Cache("trailing bytes after the last column".into()));
    }
    TransitionFunction::from_parts(header.config, header.grid, header.settings, header.inputs, columns)
}

pub fn save(tf: &TransitionFunction, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    // write-then-rename so concurrent readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(tf))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TransitionFunction> {
    decode(&fs::read(path)?)
}

/// Loads from `dir` when a valid entry exists, otherwise builds and stores.
/// Corrupt entries are rebuilt.
pub fn build_cached(
    dir: Option<&Path>,
    config: &DiffractionConfig,
    grid: MomentumGrid,
    inputs: &[ColumnInput],
    settings: &SolverSettings,
) -> Result<TransitionFunction> {
    let Some(dir) = dir else {
        return TransitionFunction::build(config, grid, inputs, settings);
    };
    let path = dir.join(format!("{}.mwtf", cache_key(config, &grid, inputs, settings)));
    if path.exists() {
        if let Ok(tf) = load(&path) {
            return Ok(tf);
        }
    }
    let tf = TransitionFunction::build(config, grid, inputs, settings)?;
    save(&tf, &path)?;
    Ok(tf)
}
