//! Checkpoint directories.
//!
//! A checkpoint is a directory with two files:
//!
//! * `manifest.json`: `format_version`, `config` (every model setting),
//!   `n_skills`, `epoch` (the epoch whose parameters were kept), `stop`,
//!   `history` (one record per epoch), `data_dir` (corpus used for
//!   training, if known) and `params` (name and shape of every parameter,
//!   in blob order).
//! * `params.bin`: the 8-byte magic `CHGHPRM1`, a little-endian `u32`
//!   parameter count, then per parameter a `u32` name length, the UTF-8
//!   name, `u64` rows, `u64` cols and `rows·cols` little-endian `f64`
//!   values in row-major order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::labels::MetricsReport;
use crate::model::{Model, ParamSet};
use crate::tape::Matrix;

use super::LossBundle;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
const MAGIC: &[u8; 8] = b"CHGHPRM1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean over the epoch's steps.
    pub loss: LossBundle,
    pub val: MetricsReport,
    /// Training-split metrics, when tracked.
    pub train: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EarlyStopped { epoch: usize },
    Diverged { epoch: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    n_skills: usize,
    epoch: usize,
    stop: StopReason,
    history: Vec<EpochRecord>,
    data_dir: Option<PathBuf>,
    params: Vec<ParamEntry>,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    /// Write atomically; an existing directory at `dir` is replaced.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fsutil::write_dir_atomically(dir, |d| self.save_into(d))
    }

    fn save_into(&self, dir: &Path) -> Result<()> {
        let params = &self.model.params;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.model.config.clone(),
            n_skills: self.model.n_skills,
            epoch: self.epoch,
            stop: self.stop.clone(),
            history: self.history.clone(),
            data_dir: self.data_dir.clone(),
            params: params
                .iter()
                .map(|(name, v)| ParamEntry {
                    name: name.to_string(),
                    rows: v.nrows(),
                    cols: v.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        fsutil::write_file_atomically(&dir.join(MANIFEST_FILE), json.as_bytes())?;
        fsutil::write_file_atomically(&dir.join(PARAMS_FILE), &encode_params(params))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        fsutil::require_exists(dir)?;
        let manifest_path = dir.join(MANIFEST_FILE);
        fsutil::require_exists(&manifest_path)?;
        let text = fsutil::read_to_string(&manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: manifest_path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let blob_path = dir.join(PARAMS_FILE);
        fsutil::require_exists(&blob_path)?;
        let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let loaded = decode_params(&blob).map_err(|m| Error::Parse {
            path: blob_path.display().to_string(),
            line: 0,
            message: m,
        })?;

        let mut model = Model::new(manifest.config, manifest.n_skills)?;
        if loaded.names() != model.params.names() {
            return Err(Error::Config(format!(
                "{} does not match the parameter layout of its configuration",
                blob_path.display()
            )));
        }
        for ((name, value), entry) in loaded.iter().zip(&manifest.params) {
            let expect = model.params.get(name).map(Matrix::dim);
            if expect != Some(value.dim()) || entry.name != name || (entry.rows, entry.cols) != value.dim() {
                return Err(Error::Config(format!("parameter {name} has shape {:?}", value.dim())));
            }
        }
        model.params = loaded;
        Ok(Self {
            model,
            epoch: manifest.epoch,
            history: manifest.history,
            stop: manifest.stop,
            data_dir: manifest.data_dir,
        })
    }
}

pub fn encode_params(params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.n_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, v) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(v.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(v.ncols() as u64).to_le_bytes());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_params(blob: &[u8]) -> std::result::Result<ParamSet, String> {
    let mut r = Reader { blob, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a parameter blob (bad magic)".into());
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| format!("parameter name: {e}"))?
            .to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows.checked_mul(cols).ok_or("parameter shape overflows")?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        let m = Matrix::from_shape_vec((rows, cols), data).map_err(|e| e.to_string())?;
        params.insert(&name, m);
    }
    if r.pos != blob.len() {
        return Err(format!("{} trailing bytes", blob.len() - r.pos));
    }
    Ok(params)
}

struct Reader<'a> {
    blob: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.blob.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.blob[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
