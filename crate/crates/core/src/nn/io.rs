//! Flat binary container for [`LstmParams`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "GEOMLSTM"
//! version  u32      1
//! gates    4 bytes  "IFGO"
//! dims     5 x u32  input, hidden, layers, lead, outputs
//! weights  f64...   per layer: w_x, w_h, b (row-major); then head_w, head_b
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LstmDims, LstmParams};
use crate::{Error, Result, Scalar};

pub const MAGIC: &[u8; 8] = b"GEOMLSTM";
pub const FORMAT_VERSION: u32 = 1;
pub const GATE_ORDER: &str = "IFGO";

/// JSON sidecar written next to a parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSidecar {
    pub dims: LstmDims,
    pub seed: u64,
    pub gate_order: String,
    pub format_version: u32,
}

impl ParamsSidecar {
    pub fn new(dims: LstmDims, seed: u64) -> Self {
        ParamsSidecar { dims, seed, gate_order: GATE_ORDER.into(), format_version: FORMAT_VERSION }
    }
}

pub fn write_params<T: Scalar, W: Write>(p: &LstmParams<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(GATE_ORDER.as_bytes())?;
    let d = p.dims;
    for v in [d.input, d.hidden, d.layers, d.lead, d.outputs] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for (_, t) in p.tensors() {
        for v in t {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::ModelFormat(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params<T: Scalar, R: Read>(mut r: R) -> Result<LstmParams<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::ModelFormat(format!("truncated header: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let mut gates = [0u8; 4];
    r.read_exact(&mut gates).map_err(|e| Error::ModelFormat(format!("truncated header: {e}")))?;
    if gates != GATE_ORDER.as_bytes() {
        return Err(Error::ModelFormat(format!("gate order {:?}", String::from_utf8_lossy(&gates))));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u32(&mut r)? as usize;
    }
    let dims = LstmDims { input: dims[0], hidden: dims[1], layers: dims[2], lead: dims[3], outputs: dims[4] };
    let mut p = LstmParams::<T>::zeros(dims)?;
    let mut buf = [0u8; 8];
    for (name, t) in p.tensors_mut() {
        for v in t.iter_mut() {
            r.read_exact(&mut buf).map_err(|_| Error::ModelFormat(format!("truncated in `{name}`")))?;
            *v = T::from_f64_lossy(f64::from_le_bytes(buf));
        }
    }
    if r.read(&mut buf).map_err(|e| Error::ModelFormat(e.to_string()))? != 0 {
        return Err(Error::ModelFormat("trailing bytes".into()));
    }
    Ok(p)
}

/// Writes `path` and `path.json` (the sidecar).
pub fn save_params<T: Scalar>(p: &LstmParams<T>, seed: u64, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_params(p, &mut buf).expect("write to Vec");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&ParamsSidecar::new(p.dims, seed))?;
    std::fs::write(&side, json).map_err(|e| Error::io(side, e))
}

pub fn load_params<T: Scalar>(path: &Path) -> Result<LstmParams<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_params(std::io::BufReader::new(file))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
