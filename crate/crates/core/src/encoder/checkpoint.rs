//! Checkpoint: little-endian `b"ORGM"`, `u32` version, `u64` parameter
//! count, then the `f64` parameters. Layer dimensions and the parameter index
//! map go to a JSON sidecar next to it (`<path>.json`).

use super::{EncoderDims, EncoderModel, ParamBlock};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"ORGM";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dims: EncoderDims,
    param_count: usize,
    blocks: Vec<ParamBlock>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_model(model: &EncoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * model.param_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        dims: model.dims().clone(),
        param_count: model.param_count(),
        blocks: model.index_map(),
    };
    let sp = sidecar_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&side)?).map_err(|e| Error::io(&sp, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EncoderModel> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let sp = sidecar_path(path);
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?)
        .map_err(|e| Error::parse(sp.display().to_string(), e.to_string()))?;
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < HEADER_LEN || &buf[..4] != MAGIC {
        return Err(Error::parse(&what, "not an ORGM checkpoint"));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::parse(&what, format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    if count != side.param_count || buf.len() != HEADER_LEN + 8 * count {
        return Err(Error::parse(&what, "parameter count disagrees with sidecar or file length"));
    }
    let params = buf[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    EncoderModel::from_params(side.dims, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let dims = EncoderDims {
            hidden: vec![16, 8],
            ..EncoderDims::default()
        };
        let m = EncoderModel::new(dims, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.orgm");
        save_model(&m, &p).unwrap();
        assert!(dir.path().join("model.orgm.json").exists());
        assert_eq!(load_model(&p).unwrap(), m);
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let m = EncoderModel::new(EncoderDims { hidden: vec![4], ..EncoderDims::default() }, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.orgm");
        save_model(&m, &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&p, &bytes).unwrap();
        assert!(load_model(&p).is_err());
        fs::write(&p, b"XXXX").unwrap();
        assert!(load_model(&p).is_err());
    }
}
