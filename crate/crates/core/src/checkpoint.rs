//! Versioned binary parameter dump (`model.bin`) and CSV exports.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! magic "HMGEMODL" | u32 version | u64 num_features
//! u64 config length | config JSON
//! u32 tensor count | per tensor: u32 name length, name, u64 rows, u64 cols, rows*cols f64
//! ```
//!
//! Tensors appear in [`HmgeParams::for_each`] order and are matched by name
//! on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::model::{HmgeConfig, HmgeParams};
use ndarray::Array2;

const MAGIC: &[u8; 8] = b"HMGEMODL";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: HmgeConfig,
    pub num_features: usize,
    pub params: HmgeParams,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(&ckpt.config)
        .map_err(|e| Error::invalid(format!("cannot serialize config: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(ckpt.num_features as u64).to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let count = ckpt.params.names().len() as u32;
    out.extend_from_slice(&count.to_le_bytes());
    ckpt.params.for_each(|name, _, t| {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self) -> std::result::Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|_| "length overflows usize".to_string())
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a model file (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        ));
    }
    let num_features = r.len()?;
    let json_len = r.len()?;
    let config: HmgeConfig =
        serde_json::from_slice(r.take(json_len)?).map_err(|e| format!("config: {e}"))?;
    config
        .validate(config.input_dims())
        .map_err(|e| format!("stored config: {e}"))?;
    let mut params = HmgeParams::zeros(&config, num_features);
    let expected = params.names();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(format!(
            "{count} tensors, config implies {}",
            expected.len()
        ));
    }
    let mut tensors = Vec::with_capacity(count);
    for (want, shape) in expected.iter().zip(params.shapes()) {
        let name_len = r.u32()? as usize;
        let name =
            std::str::from_utf8(r.take(name_len)?).map_err(|_| "tensor name is not UTF-8")?;
        if name != want {
            return Err(format!("tensor `{name}` where `{want}` was expected"));
        }
        let dims = (r.len()?, r.len()?);
        if dims != shape {
            return Err(format!("tensor `{name}` is {dims:?}, expected {shape:?}"));
        }
        let raw = r.take(dims.0 * dims.1 * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Array2::from_shape_vec(dims, values).expect("length checked"));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    params.assign_tensors(&tensors);
    Ok(Checkpoint {
        config,
        num_features,
        params,
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    decode(bytes).map_err(|m| Error::load("<model>", m))
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::load(path, m))
}

/// Writes `embeddings.csv` and one `alpha_l<k>.csv` per hidden layer
/// (softmax-normalized, rows are input dimensions). Returns the paths.
pub fn export(
    dir: &Path,
    params: &HmgeParams,
    embeddings: &Array2<f64>,
) -> Result<Vec<std::path::PathBuf>> {
    io::create_dir(dir)?;
    let mut written = vec![dir.join("embeddings.csv")];
    io::write_matrix_csv(&written[0], embeddings)?;
    for (k, w) in params.combination_weights().iter().enumerate() {
        let path = dir.join(format!("alpha_l{}.csv", k + 1));
        io::write_matrix_csv(&path, w)?;
        written.push(path);
    }
    Ok(written)
}
