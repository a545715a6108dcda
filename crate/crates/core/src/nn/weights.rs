//! Weight file: the 8-byte magic `DAAWGT01`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then the raw little-endian parameter data in
//! header order. Offsets in the header are relative to the start of the data
//! section.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::scalar::fmt_dtype_size;
use crate::nn::{ParamStore, Scalar, Tensor};

pub const WEIGHT_MAGIC: &[u8; 8] = b"DAAWGT01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    #[serde(default = "yes")]
    pub trainable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub architecture: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

pub fn encode_weights<T: Scalar>(
    store: &ParamStore<T>,
    architecture: &serde_json::Value,
) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(store.len());
    let mut data = Vec::new();
    for p in store.iter() {
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            dtype: T::DTYPE.to_string(),
            offset: data.len() as u64,
            trainable: p.trainable,
        });
        for &v in p.value.data() {
            v.write_le(&mut data);
        }
    }
    let header = serde_json::to_vec(&WeightHeader {
        architecture: architecture.clone(),
        params: entries,
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + data.len());
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&data);
    Ok(out)
}

pub fn save_weights<T: Scalar>(
    path: &Path,
    store: &ParamStore<T>,
    architecture: &serde_json::Value,
) -> Result<()> {
    let bytes = encode_weights(store, architecture)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Parses and validates a weight file, converting values to `T`.
pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<(ParamStore<T>, serde_json::Value)> {
    if bytes.len() < 16 {
        return Err(Error::format(bytes.len() as u64, "file shorter than weight preamble"));
    }
    if &bytes[..8] != WEIGHT_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"DAAWGT01\""));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let data_start = 16u64
        .checked_add(hlen)
        .filter(|&end| end <= bytes.len() as u64)
        .ok_or_else(|| Error::format(8, format!("header length {hlen} exceeds file size")))?;
    let header: WeightHeader = serde_json::from_slice(&bytes[16..data_start as usize])
        .map_err(|e| Error::format(16, format!("invalid header: {e}")))?;
    let data = &bytes[data_start as usize..];
    let mut store = ParamStore::new();
    let mut expected_offset = 0u64;
    for e in &header.params {
        let size = fmt_dtype_size(&e.dtype).ok_or_else(|| {
            Error::format(16, format!("parameter `{}` has unknown dtype {}", e.name, e.dtype))
        })?;
        if e.shape.is_empty() || e.shape.contains(&0) {
            return Err(Error::format(16, format!("parameter `{}` has invalid shape {:?}", e.name, e.shape)));
        }
        if e.offset != expected_offset {
            return Err(Error::format(
                data_start + e.offset,
                format!("parameter `{}` offset {} not contiguous (expected {expected_offset})", e.name, e.offset),
            ));
        }
        let numel: usize = e.shape.iter().product();
        let nbytes = (numel * size) as u64;
        let end = e.offset + nbytes;
        if end > data.len() as u64 {
            return Err(Error::format(
                data_start + data.len() as u64,
                format!("truncated data for parameter `{}`", e.name),
            ));
        }
        let raw = &data[e.offset as usize..end as usize];
        let values: Vec<T> = match size {
            4 => raw.chunks_exact(4).map(|c| T::from_f64(f32::read_le(c) as f64)).collect(),
            _ => raw.chunks_exact(8).map(|c| T::from_f64(f64::read_le(c))).collect(),
        };
        let t = Tensor::new(&e.shape, values)?;
        if e.trainable {
            store.insert(&e.name, t)?;
        } else {
            store.insert_buffer(&e.name, t)?;
        }
        expected_offset = end;
    }
    if expected_offset != data.len() as u64 {
        return Err(Error::format(
            data_start + expected_offset,
            format!("{} trailing bytes after parameter data", data.len() as u64 - expected_offset),
        ));
    }
    Ok((store, header.architecture))
}

pub fn load_weights<T: Scalar>(path: &Path) -> Result<(ParamStore<T>, serde_json::Value)> {
    decode_weights(&std::fs::read(path)?)
}

/// Copies values from `loaded` into `target`, requiring identical names,
/// order and shapes.
pub fn assign_matching<T: Scalar>(target: &mut ParamStore<T>, loaded: &ParamStore<T>) -> Result<()> {
    if target.len() != loaded.len() {
        return Err(Error::Dimension(format!(
            "weight file has {} tensors, model expects {}",
            loaded.len(),
            target.len()
        )));
    }
    for (dst, src) in target.iter_mut().zip(loaded.iter()) {
        if dst.name != src.name || dst.value.shape() != src.value.shape() {
            return Err(Error::Dimension(format!(
                "weight `{}` {:?} does not match model `{}` {:?}",
                src.name,
                src.value.shape(),
                dst.name,
                dst.value.shape()
            )));
        }
        dst.value = src.value.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore<f32> {
        let mut ps = ParamStore::new();
        ps.insert("a.weight", Tensor::from_fn(&[2, 3], |i| i as f32 * 0.5 - 1.0)).unwrap();
        ps.insert_buffer("buf", Tensor::scalar(7.25)).unwrap();
        ps
    }

    #[test]
    fn round_trip_is_bitwise() {
        let ps = sample();
        let arch = serde_json::json!({"c": 2});
        let bytes = encode_weights(&ps, &arch).unwrap();
        assert_eq!(&bytes[..8], b"DAAWGT01");
        let (back, a2) = decode_weights::<f32>(&bytes).unwrap();
        assert_eq!(a2, arch);
        for (x, y) in ps.iter().zip(back.iter()) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.value, y.value);
            assert_eq!(x.trainable, y.trainable);
        }
    }

    #[test]
    fn validation_errors() {
        let ps = sample();
        let bytes = encode_weights(&ps, &serde_json::Value::Null).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_weights::<f32>(&bad), Err(Error::Format { offset: 0, .. })));
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(decode_weights::<f32>(truncated), Err(Error::Format { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_weights::<f32>(&extra).is_err());
    }

    #[test]
    fn assign_checks_shapes() {
        let ps = sample();
        let mut other = ParamStore::<f32>::new();
        other.insert("a.weight", Tensor::zeros(&[3, 2])).unwrap();
        other.insert_buffer("buf", Tensor::zeros(&[1])).unwrap();
        assert!(assign_matching(&mut other, &ps).is_err());
    }
}
