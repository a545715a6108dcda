//! `DAAD0001` dataset container.
//!
//! ```text
//! magic      8 bytes  "DAAD0001"
//! length     u64 LE   byte length of the manifest
//! manifest   JSON lines: one header object, then one record per sample
//!            {"index": .., "age": .., "offset": ..}
//! payload    raw little-endian f32 tensors, C x H x W per record
//! ```
//!
//! Record offsets are relative to the start of the payload.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::NUM_AGES;
use crate::nn::Tensor;

pub const DATASET_MAGIC: &[u8; 8] = b"DAAD0001";
const PREFIX: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    count: usize,
    shape: Vec<usize>,
    dtype: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    index: usize,
    age: i64,
    offset: u64,
}

pub fn encode_dataset(set: &Dataset) -> Result<Vec<u8>> {
    let shape = set.shape.clone();
    let numel: usize = shape.iter().product();
    let record_bytes = (numel * 4) as u64;
    let mut manifest = String::new();
    let header = Header {
        format: "DAAD0001".into(),
        count: set.len(),
        shape,
        dtype: "f32".into(),
    };
    manifest.push_str(&serde_json::to_string(&header)?);
    manifest.push('\n');
    for (k, s) in set.samples.iter().enumerate() {
        if s.image.len() != numel {
            return Err(Error::Dimension(format!(
                "record {k} has {} values, dataset shape needs {numel}",
                s.image.len()
            )));
        }
        let rec = Record {
            index: s.index,
            age: s.age as i64,
            offset: k as u64 * record_bytes,
        };
        manifest.push_str(&serde_json::to_string(&rec)?);
        manifest.push('\n');
    }
    let mut out = Vec::with_capacity(PREFIX + manifest.len() + set.len() * numel * 4);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for s in &set.samples {
        for v in s.image.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_dataset(set: &Dataset, path: &Path) -> Result<()> {
    let bytes = encode_dataset(set)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 8 || &bytes[..8] != DATASET_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"DAAD0001\""));
    }
    if bytes.len() < PREFIX {
        return Err(Error::format(8, "truncated manifest length"));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let payload = PREFIX
        .checked_add(mlen)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::format(8, format!("manifest length {mlen} runs past end of file")))?;
    let manifest = std::str::from_utf8(&bytes[PREFIX..payload])
        .map_err(|e| Error::format((PREFIX + e.valid_up_to()) as u64, "manifest is not UTF-8"))?;

    let mut lines = Vec::new();
    let mut pos = PREFIX;
    for line in manifest.split_inclusive('\n') {
        let text = line.trim_end_matches('\n');
        if !text.trim().is_empty() {
            lines.push((pos as u64, text));
        }
        pos += line.len();
    }
    let (hpos, htext) = *lines
        .first()
        .ok_or_else(|| Error::format(PREFIX as u64, "manifest has no header line"))?;
    let header: Header =
        serde_json::from_str(htext).map_err(|e| Error::format(hpos, format!("bad header: {e}")))?;
    if header.format != "DAAD0001" || header.dtype != "f32" {
        return Err(Error::format(
            hpos,
            format!("unsupported format {} / dtype {}", header.format, header.dtype),
        ));
    }
    if header.shape.is_empty() || header.shape.contains(&0) {
        return Err(Error::format(hpos, format!("invalid record shape {:?}", header.shape)));
    }
    if lines.len() - 1 != header.count {
        return Err(Error::format(
            hpos,
            format!("header announces {} records, manifest lists {}", header.count, lines.len() - 1),
        ));
    }
    let numel: usize = header.shape.iter().product();
    let record_bytes = numel * 4;
    let expected = payload + header.count * record_bytes;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: need {expected} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected as u64, "trailing bytes after last record"));
    }

    let mut samples = Vec::with_capacity(header.count);
    for (k, &(lpos, text)) in lines[1..].iter().enumerate() {
        let rec: Record =
            serde_json::from_str(text).map_err(|e| Error::format(lpos, format!("bad record: {e}")))?;
        if rec.offset != (k * record_bytes) as u64 {
            return Err(Error::format(
                lpos,
                format!("record {k} offset {} is not contiguous", rec.offset),
            ));
        }
        let age = if rec.age < 0 || rec.age >= NUM_AGES as i64 {
            let c = rec.age.clamp(0, NUM_AGES as i64 - 1);
            log::warn!("record {k}: age {} clamped to {c}", rec.age);
            c as usize
        } else {
            rec.age as usize
        };
        let start = payload + k * record_bytes;
        let data = bytes[start..start + record_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        samples.push(Sample {
            index: rec.index,
            age,
            image: Tensor::new(&header.shape, data)?,
        });
    }
    Ok(Dataset {
        shape: header.shape,
        samples,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}
