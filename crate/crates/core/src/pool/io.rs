//! Embedding store codecs.
//!
//! Binary layout (all little-endian): magic `EMBD`, u32 version (1), u32
//! count, u32 dim, then per record a u16 id byte-length, the UTF-8 id, a u8
//! gender code (0 female, 1 male) and `dim` f32 values.
//!
//! CSV layout: header `id,gender,v0,...,v{D-1}` then one row per record.

use std::fs;
use std::path::Path;

use super::{EmbeddingPool, Gender, SpeakerEmbedding};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBD";
pub const VERSION: u32 = 1;

pub fn encode_embd(pool: &EmbeddingPool) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(pool.len()).map_err(|_| Error::Format("too many records".into()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&(pool.dim() as u32).to_le_bytes());
    for e in pool.entries() {
        let id = e.speaker_id.as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Format(format!("id `{}` longer than 65535 bytes", e.speaker_id)))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id);
        buf.push(e.gender.code());
        for &v in &e.vector {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("EMBD truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
}

pub fn decode_embd(bytes: &[u8]) -> Result<EmbeddingPool> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("missing EMBD magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EMBD version {version}")));
    }
    let count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 20));
    for rec in 0..count {
        let len = cur.u16()? as usize;
        let id = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format(format!("record {rec}: id is not UTF-8")))?
            .to_owned();
        let gender = Gender::from_code(cur.take(1)?[0])?;
        let vector = cur
            .take(dim * 4)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let e = SpeakerEmbedding {
            vector,
            speaker_id: id,
            gender,
        };
        e.validate()
            .map_err(|err| Error::Format(format!("record {rec} (`{}`): {err}", e.speaker_id)))?;
        entries.push(e);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after EMBD records".into()));
    }
    EmbeddingPool::new(entries)
}

pub fn encode_csv(pool: &EmbeddingPool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "gender".to_string()];
    header.extend((0..pool.dim()).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for e in pool.entries() {
        let mut row = vec![e.speaker_id.clone(), e.gender.to_string()];
        row.extend(e.vector.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

pub fn decode_csv(bytes: &[u8]) -> Result<EmbeddingPool> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut entries = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: String| Error::Format(format!("csv row {}: {what}", line + 1));
        if rec.len() < 3 {
            return Err(bad("need id, gender and at least one value".into()));
        }
        let gender: Gender = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let vector = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let e = SpeakerEmbedding {
            vector,
            speaker_id: rec[0].to_owned(),
            gender,
        };
        e.validate().map_err(|err| bad(err.to_string()))?;
        entries.push(e);
    }
    EmbeddingPool::new(entries)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Load a store, picking CSV for `.csv` paths and the binary format otherwise.
pub fn load_pool(path: impl AsRef<Path>) -> Result<EmbeddingPool> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if is_csv(path) {
        decode_csv(&bytes)
    } else {
        decode_embd(&bytes)
    }
}

pub fn encode_for_path(path: impl AsRef<Path>, pool: &EmbeddingPool) -> Result<Vec<u8>> {
    if is_csv(path.as_ref()) {
        encode_csv(pool)
    } else {
        encode_embd(pool)
    }
}

pub fn save_pool(path: impl AsRef<Path>, pool: &EmbeddingPool) -> Result<()> {
    let bytes = encode_for_path(&path, pool)?;
    fs::write(path, bytes)?;
    Ok(())
}
