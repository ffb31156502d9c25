//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "ACCNNCKP"
//! version  u32
//! hlen     u32      length of the JSON header
//! header   hlen bytes: {"kind", "config", "tensors": [{"name","rows","cols"}]}
//! data     f64 LE values of every tensor, in header order
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{NeuralError, Result, Tensor2};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ACCNNCKP";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<(String, Tensor2)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(checkpoint: &Checkpoint, mut out: W) -> Result<()> {
    let header = Header {
        kind: checkpoint.kind.clone(),
        config: checkpoint.config.clone(),
        tensors: checkpoint
            .tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for (_, t) in &checkpoint.tensors {
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    input.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;

    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut buf = [0u8; 8];
    for entry in header.tensors {
        let mut data = Vec::with_capacity(entry.rows * entry.cols);
        for _ in 0..entry.rows * entry.cols {
            input
                .read_exact(&mut buf)
                .map_err(|_| bad(format!("truncated data for `{}`", entry.name)))?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push((entry.name, Tensor2::from_vec(entry.rows, entry.cols, data)?));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after parameter data"));
    }
    Ok(Checkpoint {
        kind: header.kind,
        config: header.config,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            kind: "lstm".into(),
            config: serde_json::json!({"hidden": 2}),
            tensors: vec![
                ("a".into(), Tensor2::from_vec(1, 2, vec![1.5, -0.25]).unwrap()),
                ("b".into(), Tensor2::from_vec(2, 1, vec![f64::MIN_POSITIVE, 7.0]).unwrap()),
            ],
        }
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_checkpoint(&sample(), &mut buf).unwrap();
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn rejects_wrong_version_and_truncation() {
        let mut buf = Vec::new();
        write_checkpoint(&sample(), &mut buf).unwrap();
        let mut wrong = buf.clone();
        wrong[8] = 9;
        assert!(matches!(read_checkpoint(wrong.as_slice()), Err(NeuralError::Checkpoint(_))));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(short), Err(NeuralError::Checkpoint(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
        assert!(read_checkpoint(&b"NOTACKPT...."[..]).is_err());
    }
}
