//! Binary parameter checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "DUZW"
//! 4       4         format version (u32, currently 1)
//! 8       4         input dimension (u32)
//! 12      4         number of hidden layers H (u32)
//! 16      4·H       hidden widths (u32 each)
//! ..      4         activation code (u32: 0 tanh, 1 sin, 2 identity)
//! ..      8         seed (u64)
//! ..      8         parameter count P (u64)
//! ..      8·P       parameters (f64), in the flat layout of `NetworkParameters`
//! ```

use std::io::{Read, Write};

use super::{Activation, NetworkParameters, NetworkSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DUZW";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(params: &NetworkParameters, mut out: W) -> Result<()> {
    let spec = params.spec();
    let mut buf = Vec::with_capacity(40 + 4 * spec.hidden.len() + 8 * params.len());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.input_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.hidden.len() as u32).to_le_bytes());
    for &w in &spec.hidden {
        buf.extend_from_slice(&(w as u32).to_le_bytes());
    }
    buf.extend_from_slice(&spec.activation.code().to_le_bytes());
    buf.extend_from_slice(&spec.seed.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated while reading {what}")))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.take::<8>(what).map(u64::from_le_bytes)
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<NetworkParameters> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take::<4>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_dim = c.u32("input dimension")? as usize;
    let layers = c.u32("hidden layer count")? as usize;
    if layers > (bytes.len() - c.pos) / 4 {
        return Err(Error::Checkpoint("truncated while reading hidden widths".into()));
    }
    let hidden = (0..layers)
        .map(|_| c.u32("hidden widths").map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let code = c.u32("activation")?;
    let activation = Activation::from_code(code)
        .ok_or_else(|| Error::Checkpoint(format!("unknown activation code {code}")))?;
    let seed = c.u64("seed")?;
    let count = c.u64("parameter count")? as usize;
    let spec = NetworkSpec {
        input_dim,
        hidden,
        activation,
        seed,
    };
    spec.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    if count != spec.parameter_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match architecture ({})",
            spec.parameter_count()
        )));
    }
    let rest = &bytes[c.pos..];
    if rest.len() != 8 * count {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            8 * count,
            rest.len()
        )));
    }
    let data = rest
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    NetworkParameters::from_flat(spec, data).map_err(|e| Error::Checkpoint(e.to_string()))
}
