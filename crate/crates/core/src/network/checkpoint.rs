//! Binary checkpoint format.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "AQMD"                 magic
//! u16                    format version
//! u32                    layer count
//! per layer:
//!   u8                   kind (0 = conv, 1 = upsample)
//!   conv only:
//!     u32 × 4            out_ch, in_ch, kernel_h, kernel_w
//!     u8                 stride
//!     u8                 activation (0 = identity, 1 = relu, 2 = leaky relu)
//!     f64                leaky slope (0 otherwise)
//!     f32 × out·in·9     weights
//!     f32 × out          biases
//! u64                    optimizer step
//! per conv layer:        f32 first-moment weights, biases, second-moment weights, biases
//! u32                    CRC32 of all preceding bytes
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layers::{Activation, KERNEL};
use super::{AdamState, ConvParams, LayerSpec, NetworkParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AQMD";
pub const CHECKPOINT_VERSION: u16 = 1;

const KIND_CONV: u8 = 0;
const KIND_UPSAMPLE: u8 = 1;

fn put_f32s<'a>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn put_block(buf: &mut Vec<u8>, p: &ConvParams) {
    put_f32s(buf, p.weight.iter());
    put_f32s(buf, p.bias.iter());
}

pub(crate) fn encode(params: &NetworkParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + params.param_count() * 12);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.specs.len() as u32).to_le_bytes());
    let mut convs = params.convs.iter();
    for spec in &params.specs {
        match *spec {
            LayerSpec::Conv { in_ch, out_ch, stride, activation } => {
                buf.push(KIND_CONV);
                for dim in [out_ch, in_ch, KERNEL, KERNEL] {
                    buf.extend_from_slice(&(dim as u32).to_le_bytes());
                }
                buf.push(stride as u8);
                let (tag, slope) = match activation {
                    Activation::Identity => (0u8, 0.0f64),
                    Activation::Relu => (1, 0.0),
                    Activation::LeakyRelu(a) => (2, a),
                };
                buf.push(tag);
                buf.extend_from_slice(&slope.to_le_bytes());
                put_block(&mut buf, convs.next().expect("conv params"));
            }
            LayerSpec::Upsample => buf.push(KIND_UPSAMPLE),
        }
    }
    buf.extend_from_slice(&params.optimizer.step.to_le_bytes());
    for (m, v) in params.optimizer.first.iter().zip(&params.optimizer.second) {
        put_block(&mut buf, m);
        put_block(&mut buf, v);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::MalformedCheckpoint(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::MalformedCheckpoint("array too large".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect())
    }

    fn block(&mut self, in_ch: usize, out_ch: usize) -> Result<ConvParams> {
        let weight = Array2::from_shape_vec((out_ch, in_ch * KERNEL * KERNEL), self.f64s(out_ch * in_ch * KERNEL * KERNEL)?)
            .expect("length matches shape");
        let bias = Array1::from(self.f64s(out_ch)?);
        Ok(ConvParams { weight, bias })
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<NetworkParams> {
    if bytes.len() < 4 + 2 + 4 + 4 {
        return Err(Error::MalformedCheckpoint(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::MalformedCheckpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: CHECKPOINT_VERSION });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 6 };
    let count = r.u32()? as usize;
    let mut specs = Vec::with_capacity(count.min(1024));
    let mut convs = Vec::new();
    for _ in 0..count {
        match r.u8()? {
            KIND_CONV => {
                let out_ch = r.u32()? as usize;
                let in_ch = r.u32()? as usize;
                let (kh, kw) = (r.u32()? as usize, r.u32()? as usize);
                if (kh, kw) != (KERNEL, KERNEL) {
                    return Err(Error::MalformedCheckpoint(format!("unsupported kernel {kh}x{kw}")));
                }
                let stride = r.u8()? as usize;
                let tag = r.u8()?;
                let slope = r.f64()?;
                let activation = match tag {
                    0 => Activation::Identity,
                    1 => Activation::Relu,
                    2 => Activation::LeakyRelu(slope),
                    t => return Err(Error::MalformedCheckpoint(format!("unknown activation tag {t}"))),
                };
                specs.push(LayerSpec::Conv { in_ch, out_ch, stride, activation });
                convs.push(r.block(in_ch, out_ch)?);
            }
            KIND_UPSAMPLE => specs.push(LayerSpec::Upsample),
            k => return Err(Error::MalformedCheckpoint(format!("unknown layer kind {k}"))),
        }
    }
    let step = r.u64()?;
    let mut first = Vec::with_capacity(convs.len());
    let mut second = Vec::with_capacity(convs.len());
    for c in &convs {
        let (out_ch, cols) = c.weight.dim();
        let in_ch = cols / (KERNEL * KERNEL);
        first.push(r.block(in_ch, out_ch)?);
        second.push(r.block(in_ch, out_ch)?);
    }
    if r.pos != body.len() {
        return Err(Error::MalformedCheckpoint(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let params = NetworkParams::from_parts(specs, convs, AdamState { step, first, second });
    if !params.is_finite() {
        return Err(Error::NonFinite("checkpoint weights".into()));
    }
    Ok(params)
}

/// Writes `params` (rounded to `f32`) to `path` via a temporary file.
pub fn save_checkpoint(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !params.is_finite() {
        return Err(Error::NonFinite("refusing to save non-finite weights".into()));
    }
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, encode(params))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    decode(&fs::read(path)?)
}
