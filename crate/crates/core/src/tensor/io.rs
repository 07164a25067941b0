//! Binary tensor files.
//!
//! Both formats start with a 16-byte little-endian header: a 4-byte magic,
//! then `version`, `rows`, `cols` as `u32`. Weights follow as `rows*cols`
//! little-endian `f64`; masks follow as packed bits, row-major, least
//! significant bit first, padded to a whole byte.

use std::io::{Read, Write};

use super::{MaskTensor, WeightTensor};
use crate::error::{Error, Result};

pub const WEIGHT_MAGIC: [u8; 4] = *b"NMPX";
pub const MASK_MAGIC: [u8; 4] = *b"NMMK";
const VERSION: u32 = 1;

fn write_header(out: &mut impl Write, magic: [u8; 4], rows: usize, cols: usize) -> Result<()> {
    let rows = u32::try_from(rows).map_err(|_| Error::Format("rows exceed u32".into()))?;
    let cols = u32::try_from(cols).map_err(|_| Error::Format("cols exceed u32".into()))?;
    out.write_all(&magic)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_header(input: &mut impl Read, magic: [u8; 4]) -> Result<(usize, usize)> {
    let mut got = [0u8; 4];
    input.read_exact(&mut got)?;
    if got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = read_u32(input)? as usize;
    let cols = read_u32(input)? as usize;
    Ok((rows, cols))
}

pub fn write_weights(out: &mut impl Write, w: &WeightTensor) -> Result<()> {
    write_header(out, WEIGHT_MAGIC, w.rows(), w.cols())?;
    for v in w.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_weights(input: &mut impl Read) -> Result<WeightTensor> {
    let (rows, cols) = read_header(input, WEIGHT_MAGIC)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        input.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    WeightTensor::new(rows, cols, data)
}

pub fn write_mask(out: &mut impl Write, m: &MaskTensor) -> Result<()> {
    write_header(out, MASK_MAGIC, m.rows(), m.cols())?;
    let mut packed = vec![0u8; m.bits().len().div_ceil(8)];
    for (i, &bit) in m.bits().iter().enumerate() {
        if bit {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    out.write_all(&packed)?;
    Ok(())
}

pub fn read_mask(input: &mut impl Read) -> Result<MaskTensor> {
    let (rows, cols) = read_header(input, MASK_MAGIC)?;
    let n = rows * cols;
    let mut packed = vec![0u8; n.div_ceil(8)];
    input.read_exact(&mut packed)?;
    let bits = (0..n)
        .map(|i| packed[i / 8] & (1 << (i % 8)) != 0)
        .collect();
    MaskTensor::new(rows, cols, bits)
}
