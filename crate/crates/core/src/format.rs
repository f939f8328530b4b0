//! The HDLR1 binary container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "HDLR1\0" | u32 version | u64 n | u32 level | 2^level x u64 leaf size
//! tree (pre-order):
//!   leaf  = 0x01 | u64 rows | u64 cols | rows*cols f64, row-major
//!   node  = 0x02 | a11 | block(a21) | block(a12) | a22
//!   block = u64 n_L | u64 n_R | u64 k | u8 flags | L (row-major) | R (row-major)
//! u32 CRC32 of everything before it
//! ```
//!
//! The triangular shape tag is not part of the container; decoded matrices
//! are tagged [`Shape::General`] and can be retagged with
//! [`HodlrMatrix::with_shape`].

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lowrank::LowRankBlock;
use crate::matrix::{Block, HodlrMatrix, Shape};

pub const MAGIC: &[u8; 6] = b"HDLR1\0";
pub const VERSION: u32 = 1;

const TAG_LEAF: u8 = 0x01;
const TAG_NODE: u8 = 0x02;
const FLAG_LEFT_ORTHOGONAL: u8 = 0x01;
const MAX_LEVEL: u32 = 40;

/// Serializes a square HODLR matrix.
pub fn encode(h: &HodlrMatrix) -> Result<Vec<u8>> {
    let rows = h.row_leaf_sizes();
    if rows != h.col_leaf_sizes() {
        return Err(Error::Format("only square matrices with matching row and column partitions can be stored".into()));
    }
    let tree = h.row_tree()?;
    let mut out = Vec::with_capacity(32 + 8 * h.stats().memory_scalars);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u64(&mut out, h.rows());
    out.extend_from_slice(&tree.level().to_le_bytes());
    for &s in tree.leaf_sizes() {
        put_u64(&mut out, s);
    }
    encode_node(h, &mut out);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_row_major(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

fn encode_node(h: &HodlrMatrix, out: &mut Vec<u8>) {
    match &h.block {
        Block::Leaf(m) => {
            out.push(TAG_LEAF);
            put_u64(out, m.nrows());
            put_u64(out, m.ncols());
            put_row_major(out, m);
        }
        Block::Split(s) => {
            out.push(TAG_NODE);
            encode_node(&s.a11, out);
            encode_block(&s.a21, out);
            encode_block(&s.a12, out);
            encode_node(&s.a22, out);
        }
    }
}

fn encode_block(b: &LowRankBlock, out: &mut Vec<u8>) {
    put_u64(out, b.rows());
    put_u64(out, b.cols());
    put_u64(out, b.rank());
    out.push(if b.left_orthogonal { FLAG_LEFT_ORTHOGONAL } else { 0 });
    put_row_major(out, &b.l);
    put_row_major(out, &b.r);
}

/// Parses an HDLR1 byte stream.
pub fn decode(bytes: &[u8]) -> Result<HodlrMatrix> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Corrupt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    if bytes.len() < MAGIC.len() + 4 + 4 {
        return Err(Error::Corrupt("truncated header".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u64()?;
    let level = r.u32()?;
    if level > MAX_LEVEL {
        return Err(Error::Corrupt(format!("level {level} is implausibly deep")));
    }
    let leaves = 1usize << level;
    if leaves.checked_mul(8).is_none_or(|b| b > r.remaining()) {
        return Err(Error::Corrupt("leaf size table runs past the end".into()));
    }
    let sizes = (0..leaves).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    if sizes.contains(&0) || sizes.iter().try_fold(0usize, |a, &s| a.checked_add(s)) != Some(n) {
        return Err(Error::Corrupt("leaf sizes do not sum to n".into()));
    }
    let h = decode_node(&mut r, &sizes)?;
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes after the tree", r.remaining())));
    }
    Ok(h)
}

fn decode_node(r: &mut Reader<'_>, sizes: &[usize]) -> Result<HodlrMatrix> {
    let tag = r.u8()?;
    if sizes.len() == 1 {
        if tag != TAG_LEAF {
            return Err(Error::Corrupt(format!("expected leaf tag, found {tag:#04x}")));
        }
        let (rows, cols) = (r.u64()?, r.u64()?);
        if rows != sizes[0] || cols != sizes[0] {
            return Err(Error::Corrupt(format!("leaf is {rows}x{cols}, partition says {0}x{0}", sizes[0])));
        }
        return Ok(HodlrMatrix::leaf(r.row_major(rows, cols)?, Shape::General));
    }
    if tag != TAG_NODE {
        return Err(Error::Corrupt(format!("expected node tag, found {tag:#04x}")));
    }
    let h = sizes.len() / 2;
    let n1: usize = sizes[..h].iter().sum();
    let n2: usize = sizes[h..].iter().sum();
    let a11 = decode_node(r, &sizes[..h])?;
    let a21 = decode_block(r, n2, n1)?;
    let a12 = decode_block(r, n1, n2)?;
    let a22 = decode_node(r, &sizes[h..])?;
    HodlrMatrix::node(a11, a12, a21, a22, Shape::General)
}

fn decode_block(r: &mut Reader<'_>, rows: usize, cols: usize) -> Result<LowRankBlock> {
    let (nl, nr, k) = (r.u64()?, r.u64()?, r.u64()?);
    if nl != rows || nr != cols {
        return Err(Error::Corrupt(format!("block is {nl}x{nr}, partition says {rows}x{cols}")));
    }
    let flags = r.u8()?;
    if flags & !FLAG_LEFT_ORTHOGONAL != 0 {
        return Err(Error::Corrupt(format!("unknown block flags {flags:#04x}")));
    }
    let l = r.row_major(nl, k)?;
    let rr = r.row_major(k, nr)?;
    let mut b = LowRankBlock::new(l, rr);
    b.left_orthogonal = flags & FLAG_LEFT_ORTHOGONAL != 0;
    Ok(b)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, len: usize) -> Result<&[u8]> {
        if len > self.remaining() {
            return Err(Error::Corrupt(format!("unexpected end of data at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Corrupt(format!("size {v} does not fit in memory")))
    }

    /// Reads a row-major matrix, checking the byte count before allocating.
    fn row_major(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let bytes = rows
            .checked_mul(cols)
            .and_then(|e| e.checked_mul(8))
            .ok_or_else(|| Error::Corrupt(format!("{rows}x{cols} matrix overflows")))?;
        let raw = self.take(bytes)?;
        let mut vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        Ok(DMatrix::from_row_iterator(rows, cols, &mut vals))
    }
}

pub fn write_hodlr(h: &HodlrMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(h)?)?;
    Ok(())
}

pub fn read_hodlr(path: impl AsRef<Path>) -> Result<HodlrMatrix> {
    decode(&fs::read(path)?)
}
