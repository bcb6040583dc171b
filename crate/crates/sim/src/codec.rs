//! Little-endian primitives shared by the binary formats.

use uabs_core::policy::{PolicyArch, PolicyParams};

#[derive(Debug, Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// Architecture descriptor followed by the parameter vector.
    pub fn policy(&mut self, p: &PolicyParams) {
        self.u32(p.arch.input_dim as u32);
        self.u32(p.arch.hidden.len() as u32);
        for &h in &p.arch.hidden {
            self.u32(h as u32);
        }
        self.u32(p.arch.output_dim as u32);
        self.u64(p.theta.len() as u64);
        for &v in &p.theta {
            self.f64(v);
        }
    }
}

/// Reading ran past the end of the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Eof;

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], Eof> {
        if self.remaining() < n {
            return Err(Eof);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, Eof> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32, Eof> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64, Eof> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64, Eof> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Counterpart of [`ByteWriter::policy`]. `Ok(Err(msg))` flags a
    /// well-formed read whose contents are inconsistent.
    pub fn policy(&mut self) -> Result<Result<PolicyParams, String>, Eof> {
        let input_dim = self.u32()? as usize;
        let n_hidden = self.u32()? as usize;
        if n_hidden > self.remaining() / 4 {
            return Err(Eof);
        }
        let hidden = (0..n_hidden).map(|_| self.u32().map(|h| h as usize)).collect::<Result<Vec<_>, _>>()?;
        let output_dim = self.u32()? as usize;
        let n = self.u64()? as usize;
        if n > self.remaining() / 8 {
            return Err(Eof);
        }
        let theta = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        let arch = PolicyArch { input_dim, hidden, output_dim };
        Ok(PolicyParams::new(theta, arch).map_err(|e| e.to_string()))
    }
}
