//! Little-endian helpers shared by the binary file formats.

use byteorder::{ByteOrder, LittleEndian};

use crate::error::FormatError;

/// Cursor over a byte slice that reports truncation with the byte count it
/// needed versus what was available.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Fails unless `n` more bytes are available, naming the total expected.
    pub fn require(&self, n: usize) -> Result<(), FormatError> {
        let expected = self.pos.saturating_add(n);
        if expected > self.buf.len() {
            Err(FormatError::Truncated {
                expected,
                actual: self.buf.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        self.require(n)?;
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let found = match self.take(4) {
            Ok(m) => m,
            Err(_) => &self.buf[self.pos..],
        };
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn version(&mut self, format: &'static str, expected: u32) -> Result<(), FormatError> {
        let found = self.u32()?;
        if found != expected {
            return Err(FormatError::UnsupportedVersion {
                format,
                expected,
                found,
            });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(LittleEndian::read_u64(self.take(8)?))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(LittleEndian::read_f32(self.take(4)?))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(LittleEndian::read_f64(self.take(8)?))
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::TrailingBytes {
                expected: self.pos,
                actual: self.buf.len(),
            });
        }
        Ok(())
    }
}

/// Byte count of `count` items of `size` bytes, guarding against overflow
/// from hostile headers.
pub fn checked_len(count: usize, size: usize) -> Result<usize, FormatError> {
    count
        .checked_mul(size)
        .ok_or_else(|| FormatError::Corrupt(format!("payload size overflow ({count} x {size})")))
}
