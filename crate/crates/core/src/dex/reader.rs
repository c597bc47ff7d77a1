//! Bounds-checked little-endian reads over a DEX image.

use super::DexError;

#[derive(Clone, Copy)]
pub(crate) struct Bytes<'a> {
    data: &'a [u8],
}

impl<'a> Bytes<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Bytes { data }
    }

    pub fn slice(&self, offset: usize, len: usize, section: &'static str) -> Result<&'a [u8], DexError> {
        offset
            .checked_add(len)
            .and_then(|end| self.data.get(offset..end))
            .ok_or(DexError::Truncated { section, offset })
    }

    pub fn u16(&self, offset: usize, section: &'static str) -> Result<u16, DexError> {
        let b = self.slice(offset, 2, section)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&self, offset: usize, section: &'static str) -> Result<u32, DexError> {
        let b = self.slice(offset, 4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Checks that `count` items of `size` bytes fit at `offset`, so callers
    /// can size allocations from header fields safely.
    pub fn table(&self, offset: u32, count: u32, size: usize, section: &'static str) -> Result<(), DexError> {
        let len = (count as usize).checked_mul(size).ok_or(DexError::Truncated {
            section,
            offset: offset as usize,
        })?;
        self.slice(offset as usize, len, section).map(|_| ())
    }

    pub fn cursor(&self, offset: usize, section: &'static str) -> Cursor<'a> {
        Cursor {
            data: self.data,
            pos: offset,
            section,
        }
    }
}

/// Sequential reader for variable-length encodings.
pub(crate) struct Cursor<'a> {
    data: &'a [u8],
    pub pos: usize,
    section: &'static str,
}

impl Cursor<'_> {
    fn truncated(&self) -> DexError {
        DexError::Truncated {
            section: self.section,
            offset: self.pos,
        }
    }

    pub fn remaining(&self) -> usize {
        self.data.len().saturating_sub(self.pos)
    }

    pub fn u8(&mut self) -> Result<u8, DexError> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.truncated())?;
        self.pos += 1;
        Ok(b)
    }

    pub fn uleb128(&mut self) -> Result<u32, DexError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for i in 0..5 {
            let b = self.u8()?;
            value |= u32::from(b & 0x7f) << (7 * i);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(DexError::Malformed {
            section: self.section,
            offset: start,
            message: "uleb128 longer than 5 bytes".into(),
        })
    }

    pub fn sleb128(&mut self) -> Result<i32, DexError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for i in 0..5 {
            let b = self.u8()?;
            value |= u32::from(b & 0x7f) << (7 * i);
            if b & 0x80 == 0 {
                let shift = 7 * (i + 1);
                if shift < 32 && b & 0x40 != 0 {
                    value |= u32::MAX << shift;
                }
                return Ok(value as i32);
            }
        }
        Err(DexError::Malformed {
            section: self.section,
            offset: start,
            message: "sleb128 longer than 5 bytes".into(),
        })
    }

    /// uleb128 minus one; `None` encodes the no-index value.
    pub fn uleb128p1(&mut self) -> Result<Option<u32>, DexError> {
        Ok(self.uleb128()?.checked_sub(1))
    }
}

/// Decodes a NUL-terminated MUTF-8 string starting at the cursor.
pub(crate) fn mutf8(cur: &mut Cursor<'_>) -> Result<String, DexError> {
    let mut units: Vec<u16> = Vec::new();
    loop {
        let start = cur.pos;
        let a = cur.u8()?;
        if a == 0 {
            break;
        }
        let unit = if a < 0x80 {
            u16::from(a)
        } else if a & 0xe0 == 0xc0 {
            let b = cur.u8()?;
            (u16::from(a & 0x1f) << 6) | u16::from(b & 0x3f)
        } else if a & 0xf0 == 0xe0 {
            let b = cur.u8()?;
            let c = cur.u8()?;
            (u16::from(a & 0x0f) << 12) | (u16::from(b & 0x3f) << 6) | u16::from(c & 0x3f)
        } else {
            return Err(DexError::Malformed {
                section: "string_data",
                offset: start,
                message: format!("invalid MUTF-8 lead byte {a:#04x}"),
            });
        };
        units.push(unit);
    }
    Ok(String::from_utf16_lossy(&units))
}
