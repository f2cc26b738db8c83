//! Length-prefixed binary encoding shared by every wire and memory format.
//!
//! Each field is written as a little-endian `u32` length followed by that many
//! bytes. Integers are written as fixed-width little-endian fields with their
//! own length prefix, so a decoder can reject a truncated or mis-typed field
//! without guessing.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("field has length {actual}, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("unknown tag {0}")]
    UnknownTag(u8),
    #[error("{0} trailing bytes after message")]
    Trailing(usize),
    #[error("field is not valid utf-8")]
    Utf8,
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tag(&mut self, tag: u8) -> &mut Self {
        self.buf.push(tag);
        self
    }

    pub fn bytes(&mut self, field: &[u8]) -> &mut Self {
        let len = u32::try_from(field.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(field);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.bytes(&[u8::from(v)])
    }

    /// Writes a list as a count followed by each element's own encoding.
    pub fn list<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) -> &mut Self {
        self.u32(u32::try_from(items.len()).expect("list longer than u32::MAX"));
        for item in items {
            each(self, item);
        }
        self
    }

    pub fn opt_bytes(&mut self, field: Option<&[u8]>) -> &mut Self {
        match field {
            Some(b) => self.tag(1).bytes(b),
            None => self.tag(0),
        }
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated {
                needed: n,
                available: self.buf.len(),
            });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn tag(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.take(4)?;
        let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
        self.take(len)
    }

    pub fn vec(&mut self) -> Result<Vec<u8>, CodecError> {
        self.bytes().map(<[u8]>::to_vec)
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let b = self.bytes()?;
        b.try_into().map_err(|_| CodecError::BadLength {
            expected: N,
            actual: b.len(),
        })
    }

    pub fn string(&mut self) -> Result<String, CodecError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| CodecError::Utf8)
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        self.fixed::<8>().map(u64::from_le_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        self.fixed::<4>().map(u32::from_le_bytes)
    }

    pub fn bool(&mut self) -> Result<bool, CodecError> {
        match self.fixed::<1>()?[0] {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(CodecError::UnknownTag(t)),
        }
    }

    pub fn list<T>(
        &mut self,
        mut each: impl FnMut(&mut Self) -> Result<T, CodecError>,
    ) -> Result<Vec<T>, CodecError> {
        let n = self.u32()? as usize;
        // every element costs at least one byte, so a huge count on a short
        // buffer is malformed rather than an allocation request
        if n > self.buf.len() {
            return Err(CodecError::Truncated {
                needed: n,
                available: self.buf.len(),
            });
        }
        (0..n).map(|_| each(self)).collect()
    }

    pub fn opt_bytes(&mut self) -> Result<Option<Vec<u8>>, CodecError> {
        match self.tag()? {
            0 => Ok(None),
            1 => self.vec().map(Some),
            t => Err(CodecError::UnknownTag(t)),
        }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn finish(self) -> Result<(), CodecError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(CodecError::Trailing(self.buf.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_are_le_length_prefixed() {
        let out = Writer::new().bytes(b"ab").u64(7).finish();
        assert_eq!(&out[..4], &2u32.to_le_bytes());
        assert_eq!(&out[4..6], b"ab");
        assert_eq!(&out[6..10], &8u32.to_le_bytes());
        assert_eq!(&out[10..], &7u64.to_le_bytes());
    }

    #[test]
    fn truncated_field_is_rejected() {
        let out = Writer::new().bytes(b"hello").finish();
        let mut r = Reader::new(&out[..6]);
        assert!(matches!(r.bytes(), Err(CodecError::Truncated { .. })));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let out = Writer::new().u32(1).tag(9).finish();
        let mut r = Reader::new(&out);
        r.u32().unwrap();
        assert_eq!(r.finish(), Err(CodecError::Trailing(1)));
    }

    #[test]
    fn absurd_list_count_does_not_allocate() {
        let out = Writer::new().u32(u32::MAX).finish();
        assert!(Reader::new(&out).list(|r| r.u64()).is_err());
    }
}
