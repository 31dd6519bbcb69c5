//! Little-endian binary reading with byte-offset error reporting,
//! shared by the dataset and checkpoint formats.

use std::io::Read;

use crate::error::FormatError;

pub(crate) struct Reader<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> Reader<R> {
    pub(crate) fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub(crate) fn take<const N: usize>(
        &mut self,
        what: &str,
    ) -> Result<[u8; N], FormatError> {
        let mut buf = [0u8; N];
        let mut read = 0;
        while read < N {
            let n = self.inner.read(&mut buf[read..])?;
            if n == 0 {
                return Err(FormatError::Truncated(format!(
                    "{what} at byte offset {}",
                    self.offset + read
                )));
            }
            read += n;
        }
        self.offset += N;
        Ok(buf)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, FormatError> {
        Ok(self.take::<1>(what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take::<2>(what)?))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take::<4>(what)?))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take::<4>(what)?))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }
}
