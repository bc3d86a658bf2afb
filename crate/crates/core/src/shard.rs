//! DIPF image shards.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DIPF"
//! 4       4     u32 version (= 1)
//! 8       4     u32 channels
//! 12      4     u32 height
//! 16      4     u32 width
//! 20      8     u64 image_count
//! 28      ...   image_count * C*H*W f32 values, CHW order per image
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::PriorImage;

pub const SHARD_MAGIC: &[u8; 4] = b"DIPF";
pub const SHARD_VERSION: u32 = 1;
pub const SHARD_HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShardHeader {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    pub image_count: u64,
}

impl ShardHeader {
    pub fn image_len(&self) -> usize {
        self.channels as usize * self.height as usize * self.width as usize
    }

    /// Total file length implied by the header.
    pub fn file_len(&self) -> u64 {
        SHARD_HEADER_LEN as u64 + self.image_count * self.image_len() as u64 * 4
    }

    pub fn encode(&self) -> [u8; SHARD_HEADER_LEN] {
        let mut buf = [0u8; SHARD_HEADER_LEN];
        buf[0..4].copy_from_slice(SHARD_MAGIC);
        buf[4..8].copy_from_slice(&SHARD_VERSION.to_le_bytes());
        buf[8..12].copy_from_slice(&self.channels.to_le_bytes());
        buf[12..16].copy_from_slice(&self.height.to_le_bytes());
        buf[16..20].copy_from_slice(&self.width.to_le_bytes());
        buf[20..28].copy_from_slice(&self.image_count.to_le_bytes());
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SHARD_HEADER_LEN {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!("header needs {SHARD_HEADER_LEN} bytes, file has {}", bytes.len()),
            });
        }
        if &bytes[0..4] != SHARD_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {:?}, expected \"DIPF\"", &bytes[0..4]),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != SHARD_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        Ok(Self {
            channels: u32_at(8),
            height: u32_at(12),
            width: u32_at(16),
            image_count: u64::from_le_bytes(bytes[20..28].try_into().unwrap()),
        })
    }
}

/// Streams images into a shard file while hashing every byte written.
pub struct ShardWriter {
    path: PathBuf,
    out: BufWriter<File>,
    hasher: Sha256,
    header: ShardHeader,
    written: u64,
}

impl ShardWriter {
    pub fn create(path: &Path, header: ShardHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            hasher: Sha256::new(),
            header,
            written: 0,
        };
        writer.put(&header.encode())?;
        Ok(writer)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.hasher.update(bytes);
        self.out.write_all(bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_image(&mut self, img: &PriorImage) -> Result<()> {
        let h = &self.header;
        if (img.channels(), img.height(), img.width())
            != (h.channels as usize, h.height as usize, h.width as usize)
        {
            return Err(Error::invalid(format!(
                "image {}x{}x{} does not match shard {}x{}x{}",
                img.channels(),
                img.height(),
                img.width(),
                h.channels,
                h.height,
                h.width
            )));
        }
        if self.written == h.image_count {
            return Err(Error::invalid("shard already holds its declared image count"));
        }
        let mut bytes = Vec::with_capacity(img.data().len() * 4);
        for v in img.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.put(&bytes)?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and returns the hex SHA-256 of the file contents.
    pub fn finish(mut self) -> Result<String> {
        if self.written != self.header.image_count {
            return Err(Error::Internal(format!(
                "shard {} received {} of {} images",
                self.path.display(),
                self.written,
                self.header.image_count
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        self.out
            .get_ref()
            .sync_all()
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(hex::encode(self.hasher.finalize()))
    }
}

/// Decoded shard contents.
#[derive(Clone, Debug)]
pub struct Shard {
    pub header: ShardHeader,
    pub data: Vec<f32>,
}

impl Shard {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let header = ShardHeader::decode(bytes)?;
        let expected = header.file_len();
        if bytes.len() as u64 != expected {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!("expected {expected} bytes, found {}", bytes.len()),
            });
        }
        let data = bytes[SHARD_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { header, data })
    }

    pub fn image(&self, i: usize) -> Result<PriorImage> {
        let n = self.header.image_len();
        let h = &self.header;
        let slice = self
            .data
            .get(i * n..(i + 1) * n)
            .ok_or_else(|| Error::invalid(format!("image {i} out of range")))?;
        PriorImage::new(h.channels as usize, h.height as usize, h.width as usize, slice.to_vec())
    }
}

pub fn read_shard(path: &Path) -> Result<Shard> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Shard::parse(&bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let h = ShardHeader {
            channels: 3,
            height: 32,
            width: 28,
            image_count: 0x0102_0304_0506_0708,
        };
        let bytes = h.encode();
        assert_eq!(&bytes[0..4], b"DIPF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[3, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[32, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[28, 0, 0, 0]);
        assert_eq!(&bytes[20..28], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(ShardHeader::decode(&bytes).unwrap(), h);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.dipf");
        let header = ShardHeader {
            channels: 1,
            height: 2,
            width: 2,
            image_count: 2,
        };
        let a = PriorImage::new(1, 2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let b = PriorImage::filled(1, 2, 2, 0.75).unwrap();
        let mut w = ShardWriter::create(&path, header).unwrap();
        w.write_image(&a).unwrap();
        w.write_image(&b).unwrap();
        let digest = w.finish().unwrap();

        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len() as u64, header.file_len());
        assert_eq!(sha256_hex(&bytes), digest);
        let shard = read_shard(&path).unwrap();
        assert_eq!(shard.image(0).unwrap(), a);
        assert_eq!(shard.image(1).unwrap(), b);
    }

    #[test]
    fn short_writes_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let header = ShardHeader {
            channels: 1,
            height: 1,
            width: 1,
            image_count: 2,
        };
        let mut w = ShardWriter::create(&dir.path().join("s"), header).unwrap();
        w.write_image(&PriorImage::filled(1, 1, 1, 0.5).unwrap()).unwrap();
        assert!(w.finish().is_err());
    }

    #[test]
    fn truncation_and_magic_errors() {
        let header = ShardHeader {
            channels: 1,
            height: 1,
            width: 1,
            image_count: 1,
        };
        let mut bytes = header.encode().to_vec();
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        assert!(Shard::parse(&bytes).is_ok());
        assert!(matches!(Shard::parse(&bytes[..30]), Err(Error::Format { offset: 30, .. })));
        assert!(matches!(Shard::parse(&bytes[..10]), Err(Error::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(Shard::parse(&bytes), Err(Error::Format { offset: 0, .. })));
    }
}
