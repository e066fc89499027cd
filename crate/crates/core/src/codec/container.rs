//! Seekable container: magic "TDC1", version, codebook, frame directory and a
//! header CRC, followed by the frames.

use std::io::{Cursor, Read, Seek, SeekFrom, Write};

use rayon::prelude::*;

use crate::event_model::RelativeEvent;
use crate::{Error, Result};

use super::codebook::{deserialize_codebook, serialize_codebook, CodeBook};
use super::frame::{compress_frame, decompress_frame, FrameStats};
use super::wire::{ByteReader, ByteWriter};

const CONTAINER_MAGIC: &[u8; 4] = b"TDC1";
pub const CONTAINER_VERSION: u8 = 1;
const DIR_ENTRY_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameEntry {
    /// Byte offset from the container's first byte.
    pub offset: u64,
    pub len: u32,
    pub events: u32,
}

fn header_bytes(codebook: &[u8], dir: &[FrameEntry]) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    w.bytes(CONTAINER_MAGIC);
    w.u8(CONTAINER_VERSION);
    w.blob(codebook)?;
    w.u32(dir.len() as u32);
    for e in dir {
        w.u64(e.offset);
        w.u32(e.len);
        w.u32(e.events);
    }
    w.crc();
    Ok(w.buf)
}

/// Streams frames after a header whose directory is filled in by
/// [`ContainerWriter::finish`].
pub struct ContainerWriter<W: Write + Seek> {
    out: W,
    codebook: Vec<u8>,
    dir: Vec<FrameEntry>,
    capacity: usize,
    base: u64,
    next: u64,
}

impl<W: Write + Seek> ContainerWriter<W> {
    pub fn new(mut out: W, codebook: &CodeBook, frame_count: usize) -> Result<Self> {
        let codebook = serialize_codebook(codebook)?;
        let placeholder = vec![
            FrameEntry {
                offset: 0,
                len: 0,
                events: 0
            };
            frame_count
        ];
        let header = header_bytes(&codebook, &placeholder)?;
        let base = out.stream_position()?;
        out.write_all(&header)?;
        Ok(Self {
            out,
            codebook,
            dir: Vec::with_capacity(frame_count),
            capacity: frame_count,
            base,
            next: header.len() as u64,
        })
    }

    pub fn write_frame(&mut self, frame: &[u8], events: usize) -> Result<()> {
        if self.dir.len() == self.capacity {
            return Err(Error::InvalidConfig(format!("container sized for {} frames", self.capacity)));
        }
        let len = u32::try_from(frame.len()).map_err(|_| Error::InvalidConfig("frame above 4 GiB".into()))?;
        self.out.write_all(frame)?;
        self.dir.push(FrameEntry {
            offset: self.next,
            len,
            events: events as u32,
        });
        self.next += frame.len() as u64;
        Ok(())
    }

    /// Rewrites the header with the real directory and returns the sink.
    pub fn finish(mut self) -> Result<W> {
        if self.dir.len() != self.capacity {
            return Err(Error::SizeMismatch {
                expected: self.capacity,
                actual: self.dir.len(),
            });
        }
        let header = header_bytes(&self.codebook, &self.dir)?;
        self.out.seek(SeekFrom::Start(self.base))?;
        self.out.write_all(&header)?;
        self.out.seek(SeekFrom::Start(self.base + self.next))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn read_exact_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.by_ref().take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(Error::Corrupt("container truncated".into()));
    }
    Ok(buf)
}

pub struct ContainerReader<R: Read + Seek> {
    input: R,
    base: u64,
    codebook: CodeBook,
    dir: Vec<FrameEntry>,
}

impl<R: Read + Seek> ContainerReader<R> {
    /// Reads and checks the header; frames are read lazily.
    pub fn open(mut input: R) -> Result<Self> {
        let base = input.stream_position()?;
        let end = input.seek(SeekFrom::End(0))?;
        input.seek(SeekFrom::Start(base))?;
        let fixed = read_exact_vec(&mut input, 9).map_err(|_| Error::BadMagic)?;
        if &fixed[..4] != CONTAINER_MAGIC {
            return Err(Error::BadMagic);
        }
        if fixed[4] != CONTAINER_VERSION {
            return Err(Error::VersionMismatch {
                found: fixed[4],
                expected: CONTAINER_VERSION,
            });
        }
        let cb_len = u32::from_le_bytes(fixed[5..9].try_into().expect("4 bytes")) as usize;
        if cb_len as u64 > end - base {
            return Err(Error::Corrupt("codebook longer than container".into()));
        }
        let cb_bytes = read_exact_vec(&mut input, cb_len)?;
        let count_bytes = read_exact_vec(&mut input, 4)?;
        let count = u32::from_le_bytes(count_bytes[..].try_into().expect("4 bytes")) as usize;
        if (count * DIR_ENTRY_BYTES) as u64 > end - base {
            return Err(Error::Corrupt("frame directory longer than container".into()));
        }
        let dir_bytes = read_exact_vec(&mut input, count * DIR_ENTRY_BYTES)?;
        let crc_bytes = read_exact_vec(&mut input, 4)?;

        let mut header = fixed;
        header.extend_from_slice(&cb_bytes);
        header.extend_from_slice(&count_bytes);
        header.extend_from_slice(&dir_bytes);
        let stored = u32::from_le_bytes(crc_bytes[..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&header);
        if stored != computed {
            return Err(Error::Corrupt(format!(
                "container header checksum: stored {stored:08x}, computed {computed:08x}"
            )));
        }
        let codebook = deserialize_codebook(&cb_bytes)?;
        let header_len = header.len() as u64 + 4;
        let mut r = ByteReader::new(&dir_bytes, "frame directory");
        let mut dir = Vec::with_capacity(count);
        let mut expect = header_len;
        for _ in 0..count {
            let e = FrameEntry {
                offset: r.u64()?,
                len: r.u32()?,
                events: r.u32()?,
            };
            if e.offset != expect || base + e.offset + e.len as u64 > end {
                return Err(Error::Corrupt(format!("frame directory entry at {}", e.offset)));
            }
            expect += e.len as u64;
            dir.push(e);
        }
        if expect != end - base {
            return Err(Error::Corrupt(format!("{} bytes after the last frame", end - base - expect)));
        }
        input.seek(SeekFrom::Start(base))?;
        Ok(Self {
            input,
            base,
            codebook,
            dir,
        })
    }

    pub fn codebook(&self) -> &CodeBook {
        &self.codebook
    }

    pub fn frame_count(&self) -> usize {
        self.dir.len()
    }

    pub fn directory(&self) -> &[FrameEntry] {
        &self.dir
    }

    pub fn frame_bytes(&mut self, index: usize) -> Result<Vec<u8>> {
        let e = *self.dir.get(index).ok_or(Error::ValueOutOfRange {
            value: index as u64,
            range: self.dir.len() as u64,
        })?;
        self.input.seek(SeekFrom::Start(self.base + e.offset))?;
        read_exact_vec(&mut self.input, e.len as usize)
    }

    /// Decodes frame `index` alone; a corrupt frame leaves the others readable.
    pub fn read_frame(&mut self, index: usize) -> Result<Vec<RelativeEvent>> {
        let bytes = self.frame_bytes(index)?;
        decode_frame_checked(&bytes, &self.codebook, index, self.dir[index].events)
    }
}

/// Decodes one frame's bytes, tagging errors with `index` and checking the
/// event count the directory promised.
pub fn decode_frame_checked(bytes: &[u8], cb: &CodeBook, index: usize, events: u32) -> Result<Vec<RelativeEvent>> {
    let decoded = decompress_frame(bytes, cb).map_err(|e| match e {
        Error::ChecksumMismatch { stored, computed, .. } => Error::ChecksumMismatch {
            frame: index,
            stored,
            computed,
        },
        Error::Corrupt(m) => Error::Corrupt(format!("frame {index}: {m}")),
        other => other,
    })?;
    if decoded.len() != events as usize {
        return Err(Error::Corrupt(format!(
            "frame {index}: {} events, directory says {events}",
            decoded.len()
        )));
    }
    Ok(decoded)
}

/// Splits `events` into frames of the codebook's frame size, compresses them
/// in parallel and writes them in order.
pub fn compress_corpus(events: &[RelativeEvent], cb: &CodeBook) -> Result<(Vec<u8>, Vec<FrameStats>)> {
    let frame_size = cb.config().frame_size as usize;
    let frames: Vec<(Vec<u8>, FrameStats)> = events
        .par_chunks(frame_size)
        .map(|chunk| compress_frame(chunk, cb))
        .collect::<Result<_>>()?;
    let mut writer = ContainerWriter::new(Cursor::new(Vec::new()), cb, frames.len())?;
    for (bytes, stats) in &frames {
        writer.write_frame(bytes, stats.events)?;
    }
    let out = writer.finish()?.into_inner();
    Ok((out, frames.into_iter().map(|(_, s)| s).collect()))
}

/// Decodes every frame independently; one entry per frame.
pub fn decode_frames(bytes: &[u8]) -> Result<(CodeBook, Vec<Result<Vec<RelativeEvent>>>)> {
    let reader = ContainerReader::open(Cursor::new(bytes))?;
    let cb = reader.codebook;
    let frames = reader
        .dir
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let start = e.offset as usize;
            decode_frame_checked(&bytes[start..start + e.len as usize], &cb, i, e.events)
        })
        .collect();
    Ok((cb, frames))
}

/// Full inverse of [`compress_corpus`]; fails on the first bad frame.
pub fn decompress_corpus(bytes: &[u8]) -> Result<(CodeBook, Vec<RelativeEvent>)> {
    let (cb, frames) = decode_frames(bytes)?;
    let mut events = Vec::new();
    for f in frames {
        events.extend(f?);
    }
    Ok((cb, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{build_codebook, CodecConfig};
    use crate::datagen::{generate_events, GenParams};

    fn setup(n: usize, frame_size: u32) -> (Vec<RelativeEvent>, CodeBook) {
        let params = GenParams {
            channel_count: 6,
            ..GenParams::with_seed(5)
        };
        let events = generate_events(&params, n).unwrap();
        let config = CodecConfig {
            frame_size,
            ..CodecConfig::default()
        };
        let cb = build_codebook(&events, &config).unwrap();
        (events, cb)
    }

    #[test]
    fn corpus_round_trip_and_directory() {
        let (events, cb) = setup(250, 60);
        let (bytes, stats) = compress_corpus(&events, &cb).unwrap();
        assert_eq!(stats.len(), 5);
        let (cb2, back) = decompress_corpus(&bytes).unwrap();
        assert_eq!(cb2, cb);
        assert_eq!(back, events);

        let mut reader = ContainerReader::open(Cursor::new(&bytes)).unwrap();
        assert_eq!(reader.frame_count(), 5);
        assert_eq!(reader.read_frame(4).unwrap(), events[240..]);
        assert_eq!(reader.read_frame(1).unwrap(), events[60..120]);
        assert!(reader.read_frame(5).is_err());
    }

    #[test]
    fn empty_corpus_has_no_frames() {
        let (_, cb) = setup(10, 4);
        let (bytes, stats) = compress_corpus(&[], &cb).unwrap();
        assert!(stats.is_empty());
        assert!(decompress_corpus(&bytes).unwrap().1.is_empty());
    }

    #[test]
    fn corrupt_frame_is_contained() {
        let (events, cb) = setup(120, 40);
        let (mut bytes, _) = compress_corpus(&events, &cb).unwrap();
        let dir = ContainerReader::open(Cursor::new(&bytes)).unwrap().dir;
        bytes[dir[1].offset as usize + 20] ^= 0x10;
        let (_, frames) = decode_frames(&bytes).unwrap();
        assert_eq!(frames[0].as_ref().unwrap(), &events[..40]);
        assert!(matches!(frames[1], Err(Error::ChecksumMismatch { frame: 1, .. })));
        assert_eq!(frames[2].as_ref().unwrap(), &events[80..]);
    }

    #[test]
    fn header_damage_rejected() {
        let (events, cb) = setup(30, 10);
        let (bytes, _) = compress_corpus(&events, &cb).unwrap();
        assert!(matches!(decode_frames(b"nope"), Err(Error::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 7;
        assert!(matches!(decode_frames(&v), Err(Error::VersionMismatch { found: 7, .. })));
        let mut h = bytes.clone();
        h[12] ^= 1;
        assert!(decode_frames(&h).is_err());
        assert!(decode_frames(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn writer_counts_frames() {
        let (_, cb) = setup(10, 4);
        let w = ContainerWriter::new(Cursor::new(Vec::new()), &cb, 2).unwrap();
        assert!(w.finish().is_err());
    }
}
