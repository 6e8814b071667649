//! MTDF: the binary thermal frame container.
//!
//! Layout (version 1, all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `"MTDF"`                          |
//! | 4      | 1    | version, `0x01`                         |
//! | 5      | 2    | width                                   |
//! | 7      | 2    | height                                  |
//! | 9      | 4    | frame_count, >= 1                       |
//! | 13     | 4    | fps_millihz, > 0                        |
//! | 17     | 2    | ambient_centikelvin                     |
//! | 19     | 1    | pixel_format (`0` = centikelvin `u16`)  |
//! | 20     | ...  | frames, `width * height` `u16` each     |
//!
//! Frames are stored in capture order, pixels row-major.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::frame::{FrameSequence, RawFrame};

pub const MAGIC: [u8; 4] = *b"MTDF";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const PIXEL_FORMAT_CENTIKELVIN_U16: u8 = 0;

/// Tracks the byte position so write failures can report where they happened.
struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Io {
            position: self.written,
            source,
        })?;
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Writes `seq` as an MTDF container and returns the number of bytes written.
pub fn write_sequence<W: Write>(seq: &FrameSequence, sink: W) -> Result<u64> {
    let (width, height) = seq
        .dims()
        .ok_or_else(|| Error::invalid("frame sequence", "frame_count must be ≥ 1"))?;
    let frame_count = u32::try_from(seq.len())
        .map_err(|_| Error::invalid("frame sequence", "frame_count exceeds u32"))?;

    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4] = VERSION;
    header[5..7].copy_from_slice(&(width as u16).to_le_bytes());
    header[7..9].copy_from_slice(&(height as u16).to_le_bytes());
    header[9..13].copy_from_slice(&frame_count.to_le_bytes());
    header[13..17].copy_from_slice(&seq.fps_millihz().to_le_bytes());
    header[17..19].copy_from_slice(&seq.ambient_centikelvin().to_le_bytes());
    header[19] = PIXEL_FORMAT_CENTIKELVIN_U16;

    let mut out = CountingWriter {
        inner: sink,
        written: 0,
    };
    out.put(&header)?;
    let mut buf = Vec::with_capacity(width * height * 2);
    for frame in seq.frames() {
        buf.clear();
        for px in frame.pixels() {
            buf.extend_from_slice(&px.to_le_bytes());
        }
        out.put(&buf)?;
    }
    out.inner.flush().map_err(|source| Error::Io {
        position: out.written,
        source,
    })?;
    Ok(out.written)
}

/// Reads until `buf` is full or the source is exhausted; returns bytes read.
fn read_full<R: Read>(source: &mut R, buf: &mut [u8], offset: u64) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(Error::Io {
                    position: offset + filled as u64,
                    source,
                })
            }
        }
    }
    Ok(filled)
}

/// Parses an MTDF container, validating the header and every frame.
pub fn read_sequence<R: Read>(mut source: R) -> Result<FrameSequence> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(&mut source, &mut header, 0)?;
    if got >= 4 && header[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02X?}, expected \"MTDF\"",
            &header[0..4]
        )));
    }
    if got < HEADER_LEN {
        return Err(Error::Truncated {
            offset: got as u64,
            expected: HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    if header[4] != VERSION {
        return Err(Error::UnsupportedVersion(header[4]));
    }
    let le16 = |i: usize| u16::from_le_bytes([header[i], header[i + 1]]);
    let le32 = |i: usize| u32::from_le_bytes([header[i], header[i + 1], header[i + 2], header[i + 3]]);
    let width = le16(5) as usize;
    let height = le16(7) as usize;
    let frame_count = le32(9) as usize;
    let fps_millihz = le32(13);
    let ambient = le16(17);
    let pixel_format = header[19];

    if width == 0 || height == 0 {
        return Err(Error::Format(format!("frame dimensions {width}x{height}")));
    }
    if frame_count == 0 {
        return Err(Error::Format("frame_count must be ≥ 1".into()));
    }
    if fps_millihz == 0 {
        return Err(Error::Format("fps_millihz must be > 0".into()));
    }
    if pixel_format != PIXEL_FORMAT_CENTIKELVIN_U16 {
        return Err(Error::Format(format!("unknown pixel_format {pixel_format}")));
    }

    let frame_bytes = (width * height * 2) as u64;
    let expected_total = HEADER_LEN as u64 + frame_bytes * frame_count as u64;
    let mut offset = HEADER_LEN as u64;
    let mut frames = Vec::with_capacity(frame_count.min(4096));
    let mut buf = Vec::new();
    for index in 0..frame_count {
        buf.clear();
        let n = (&mut source)
            .take(frame_bytes)
            .read_to_end(&mut buf)
            .map_err(|source| Error::Io {
                position: offset,
                source,
            })? as u64;
        if n < frame_bytes {
            return Err(Error::Truncated {
                offset: offset + n,
                expected: expected_total,
                actual: offset + n,
            });
        }
        offset += n;
        let pixels = buf
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        frames.push(RawFrame::new(width, height, pixels, index)?);
    }

    let mut probe = [0u8; 1];
    if read_full(&mut source, &mut probe, offset)? != 0 {
        return Err(Error::Format(format!(
            "trailing bytes after {expected_total}-byte container"
        )));
    }
    FrameSequence::new(frames, fps_millihz, ambient, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel() -> FrameSequence {
        let f = RawFrame::new(1, 1, vec![29500], 0).unwrap();
        FrameSequence::new(vec![f], 8000, 29515, None).unwrap()
    }

    #[test]
    fn single_pixel_layout() {
        let mut bytes = Vec::new();
        let n = write_sequence(&one_pixel(), &mut bytes).unwrap();
        assert_eq!(n, 22);
        assert_eq!(
            bytes,
            vec![
                0x4D, 0x54, 0x44, 0x46, 0x01, 1, 0, 1, 0, 1, 0, 0, 0, 0x40, 0x1F, 0, 0, 0x4B,
                0x73, 0, 0x3C, 0x73
            ]
        );
        assert_eq!(read_sequence(&bytes[..]).unwrap(), one_pixel());
    }

    #[test]
    fn empty_sequence_rejected() {
        let seq = FrameSequence::new(vec![], 8000, 29515, None).unwrap();
        let err = write_sequence(&seq, Vec::new()).unwrap_err();
        assert!(err.to_string().contains("frame_count must be ≥ 1"), "{err}");
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = Vec::new();
        write_sequence(&one_pixel(), &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(matches!(read_sequence(&bad[..]), Err(Error::Format(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(read_sequence(&v2[..]), Err(Error::UnsupportedVersion(2))));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(read_sequence(&trailing[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_reports_offsets() {
        let mut bytes = Vec::new();
        write_sequence(&one_pixel(), &mut bytes).unwrap();
        match read_sequence(&bytes[..21]) {
            Err(Error::Truncated {
                offset,
                expected,
                actual,
            }) => {
                assert_eq!((offset, expected, actual), (21, 22, 21));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    struct FailAfter(usize);
    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            if self.0 == 0 {
                return Err(io::Error::other("disk full"));
            }
            let n = buf.len().min(self.0);
            self.0 -= n;
            Ok(n)
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_reports_position() {
        let err = write_sequence(&one_pixel(), FailAfter(20)).unwrap_err();
        assert!(matches!(err, Error::Io { position: 20, .. }), "{err}");
    }
}
