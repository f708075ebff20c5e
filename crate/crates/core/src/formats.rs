//! Versioned little-endian files for raw frames and cropped cubes, plus
//! tab-separated manifests.
//!
//! Frame file: `CODF` u16 version, u32 chirps/tx/rx/samples, u64 config
//! hash, then interleaved f32 I/Q in (chirp, tx, rx, sample) order.
//!
//! Cube file: `CODC` u16 version, u64 config hash, u32 range/azimuth/
//! elevation, f64 centre range and azimuth, u64 frame index, three label
//! bytes, then f32 values in (range, azimuth, elevation) order.

use std::io::Write;
use std::path::Path;

use num_complex::Complex32;

use crate::classes::Labels;
use crate::error::FormatError;
use crate::preprocess::{CubeShape, RaeCube};
use crate::sim::RawFrame;

pub const FRAME_MAGIC: [u8; 4] = *b"CODF";
pub const CUBE_MAGIC: [u8; 4] = *b"CODC";
pub const FRAME_VERSION: u16 = 1;
pub const CUBE_VERSION: u16 = 1;

/// Cursor over a byte slice that reports the offset of short reads.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("slice length"))
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found = self.array::<4>().map_err(|_| FormatError::BadMagic {
            expected,
            found: [0; 4],
        })?;
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u16) -> Result<u16, FormatError> {
        let found = self.u16()?;
        if found != supported {
            return Err(FormatError::UnsupportedVersion { found, supported });
        }
        Ok(found)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// `n` consecutive f32 values.
    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.header_error("length overflow"))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.header_error("length overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn header_error(&self, reason: &str) -> FormatError {
        FormatError::Header {
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    /// Fails if bytes remain after the payload.
    pub fn finish(&self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(self.header_error(&format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn check_hash(found: u64, expected: Option<u64>) -> Result<(), FormatError> {
    match expected {
        Some(e) if e != found => Err(FormatError::HashMismatch { file: found, expected: e }),
        _ => Ok(()),
    }
}

pub fn encode_frame(frame: &RawFrame, config_hash: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(30 + frame.samples.len() * 8);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    for d in [frame.num_chirps, frame.num_tx, frame.num_rx, frame.num_samples] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&config_hash.to_le_bytes());
    for z in &frame.samples {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

/// Parses a frame file; with `expected_hash` set, refuses frames produced
/// under another configuration.
pub fn decode_frame(bytes: &[u8], expected_hash: Option<u64>) -> Result<(RawFrame, u64), FormatError> {
    let mut r = ByteReader::new(bytes);
    r.magic(FRAME_MAGIC)?;
    r.version(FRAME_VERSION)?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        let at = r.offset();
        *d = r.u32()? as usize;
        if *d == 0 {
            return Err(FormatError::Header {
                offset: at,
                reason: "zero dimension".into(),
            });
        }
    }
    let hash = r.u64()?;
    check_hash(hash, expected_hash)?;
    let n = dims.iter().product::<usize>() * 2;
    let iq = r.f32s(n)?;
    r.finish()?;
    let samples = iq.chunks_exact(2).map(|c| Complex32::new(c[0], c[1])).collect();
    Ok((
        RawFrame {
            num_chirps: dims[0],
            num_tx: dims[1],
            num_rx: dims[2],
            num_samples: dims[3],
            samples,
        },
        hash,
    ))
}

/// A cube with its label triple, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeRecord {
    pub cube: RaeCube,
    pub labels: Labels,
    pub config_hash: u64,
}

pub fn encode_cube(cube: &RaeCube, labels: Labels, config_hash: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + cube.values.len() * 4);
    out.extend_from_slice(&CUBE_MAGIC);
    out.extend_from_slice(&CUBE_VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash.to_le_bytes());
    for d in [cube.shape.range, cube.shape.azimuth, cube.shape.elevation] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&cube.center_range_m.to_le_bytes());
    out.extend_from_slice(&cube.center_azimuth_deg.to_le_bytes());
    out.extend_from_slice(&(cube.center_range_bin as u32).to_le_bytes());
    out.extend_from_slice(&(cube.center_azimuth_bin as u32).to_le_bytes());
    out.extend_from_slice(&cube.frame_index.to_le_bytes());
    out.extend(labels.0.iter().map(|&b| b as u8));
    for v in &cube.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cube(bytes: &[u8], expected_hash: Option<u64>) -> Result<CubeRecord, FormatError> {
    let mut r = ByteReader::new(bytes);
    r.magic(CUBE_MAGIC)?;
    r.version(CUBE_VERSION)?;
    let config_hash = r.u64()?;
    check_hash(config_hash, expected_hash)?;
    let shape = CubeShape {
        range: r.u32()? as usize,
        azimuth: r.u32()? as usize,
        elevation: r.u32()? as usize,
    };
    let center_range_m = r.f64()?;
    let center_azimuth_deg = r.f64()?;
    let center_range_bin = r.u32()? as usize;
    let center_azimuth_bin = r.u32()? as usize;
    let frame_index = r.u64()?;
    let mut labels = [false; 3];
    for l in &mut labels {
        let at = r.offset();
        *l = match r.u8()? {
            0 => false,
            1 => true,
            b => {
                return Err(FormatError::Header {
                    offset: at,
                    reason: format!("label byte {b}"),
                })
            }
        };
    }
    let values = r.f32s(shape.len())?;
    r.finish()?;
    Ok(CubeRecord {
        cube: RaeCube {
            shape,
            values,
            center_range_m,
            center_azimuth_deg,
            center_range_bin,
            center_azimuth_bin,
            frame_index,
        },
        labels: Labels(labels),
        config_hash,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_frame_file(path: &Path, expected_hash: Option<u64>) -> Result<(RawFrame, u64), FormatError> {
    decode_frame(&std::fs::read(path)?, expected_hash)
}

pub fn read_cube_file(path: &Path, expected_hash: Option<u64>) -> Result<CubeRecord, FormatError> {
    decode_cube(&std::fs::read(path)?, expected_hash)
}

/// Tab-separated table with a header line. Lines starting with `#` are
/// comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Manifest {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        assert!(row.iter().all(|c| !c.contains(['\t', '\n'])), "manifest cells cannot contain tabs or newlines");
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or(FormatError::Manifest {
            line: 1,
            reason: "missing header".into(),
        })?;
        let columns: Vec<String> = header.split('\t').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<String> = line.split('\t').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(FormatError::Manifest {
                    line: i + 1,
                    reason: format!("{} fields, expected {}", row.len(), columns.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Typed access to one cell; `row` is the 0-based data row.
    pub fn get<T: std::str::FromStr>(&self, row: usize, name: &str) -> Result<T, FormatError> {
        let col = self.column(name).ok_or(FormatError::Manifest {
            line: 1,
            reason: format!("no column {name}"),
        })?;
        let cell = &self.rows[row][col];
        cell.parse().map_err(|_| FormatError::Manifest {
            line: row + 2,
            reason: format!("cannot parse {name}={cell:?}"),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_file(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_frame() -> RawFrame {
        let mut f = RawFrame::zeros(2, 3, 2, 4);
        for (i, z) in f.samples.iter_mut().enumerate() {
            *z = Complex32::new(i as f32 * 0.25, -(i as f32) + 0.1);
        }
        f
    }

    fn small_cube() -> RaeCube {
        RaeCube {
            shape: CubeShape::default(),
            values: (0..CubeShape::default().len()).map(|i| (i as f32).sqrt() * 1e-3).collect(),
            center_range_m: 3.2123,
            center_azimuth_deg: -7.5,
            center_range_bin: 54,
            center_azimuth_bin: 38,
            frame_index: 77,
        }
    }

    #[test]
    fn frame_round_trip_is_exact() {
        let f = small_frame();
        let bytes = encode_frame(&f, 0xfeed);
        let (g, h) = decode_frame(&bytes, Some(0xfeed)).unwrap();
        assert_eq!(h, 0xfeed);
        assert_eq!(f, g);
        assert_eq!(encode_frame(&g, h), bytes);
    }

    #[test]
    fn cube_round_trip_is_exact() {
        let c = small_cube();
        let labels = Labels([true, false, true]);
        let bytes = encode_cube(&c, labels, 42);
        let rec = decode_cube(&bytes, None).unwrap();
        assert_eq!(rec.cube, c);
        assert_eq!(rec.labels, labels);
        assert_eq!(encode_cube(&rec.cube, rec.labels, rec.config_hash), bytes);
    }

    #[test]
    fn readers_reject_bad_input() {
        let bytes = encode_frame(&small_frame(), 1);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_frame(&bad, None), Err(FormatError::BadMagic { .. })));
        let mut newer = bytes.clone();
        newer[4] = 9;
        assert!(matches!(
            decode_frame(&newer, None),
            Err(FormatError::UnsupportedVersion { found: 9, supported: 1 })
        ));
        match decode_frame(&bytes[..bytes.len() - 3], None) {
            Err(FormatError::Truncated { offset, .. }) => assert_eq!(offset, 30),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_frame(&bytes, Some(2)), Err(FormatError::HashMismatch { file: 1, expected: 2 })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_frame(&extra, None), Err(FormatError::Header { .. })));
        assert!(matches!(decode_cube(&bytes, None), Err(FormatError::BadMagic { .. })));
        let msg = decode_frame(&bytes[..12], None).unwrap_err().to_string();
        assert!(msg.contains("offset"), "{msg}");
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::new(&["file", "labels", "range_m"]);
        m.push(vec!["a.cube".into(), "100".into(), "3.5".into()]);
        m.push(vec!["b.cube".into(), "000".into(), "1.25".into()]);
        let text = m.to_text();
        let back = Manifest::parse(&format!("# generated\n{text}")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get::<f64>(1, "range_m").unwrap(), 1.25);
        assert!(back.get::<f64>(0, "labels").is_ok());
        assert!(back.get::<f64>(0, "file").is_err());
        let err = Manifest::parse("a\tb\n1\n").unwrap_err();
        assert!(matches!(err, FormatError::Manifest { line: 2, .. }));
        let empty = Manifest::new(&["file"]);
        assert_eq!(Manifest::parse(&empty.to_text()).unwrap(), empty);
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cube");
        let c = small_cube();
        write_file(&p, &encode_cube(&c, Labels::default(), 5)).unwrap();
        assert_eq!(read_cube_file(&p, Some(5)).unwrap().cube, c);
        assert!(read_cube_file(&p, Some(6)).is_err());
    }
}
