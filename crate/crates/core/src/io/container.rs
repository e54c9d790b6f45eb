//! Binary frame-stream containers: `DHS1` (complex64 measurements) and
//! `PHS1` (float32 phases). Fixed 32-byte little-endian header followed by
//! raw frame payloads; writes are atomic (temp file + rename).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField};

pub const HEADER_LEN: usize = 32;
pub const MAGIC_MEASUREMENTS: [u8; 4] = *b"DHS1";
pub const MAGIC_PHASES: [u8; 4] = *b"PHS1";
pub const DTYPE_COMPLEX64: u8 = 0;
pub const DTYPE_FLOAT32: u8 = 1;

/// Parsed container header. Layout: magic (4), version u16, n u32,
/// frame_count u32, dtype u8, flags u8, 16 reserved zero bytes; all
/// integers little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub magic: [u8; 4],
    pub version: u16,
    pub n: u32,
    pub frame_count: u32,
    pub dtype: u8,
    pub flags: u8,
}

impl StreamHeader {
    pub fn measurements(n: u32, frame_count: u32) -> Self {
        Self {
            magic: MAGIC_MEASUREMENTS,
            version: 1,
            n,
            frame_count,
            dtype: DTYPE_COMPLEX64,
            flags: 0,
        }
    }

    pub fn phases(n: u32, frame_count: u32) -> Self {
        Self {
            magic: MAGIC_PHASES,
            version: 1,
            n,
            frame_count,
            dtype: DTYPE_FLOAT32,
            flags: 0,
        }
    }

    /// Bytes per stored sample (one complex or one real value).
    pub fn sample_len(&self) -> usize {
        match self.dtype {
            DTYPE_COMPLEX64 => 8,
            DTYPE_FLOAT32 => 4,
            _ => 0,
        }
    }

    /// Payload bytes for one frame.
    pub fn frame_len(&self) -> usize {
        self.n as usize * self.n as usize * self.sample_len()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut buf = [0u8; HEADER_LEN];
        buf[0..4].copy_from_slice(&self.magic);
        buf[4..6].copy_from_slice(&self.version.to_le_bytes());
        buf[6..10].copy_from_slice(&self.n.to_le_bytes());
        buf[10..14].copy_from_slice(&self.frame_count.to_le_bytes());
        buf[14] = self.dtype;
        buf[15] = self.flags;
        buf
    }

    pub fn from_bytes(buf: &[u8; HEADER_LEN]) -> Result<Self> {
        let magic: [u8; 4] = buf[0..4].try_into().expect("slice length");
        if magic != MAGIC_MEASUREMENTS && magic != MAGIC_PHASES {
            return Err(Error::Format(format!(
                "unrecognized stream magic {:?}",
                &buf[0..4]
            )));
        }
        let version = u16::from_le_bytes(buf[4..6].try_into().expect("slice length"));
        if version != 1 {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(buf[6..10].try_into().expect("slice length"));
        let frame_count = u32::from_le_bytes(buf[10..14].try_into().expect("slice length"));
        let dtype = buf[14];
        let expected_dtype = if magic == MAGIC_MEASUREMENTS {
            DTYPE_COMPLEX64
        } else {
            DTYPE_FLOAT32
        };
        if dtype != expected_dtype {
            return Err(Error::Format(format!(
                "dtype {dtype} does not match stream magic"
            )));
        }
        if n < 2 || n % 2 != 0 {
            return Err(Error::Format(format!("invalid grid size {n}")));
        }
        if buf[16..].iter().any(|&b| b != 0) {
            return Err(Error::Format("nonzero reserved header bytes".into()));
        }
        Ok(Self {
            magic,
            version,
            n,
            frame_count,
            dtype,
            flags: buf[15],
        })
    }
}

/// Write a file atomically: the content lands under `path` only as a
/// complete unit.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(content)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn check_file_len(path: &Path, header: &StreamHeader) -> Result<()> {
    let expected = (HEADER_LEN + header.frame_count as usize * header.frame_len()) as u64;
    let actual = std::fs::metadata(path)?.len();
    if actual != expected {
        return Err(Error::Format(format!(
            "stream length mismatch: expected {expected} bytes, found {actual}"
        )));
    }
    Ok(())
}

/// Write a measurement stream. The header must agree with the frames in
/// count, grid size, magic, and dtype.
pub fn write_measurements(
    path: &Path,
    header: &StreamHeader,
    frames: &[ComplexField],
) -> Result<()> {
    if header.magic != MAGIC_MEASUREMENTS || header.dtype != DTYPE_COMPLEX64 {
        return Err(Error::Format("header is not a DHS1 header".into()));
    }
    if header.frame_count as usize != frames.len() {
        return Err(Error::Format(format!(
            "header frame_count {} but {} frames supplied",
            header.frame_count,
            frames.len()
        )));
    }
    let mut content = Vec::with_capacity(HEADER_LEN + frames.len() * header.frame_len());
    content.extend_from_slice(&header.to_bytes());
    for frame in frames {
        if frame.n() != header.n as usize {
            return Err(Error::Format(format!(
                "header n = {} but frame has n = {}",
                header.n,
                frame.n()
            )));
        }
        for z in frame.data() {
            content.extend_from_slice(&(z.re as f32).to_le_bytes());
            content.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
    write_atomic(path, &content)
}

/// Write a phase stream; same rules as [`write_measurements`].
pub fn write_phases(path: &Path, header: &StreamHeader, frames: &[RealField]) -> Result<()> {
    if header.magic != MAGIC_PHASES || header.dtype != DTYPE_FLOAT32 {
        return Err(Error::Format("header is not a PHS1 header".into()));
    }
    if header.frame_count as usize != frames.len() {
        return Err(Error::Format(format!(
            "header frame_count {} but {} frames supplied",
            header.frame_count,
            frames.len()
        )));
    }
    let mut content = Vec::with_capacity(HEADER_LEN + frames.len() * header.frame_len());
    content.extend_from_slice(&header.to_bytes());
    for frame in frames {
        if frame.n() != header.n as usize {
            return Err(Error::Format(format!(
                "header n = {} but frame has n = {}",
                header.n,
                frame.n()
            )));
        }
        for &v in frame.data() {
            content.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_atomic(path, &content)
}

/// Incremental writer for the measurement container, for frame-at-a-time
/// simulation without buffering the whole stream. Writes to a temp file and
/// renames on [`StreamWriter::finish`].
pub struct StreamWriter {
    header: StreamHeader,
    written: u32,
    tmp: Option<tempfile::NamedTempFile>,
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl StreamWriter {
    pub fn create(path: &Path, header: StreamHeader) -> Result<Self> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| ".".into());
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        let mut out = BufWriter::new(tmp.reopen()?);
        out.write_all(&header.to_bytes())?;
        Ok(Self {
            header,
            written: 0,
            tmp: Some(tmp),
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn write_measurement(&mut self, frame: &ComplexField) -> Result<()> {
        if self.header.dtype != DTYPE_COMPLEX64 {
            return Err(Error::Format("stream is not complex64".into()));
        }
        if frame.n() != self.header.n as usize {
            return Err(Error::Format(format!(
                "header n = {} but frame has n = {}",
                self.header.n,
                frame.n()
            )));
        }
        for z in frame.data() {
            self.out.write_all(&(z.re as f32).to_le_bytes())?;
            self.out.write_all(&(z.im as f32).to_le_bytes())?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn write_phase(&mut self, frame: &RealField) -> Result<()> {
        if self.header.dtype != DTYPE_FLOAT32 {
            return Err(Error::Format("stream is not float32".into()));
        }
        if frame.n() != self.header.n as usize {
            return Err(Error::Format(format!(
                "header n = {} but frame has n = {}",
                self.header.n,
                frame.n()
            )));
        }
        for &v in frame.data() {
            self.out.write_all(&(v as f32).to_le_bytes())?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.frame_count {
            return Err(Error::Format(format!(
                "header frame_count {} but {} frames written",
                self.header.frame_count, self.written
            )));
        }
        self.out.flush()?;
        drop(self.out);
        let tmp = self.tmp.take().expect("temp file present");
        tmp.persist(&self.path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

/// Streaming reader over measurement frames.
#[derive(Debug)]
pub struct MeasurementReader {
    header: StreamHeader,
    input: BufReader<File>,
    remaining: u32,
}

impl MeasurementReader {
    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

impl Iterator for MeasurementReader {
    type Item = Result<ComplexField>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = self.header.n as usize;
        let mut buf = vec![0u8; n * n * 8];
        if let Err(e) = self.input.read_exact(&mut buf) {
            return Some(Err(e.into()));
        }
        let data = buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().expect("chunk length"));
                let im = f32::from_le_bytes(c[4..8].try_into().expect("chunk length"));
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Some(ComplexField::from_data(n, data))
    }
}

/// Streaming reader over phase frames.
#[derive(Debug)]
pub struct PhaseReader {
    header: StreamHeader,
    input: BufReader<File>,
    remaining: u32,
}

impl PhaseReader {
    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

impl Iterator for PhaseReader {
    type Item = Result<RealField>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = self.header.n as usize;
        let mut buf = vec![0u8; n * n * 4];
        if let Err(e) = self.input.read_exact(&mut buf) {
            return Some(Err(e.into()));
        }
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk length")) as f64)
            .collect();
        Some(RealField::from_data(n, data))
    }
}

fn open_stream(path: &Path, expected_magic: [u8; 4]) -> Result<(StreamHeader, BufReader<File>)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut buf = [0u8; HEADER_LEN];
    input.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!(
                "stream shorter than the {HEADER_LEN}-byte header"
            ))
        } else {
            e.into()
        }
    })?;
    let header = StreamHeader::from_bytes(&buf)?;
    if header.magic != expected_magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            expected_magic, header.magic
        )));
    }
    check_file_len(path, &header)?;
    Ok((header, input))
}

pub fn read_measurements(path: &Path) -> Result<MeasurementReader> {
    let (header, input) = open_stream(path, MAGIC_MEASUREMENTS)?;
    Ok(MeasurementReader {
        remaining: header.frame_count,
        header,
        input,
    })
}

pub fn read_phases(path: &Path) -> Result<PhaseReader> {
    let (header, input) = open_stream(path, MAGIC_PHASES)?;
    Ok(PhaseReader {
        remaining: header.frame_count,
        header,
        input,
    })
}
