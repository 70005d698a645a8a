//! 8-bit grayscale frames and binary PGM (`P5`) I/O.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Pose2D;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PGM: {0}")]
    Malformed(String),
}

/// Capture metadata carried alongside the pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameMeta {
    /// Time at which row 0 was sampled, seconds.
    pub frame_start_s: f64,
    /// Camera pose the frame was rendered from (simulator only).
    pub ground_truth: Option<Pose2D>,
    pub seed: u64,
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub meta: FrameMeta,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, meta: FrameMeta) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize, "pixel buffer size");
        Self {
            width,
            height,
            pixels,
            meta,
        }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(
            width,
            height,
            vec![value; width as usize * height as usize],
            FrameMeta::default(),
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width as usize + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u8] {
        let w = self.width as usize;
        &self.pixels[row * w..(row + 1) * w]
    }

    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "P5")?;
        writeln!(out, "# frame_start_s={:e}", self.meta.frame_start_s)?;
        writeln!(out, "# seed={}", self.meta.seed)?;
        if let Some(p) = self.meta.ground_truth {
            writeln!(out, "# pose={:e},{:e},{:e}", p.x, p.y, p.theta)?;
        }
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "255")?;
        out.write_all(&self.pixels)?;
        out.flush()
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.pixels.len() + 128);
        self.write_pgm(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    /// Reads a binary PGM with maxval <= 255. Metadata comments written by
    /// [`Frame::write_pgm`] are recovered when present.
    pub fn read_pgm<R: BufRead>(mut input: R) -> Result<Self, PgmError> {
        let mut meta = FrameMeta::default();
        let mut header = Vec::new();
        let mut magic_seen = false;
        // Header: magic, width, height, maxval, separated by whitespace and comments.
        while header.len() < 3 {
            let mut line = String::new();
            let n = read_header_line(&mut input, &mut line)?;
            if n == 0 {
                return Err(PgmError::Malformed("truncated header".into()));
            }
            let mut content = line.as_str();
            if let Some(pos) = content.find('#') {
                parse_meta_comment(&content[pos + 1..], &mut meta);
                content = &content[..pos];
            }
            for tok in content.split_whitespace() {
                if !magic_seen {
                    if tok != "P5" {
                        return Err(PgmError::Malformed(format!("bad magic `{tok}`, expected P5")));
                    }
                    magic_seen = true;
                    continue;
                }
                let v: u32 = tok
                    .parse()
                    .map_err(|_| PgmError::Malformed(format!("bad header token `{tok}`")))?;
                header.push(v);
            }
            if header.len() > 3 {
                return Err(PgmError::Malformed("unexpected data after maxval".into()));
            }
        }
        let (width, height, maxval) = (header[0], header[1], header[2]);
        if width == 0 || height == 0 {
            return Err(PgmError::Malformed("zero dimension".into()));
        }
        if maxval == 0 || maxval > 255 {
            return Err(PgmError::Malformed(format!("unsupported maxval {maxval}")));
        }
        let len = width as usize * height as usize;
        let mut pixels = vec![0u8; len];
        input.read_exact(&mut pixels).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                PgmError::Malformed(format!("expected {len} pixel bytes"))
            } else {
                PgmError::Io(e)
            }
        })?;
        if maxval != 255 {
            for p in &mut pixels {
                *p = ((u32::from(*p).min(maxval) * 255 + maxval / 2) / maxval) as u8;
            }
        }
        Ok(Self::new(width, height, pixels, meta))
    }
}

fn read_header_line<R: BufRead>(input: &mut R, line: &mut String) -> Result<usize, PgmError> {
    let mut buf = Vec::new();
    let n = input.read_until(b'\n', &mut buf)?;
    *line = String::from_utf8(buf).map_err(|_| PgmError::Malformed("non-text header".into()))?;
    Ok(n)
}

fn parse_meta_comment(comment: &str, meta: &mut FrameMeta) {
    let comment = comment.trim();
    if let Some(v) = comment.strip_prefix("frame_start_s=") {
        if let Ok(t) = v.parse() {
            meta.frame_start_s = t;
        }
    } else if let Some(v) = comment.strip_prefix("seed=") {
        if let Ok(s) = v.parse() {
            meta.seed = s;
        }
    } else if let Some(v) = comment.strip_prefix("pose=") {
        let parts: Vec<f64> = v.split(',').filter_map(|s| s.parse().ok()).collect();
        if parts.len() == 3 {
            meta.ground_truth = Some(Pose2D::new(parts[0], parts[1], parts[2]));
        }
    }
}
