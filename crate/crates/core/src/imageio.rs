//! PGM images, metrics CSV and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Field, PixelGrid};

/// Row-major grayscale samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height} image",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Dimension("image samples must be finite".into()));
        }
        Ok(GrayImage { width, height, samples })
    }

    pub fn from_field(field: &Field) -> Result<Self> {
        if field.channels() != 1 {
            return Err(Error::Dimension("image fields have one channel".into()));
        }
        let g = field.grid();
        Self::new(g.width, g.height, field.data().to_vec())
    }

    pub fn to_field(&self) -> Result<Field> {
        Field::from_vec(PixelGrid::new(self.width, self.height)?, 1, self.samples.clone())
    }

    /// Affine map of `[lo, hi]` onto `[0, 1]`, as used for depth maps.
    pub fn from_range(field: &Field, lo: f64, hi: f64) -> Result<Self> {
        let mut img = Self::from_field(field)?;
        let w = hi - lo;
        if !(w > 0.0) {
            return Err(Error::Usage(format!("empty scaling range [{lo}, {hi}]")));
        }
        for s in &mut img.samples {
            *s = (*s - lo) / w;
        }
        Ok(img)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, msg: msg.into() }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { offset: start, msg: format!("{what} out of range") })
    }
}

/// Parses P5 or P2 bytes.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(cur.err("unsupported magic, expected P5 or P2")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse { offset: maxval_at, msg: format!("maxval {maxval} not in 1..=65535") });
    }
    if width == 0 || height == 0 {
        return Err(cur.err("empty image"));
    }
    let n = width * height;
    let scale = maxval as f64;
    let mut samples = Vec::with_capacity(n);
    if binary {
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(cur.err("expected single whitespace before raster"));
        }
        cur.pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        if bytes.len() < cur.pos + n * bps {
            cur.pos = bytes.len();
            return Err(cur.err(format!("truncated payload, need {} bytes", n * bps)));
        }
        for k in 0..n {
            let at = cur.pos + k * bps;
            let v = if bps == 1 {
                bytes[at] as u64
            } else {
                ((bytes[at] as u64) << 8) | bytes[at + 1] as u64
            };
            if v > maxval {
                return Err(Error::Parse { offset: at, msg: format!("sample {v} exceeds maxval") });
            }
            samples.push(v as f64 / scale);
        }
    } else {
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.number("sample").map_err(|e| match e {
                Error::Parse { offset, .. } if offset >= bytes.len() => {
                    Error::Parse { offset, msg: "truncated payload".into() }
                }
                e => e,
            })?;
            if v > maxval {
                return Err(Error::Parse { offset: at, msg: format!("sample {v} exceeds maxval") });
            }
            samples.push(v as f64 / scale);
        }
    }
    Ok(GrayImage { width, height, samples })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_pgm(&bytes)
}

/// Binary P5 bytes; samples are clamped to `[0, 1]` and rounded half-up.
pub fn encode_pgm(img: &GrayImage, maxval: u16) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    let m = maxval as f64;
    for &s in &img.samples {
        let v = (s.clamp(0.0, 1.0) * m + 0.5).floor().min(m) as u16;
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(img: &GrayImage, path: &Path, maxval: u16) -> Result<()> {
    write_bytes(path, &encode_pgm(img, maxval))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub const METRICS_HEADER: &str =
    "k,mode,data_energy,tv_energy,fidelity,noninteg_count,solver_iters,wall_ms,diff_to_classic";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub mode: String,
    pub data_energy: f64,
    pub tv_energy: f64,
    pub fidelity: Option<f64>,
    pub noninteg_count: usize,
    pub solver_iters: usize,
    pub wall_ms: u64,
    pub diff_to_classic: Option<f64>,
}

/// 12 significant digits in scientific notation.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

pub fn encode_metrics(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            r.mode,
            fmt_real(r.data_energy),
            fmt_real(r.tv_energy),
            fmt_opt(r.fidelity),
            r.noninteg_count,
            r.solver_iters,
            r.wall_ms,
            fmt_opt(r.diff_to_classic)
        );
    }
    s
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_bytes(path, encode_metrics(rows).as_bytes())
}

/// Inverse of [`encode_metrics`].
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    let mut offset = 0;
    match lines.next() {
        Some(h) if h == METRICS_HEADER => offset += h.len() + 1,
        _ => return Err(Error::Parse { offset: 0, msg: "missing metrics header".into() }),
    }
    let mut rows = Vec::new();
    for line in lines {
        let bad = |msg: &str| Error::Parse { offset, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad("expected 9 fields"));
        }
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { real(s).map(Some) };
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad("bad integer"));
        rows.push(MetricsRow {
            k: int(f[0])? as usize,
            mode: f[1].to_string(),
            data_energy: real(f[2])?,
            tv_energy: real(f[3])?,
            fidelity: opt(f[4])?,
            noninteg_count: int(f[5])? as usize,
            solver_iters: int(f[6])? as usize,
            wall_ms: int(f[7])?,
            diff_to_classic: opt(f[8])?,
        });
        offset += line.len() + 1;
    }
    Ok(rows)
}

/// `key=value` lines in key order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn encode(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::new();
        let mut offset = 0;
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { offset, msg: "expected key=value".into() })?;
            m.set(k, v);
            offset += line.len() + 1;
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.encode().as_bytes())
    }
}
