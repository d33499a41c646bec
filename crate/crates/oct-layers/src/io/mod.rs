//! File formats: PGM (hand-rolled P2/P5, 8- and 16-bit), grayscale PNG,
//! surfaces CSV, and the JSON reports emitted by the CLI.
//!
//! Parsers accept untrusted bytes (they are fuzz targets) and must fail with
//! an error, never a panic, on malformed input. Images are normalized to the
//! unit intensity range on load.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Image, IntensityRange, OctError, Result, SurfaceLabel, SurfaceTrace};

/// Version tag embedded in every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

fn parse_err(what: &str, detail: impl Into<String>) -> OctError {
    OctError::Parse {
        what: what.to_string(),
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

/// Maximum pixel count accepted from an untrusted header (guards allocation).
const MAX_PIXELS: u64 = 64 * 1024 * 1024;

/// Parse a PGM image (`P2` ASCII or `P5` binary, maxval 1..=65535) into a
/// unit-range [`Image`].
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;

    // Header tokens are separated by whitespace; `#` starts a comment that
    // runs to end of line.
    let next_token = |bytes: &[u8], pos: &mut usize| -> Result<Vec<u8>> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(parse_err("pgm", "unexpected end of header"));
        }
        Ok(bytes[start..*pos].to_vec())
    };
    let parse_u64 = |tok: &[u8], what: &str| -> Result<u64> {
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| parse_err("pgm", format!("bad {what}: {:?}", String::from_utf8_lossy(tok))))
    };

    let magic = next_token(bytes, &mut pos)?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(parse_err(
                "pgm",
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let width = parse_u64(&next_token(bytes, &mut pos)?, "width")?;
    let height = parse_u64(&next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_u64(&next_token(bytes, &mut pos)?, "maxval")?;
    if width == 0 || height == 0 || width.saturating_mul(height) > MAX_PIXELS {
        return Err(parse_err("pgm", format!("bad dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err("pgm", format!("maxval {maxval} out of range 1..=65535")));
    }
    let (w, h) = (width as usize, height as usize);
    let n = w * h;
    let mut data = Vec::with_capacity(n);

    if binary {
        // exactly one whitespace byte separates the header from raster data
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(parse_err("pgm", "missing raster separator"));
        }
        pos += 1;
        let wide = maxval > 255;
        let per = if wide { 2 } else { 1 };
        let need = n.checked_mul(per).ok_or_else(|| parse_err("pgm", "raster overflow"))?;
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| parse_err("pgm", "truncated raster"))?;
        for chunk in raster.chunks_exact(per) {
            let v = if wide {
                u16::from_be_bytes([chunk[0], chunk[1]]) as u64
            } else {
                chunk[0] as u64
            };
            if v > maxval {
                return Err(parse_err("pgm", format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..n {
            let v = parse_u64(&next_token(bytes, &mut pos)?, "sample")?;
            if v > maxval {
                return Err(parse_err("pgm", format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / maxval as f64);
        }
    }
    Image::new(w, h, IntensityRange::Unit, data)
}

/// Encode an image as binary PGM (`P5`), 8-bit or 16-bit.
pub fn encode_pgm(img: &Image, sixteen_bit: bool) -> Vec<u8> {
    let unit = img.rescale(IntensityRange::Unit);
    let maxval: u32 = if sixteen_bit { 65535 } else { 255 };
    let mut out = Vec::new();
    let _ = write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    for &v in unit.pixels() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if sixteen_bit {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// PNG via the image crate
// ---------------------------------------------------------------------------

fn read_png(path: &Path) -> Result<Image> {
    let dyn_img = image::open(path)
        .map_err(|e| parse_err("png", e.to_string()))?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    // 16-bit grayscale keeps full depth; everything else goes through
    // 8-bit luminance
    let data: Vec<f64> = match dyn_img {
        image::DynamicImage::ImageLuma16(buf) => {
            buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
        }
        other => other
            .into_luma8()
            .pixels()
            .map(|p| p.0[0] as f64 / 255.0)
            .collect(),
    };
    Image::new(w, h, IntensityRange::Unit, data)
}

/// Write an image as an 8-bit grayscale PNG (atomic: temp file + rename).
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let unit = img.rescale(IntensityRange::Unit);
    let mut buf = image::GrayImage::new(img.width() as u32, img.height() as u32);
    for (r, row) in unit.pixels().chunks(img.width()).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            buf.put_pixel(c as u32, r as u32, image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8]));
        }
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| parse_err("png", e.to_string()))?;
    atomic_write(path, &bytes)
}

/// Read a grayscale image, dispatching on the file extension
/// (`.pgm` hand-rolled, anything else via the PNG decoder).
pub fn read_image(path: &Path) -> Result<Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => parse_pgm(&std::fs::read(path)?),
        _ => read_png(path),
    }
}

// ---------------------------------------------------------------------------
// Surfaces CSV
// ---------------------------------------------------------------------------

/// Render surface traces as CSV with columns
/// `surface_label,column_index,row`, one line per defined column.
pub fn surfaces_to_csv(traces: &[SurfaceTrace]) -> String {
    let mut out = String::from("surface_label,column_index,row\n");
    for trace in traces {
        for (c, row) in trace.rows.iter().enumerate() {
            if let Some(r) = row {
                out.push_str(&format!("{},{},{}\n", trace.label.name(), c, r));
            }
        }
    }
    out
}

/// Parse a surfaces CSV produced by [`surfaces_to_csv`].
///
/// Labels may appear in any order; traces are returned in canonical order
/// (S1..S7, choroid) and sized to the largest column index seen.
pub fn parse_surfaces_csv(text: &str) -> Result<Vec<SurfaceTrace>> {
    let mut cells: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    let mut width = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("surface_label") {
            continue;
        }
        let mut parts = line.split(',');
        let (label, col, row) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(c), Some(r), None) => (l.trim(), c.trim(), r.trim()),
            _ => {
                return Err(parse_err(
                    "surfaces csv",
                    format!("line {}: expected 3 fields", lineno + 1),
                ))
            }
        };
        let label = SurfaceLabel::parse(label)
            .ok_or_else(|| parse_err("surfaces csv", format!("line {}: unknown label {label:?}", lineno + 1)))?;
        let col: usize = col
            .parse()
            .map_err(|_| parse_err("surfaces csv", format!("line {}: bad column {col:?}", lineno + 1)))?;
        let row: usize = row
            .parse()
            .map_err(|_| parse_err("surfaces csv", format!("line {}: bad row {row:?}", lineno + 1)))?;
        if col >= MAX_PIXELS as usize || row >= MAX_PIXELS as usize {
            return Err(parse_err("surfaces csv", format!("line {}: index out of range", lineno + 1)));
        }
        width = width.max(col + 1);
        let entry = cells.entry(label.canonical_index()).or_default();
        if entry.iter().any(|&(c, _)| c == col) {
            return Err(parse_err(
                "surfaces csv",
                format!("line {}: duplicate column {col} for {}", lineno + 1, label.name()),
            ));
        }
        entry.push((col, row));
    }
    if cells.is_empty() {
        return Err(parse_err("surfaces csv", "no data rows"));
    }
    let mut traces = Vec::new();
    for (idx, entries) in cells {
        let label = SurfaceLabel::ALL[idx];
        let mut rows = vec![None; width];
        for (c, r) in entries {
            rows[c] = Some(r);
        }
        traces.push(SurfaceTrace::new(label, rows));
    }
    Ok(traces)
}

/// Read surface traces from a CSV file.
pub fn read_surfaces_csv(path: &Path) -> Result<Vec<SurfaceTrace>> {
    let text = std::fs::read_to_string(path)?;
    parse_surfaces_csv(&text)
}

/// Write surface traces to a CSV file (atomic).
pub fn write_surfaces_csv(path: &Path, traces: &[SurfaceTrace]) -> Result<()> {
    atomic_write(path, surfaces_to_csv(traces).as_bytes())
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

/// Noise-estimation audit record (`est.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstReport {
    pub schema_version: u32,
    /// Chosen noise-variance exponent: variance = 10^-k.
    pub k: u32,
    /// Chosen structural-error weight.
    pub a: f64,
    /// Noise-to-signal ratio fed to the Wiener filter.
    pub nsr: f64,
    /// Full `e(k, a)` grid, rows indexed by `k - k_min`.
    pub error_surface: Vec<Vec<f64>>,
    pub k_min: u32,
}

/// Per-layer thickness entry of a metrics report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: String,
    pub mean_um: f64,
    pub sd_um: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
}

/// Image-quality and thickness report (`report.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
    /// Which surfaces defined the foreground mask: "reference" or "automated".
    pub foreground_from: String,
    /// Mean absolute per-surface error vs the reference, µm (empty without a
    /// reference).
    #[serde(default)]
    pub per_surface_error_um: BTreeMap<String, f64>,
    #[serde(default)]
    pub per_layer: Vec<LayerReport>,
}

/// Serialize a JSON report and write it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| parse_err("json", e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

/// Write a file atomically: write to a temp sibling, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| parse_err("path", format!("not a file path: {}", path.display())))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(data: &[f64]) -> Image {
        Image::new(8, 8, IntensityRange::Unit, data.to_vec()).unwrap()
    }

    #[test]
    fn pgm_p5_round_trip_8bit() {
        let data: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let img = small(&data);
        let bytes = encode_pgm(&img, false);
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back.width(), 8);
        assert_eq!(back.height(), 8);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_p5_round_trip_16bit() {
        let data: Vec<f64> = (0..64).map(|i| (i as f64 / 63.0).powi(2)).collect();
        let img = small(&data);
        let back = parse_pgm(&encode_pgm(&img, true)).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_p2_with_comments() {
        let text = "P2 # comment\n# another comment\n8 8\n255\n".to_string()
            + &vec!["7"; 64].join(" ");
        let img = parse_pgm(text.as_bytes()).unwrap();
        assert!((img.get(3, 3) - 7.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_rejects_malformed() {
        assert!(parse_pgm(b"").is_err());
        assert!(parse_pgm(b"P6 2 2 255 aaaa").is_err());
        assert!(parse_pgm(b"P5 0 5 255\n").is_err());
        assert!(parse_pgm(b"P5 8 8 70000\n").is_err());
        assert!(parse_pgm(b"P5 8 8 255\n12").is_err()); // truncated raster
        assert!(parse_pgm(b"P2 8 8 10\n11 11 11").is_err()); // sample > maxval
        assert!(parse_pgm(b"P5 999999999 999999999 255\n").is_err()); // huge alloc
    }

    #[test]
    fn surfaces_csv_round_trip() {
        let t1 = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(5), None, Some(7)]);
        let t2 = SurfaceTrace::new(SurfaceLabel::Choroid, vec![Some(90), Some(91), None]);
        let csv = surfaces_to_csv(&[t1.clone(), t2.clone()]);
        let back = parse_surfaces_csv(&csv).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].label, SurfaceLabel::S1);
        assert_eq!(back[0].rows, t1.rows);
        assert_eq!(back[1].label, SurfaceLabel::Choroid);
        assert_eq!(back[1].rows, t2.rows);
    }

    #[test]
    fn surfaces_csv_rejects_malformed() {
        assert!(parse_surfaces_csv("").is_err());
        assert!(parse_surfaces_csv("S1,0").is_err());
        assert!(parse_surfaces_csv("S9,0,5").is_err());
        assert!(parse_surfaces_csv("S1,x,5").is_err());
        assert!(parse_surfaces_csv("S1,0,5\nS1,0,6").is_err()); // duplicate
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let data: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let img = small(&data);
        write_png(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}
