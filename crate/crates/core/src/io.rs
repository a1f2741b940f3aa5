//! File formats: polyhedron JSON, raw little-endian images and density maps
//! with a JSON header, CSV matrices and 8-bit PGM previews.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::DensityMap;
use crate::error::{PolyxError, Result};
use crate::geom::PolyhedronH;
use crate::matrix::RowMatrix;
use crate::unmix::SpectralImage;

pub const PIXEL_MAJOR: &str = "pixel-major";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(PolyxError::UnknownDtype(other.to_string())),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }
}

/// Header of a raw image; `bands` values per pixel, pixels in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub layout: String,
    /// Raw data path, relative to the header's directory.
    pub data_file: String,
}

/// Header of a raw density map, `classes` values per pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub dtype: String,
    pub layout: String,
    pub data_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| PolyxError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PolyxError::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| PolyxError::io(path, e))
}

fn json_error(e: serde_json::Error) -> PolyxError {
    PolyxError::Format {
        kind: "json",
        message: e.to_string(),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(json_error)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json_pretty(value)? + "\n")
}

fn sibling(header: &Path, file: &str) -> PathBuf {
    header.parent().unwrap_or_else(|| Path::new(".")).join(file)
}

fn decode(bytes: &[u8], dtype: Dtype, count: usize) -> Result<Vec<f64>> {
    let expected = (count * dtype.size()) as u64;
    if bytes.len() as u64 != expected {
        return Err(PolyxError::LengthMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    })
}

fn encode(values: &[f64], dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.size());
    for &v in values {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

fn check_layout(layout: &str) -> Result<()> {
    if layout == PIXEL_MAJOR {
        Ok(())
    } else {
        Err(PolyxError::Format {
            kind: "json",
            message: format!("unsupported layout {layout:?}, expected {PIXEL_MAJOR:?}"),
        })
    }
}

/// Loads an image from a JSON header plus raw data, or from a CSV matrix
/// (one pixel per line, `width = pixels`, `height = 1`).
pub fn load_image(path: &Path) -> Result<SpectralImage> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let m = read_csv_matrix(path)?;
        return SpectralImage::new(m.rows(), 1, m);
    }
    let header: ImageHeader = parse_json(&read_text(path)?)?;
    let dtype = Dtype::parse(&header.dtype)?;
    check_layout(&header.layout)?;
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|p| p.checked_mul(header.bands))
        .ok_or_else(|| PolyxError::InvalidInput("image dimensions overflow".into()))?;
    let values = decode(&read_file(&sibling(path, &header.data_file))?, dtype, count)?;
    let data = RowMatrix::new(header.width * header.height, header.bands, values)?;
    SpectralImage::new(header.width, header.height, data)
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`; returns the header path.
pub fn save_image(dir: &Path, stem: &str, img: &SpectralImage, dtype: Dtype) -> Result<PathBuf> {
    let data_file = format!("{stem}.bin");
    write_file(&dir.join(&data_file), encode(img.data().as_slice(), dtype))?;
    let header = ImageHeader {
        width: img.width(),
        height: img.height(),
        bands: img.bands(),
        dtype: dtype.as_str().into(),
        layout: PIXEL_MAJOR.into(),
        data_file,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

/// A density map with its image geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredDensity {
    pub width: usize,
    pub height: usize,
    pub map: DensityMap,
}

pub fn save_density(dir: &Path, stem: &str, d: &StoredDensity, dtype: Dtype) -> Result<PathBuf> {
    if d.width * d.height != d.map.pixels() {
        return Err(PolyxError::InvalidInput("density map size does not match the image".into()));
    }
    let data_file = format!("{stem}.bin");
    write_file(&dir.join(&data_file), encode(d.map.values.as_slice(), dtype))?;
    let header = DensityHeader {
        width: d.width,
        height: d.height,
        classes: d.map.classes(),
        dtype: dtype.as_str().into(),
        layout: PIXEL_MAJOR.into(),
        data_file,
        class_names: d.map.class_names.clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

pub fn load_density(path: &Path) -> Result<StoredDensity> {
    let header: DensityHeader = parse_json(&read_text(path)?)?;
    let dtype = Dtype::parse(&header.dtype)?;
    check_layout(&header.layout)?;
    let count = header.width * header.height * header.classes;
    let values = decode(&read_file(&sibling(path, &header.data_file))?, dtype, count)?;
    Ok(StoredDensity {
        width: header.width,
        height: header.height,
        map: DensityMap {
            values: RowMatrix::new(header.width * header.height, header.classes, values)?,
            class_names: header.class_names,
        },
    })
}

/// Loads any pixels x columns matrix: a JSON header (image or density) or a CSV.
pub fn load_matrix(path: &Path) -> Result<RowMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_csv_matrix(path);
    }
    let value: serde_json::Value = parse_json(&read_text(path)?)?;
    if value.get("classes").is_some() {
        Ok(load_density(path)?.map.values)
    } else {
        Ok(load_image(path)?.data().clone())
    }
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> PolyxError {
    PolyxError::Format {
        kind: "csv",
        message: format!("{}: {e}", path.display()),
    }
}

/// Numeric CSV, one row per line. A first line that does not parse as
/// numbers is taken as a header.
pub fn read_csv_matrix(path: &Path) -> Result<RowMatrix> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(csv_error(path, format!("line {}: {e}", line + 1))),
        }
    }
    if rows.is_empty() {
        return Err(csv_error(path, "no numeric rows"));
    }
    RowMatrix::from_rows(&rows).map_err(|_| csv_error(path, "rows have different lengths"))
}

pub fn write_csv_matrix(path: &Path, m: &RowMatrix, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| csv_error(path, e))?;
    }
    for r in m.iter_rows() {
        w.write_record(r.iter().map(|v| format!("{v:e}")))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| PolyxError::io(path, e))
}

/// 8-bit binary PGM of one density column, values clamped to `[0, 1]`.
pub fn write_pgm(path: &Path, d: &StoredDensity, class: usize) -> Result<()> {
    if class >= d.map.classes() {
        return Err(PolyxError::InvalidInput(format!("no class {class}")));
    }
    let mut bytes = format!("P5\n{} {}\n255\n", d.width, d.height).into_bytes();
    bytes.extend(
        d.map
            .values
            .iter_rows()
            .map(|r| (r[class].clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    write_file(path, bytes)
}

/// Polyhedron JSON; normals are normalised on load.
pub fn read_polyhedron(path: &Path) -> Result<PolyhedronH> {
    let text = read_text(path)?;
    polyhedron_from_json(&text)
}

pub fn polyhedron_from_json(text: &str) -> Result<PolyhedronH> {
    #[derive(Deserialize)]
    struct Raw {
        dim: usize,
        halfspaces: Vec<RawHalfspace>,
    }
    #[derive(Deserialize)]
    struct RawHalfspace {
        offset: f64,
        normal: Vec<f64>,
    }
    // Parsed in two steps so geometric errors keep their own category.
    let raw: Raw = parse_json(text)?;
    PolyhedronH::from_raw(raw.dim, raw.halfspaces.into_iter().map(|h| (h.offset, h.normal)))
}

/// JSON text with 17 significant digits per value.
pub fn polyhedron_to_json(p: &PolyhedronH) -> String {
    let num = |v: f64| format!("{v:.16e}");
    let mut s = format!("{{\n  \"dim\": {},\n  \"halfspaces\": [\n", p.dim());
    for (i, h) in p.halfspaces().iter().enumerate() {
        let normal: Vec<String> = h.normal().iter().map(|&v| num(v)).collect();
        let _ = writeln!(
            s,
            "    {{\"offset\": {}, \"normal\": [{}]}}{}",
            num(h.offset()),
            normal.join(", "),
            if i + 1 < p.len() { "," } else { "" }
        );
    }
    s.push_str("  ]\n}\n");
    s
}

pub fn write_polyhedron(path: &Path, p: &PolyhedronH) -> Result<()> {
    write_file(path, polyhedron_to_json(p))
}

/// Comma-separated point such as `2,2` or `-1.5, 0, 3e-2`.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| PolyxError::InvalidInput(format!("bad coordinate {t:?}: {e}")))
        })
        .collect()
}
