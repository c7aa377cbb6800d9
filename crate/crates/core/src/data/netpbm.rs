//! Binary PGM (P5) / PPM (P6) images and CSV-manifest directories.

use std::path::Path;

use super::{numeric_class_names, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Decodes a P5 or P6 file into a `[1, H, W, C]` tensor scaled to `[0, 1]`.
/// Maxval up to 65535 is accepted (two big-endian bytes per sample above 255).
pub fn read_netpbm<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let bad = |detail: String| Error::Netpbm { path: path.into(), detail };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("expected P5 or P6 magic".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments, then one decimal token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("missing width, height or maxval".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| bad("header number too large".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("header must end with one whitespace byte".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad(format!("unsupported dimensions {width}x{height} or maxval {maxval}")));
    }
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let need = width * height * channels * sample_bytes;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(Error::Truncated { path: path.into(), detail: format!("{} of {need} pixel bytes", data.len()) });
    }
    let values = data[..need]
        .chunks_exact(sample_bytes)
        .map(|s| {
            let v = if sample_bytes == 2 { u16::from_be_bytes([s[0], s[1]]) as f64 } else { s[0] as f64 };
            T::of(v / maxval as f64)
        })
        .collect();
    Tensor::from_vec([1, height, width, channels], values)
}

fn write_netpbm(path: &Path, magic: &str, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes 8-bit grayscale pixels, row-major.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!("{} pixels for a {width}x{height} PGM", pixels.len())));
    }
    write_netpbm(path, "P5", width, height, pixels)
}

/// Writes 8-bit RGB pixels, row-major, interleaved.
pub fn write_ppm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != 3 * width * height {
        return Err(Error::Shape(format!("{} samples for a {width}x{height} PPM", pixels.len())));
    }
    write_netpbm(path, "P6", width, height, pixels)
}

/// Loads the images listed in a `filename,label` CSV manifest; file names are
/// relative to `dir`. A first row whose label column is literally `label` is
/// taken as a header.
pub fn load_image_dir<T: Scalar>(dir: &Path, manifest: &Path) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(manifest)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(format!("reading {}", manifest.display()), io),
            other => Error::Manifest { line: 0, detail: format!("{other:?}") },
        })?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::Manifest { line, detail: e.to_string() })?;
        if row.len() != 2 {
            return Err(Error::Manifest { line, detail: format!("expected `filename,label`, got {} fields", row.len()) });
        }
        if line == 1 && &row[1] == "label" {
            continue;
        }
        let label: usize = row[1]
            .parse()
            .map_err(|_| Error::Manifest { line, detail: format!("label `{}` is not a class index", &row[1]) })?;
        images.push(read_netpbm(&dir.join(&row[0]))?);
        labels.push(label);
    }
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    Dataset::new(images, labels, numeric_class_names(classes))
}
