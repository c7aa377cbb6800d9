//! MNIST-style IDX files: big-endian header, unsigned byte payload.

use std::path::Path;

use super::{numeric_class_names, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 * (1 + dims);
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if bytes.len() >= 4 && word(0) != magic {
        return Err(Error::BadMagic { path: path.into(), expected: magic, found: word(0) });
    }
    if bytes.len() < need {
        return Err(Error::Truncated { path: path.into(), detail: format!("{} bytes, header needs {need}", bytes.len()) });
    }
    let dims: Vec<usize> = (1..=dims).map(|i| word(i) as usize).collect();
    let payload: usize = dims.iter().product();
    if bytes.len() - need < payload {
        return Err(Error::Truncated {
            path: path.into(),
            detail: format!("header promises {payload} data bytes, found {}", bytes.len() - need),
        });
    }
    Ok(dims)
}

/// Reads an image file and a label file. Pixels are scaled to `[0, 1]`;
/// class names are the digits `0..=max(9, largest label)`.
pub fn load_idx<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let ib = read(images_path)?;
    let lb = read(labels_path)?;
    let idims = header(&ib, images_path, IDX_IMAGES_MAGIC, 3)?;
    let ldims = header(&lb, labels_path, IDX_LABELS_MAGIC, 1)?;
    let (count, rows, cols) = (idims[0], idims[1], idims[2]);
    if count != ldims[0] {
        return Err(Error::CountMismatch { images: count, labels: ldims[0] });
    }
    let pixels = &ib[16..];
    let images = (0..count)
        .map(|i| {
            let px = &pixels[i * rows * cols..(i + 1) * rows * cols];
            Tensor::from_vec([1, rows, cols, 1], px.iter().map(|&p| T::of(p as f64 / 255.0)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = lb[8..8 + count].iter().map(|&l| l as usize).collect();
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0).max(10);
    Dataset::new(images, labels, numeric_class_names(classes))
}

/// Writes single-channel images (values clamped to `[0, 1]`, rounded to
/// bytes) and labels as an IDX pair.
pub fn write_idx<T: Scalar>(d: &Dataset<T>, images_path: &Path, labels_path: &Path) -> Result<()> {
    let [_, rows, cols, channels] = d.image_shape().unwrap_or([1, 0, 0, 1]);
    if channels != 1 {
        return Err(Error::Shape(format!("IDX images are single-channel, got {channels} channels")));
    }
    if let Some(&l) = d.labels().iter().find(|&&l| l > 255) {
        return Err(Error::Label { label: l, classes: 256 });
    }
    let mut ib = Vec::with_capacity(16 + d.len() * rows * cols);
    for v in [IDX_IMAGES_MAGIC, d.len() as u32, rows as u32, cols as u32] {
        ib.extend_from_slice(&v.to_be_bytes());
    }
    for img in d.images() {
        ib.extend(img.as_slice().iter().map(|&v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lb = Vec::with_capacity(8 + d.len());
    for v in [IDX_LABELS_MAGIC, d.len() as u32] {
        lb.extend_from_slice(&v.to_be_bytes());
    }
    lb.extend(d.labels().iter().map(|&l| l as u8));
    std::fs::write(images_path, ib).map_err(|e| Error::io(format!("writing {}", images_path.display()), e))?;
    std::fs::write(labels_path, lb).map_err(|e| Error::io(format!("writing {}", labels_path.display()), e))
}
