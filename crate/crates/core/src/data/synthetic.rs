//! Procedural handwritten-digit stand-ins.
//!
//! Each class is a fixed set of strokes in the unit square. Every sample
//! draws a random affine jitter (small tilt, scale, shear, shift) and stroke
//! width, and the strokes are rendered anti-aliased onto a black canvas.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{numeric_class_names, write_idx, Dataset, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const GLYPH_CLASSES: usize = 10;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Stroke {
    let steps = 16;
    (0..=steps)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / steps as f64) * PI / 180.0;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn chain(parts: &[Stroke]) -> Stroke {
    parts.concat()
}

/// Strokes of each digit; x rightward, y downward, angles clockwise from +x.
fn strokes(digit: usize) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.28, 0.42, 0.0, 360.0)],
        1 => vec![vec![(0.32, 0.25), (0.55, 0.08), (0.55, 0.92)]],
        2 => vec![chain(&[arc(0.5, 0.3, 0.27, 0.22, 190.0, 370.0), vec![(0.2, 0.9), (0.82, 0.9)]])],
        3 => vec![arc(0.48, 0.29, 0.26, 0.21, 200.0, 450.0), arc(0.48, 0.7, 0.29, 0.21, 270.0, 520.0)],
        4 => vec![vec![(0.62, 0.92), (0.62, 0.08), (0.15, 0.64), (0.85, 0.64)]],
        5 => vec![chain(&[vec![(0.8, 0.08), (0.3, 0.08), (0.26, 0.45)], arc(0.48, 0.66, 0.3, 0.25, 240.0, 500.0)])],
        6 => vec![chain(&[vec![(0.7, 0.08)], arc(0.48, 0.68, 0.26, 0.24, 200.0, 560.0)])],
        7 => vec![vec![(0.16, 0.1), (0.84, 0.1), (0.42, 0.92)], vec![(0.35, 0.5), (0.72, 0.5)]],
        8 => vec![arc(0.5, 0.28, 0.21, 0.2, 0.0, 360.0), arc(0.5, 0.7, 0.27, 0.22, 0.0, 360.0)],
        _ => vec![arc(0.5, 0.32, 0.25, 0.22, 0.0, 360.0), vec![(0.75, 0.32), (0.66, 0.92)]],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

fn render(digit: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let tilt = rng.gen_range(-12.0f64..12.0).to_radians();
    let shear = rng.gen_range(-0.15..0.15);
    let scale = size as f64 * 0.62 * rng.gen_range(0.85..1.05);
    let aspect = rng.gen_range(0.85..1.1);
    let center = size as f64 / 2.0;
    let shift = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let width = rng.gen_range(1.4..2.4);
    let (sin, cos) = tilt.sin_cos();
    let place = |(x, y): (f64, f64)| {
        let (u, v) = ((x - 0.5) * scale * aspect, (y - 0.5) * scale);
        let u = u + shear * v;
        (center + shift.0 + u * cos - v * sin, center + shift.1 + u * sin + v * cos)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = strokes(digit)
        .iter()
        .flat_map(|s| s.windows(2).map(|p| (place(p[0]), place(p[1]))).collect::<Vec<_>>())
        .collect();
    let mut pixels = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let d = segments.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            pixels[y * size + x] = (width / 2.0 + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    pixels
}

/// `count` glyph images of `size x size`, classes cycling `0..10` in a
/// shuffled order. Pixels are quantized to multiples of 1/255 so a dataset
/// survives an IDX round trip unchanged.
pub fn generate_glyphs<T: Scalar>(count: usize, size: usize, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..count).map(|i| i % GLYPH_CLASSES).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }
    let images = labels
        .iter()
        .map(|&digit| {
            let px = render(digit, size, &mut rng);
            Tensor::from_vec([1, size, size, 1], px.into_iter().map(|v| T::of((v * 255.0).round() / 255.0)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, labels, numeric_class_names(GLYPH_CLASSES))
}

/// Writes an MNIST-style train/test directory of 28x28 glyphs.
pub fn write_synthetic_split(dir: &Path, train: usize, test: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(format!("creating {}", dir.display()), e))?;
    let tr = generate_glyphs::<f64>(train, 28, seed)?;
    let te = generate_glyphs::<f64>(test, 28, seed.wrapping_add(1))?;
    write_idx(&tr, &dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    write_idx(&te, &dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))
}
