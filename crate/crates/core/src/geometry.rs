//! Quarter-turn box transforms and inscribed-circle masking.
//!
//! Boxes use integer pixel edges: `(x1, y1, x2, y2)` covers columns
//! `x1..x2` and rows `y1..y2`, x rightward and y downward. Quarter turns are
//! counterclockwise, matching [`Tensor::rot90`].

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl BBox {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::BBox(format!("({x1}, {y1}, {x2}, {y2}) is degenerate")));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> usize {
        self.x2 - self.x1
    }

    pub fn height(&self) -> usize {
        self.y2 - self.y1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::BBox(format!("{self} is degenerate")));
        }
        if self.x2 > width || self.y2 > height {
            return Err(Error::BBox(format!("{self} does not fit a {width}x{height} canvas")));
        }
        Ok(())
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Rotates `b` by `n` counterclockwise quarter turns of a `width x height`
/// canvas. One turn maps the point `(x, y)` to `(y, width - x)` on the
/// `height x width` canvas; the two mapped corners are then reordered into
/// upper-left and lower-right.
pub fn rotate_bbox(b: BBox, n: u8, width: usize, height: usize) -> Result<BBox> {
    if n > 3 {
        return Err(Error::BBox(format!("quarter-turn count {n} not in 0..=3")));
    }
    b.check_within(width, height)?;
    let (mut b, mut w, mut h) = (b, width, height);
    for _ in 0..n {
        let (ax, ay) = (b.y1, w - b.x1);
        let (bx, by) = (b.y2, w - b.x2);
        b = BBox { x1: ax.min(bx), y1: ay.min(by), x2: ax.max(bx), y2: ay.max(by) };
        (w, h) = (h, w);
    }
    Ok(b)
}

/// One box of a box-list file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledBox {
    pub label: String,
    pub bbox: BBox,
}

/// Parses `label x1 y1 x2 y2` lines. Blank lines are skipped.
pub fn parse_box_list(text: &str) -> Result<Vec<LabeledBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::BBox(format!("line {}: expected `label x1 y1 x2 y2`, got {} fields", i + 1, fields.len())));
        }
        let mut c = [0usize; 4];
        for (slot, f) in c.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| Error::BBox(format!("line {}: `{f}` is not a pixel coordinate", i + 1)))?;
        }
        let bbox = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Error::BBox(format!("line {}: {e}", i + 1)))?;
        out.push(LabeledBox { label: fields[0].to_string(), bbox });
    }
    Ok(out)
}

pub fn format_box_list(boxes: &[LabeledBox]) -> String {
    boxes
        .iter()
        .map(|b| format!("{} {} {} {} {}\n", b.label, b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2))
        .collect()
}

/// True where a pixel of a `size x size` image lies outside the inscribed
/// circle: its center is farther than `size / 2` from the image center.
/// Evaluated in integers (everything doubled) so there is no rounding.
pub fn outside_inscribed_circle(size: usize, row: usize, col: usize) -> bool {
    let s = size as i64;
    let dy = 2 * row as i64 + 1 - s;
    let dx = 2 * col as i64 + 1 - s;
    dy * dy + dx * dx > s * s
}

/// Sets every pixel outside the inscribed circle to `fill`, in all channels.
pub fn inscribed_circle_mask<T: Scalar>(t: &Tensor<T>, fill: T) -> Result<Tensor<T>> {
    t.require_square()?;
    let size = t.height();
    let mut out = t.clone();
    for n in 0..t.batch() {
        for h in 0..size {
            for w in 0..size {
                if outside_inscribed_circle(size, h, w) {
                    for c in 0..t.channels() {
                        out[[n, h, w, c]] = fill;
                    }
                }
            }
        }
    }
    Ok(out)
}
