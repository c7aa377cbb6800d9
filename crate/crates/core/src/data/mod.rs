//! Datasets, file loaders and rotated test sets.

mod idx;
mod netpbm;
mod synthetic;

pub use idx::{load_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use netpbm::{load_image_dir, read_netpbm, write_pgm, write_ppm};
pub use synthetic::{generate_glyphs, write_synthetic_split, GLYPH_CLASSES};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::inscribed_circle_mask;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// File names of an MNIST-style directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Labeled images, each `[1, H, W, C]`, all of one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    images: Vec<Tensor<T>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(images: Vec<Tensor<T>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::CountMismatch { images: images.len(), labels: labels.len() });
        }
        if let Some(first) = images.first() {
            if first.batch() != 1 {
                return Err(Error::Shape(format!("dataset images must have batch 1, got {:?}", first.shape())));
            }
            if let Some(bad) = images.iter().find(|t| t.shape() != first.shape()) {
                return Err(Error::Shape(format!("mixed image shapes {:?} and {:?}", first.shape(), bad.shape())));
            }
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Label { label, classes: class_names.len() });
        }
        Ok(Dataset { images, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Tensor<T>] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    /// `[1, H, W, C]` of every image, `None` when empty.
    pub fn image_shape(&self) -> Option<[usize; 4]> {
        self.images.first().map(|t| t.shape())
    }

    /// The first `n` examples (or all of them).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Dataset { images: self.images[..n].to_vec(), labels: self.labels[..n].to_vec(), class_names: self.class_names.clone() }
    }

    /// Selected images stacked into one batch, with their labels.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        let parts: Vec<Tensor<T>> = indices.iter().map(|&i| self.images[i].clone()).collect();
        Ok((Tensor::stack(&parts)?, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            images: self.images.iter().map(|t| t.cast()).collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Per-class example counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes()];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    fn map_images(&self, mut f: impl FnMut(usize, &Tensor<T>) -> Result<Tensor<T>>) -> Result<Self> {
        let images = self.images.iter().enumerate().map(|(i, t)| f(i, t)).collect::<Result<_>>()?;
        Ok(Dataset { images, labels: self.labels.clone(), class_names: self.class_names.clone() })
    }
}

/// Class names `"0", "1", ...` for `classes` numeric classes.
pub fn numeric_class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|i| i.to_string()).collect()
}

/// Blacks out everything outside each image's inscribed circle. Applied to
/// upright training and test data so they show the same content area as the
/// rotated sets.
pub fn mask_dataset<T: Scalar>(d: &Dataset<T>) -> Result<Dataset<T>> {
    d.map_images(|_, t| inscribed_circle_mask(t, T::zero()))
}

/// Counterclockwise quarter-turn counts drawn for a rot set of `count` images.
pub fn quarter_turns_for(seed: u64, count: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(0..4u8)).collect()
}

/// Angles in `[0, 360)` degrees drawn for a rot+ set of `count` images.
pub fn angles_for(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(0.0..360.0)).collect()
}

/// Each image turned by a random multiple of 90 degrees, then masked.
pub fn make_rot_testset<T: Scalar>(d: &Dataset<T>, seed: u64) -> Result<Dataset<T>> {
    let turns = quarter_turns_for(seed, d.len());
    d.map_images(|i, t| {
        t.require_square()?;
        inscribed_circle_mask(&t.rot90(turns[i] as i64), T::zero())
    })
}

/// Each image rotated by a random angle with bilinear resampling, then masked.
pub fn make_rotplus_testset<T: Scalar>(d: &Dataset<T>, seed: u64) -> Result<Dataset<T>> {
    let angles = angles_for(seed, d.len());
    d.map_images(|i, t| inscribed_circle_mask(&t.rotate_bilinear(angles[i], T::zero())?, T::zero()))
}

/// Loads the train and test splits of an MNIST-style directory.
pub fn load_idx_dir<T: Scalar>(dir: &Path) -> Result<(Dataset<T>, Dataset<T>)> {
    let train = load_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    let test = load_idx(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
    Ok((train, test))
}
