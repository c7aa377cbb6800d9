use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::inscribed_circle_mask;
use crate::models::{predict, Network};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub angle: f64,
    /// Share of images whose prediction matches the upright prediction.
    pub agreement: f64,
    pub mean_distance: f64,
}

fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
}

/// Normalized pre-classifier feature distance between an image and its
/// rotation by `angle` degrees (bilinear, then masked; the reference is the
/// masked upright image): `|f(rot) - f(up)| / |f(up)|`, or the plain
/// `|f(rot) - f(up)|` when the upright features are all zero.
pub fn feature_distance<T: Scalar>(net: &Network<T>, image: &Tensor<T>, angle: f64) -> Result<f64> {
    let up = inscribed_circle_mask(image, T::zero())?;
    let rot = inscribed_circle_mask(&up.rotate_bilinear(angle, T::zero())?, T::zero())?;
    let fu = net.features(&up)?;
    let fr = net.features(&rot)?;
    let diff: Vec<T> = fr.as_slice().iter().zip(fu.as_slice()).map(|(&a, &b)| a - b).collect();
    let base = norm(fu.as_slice());
    Ok(if base > 0.0 { norm(&diff) / base } else { norm(&diff) })
}

/// Agreement and mean feature distance at angles `0, step, 2 * step, ...`
/// below 360 degrees.
pub fn angle_sweep<T: Scalar>(net: &Network<T>, images: &[Tensor<T>], step_degrees: f64) -> Result<Vec<SweepRow>> {
    if !(step_degrees > 0.0) {
        return Err(crate::Error::Config { line: 0, message: format!("sweep step {step_degrees} must be positive") });
    }
    let angles: Vec<f64> = (0..).map(|k| k as f64 * step_degrees).take_while(|&a| a < 360.0).collect();
    let upright: Vec<usize> = images
        .par_iter()
        .map(|x| predict(net, &inscribed_circle_mask(x, T::zero())?).map(|p| p[0]))
        .collect::<Result<_>>()?;
    angles
        .iter()
        .map(|&angle| {
            let per_image: Vec<(bool, f64)> = images
                .par_iter()
                .zip(&upright)
                .map(|(x, &p)| -> Result<(bool, f64)> {
                    let rot = inscribed_circle_mask(&inscribed_circle_mask(x, T::zero())?.rotate_bilinear(angle, T::zero())?, T::zero())?;
                    Ok((predict(net, &rot)?[0] == p, feature_distance(net, x, angle)?))
                })
                .collect::<Result<_>>()?;
            let n = images.len().max(1) as f64;
            Ok(SweepRow {
                angle,
                agreement: per_image.iter().filter(|r| r.0).count() as f64 / n,
                mean_distance: per_image.iter().map(|r| r.1).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("# distance = L2(features(rotated) - features(upright)) / L2(features(upright)), pre-classifier features\n");
    s.push_str("angle,agreement,mean_distance\n");
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.9}\n", r.angle, r.agreement, r.mean_distance));
    }
    s
}
