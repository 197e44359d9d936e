//! Synthetic dataset generation for tests and demos.
//!
//! Two flavors: class-colored image trees on disk (exercise the full decode,
//! preprocess, extract path) and Gaussian feature blobs in memory (exercise
//! classifiers without touching images). Both are fully determined by their
//! seed.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::label_map::LabelMap;
use crate::error::{Error, Result};
use crate::util::{derive_seed, standard_normal};

/// Base RGB colors assigned to classes, chosen far apart so even heavily
/// pooled features separate cleanly.
const CLASS_COLORS: &[[u8; 3]] = &[
    [200, 60, 60],
    [60, 200, 60],
    [60, 60, 200],
    [200, 200, 60],
    [60, 200, 200],
    [200, 60, 200],
    [230, 140, 40],
    [120, 120, 120],
];

/// Options for [`generate_image_tree`].
#[derive(Debug, Clone)]
pub struct ImageTreeOptions {
    pub per_class: usize,
    pub image_size: u32,
    /// Uniform pixel noise amplitude in intensity units (0..=255 scale).
    pub noise: u8,
    pub seed: u64,
}

impl Default for ImageTreeOptions {
    fn default() -> Self {
        ImageTreeOptions {
            per_class: 20,
            image_size: 64,
            noise: 12,
            seed: 42,
        }
    }
}

/// Write a class-per-directory PNG tree under `root`.
///
/// Every image is its class color plus per-pixel uniform noise and a gentle
/// horizontal gradient, so images within a class differ but classes stay
/// linearly separable after any reasonable pooling.
pub fn generate_image_tree(
    root: &Path,
    label_map: &LabelMap,
    options: &ImageTreeOptions,
) -> Result<()> {
    if label_map.n_classes() > CLASS_COLORS.len() {
        return Err(Error::Config(format!(
            "synthetic tree supports at most {} classes, got {}",
            CLASS_COLORS.len(),
            label_map.n_classes()
        )));
    }
    if options.per_class == 0 || options.image_size == 0 {
        return Err(Error::Config(
            "synthetic tree needs per_class > 0 and image_size > 0".into(),
        ));
    }
    let size = options.image_size;
    for entry in label_map.entries() {
        let class_dir = root.join(&entry.name);
        fs::create_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        let base = CLASS_COLORS[entry.id as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            options.seed,
            &format!("synth-image/{}", entry.id),
        ));
        for i in 0..options.per_class {
            let mut img = image::RgbImage::new(size, size);
            for y in 0..size {
                for x in 0..size {
                    // Gradient keeps per-cell statistics varied across the image.
                    let gradient = (x as i32 * 24 / size.max(1) as i32) - 12;
                    let mut px = [0u8; 3];
                    for c in 0..3 {
                        let noise = if options.noise == 0 {
                            0
                        } else {
                            rng.gen_range(-(options.noise as i32)..=options.noise as i32)
                        };
                        px[c] = (base[c] as i32 + gradient + noise).clamp(0, 255) as u8;
                    }
                    img.put_pixel(x, y, image::Rgb(px));
                }
            }
            let path = class_dir.join(format!("img{i:05}.png"));
            img.save(&path).map_err(|e| Error::Decode {
                path: path.clone(),
                source: e,
            })?;
        }
    }
    Ok(())
}

/// Gaussian blob features: `per_class` rows per class around well-separated
/// seeded centers. Returns `(features, labels)` with labels grouped by class
/// in order `0..n_classes`.
pub fn generate_blobs(
    n_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Array2<f32>, Vec<u32>) {
    assert!(n_classes >= 1 && per_class >= 1 && dim >= 1);
    let mut center_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "blob-centers"));
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            (0..dim)
                .map(|_| standard_normal(&mut center_rng) * separation)
                .collect()
        })
        .collect();
    let mut features = Array2::<f32>::zeros((n_classes * per_class, dim));
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for (c, center) in centers.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("blob/{c}")));
        for i in 0..per_class {
            let row = c * per_class + i;
            for d in 0..dim {
                features[[row, d]] = (center[d] + standard_normal(&mut rng)) as f32;
            }
            labels.push(c as u32);
        }
    }
    (features, labels)
}
