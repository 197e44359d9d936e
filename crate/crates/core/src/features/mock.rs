//! Deterministic mock backbone.
//!
//! Pools the image into per-cell channel statistics and pushes them through a
//! fixed random projection. Orders of magnitude faster than a CNN while still
//! producing features that separate color/texture classes, which is exactly
//! what tests and demos need.

use std::sync::OnceLock;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Pixels;
use crate::error::{Error, Result};
use crate::util::standard_normal;

use super::backbone::{Backbone, BackboneId};

/// Output feature width.
pub const MOCK_FEATURE_DIM: usize = 256;

/// Pooling grid: the image is divided into `GRID x GRID` cells.
const GRID: usize = 8;

/// Per cell and channel we keep mean and variance.
const STATS_DIM: usize = GRID * GRID * 3 * 2;

/// Seed of the fixed projection matrix. Changing it changes every mock
/// feature ever produced, so it is part of the mock's identity.
const PROJECTION_SEED: u64 = 0x6d6f636b_70726f6a; // "mockproj"

fn projection() -> &'static Vec<f32> {
    static PROJECTION: OnceLock<Vec<f32>> = OnceLock::new();
    PROJECTION.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
        let scale = 1.0 / (STATS_DIM as f64).sqrt();
        (0..MOCK_FEATURE_DIM * STATS_DIM)
            .map(|_| (standard_normal(&mut rng) * scale) as f32)
            .collect()
    })
}

#[derive(Debug, Default)]
pub struct MockBackbone;

impl MockBackbone {
    pub fn new() -> Self {
        MockBackbone
    }

    fn features_of(&self, pixels: &Pixels, sample: usize) -> Result<Vec<f32>> {
        if pixels.height == 0 || pixels.width == 0 {
            return Err(Error::shape(
                "mock backbone input",
                "non-empty image",
                format!("{}x{}", pixels.height, pixels.width),
            ));
        }
        let stats = pooled_stats(pixels);
        let proj = projection();
        let mut out = Vec::with_capacity(MOCK_FEATURE_DIM);
        for row in 0..MOCK_FEATURE_DIM {
            // f64 accumulation in a fixed order keeps the projection
            // bit-reproducible across platforms and batch shapes.
            let mut acc = 0.0f64;
            let base = row * STATS_DIM;
            for (j, &s) in stats.iter().enumerate() {
                acc += proj[base + j] as f64 * s;
            }
            let value = acc as f32;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: "mock backbone projection".into(),
                    sample,
                });
            }
            out.push(value);
        }
        Ok(out)
    }
}

/// Mean and population variance per grid cell and channel, f64 accumulated.
fn pooled_stats(pixels: &Pixels) -> Vec<f64> {
    let mut stats = vec![0.0f64; STATS_DIM];
    for cy in 0..GRID {
        let y0 = cy * pixels.height / GRID;
        let y1 = ((cy + 1) * pixels.height / GRID).max(y0 + 1).min(pixels.height);
        for cx in 0..GRID {
            let x0 = cx * pixels.width / GRID;
            let x1 = ((cx + 1) * pixels.width / GRID).max(x0 + 1).min(pixels.width);
            for c in 0..3 {
                let mut sum = 0.0f64;
                let mut sum_sq = 0.0f64;
                let mut count = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = pixels.at(y, x, c) as f64;
                        sum += v;
                        sum_sq += v * v;
                        count += 1.0;
                    }
                }
                let mean = sum / count;
                let var = (sum_sq / count - mean * mean).max(0.0);
                let cell = (cy * GRID + cx) * 3 + c;
                stats[cell * 2] = mean;
                stats[cell * 2 + 1] = var;
            }
        }
    }
    stats
}

impl Backbone for MockBackbone {
    fn id(&self) -> BackboneId {
        BackboneId::Mock
    }

    fn feature_dim(&self) -> usize {
        MOCK_FEATURE_DIM
    }

    fn extract_batch(&self, batch: &[Pixels]) -> Result<Array2<f32>> {
        let mut out = Array2::<f32>::zeros((batch.len(), MOCK_FEATURE_DIM));
        for (i, pixels) in batch.iter().enumerate() {
            let row = self.features_of(pixels, i)?;
            for (j, v) in row.into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preprocess_buffer, ChannelOrder, PreprocessConfig};

    fn pixels_from_fill(value: u8) -> Pixels {
        let raw = vec![value; 32 * 32 * 3];
        preprocess_buffer(&raw, 32, 32, ChannelOrder::Rgb, &PreprocessConfig::default()).unwrap()
    }

    fn pixels_from_seed(seed: u64) -> Pixels {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<u8> = (0..48 * 40 * 3).map(|_| rng.gen()).collect();
        preprocess_buffer(&raw, 48, 40, ChannelOrder::Rgb, &PreprocessConfig::default()).unwrap()
    }

    #[test]
    fn feature_dim_matches_output_width() {
        let backbone = MockBackbone::new();
        let out = backbone.extract_batch(&[pixels_from_fill(100)]).unwrap();
        assert_eq!(out.shape(), &[1, backbone.feature_dim()]);
        assert_eq!(backbone.feature_dim(), MOCK_FEATURE_DIM);
    }

    #[test]
    fn extraction_is_bitwise_deterministic() {
        let backbone = MockBackbone::new();
        let a = backbone.extract_batch(&[pixels_from_seed(1)]).unwrap();
        let b = backbone.extract_batch(&[pixels_from_seed(1)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn features_are_batch_invariant() {
        // The same sample must produce identical features whether extracted
        // alone or in the middle of a batch.
        let backbone = MockBackbone::new();
        let sample = pixels_from_seed(7);
        let alone = backbone.extract_batch(std::slice::from_ref(&sample)).unwrap();
        let batch = backbone
            .extract_batch(&[pixels_from_seed(3), sample.clone(), pixels_from_seed(4)])
            .unwrap();
        assert_eq!(alone.row(0), batch.row(1));
    }

    #[test]
    fn different_images_produce_different_features() {
        let backbone = MockBackbone::new();
        let out = backbone
            .extract_batch(&[pixels_from_fill(30), pixels_from_fill(220)])
            .unwrap();
        assert_ne!(out.row(0), out.row(1));
    }

    #[test]
    fn empty_batch_yields_empty_matrix() {
        let backbone = MockBackbone::new();
        let out = backbone.extract_batch(&[]).unwrap();
        assert_eq!(out.shape(), &[0, MOCK_FEATURE_DIM]);
    }
}
