//! CNN backbones executed through ONNX graphs.
//!
//! Graphs are expected to be truncated classifiers: input is a single RGB
//! image, output is the last pooling layer's activation, which gets flattened
//! into the feature vector. Both NCHW and NHWC input layouts are handled.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::infer::Factoid;

use crate::data::Pixels;
use crate::error::{Error, Result};

use super::backbone::{Backbone, BackboneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Nchw,
    Nhwc,
}

pub struct OnnxBackbone {
    id: BackboneId,
    model: Arc<TypedRunnableModel>,
    layout: Layout,
    height: usize,
    width: usize,
    feature_dim: usize,
}

impl OnnxBackbone {
    pub fn load(id: BackboneId, path: &Path) -> Result<Self> {
        let load_err = |reason: String| Error::BackboneLoad {
            backbone: id.to_string(),
            reason,
        };
        let inference = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| load_err(format!("cannot read {}: {e}", path.display())))?;
        let fact = inference
            .input_fact(0)
            .map_err(|e| load_err(format!("cannot inspect input: {e}")))?;
        let dims: Vec<Option<usize>> = fact
            .shape
            .dims()
            .map(|d| match d.concretize() {
                Some(TDim::Val(v)) if v > 0 => Some(v as usize),
                _ => None,
            })
            .collect();
        if dims.len() != 4 {
            return Err(load_err(format!(
                "expected a rank-4 image input, got rank {}",
                dims.len()
            )));
        }
        // Locate the channel axis to tell NCHW from NHWC. Batch may be
        // symbolic; spatial dims default to 128 when left symbolic.
        let (layout, height, width) = if dims[1] == Some(3) {
            (Layout::Nchw, dims[2].unwrap_or(128), dims[3].unwrap_or(128))
        } else if dims[3] == Some(3) {
            (Layout::Nhwc, dims[1].unwrap_or(128), dims[2].unwrap_or(128))
        } else {
            return Err(load_err(
                "cannot locate a 3-wide channel axis in the input shape".into(),
            ));
        };
        let concrete: [usize; 4] = match layout {
            Layout::Nchw => [1, 3, height, width],
            Layout::Nhwc => [1, height, width, 3],
        };
        let model = inference
            .with_input_fact(0, f32::fact(concrete).into())
            .map_err(|e| load_err(format!("cannot pin input shape: {e}")))?
            .into_optimized()
            .map_err(|e| load_err(format!("cannot optimize graph: {e}")))?
            .into_runnable()
            .map_err(|e| load_err(format!("cannot plan graph: {e}")))?;

        // One probe inference pins the flattened output width.
        let probe = Tensor::zero::<f32>(&concrete)
            .map_err(|e| load_err(format!("cannot build probe tensor: {e}")))?;
        let out = model
            .run(tvec!(probe.into()))
            .map_err(|e| load_err(format!("probe inference failed: {e}")))?;
        let feature_dim = out[0].len();
        if feature_dim == 0 {
            return Err(load_err("graph output is empty".into()));
        }
        Ok(OnnxBackbone {
            id,
            model,
            layout,
            height,
            width,
            feature_dim,
        })
    }

    fn tensor_of(&self, pixels: &Pixels) -> Result<Tensor> {
        if pixels.height != self.height || pixels.width != self.width {
            return Err(Error::shape(
                format!("{} input", self.id),
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", pixels.height, pixels.width),
            ));
        }
        let (h, w) = (self.height, self.width);
        let tensor = match self.layout {
            Layout::Nhwc => {
                // Pixels are already HWC row-major.
                tract_ndarray::Array4::from_shape_vec((1, h, w, 3), pixels.data.clone())
                    .expect("pixel buffer length matches its dims")
                    .into()
            }
            Layout::Nchw => {
                let mut arr = tract_ndarray::Array4::<f32>::zeros((1, 3, h, w));
                for y in 0..h {
                    for x in 0..w {
                        for c in 0..3 {
                            arr[[0, c, y, x]] = pixels.at(y, x, c);
                        }
                    }
                }
                arr.into()
            }
        };
        Ok(tensor)
    }
}

impl Backbone for OnnxBackbone {
    fn id(&self) -> BackboneId {
        self.id
    }

    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn extract_batch(&self, batch: &[Pixels]) -> Result<Array2<f32>> {
        let mut out = Array2::<f32>::zeros((batch.len(), self.feature_dim));
        // Samples run one at a time: batch invariance holds by construction
        // and memory stays flat regardless of batch size.
        for (i, pixels) in batch.iter().enumerate() {
            let tensor = self.tensor_of(pixels)?;
            let result = self
                .model
                .run(tvec!(tensor.into()))
                .map_err(|e| Error::BackboneLoad {
                    backbone: self.id.to_string(),
                    reason: format!("inference failed: {e}"),
                })?;
            let view = result[0]
                .to_plain_array_view::<f32>()
                .map_err(|e| Error::BackboneLoad {
                    backbone: self.id.to_string(),
                    reason: format!("output is not f32: {e}"),
                })?;
            if view.len() != self.feature_dim {
                return Err(Error::shape(
                    format!("{} output", self.id),
                    self.feature_dim.to_string(),
                    view.len().to_string(),
                ));
            }
            for (j, &v) in view.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("{} activations", self.id),
                        sample: i,
                    });
                }
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }
}
