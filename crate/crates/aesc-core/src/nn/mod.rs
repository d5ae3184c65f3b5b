//! Minimal differentiable layer kernels: 2-D convolution, its transpose,
//! fully connected layers, ReLU/sigmoid activations, 2x2 max pooling, Adam,
//! and canonical parameter serialization.
//!
//! Every forward/backward pair is a pure function of its inputs; analytic
//! gradients are held to central finite differences in the test suite.

mod adam;
mod init;
mod ops;
mod params;

pub use adam::{adam_step, AdamState};
pub use init::init_layer_params;
pub use ops::{
    activation_backward, apply_activation, conv2d_backward, conv2d_forward,
    conv_transpose2d_backward, conv_transpose2d_forward, linear_backward, linear_forward,
    maxpool2x2_backward, maxpool2x2_forward, relu, sigmoid,
};
pub use params::{deserialize_params, serialize_params, ParamSet, PARAM_FILE_MAGIC};

use thiserror::Error;

use crate::tensor::Scalar;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{layer}: expected input shape {expected}, got {got}")]
    ShapeMismatch {
        layer: String,
        expected: String,
        got: String,
    },
    #[error("{layer}: output extent collapses to zero ({detail})")]
    EmptyOutput { layer: String, detail: String },
    #[error("{layer}: output_padding {output_padding:?} must be < stride {stride:?}")]
    OutputPaddingTooLarge {
        layer: String,
        output_padding: (usize, usize),
        stride: (usize, usize),
    },
    #[error("non-finite gradient in parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("parameter bytes malformed: {0}")]
    MalformedParams(String),
    #[error("parameter bytes do not match architecture: {0}")]
    ParamArchMismatch(String),
}

/// Layer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    ConvTranspose2d,
    Linear,
}

/// Elementwise nonlinearity applied after the affine part of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    pub fn label(self) -> &'static str {
        match self {
            Activation::Relu => "ReLU",
            Activation::Sigmoid => "Sigmoid",
            Activation::None => "-",
        }
    }
}

/// Geometry and activation of one layer.
///
/// For `Linear`, `in_channels`/`out_channels` hold the feature counts and the
/// spatial fields are unused. Convolution weights are stored
/// `[out, in, kh, kw]`; transpose convolution weights `[in, out, kh, kw]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub output_padding: (usize, usize),
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv2d(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        activation: Activation,
    ) -> Self {
        Self {
            kind: LayerKind::Conv2d,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            output_padding: (0, 0),
            activation,
        }
    }

    pub fn conv_transpose2d(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        output_padding: (usize, usize),
        activation: Activation,
    ) -> Self {
        Self {
            kind: LayerKind::ConvTranspose2d,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            output_padding,
            activation,
        }
    }

    pub fn linear(in_features: usize, out_features: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Linear,
            in_channels: in_features,
            out_channels: out_features,
            kernel: (0, 0),
            stride: (1, 1),
            padding: (0, 0),
            output_padding: (0, 0),
            activation,
        }
    }

    /// Expected weight tensor shape.
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv2d => vec![self.out_channels, self.in_channels, self.kernel.0, self.kernel.1],
            LayerKind::ConvTranspose2d => {
                vec![self.in_channels, self.out_channels, self.kernel.0, self.kernel.1]
            }
            LayerKind::Linear => vec![self.out_channels, self.in_channels],
        }
    }

    pub fn bias_shape(&self) -> Vec<usize> {
        vec![self.out_channels]
    }

    /// Fan-in used for weight initialization scaling.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Linear => self.in_channels,
            _ => self.in_channels * self.kernel.0 * self.kernel.1,
        }
    }

    /// Infers the output shape for a given input shape, validating geometry.
    pub fn output_shape(&self, input: &[usize], layer_name: &str) -> Result<Vec<usize>, NnError> {
        match self.kind {
            LayerKind::Linear => {
                let len: usize = input.iter().product();
                if input.len() != 1 || len != self.in_channels {
                    return Err(NnError::ShapeMismatch {
                        layer: layer_name.to_string(),
                        expected: format!("[{}]", self.in_channels),
                        got: format!("{input:?}"),
                    });
                }
                Ok(vec![self.out_channels])
            }
            LayerKind::Conv2d => {
                let (c, h, w) = expect_chw(input, layer_name)?;
                if c != self.in_channels {
                    return Err(NnError::ShapeMismatch {
                        layer: layer_name.to_string(),
                        expected: format!("{} channels", self.in_channels),
                        got: format!("{c} channels"),
                    });
                }
                let oh = conv_extent(h, self.kernel.0, self.stride.0, self.padding.0);
                let ow = conv_extent(w, self.kernel.1, self.stride.1, self.padding.1);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![self.out_channels, oh, ow]),
                    _ => Err(NnError::EmptyOutput {
                        layer: layer_name.to_string(),
                        detail: format!(
                            "input {h}x{w}, kernel {:?}, stride {:?}, padding {:?}",
                            self.kernel, self.stride, self.padding
                        ),
                    }),
                }
            }
            LayerKind::ConvTranspose2d => {
                if self.output_padding.0 >= self.stride.0 || self.output_padding.1 >= self.stride.1 {
                    return Err(NnError::OutputPaddingTooLarge {
                        layer: layer_name.to_string(),
                        output_padding: self.output_padding,
                        stride: self.stride,
                    });
                }
                let (c, h, w) = expect_chw(input, layer_name)?;
                if c != self.in_channels {
                    return Err(NnError::ShapeMismatch {
                        layer: layer_name.to_string(),
                        expected: format!("{} channels", self.in_channels),
                        got: format!("{c} channels"),
                    });
                }
                let oh = (h - 1) * self.stride.0 + self.kernel.0 + self.output_padding.0;
                let ow = (w - 1) * self.stride.1 + self.kernel.1 + self.output_padding.1;
                let (ph2, pw2) = (2 * self.padding.0, 2 * self.padding.1);
                if oh <= ph2 || ow <= pw2 {
                    return Err(NnError::EmptyOutput {
                        layer: layer_name.to_string(),
                        detail: format!("padding {:?} swallows the output", self.padding),
                    });
                }
                Ok(vec![self.out_channels, oh - ph2, ow - pw2])
            }
        }
    }
}

fn expect_chw(shape: &[usize], layer_name: &str) -> Result<(usize, usize, usize), NnError> {
    if shape.len() != 3 {
        return Err(NnError::ShapeMismatch {
            layer: layer_name.to_string(),
            expected: "[C, H, W]".to_string(),
            got: format!("{shape:?}"),
        });
    }
    Ok((shape[0], shape[1], shape[2]))
}

/// `floor((extent + 2 pad - kernel) / stride) + 1`, or None if non-positive.
fn conv_extent(extent: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = extent + 2 * pad;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Checks a tensor against an expected shape, naming the layer on mismatch.
pub(crate) fn check_shape<T: Scalar>(
    t: &crate::tensor::Tensor<T>,
    expected: &[usize],
    layer: &str,
) -> Result<(), NnError> {
    if t.shape() != expected {
        return Err(NnError::ShapeMismatch {
            layer: layer.to_string(),
            expected: format!("{expected:?}"),
            got: format!("{:?}", t.shape()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shape_formula() {
        let spec = LayerSpec::conv2d(1, 16, (3, 3), (2, 2), (0, 0), Activation::Relu);
        let out = spec.output_shape(&[1, 28, 28], "enc0").unwrap();
        assert_eq!(out, vec![16, 13, 13]);
        let err = spec
            .output_shape(&[3, 13, 13], "enc1")
            .map(|_| ())
            .unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch { .. }));
        assert!(err.to_string().contains("enc1"));
    }

    #[test]
    fn conv_rejects_collapsed_output() {
        let spec = LayerSpec::conv2d(1, 1, (5, 5), (1, 1), (0, 0), Activation::None);
        let err = spec.output_shape(&[1, 3, 3], "tiny").unwrap_err();
        assert!(matches!(err, NnError::EmptyOutput { .. }));
    }

    #[test]
    fn transpose_shape_formula() {
        // (2-1)*2 + 3 + 1 = 6
        let spec =
            LayerSpec::conv_transpose2d(16, 16, (3, 3), (2, 2), (0, 0), (1, 1), Activation::Relu);
        let out = spec.output_shape(&[16, 2, 2], "dec1").unwrap();
        assert_eq!(out, vec![16, 6, 6]);
    }

    #[test]
    fn transpose_rejects_output_padding_ge_stride() {
        let spec =
            LayerSpec::conv_transpose2d(4, 4, (3, 3), (2, 2), (0, 0), (2, 0), Activation::None);
        let err = spec.output_shape(&[4, 2, 2], "dec").unwrap_err();
        assert!(matches!(err, NnError::OutputPaddingTooLarge { .. }));
    }

    #[test]
    fn mnist_shape_chains() {
        // encoder 28 -> 13 -> 6 -> 2, decoder inverts with output paddings (1, 0, 1)
        let conv = |cin, cout| LayerSpec::conv2d(cin, cout, (3, 3), (2, 2), (0, 0), Activation::Relu);
        let mut shape = vec![1usize, 28, 28];
        for (i, spec) in [conv(1, 16), conv(16, 16), conv(16, 16)].iter().enumerate() {
            shape = spec.output_shape(&shape, &format!("enc{i}")).unwrap();
        }
        assert_eq!(shape, vec![16, 2, 2]);

        let deconv = |cin, cout, op| {
            LayerSpec::conv_transpose2d(cin, cout, (3, 3), (2, 2), (0, 0), (op, op), Activation::Relu)
        };
        let mut shape = vec![16usize, 2, 2];
        for (i, spec) in [deconv(16, 16, 1), deconv(16, 16, 0), deconv(16, 1, 1)]
            .iter()
            .enumerate()
        {
            shape = spec.output_shape(&shape, &format!("dec{i}")).unwrap();
        }
        assert_eq!(shape, vec![1, 28, 28]);
    }
}
