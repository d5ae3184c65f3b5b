//! Forward and backward kernels for the layer set.
//!
//! Convolutions lower to an im2col buffer and a single gemm; the transpose
//! convolution is implemented as the exact adjoint of the convolution with
//! the same geometry, which the test suite checks through the inner-product
//! identity `<conv(x), y> == <x, convT(y)>`.

use crate::nn::{check_shape, Activation, LayerKind, LayerSpec, NnError};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Branching form avoids overflow of exp for large |x|.
fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn apply_activation<T: Scalar>(act: Activation, x: &Tensor<T>) -> Tensor<T> {
    match act {
        Activation::Relu => relu(x),
        Activation::Sigmoid => sigmoid(x),
        Activation::None => x.clone(),
    }
}

/// Maps the gradient w.r.t. a layer's output to the gradient w.r.t. its
/// pre-activation value, using only the activated output.
///
/// ReLU uses `output > 0` so the subgradient at 0 is 0; sigmoid uses
/// `y * (1 - y)`.
pub fn activation_backward<T: Scalar>(
    act: Activation,
    output: &Tensor<T>,
    grad_output: &Tensor<T>,
) -> Tensor<T> {
    assert_eq!(output.shape(), grad_output.shape(), "activation grad shape");
    match act {
        Activation::None => grad_output.clone(),
        Activation::Relu => Tensor::from_fn(output.shape().to_vec(), |i| {
            if output.data()[i] > T::zero() {
                grad_output.data()[i]
            } else {
                T::zero()
            }
        }),
        Activation::Sigmoid => Tensor::from_fn(output.shape().to_vec(), |i| {
            let y = output.data()[i];
            grad_output.data()[i] * y * (T::one() - y)
        }),
    }
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

struct ConvGeom {
    channels: usize,
    height: usize,
    width: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn new(input: &[usize], spec: &LayerSpec, out: &[usize]) -> Self {
        Self {
            channels: input[0],
            height: input[1],
            width: input[2],
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            out_h: out[1],
            out_w: out[2],
        }
    }

    fn patch_rows(&self) -> usize {
        self.channels * self.kernel.0 * self.kernel.1
    }

    fn patch_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds `x[C,H,W]` into a `[C*kh*kw, OH*OW]` patch matrix (zero padded).
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let mut patches = vec![T::zero(); g.patch_rows() * g.patch_cols()];
    let cols = g.patch_cols();
    let mut row = 0;
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel.0 {
            for kj in 0..g.kernel.1 {
                let dst = &mut patches[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride.0 + ki) as isize - g.padding.0 as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let dst_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride.1 + kj) as isize - g.padding.1 as isize;
                        if ix >= 0 && ix < g.width as isize {
                            dst_row[ox] = src_row[ix as usize];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    patches
}

/// Adjoint of [`im2col`]: scatter-adds a patch matrix back into `[C,H,W]`.
fn col2im<T: Scalar>(patches: &[T], g: &ConvGeom) -> Vec<T> {
    let mut image = vec![T::zero(); g.channels * g.height * g.width];
    let cols = g.patch_cols();
    let mut row = 0;
    for c in 0..g.channels {
        for ki in 0..g.kernel.0 {
            for kj in 0..g.kernel.1 {
                let src = &patches[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride.0 + ki) as isize - g.padding.0 as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let plane =
                        &mut image[(c * g.height + iy as usize) * g.width..(c * g.height + iy as usize + 1) * g.width];
                    let src_row = &src[oy * g.out_w..(oy + 1) * g.out_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride.1 + kj) as isize - g.padding.1 as isize;
                        if ix >= 0 && ix < g.width as isize {
                            plane[ix as usize] += src_row[ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    image
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

/// 2-D cross-correlation with bias and activation.
///
/// `weights` are `[out, in, kh, kw]`, `bias` `[out]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    layer_name: &str,
) -> Result<Tensor<T>, NnError> {
    debug_assert_eq!(spec.kind, LayerKind::Conv2d);
    let out_shape = spec.output_shape(input.shape(), layer_name)?;
    check_shape(weights, &spec.weight_shape(), layer_name)?;
    check_shape(bias, &spec.bias_shape(), layer_name)?;

    let g = ConvGeom::new(input.shape(), spec, &out_shape);
    let patches = im2col(input.data(), &g);
    let (m, k, n) = (spec.out_channels, g.patch_rows(), g.patch_cols());
    let mut out = vec![T::zero(); m * n];
    T::gemm(m, k, n, T::one(), weights.data(), false, &patches, false, T::zero(), &mut out);
    for ch in 0..m {
        let b = bias.data()[ch];
        for v in &mut out[ch * n..(ch + 1) * n] {
            *v += b;
        }
    }
    Ok(apply_activation(spec.activation, &Tensor::new(out_shape, out)))
}

/// Gradients of a conv2d layer w.r.t. input, weights and bias.
///
/// `grad_preact` is the gradient at the pre-activation output (use
/// [`activation_backward`] first).
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    grad_preact: &Tensor<T>,
    compute_param_grads: bool,
) -> Result<(Tensor<T>, Option<(Tensor<T>, Tensor<T>)>), NnError> {
    let out_shape = spec.output_shape(input.shape(), "conv2d backward")?;
    check_shape(grad_preact, &out_shape, "conv2d backward")?;

    let g = ConvGeom::new(input.shape(), spec, &out_shape);
    let (m, k, n) = (spec.out_channels, g.patch_rows(), g.patch_cols());

    // grad input = col2im(W^T . G)
    let mut q = vec![T::zero(); k * n];
    T::gemm(k, m, n, T::one(), weights.data(), true, grad_preact.data(), false, T::zero(), &mut q);
    let grad_input = Tensor::new(input.shape().to_vec(), col2im(&q, &g));

    let param_grads = if compute_param_grads {
        let patches = im2col(input.data(), &g);
        let mut gw = vec![T::zero(); m * k];
        T::gemm(m, n, k, T::one(), grad_preact.data(), false, &patches, true, T::zero(), &mut gw);
        let mut gb = vec![T::zero(); m];
        for ch in 0..m {
            let mut acc = T::zero();
            for &v in &grad_preact.data()[ch * n..(ch + 1) * n] {
                acc += v;
            }
            gb[ch] = acc;
        }
        Some((
            Tensor::new(spec.weight_shape(), gw),
            Tensor::new(spec.bias_shape(), gb),
        ))
    } else {
        None
    };
    Ok((grad_input, param_grads))
}

// ---------------------------------------------------------------------------
// conv_transpose2d
// ---------------------------------------------------------------------------

/// Conv geometry whose *forward* direction maps the transpose layer's output
/// back to its input; the transpose layer is the adjoint of that map.
fn transpose_as_conv(spec: &LayerSpec) -> LayerSpec {
    LayerSpec::conv2d(
        spec.out_channels,
        spec.in_channels,
        spec.kernel,
        spec.stride,
        spec.padding,
        Activation::None,
    )
}

/// Transposed 2-D convolution (fractionally strided upsampling).
///
/// `weights` are `[in, out, kh, kw]`, `bias` `[out]`. Output spatial extent is
/// `(H-1)*stride - 2*padding + kernel + output_padding`.
pub fn conv_transpose2d_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    layer_name: &str,
) -> Result<Tensor<T>, NnError> {
    debug_assert_eq!(spec.kind, LayerKind::ConvTranspose2d);
    let out_shape = spec.output_shape(input.shape(), layer_name)?;
    check_shape(weights, &spec.weight_shape(), layer_name)?;
    check_shape(bias, &spec.bias_shape(), layer_name)?;

    let conv = transpose_as_conv(spec);
    let g = ConvGeom::new(&out_shape, &conv, input.shape());
    let (m, k, n) = (spec.in_channels, g.patch_rows(), g.patch_cols());

    // adjoint of `out = W . im2col(x)`: x_out = col2im(W^T . z)
    let mut q = vec![T::zero(); k * n];
    T::gemm(k, m, n, T::one(), weights.data(), true, input.data(), false, T::zero(), &mut q);
    let mut out = col2im(&q, &g);
    let plane = out_shape[1] * out_shape[2];
    for ch in 0..spec.out_channels {
        let b = bias.data()[ch];
        for v in &mut out[ch * plane..(ch + 1) * plane] {
            *v += b;
        }
    }
    Ok(apply_activation(spec.activation, &Tensor::new(out_shape, out)))
}

/// Gradients of a transpose convolution w.r.t. input, weights and bias.
pub fn conv_transpose2d_backward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    grad_preact: &Tensor<T>,
    compute_param_grads: bool,
) -> Result<(Tensor<T>, Option<(Tensor<T>, Tensor<T>)>), NnError> {
    let out_shape = spec.output_shape(input.shape(), "conv_transpose2d backward")?;
    check_shape(grad_preact, &out_shape, "conv_transpose2d backward")?;

    let conv = transpose_as_conv(spec);
    let g = ConvGeom::new(&out_shape, &conv, input.shape());
    let (m, k, n) = (spec.in_channels, g.patch_rows(), g.patch_cols());

    // forward was adjoint of a conv, so its input-gradient is that conv.
    let patches = im2col(grad_preact.data(), &g);
    let mut gi = vec![T::zero(); m * n];
    T::gemm(m, k, n, T::one(), weights.data(), false, &patches, false, T::zero(), &mut gi);
    let grad_input = Tensor::new(input.shape().to_vec(), gi);

    let param_grads = if compute_param_grads {
        let mut gw = vec![T::zero(); m * k];
        T::gemm(m, n, k, T::one(), input.data(), false, &patches, true, T::zero(), &mut gw);
        let plane = out_shape[1] * out_shape[2];
        let mut gb = vec![T::zero(); spec.out_channels];
        for (ch, gbc) in gb.iter_mut().enumerate() {
            let mut acc = T::zero();
            for &v in &grad_preact.data()[ch * plane..(ch + 1) * plane] {
                acc += v;
            }
            *gbc = acc;
        }
        Some((
            Tensor::new(spec.weight_shape(), gw),
            Tensor::new(spec.bias_shape(), gb),
        ))
    } else {
        None
    };
    Ok((grad_input, param_grads))
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

/// Fully connected layer `out = act(W x + b)` on a flat input.
pub fn linear_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    layer_name: &str,
) -> Result<Tensor<T>, NnError> {
    debug_assert_eq!(spec.kind, LayerKind::Linear);
    let out_shape = spec.output_shape(input.shape(), layer_name)?;
    check_shape(weights, &spec.weight_shape(), layer_name)?;
    check_shape(bias, &spec.bias_shape(), layer_name)?;

    let (m, k) = (spec.out_channels, spec.in_channels);
    let mut out = bias.data().to_vec();
    T::gemm(m, k, 1, T::one(), weights.data(), false, input.data(), false, T::one(), &mut out);
    Ok(apply_activation(spec.activation, &Tensor::new(out_shape, out)))
}

/// Gradients of a linear layer w.r.t. input, weights and bias.
pub fn linear_backward<T: Scalar>(
    input: &Tensor<T>,
    spec: &LayerSpec,
    weights: &Tensor<T>,
    grad_preact: &Tensor<T>,
    compute_param_grads: bool,
) -> Result<(Tensor<T>, Option<(Tensor<T>, Tensor<T>)>), NnError> {
    check_shape(grad_preact, &[spec.out_channels], "linear backward")?;
    let (m, k) = (spec.out_channels, spec.in_channels);

    let mut gi = vec![T::zero(); k];
    T::gemm(k, m, 1, T::one(), weights.data(), true, grad_preact.data(), false, T::zero(), &mut gi);
    let grad_input = Tensor::new(vec![k], gi);

    let param_grads = if compute_param_grads {
        let mut gw = vec![T::zero(); m * k];
        for o in 0..m {
            let go = grad_preact.data()[o];
            let row = &mut gw[o * k..(o + 1) * k];
            for (i, w) in row.iter_mut().enumerate() {
                *w = go * input.data()[i];
            }
        }
        Some((
            Tensor::new(spec.weight_shape(), gw),
            Tensor::new(spec.bias_shape(), grad_preact.data().to_vec()),
        ))
    } else {
        None
    };
    Ok((grad_input, param_grads))
}

// ---------------------------------------------------------------------------
// 2x2 max pooling
// ---------------------------------------------------------------------------

/// Non-overlapping 2x2 max pooling; requires even spatial extents.
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let s = input.shape();
    if s.len() != 3 || s[1] % 2 != 0 || s[2] % 2 != 0 {
        return Err(NnError::ShapeMismatch {
            layer: "maxpool2x2".to_string(),
            expected: "[C, even H, even W]".to_string(),
            got: format!("{s:?}"),
        });
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        let plane = &input.data()[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let (iy, ix) = (oy * 2, ox * 2);
                let mut best = plane[iy * w + ix];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let v = plane[(iy + dy) * w + ix + dx];
                    if v > best {
                        best = v;
                    }
                }
                out[(ch * oh + oy) * ow + ox] = best;
            }
        }
    }
    Ok(Tensor::new(vec![c, oh, ow], out))
}

/// Routes the output gradient to the first maximal element of each window.
pub fn maxpool2x2_backward<T: Scalar>(input: &Tensor<T>, grad_output: &Tensor<T>) -> Tensor<T> {
    let s = input.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    let (oh, ow) = (h / 2, w / 2);
    assert_eq!(grad_output.shape(), &[c, oh, ow], "maxpool grad shape");
    let mut grad_in = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let plane = &input.data()[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let (iy, ix) = (oy * 2, ox * 2);
                let mut best = plane[iy * w + ix];
                let mut arg = (iy, ix);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let v = plane[(iy + dy) * w + ix + dx];
                    if v > best {
                        best = v;
                        arg = (iy + dy, ix + dx);
                    }
                }
                grad_in[(ch * h + arg.0) * w + arg.1] += grad_output.data()[(ch * oh + oy) * ow + ox];
            }
        }
    }
    Tensor::new(vec![c, h, w], grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn conv_spec(cin: usize, cout: usize, k: usize, s: usize, p: usize) -> LayerSpec {
        LayerSpec::conv2d(cin, cout, (k, k), (s, s), (p, p), Activation::None)
    }

    /// Direct sliding-window cross-correlation used as an oracle.
    fn conv_bruteforce(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        b: &[f64],
        k: usize,
        s: usize,
        p: usize,
    ) -> Tensor<f64> {
        let (cin, h, win) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let cout = w.shape()[0];
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (win + 2 * p - k) / s + 1;
        let mut out = Tensor::<f64>::zeros(vec![cout, oh, ow]);
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[co];
                    for ci in 0..cin {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (oy * s + ki) as isize - p as isize;
                                let ix = (ox * s + kj) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < win {
                                    acc += x.data()[(ci * h + iy as usize) * win + ix as usize]
                                        * w.data()[((co * cin + ci) * k + ki) * k + kj];
                                }
                            }
                        }
                    }
                    out.data_mut()[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_passthrough() {
        let spec = conv_spec(1, 1, 1, 1, 0);
        let x = Tensor::<f32>::filled(vec![1, 3, 3], 1.0);
        let w = Tensor::<f32>::new(vec![1, 1, 1, 1], vec![1.0]);
        let b = Tensor::<f32>::new(vec![1], vec![0.0]);
        let y = conv2d_forward(&x, &spec, &w, &b, "t").unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn stride2_output_extent() {
        let spec = conv_spec(1, 1, 3, 2, 0);
        let x = Tensor::<f32>::zeros(vec![1, 28, 28]);
        let w = Tensor::<f32>::zeros(vec![1, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(vec![1]);
        let y = conv2d_forward(&x, &spec, &w, &b, "t").unwrap();
        assert_eq!(y.shape(), &[1, 13, 13]);
    }

    #[test]
    fn strided_2x2_kernel_matches_bruteforce() {
        // 1x4x4 with values 1..16, kernel [[1,0],[0,-1]], stride 2
        let x = Tensor::<f64>::from_fn(vec![1, 4, 4], |i| (i + 1) as f64);
        let w = Tensor::<f64>::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, -1.0]);
        let spec = LayerSpec::conv2d(1, 1, (2, 2), (2, 2), (0, 0), Activation::None);
        let y = conv2d_forward(&x, &spec, &w, &Tensor::zeros(vec![1]), "t").unwrap();
        let oracle = conv_bruteforce(&x, &w, &[0.0], 2, 2, 0);
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), oracle.data());
        // x[0,0]-x[1,1] = 1-6, 3-8, 9-14, 11-16
        assert_eq!(y.data(), &[-5.0, -5.0, -5.0, -5.0]);
    }

    #[test]
    fn conv_matches_bruteforce_with_padding() {
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x = Tensor::<f64>::from_fn(vec![3, 7, 7], |_| next());
        let w = Tensor::<f64>::from_fn(vec![4, 3, 3, 3], |_| next());
        let b: Vec<f64> = (0..4).map(|_| next()).collect();
        let spec = LayerSpec::conv2d(3, 4, (3, 3), (2, 2), (1, 1), Activation::None);
        let y = conv2d_forward(&x, &spec, &w, &Tensor::new(vec![4], b.clone()), "t").unwrap();
        let oracle = conv_bruteforce(&x, &w, &b, 3, 2, 1);
        assert_eq!(y.shape(), oracle.shape());
        for (a, e) in y.data().iter().zip(oracle.data()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-12);
        }
    }

    #[test]
    fn transpose_shape_and_adjointness() {
        let spec =
            LayerSpec::conv_transpose2d(1, 1, (3, 3), (2, 2), (0, 0), (1, 1), Activation::None);
        let x = Tensor::<f32>::zeros(vec![1, 2, 2]);
        let w = Tensor::<f32>::zeros(vec![1, 1, 3, 3]);
        let y = conv_transpose2d_forward(&x, &spec, &w, &Tensor::zeros(vec![1]), "t").unwrap();
        assert_eq!(y.shape(), &[1, 6, 6]);
    }

    #[test]
    fn inner_product_adjoint_identity() {
        // <conv(x), y> == <x, convT(y)> for shared geometry and weights
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for (k, s, p) in [(3usize, 2usize, 0usize), (3, 1, 1), (4, 2, 0), (2, 2, 0)] {
            let conv = LayerSpec::conv2d(2, 3, (k, k), (s, s), (p, p), Activation::None);
            let x = Tensor::<f64>::from_fn(vec![2, 5, 5], |_| next());
            let w = Tensor::<f64>::from_fn(vec![3, 2, k, k], |_| next());
            let out_shape = conv.output_shape(x.shape(), "t").unwrap();
            let y = Tensor::<f64>::from_fn(out_shape.clone(), |_| next());

            let cx = conv2d_forward(&x, &conv, &w, &Tensor::zeros(vec![3]), "t").unwrap();

            // transpose layer with the same geometry, sized to invert exactly
            let oh = x.shape()[1] + 2 * p - ((out_shape[1] - 1) * s + k);
            let ow = x.shape()[2] + 2 * p - ((out_shape[2] - 1) * s + k);
            let tspec =
                LayerSpec::conv_transpose2d(3, 2, (k, k), (s, s), (p, p), (oh, ow), Activation::None);
            let ty = conv_transpose2d_forward(&y, &tspec, &w, &Tensor::zeros(vec![2]), "t").unwrap();
            assert_eq!(ty.shape(), x.shape());

            let lhs = cx.dot(&y);
            let rhs = x.dot(&ty);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn linear_identity_and_sum() {
        let spec = LayerSpec::linear(3, 3, Activation::None);
        let eye = Tensor::<f32>::from_fn(vec![3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let x = Tensor::<f32>::new(vec![3], vec![1.0, 2.0, 3.0]);
        let y = linear_forward(&x, &spec, &eye, &Tensor::zeros(vec![3]), "t").unwrap();
        assert_eq!(y.data(), x.data());

        let sum_spec = LayerSpec::linear(3, 1, Activation::None);
        let ones = Tensor::<f32>::filled(vec![1, 3], 1.0);
        let y = linear_forward(&x, &sum_spec, &ones, &Tensor::zeros(vec![1]), "t").unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn linear_rejects_length_mismatch() {
        let spec = LayerSpec::linear(4, 2, Activation::None);
        let x = Tensor::<f32>::zeros(vec![3]);
        let err = linear_forward(&x, &spec, &Tensor::zeros(vec![2, 4]), &Tensor::zeros(vec![2]), "fc")
            .unwrap_err();
        assert!(err.to_string().contains("fc"));
    }

    #[test]
    fn activation_values() {
        let x = Tensor::<f64>::new(vec![4], vec![-2.0, 3.0, 0.0, 40.0]);
        let r = relu(&x);
        assert_eq!(r.data(), &[0.0, 3.0, 0.0, 40.0]);
        let s = sigmoid(&Tensor::<f64>::new(vec![3], vec![0.0, 40.0, -40.0]));
        assert_eq!(s.data()[0], 0.5);
        assert!((s.data()[1] - 1.0).abs() < 1e-12);
        assert!(s.data()[2] < 1e-12 && s.data()[2] > 0.0);
        assert!(s.all_finite());
    }

    #[test]
    fn maxpool_forward_backward() {
        let x = Tensor::<f32>::new(vec![1, 2, 4], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let y = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2]);
        assert_eq!(y.data(), &[6.0, 8.0]);
        let g = maxpool2x2_backward(&x, &Tensor::new(vec![1, 1, 2], vec![1.0, 2.0]));
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn maxpool_rejects_odd_extent() {
        let x = Tensor::<f32>::zeros(vec![1, 3, 4]);
        assert!(maxpool2x2_forward(&x).is_err());
    }
}
