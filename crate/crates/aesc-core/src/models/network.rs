//! Sequential network runtime: a validated stage list with cached forward
//! passes and exact backward passes.

use crate::nn::{
    activation_backward, conv2d_backward, conv2d_forward, conv_transpose2d_backward,
    conv_transpose2d_forward, init_layer_params, linear_backward, linear_forward,
    maxpool2x2_backward, maxpool2x2_forward, LayerKind, LayerSpec, NnError, ParamSet,
};
use crate::tensor::{Scalar, Tensor};

/// One step of a sequential network.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Layer(LayerSpec),
    MaxPool2x2,
    Flatten,
    Reshape(Vec<usize>),
}

/// A validated stage pipeline with a fixed input shape.
///
/// Parameters live outside the network in a [`ParamSet`] whose entries are
/// `stage{i}.weight` / `stage{i}.bias` for every `Stage::Layer`, in stage
/// order; the flatten order between convolutional and linear stages is
/// channel-major row-major throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    stages: Vec<Stage>,
    input_shape: Vec<usize>,
    shapes: Vec<Vec<usize>>,
}

/// All intermediate activations of one forward pass: `values[0]` is the
/// input, `values[i + 1]` the output of stage `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Scalar> {
    values: Vec<Tensor<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.values.last().unwrap()
    }

    /// Output of stage `i`.
    pub fn stage_output(&self, i: usize) -> &Tensor<T> {
        &self.values[i + 1]
    }
}

/// Gradient entering the backward pass at some stage's output.
pub enum OutputGrad<T: Scalar> {
    /// Gradient w.r.t. the activated output (the usual case).
    PostActivation(Tensor<T>),
    /// Gradient w.r.t. the pre-activation value of that stage; valid only
    /// when the entry stage is a `Layer`. Used to fuse sigmoid + BCE.
    PreActivation(Tensor<T>),
}

impl Network {
    /// Validates the shape chain once; all later passes reuse it.
    pub fn new(stages: Vec<Stage>, input_shape: Vec<usize>) -> Result<Self, NnError> {
        let mut shapes = vec![input_shape.clone()];
        let mut shape = input_shape.clone();
        for (i, stage) in stages.iter().enumerate() {
            shape = match stage {
                Stage::Layer(spec) => spec.output_shape(&shape, &format!("stage{i}"))?,
                Stage::MaxPool2x2 => {
                    if shape.len() != 3 || shape[1] % 2 != 0 || shape[2] % 2 != 0 {
                        return Err(NnError::ShapeMismatch {
                            layer: format!("stage{i}"),
                            expected: "[C, even H, even W]".into(),
                            got: format!("{shape:?}"),
                        });
                    }
                    vec![shape[0], shape[1] / 2, shape[2] / 2]
                }
                Stage::Flatten => vec![shape.iter().product()],
                Stage::Reshape(target) => {
                    if target.iter().product::<usize>() != shape.iter().product::<usize>() {
                        return Err(NnError::ShapeMismatch {
                            layer: format!("stage{i}"),
                            expected: format!("volume {}", shape.iter().product::<usize>()),
                            got: format!("{target:?}"),
                        });
                    }
                    target.clone()
                }
            };
            shapes.push(shape.clone());
        }
        Ok(Self {
            stages,
            input_shape,
            shapes,
        })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    /// Shape produced by stage `i`.
    pub fn stage_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i + 1]
    }

    /// Zero-valued parameter set matching this network's layout.
    pub fn param_template(&self) -> ParamSet<f32> {
        let mut params = ParamSet::new();
        for (i, stage) in self.stages.iter().enumerate() {
            if let Stage::Layer(spec) = stage {
                params.push(format!("stage{i}.weight"), Tensor::zeros(spec.weight_shape()));
                params.push(format!("stage{i}.bias"), Tensor::zeros(spec.bias_shape()));
            }
        }
        params
    }

    /// Seeded parameter initialization; per-layer streams derive from
    /// `(seed, stage index)` so the same seed is bit-reproducible.
    pub fn init_params(&self, seed: u64) -> ParamSet<f32> {
        let mut params = ParamSet::new();
        for (i, stage) in self.stages.iter().enumerate() {
            if let Stage::Layer(spec) = stage {
                let (w, b) = init_layer_params(spec, seed.wrapping_add(0x9E37 * (i as u64 + 1)));
                params.push(format!("stage{i}.weight"), w);
                params.push(format!("stage{i}.bias"), b);
            }
        }
        params
    }

    fn layer_params<'a, T: Scalar>(
        &self,
        params: &'a ParamSet<T>,
        stage: usize,
    ) -> (&'a Tensor<T>, &'a Tensor<T>) {
        let w = params
            .get(&format!("stage{stage}.weight"))
            .unwrap_or_else(|| panic!("missing stage{stage}.weight"));
        let b = params
            .get(&format!("stage{stage}.bias"))
            .unwrap_or_else(|| panic!("missing stage{stage}.bias"));
        (w, b)
    }

    /// Forward pass retaining every intermediate activation.
    pub fn forward_cached<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        input: &Tensor<T>,
    ) -> Result<ForwardCache<T>, NnError> {
        let mut values = Vec::with_capacity(self.stages.len() + 1);
        values.push(input.clone());
        for (i, stage) in self.stages.iter().enumerate() {
            let x = values.last().unwrap();
            let name = format!("stage{i}");
            let y = match stage {
                Stage::Layer(spec) => {
                    let (w, b) = self.layer_params(params, i);
                    match spec.kind {
                        LayerKind::Conv2d => conv2d_forward(x, spec, w, b, &name)?,
                        LayerKind::ConvTranspose2d => conv_transpose2d_forward(x, spec, w, b, &name)?,
                        LayerKind::Linear => linear_forward(x, spec, w, b, &name)?,
                    }
                }
                Stage::MaxPool2x2 => maxpool2x2_forward(x)?,
                Stage::Flatten => x.clone().into_flat(),
                Stage::Reshape(target) => x.clone().into_reshaped(target.clone()),
            };
            values.push(y);
        }
        Ok(ForwardCache { values })
    }

    /// Forward pass returning only the output.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        input: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        Ok(self.forward_cached(params, input)?.values.pop().unwrap())
    }

    /// Backward pass from the output of stage `enter_stage` down to the
    /// network input.
    ///
    /// Returns the gradient w.r.t. the input, plus per-parameter gradients
    /// (aligned with [`Network::param_template`]) when requested. Parameter
    /// gradients are only populated for stages `<= enter_stage`; the rest
    /// stay zero.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        cache: &ForwardCache<T>,
        grad: OutputGrad<T>,
        enter_stage: usize,
        compute_param_grads: bool,
    ) -> Result<(Tensor<T>, Option<ParamSet<T>>), NnError> {
        assert!(enter_stage < self.stages.len());
        let mut param_grads = if compute_param_grads {
            let mut set = ParamSet::<T>::new();
            for (i, stage) in self.stages.iter().enumerate() {
                if let Stage::Layer(spec) = stage {
                    set.push(
                        format!("stage{i}.weight"),
                        Tensor::zeros(spec.weight_shape()),
                    );
                    set.push(format!("stage{i}.bias"), Tensor::zeros(spec.bias_shape()));
                }
            }
            Some(set)
        } else {
            None
        };

        // Split off the pre-activation entry point: the first processed stage
        // may skip its activation backward.
        let (mut grad_out, mut skip_activation) = match grad {
            OutputGrad::PostActivation(g) => (g, false),
            OutputGrad::PreActivation(g) => {
                assert!(
                    matches!(self.stages[enter_stage], Stage::Layer(_)),
                    "pre-activation gradient requires a layer stage"
                );
                (g, true)
            }
        };

        for i in (0..=enter_stage).rev() {
            let input = &cache.values[i];
            let output = &cache.values[i + 1];
            grad_out = match &self.stages[i] {
                Stage::Layer(spec) => {
                    let grad_preact = if skip_activation {
                        grad_out
                    } else {
                        activation_backward(spec.activation, output, &grad_out)
                    };
                    let (w, _) = self.layer_params(params, i);
                    let (gi, pg) = match spec.kind {
                        LayerKind::Conv2d => {
                            conv2d_backward(input, spec, w, &grad_preact, compute_param_grads)?
                        }
                        LayerKind::ConvTranspose2d => conv_transpose2d_backward(
                            input,
                            spec,
                            w,
                            &grad_preact,
                            compute_param_grads,
                        )?,
                        LayerKind::Linear => {
                            linear_backward(input, spec, w, &grad_preact, compute_param_grads)?
                        }
                    };
                    if let (Some(set), Some((gw, gb))) = (param_grads.as_mut(), pg) {
                        *set.get_mut(&format!("stage{i}.weight")).unwrap() = gw;
                        *set.get_mut(&format!("stage{i}.bias")).unwrap() = gb;
                    }
                    gi
                }
                Stage::MaxPool2x2 => maxpool2x2_backward(input, &grad_out),
                Stage::Flatten | Stage::Reshape(_) => {
                    grad_out.into_reshaped(input.shape().to_vec())
                }
            };
            skip_activation = false;
        }
        Ok((grad_out, param_grads))
    }

    /// Renders the stage list as a fixed-format table, one row per stage.
    pub fn render_architecture(&self) -> String {
        let mut rows = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            let row = match stage {
                Stage::Layer(s) => match s.kind {
                    LayerKind::Conv2d => format!(
                        "Conv2d, kernel=({}, {}), stride=({}, {}), padding=({}, {}), in={}, out={}, {}",
                        s.kernel.0, s.kernel.1, s.stride.0, s.stride.1, s.padding.0, s.padding.1,
                        s.in_channels, s.out_channels, s.activation.label()
                    ),
                    LayerKind::ConvTranspose2d => format!(
                        "ConvTranspose2d, kernel=({}, {}), stride=({}, {}), padding=({}, {}), output_padding=({}, {}), in={}, out={}, {}",
                        s.kernel.0, s.kernel.1, s.stride.0, s.stride.1, s.padding.0, s.padding.1,
                        s.output_padding.0, s.output_padding.1, s.in_channels, s.out_channels,
                        s.activation.label()
                    ),
                    LayerKind::Linear => format!(
                        "Linear, in_features={}, out_features={}, {}",
                        s.in_channels, s.out_channels, s.activation.label()
                    ),
                },
                Stage::MaxPool2x2 => "MaxPool2d, kernel=(2, 2), stride=(2, 2)".to_string(),
                Stage::Flatten => "Flatten".to_string(),
                Stage::Reshape(t) => format!("Reshape{t:?}"),
            };
            rows.push(format!("{i}: {row} -> {:?}", self.stage_shape(i)));
        }
        rows.join("\n")
    }
}
