//! The fixed model zoo: semantic encoder/decoder pairs per dataset plus the
//! frozen classifier that supplies semantic features and recognition rates.

mod files;
mod network;

pub use files::{load_model_file, save_model_file, ModelFile, ModelKind};
pub use network::{ForwardCache, Network, OutputGrad, Stage};

use thiserror::Error;

use crate::data::DatasetName;
use crate::nn::{Activation, LayerSpec, NnError, ParamSet};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("classifier is not trained; semantic features unavailable")]
    UntrainedClassifier,
    #[error("z_dims {0} breaks shape inference: {1}")]
    BadZDims(usize, String),
    #[error("model file: {0}")]
    BadFile(String),
    #[error("model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Architecture tag carried in frame headers so a receiver can instantiate
/// the right decoder from bytes alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelId {
    pub dataset: DatasetName,
    pub z_dims: usize,
}

impl ModelId {
    pub fn dataset_tag(self) -> u16 {
        match self.dataset {
            DatasetName::Mnist => 1,
            DatasetName::Cifar10 => 2,
        }
    }

    pub fn from_tag(tag: u16, z_dims: usize) -> Option<Self> {
        let dataset = match tag {
            1 => DatasetName::Mnist,
            2 => DatasetName::Cifar10,
            _ => return None,
        };
        Some(Self { dataset, z_dims })
    }
}

/// Latent representation emitted by a semantic encoder.
///
/// Flat length `z_dims` for MNIST; `z_dims x 6 x 6` for CIFAR-10. Values are
/// nonnegative because the final encoder activation is a ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCode {
    pub values: Tensor<f32>,
    pub model_id: ModelId,
}

// ---------------------------------------------------------------------------
// Autoencoder architectures
// ---------------------------------------------------------------------------

/// Encoder/decoder stage lists for one dataset and latent width.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderSpec {
    pub dataset: DatasetName,
    pub z_dims: usize,
    pub encoder: Network,
    pub decoder: Network,
}

impl AutoencoderSpec {
    /// Instantiates the fixed architecture for `dataset` with latent width
    /// `z_dims`.
    ///
    /// MNIST: three 3x3 stride-2 convolutions (28 -> 13 -> 6 -> 2, padding 0)
    /// into a 16x2x2 map; that map flattens to 64 features feeding the latent
    /// projection (the 2x2x16 geometry fixes the in-features at 64). The
    /// decoder mirrors it with output paddings (1, 0, 1).
    ///
    /// CIFAR-10: 4x4 stride-2 convolutions carry padding 0 and 3x3 stride-1
    /// convolutions padding 1, giving a `z_dims x 6 x 6` code.
    pub fn build(dataset: DatasetName, z_dims: usize) -> Result<Self, ModelError> {
        if z_dims == 0 {
            return Err(ModelError::BadZDims(z_dims, "must be positive".into()));
        }
        let (encoder, decoder) = match dataset {
            DatasetName::Mnist => (mnist_encoder(z_dims), mnist_decoder(z_dims)),
            DatasetName::Cifar10 => (cifar_encoder(z_dims), cifar_decoder(z_dims)),
        };
        let [c, h, w] = dataset.image_shape();
        let encoder = Network::new(encoder, vec![c, h, w])
            .map_err(|e| ModelError::BadZDims(z_dims, e.to_string()))?;
        let decoder = Network::new(decoder, code_shape(dataset, z_dims))
            .map_err(|e| ModelError::BadZDims(z_dims, e.to_string()))?;
        debug_assert_eq!(decoder.output_shape(), &[c, h, w]);
        Ok(Self {
            dataset,
            z_dims,
            encoder,
            decoder,
        })
    }

    pub fn model_id(&self) -> ModelId {
        ModelId {
            dataset: self.dataset,
            z_dims: self.z_dims,
        }
    }

    /// `E(S)`: image to semantic code.
    pub fn encode(&self, params: &ParamSet<f32>, image: &Tensor<f32>) -> Result<SemanticCode, ModelError> {
        let values = self.encoder.forward(params, image)?;
        Ok(SemanticCode {
            values,
            model_id: self.model_id(),
        })
    }

    /// `D(l)`: semantic code to image, every pixel in (0, 1).
    pub fn decode(&self, params: &ParamSet<f32>, code: &SemanticCode) -> Result<Tensor<f32>, ModelError> {
        if code.values.shape() != self.decoder.input_shape() {
            return Err(ModelError::Nn(NnError::ShapeMismatch {
                layer: "decoder input".into(),
                expected: format!("{:?}", self.decoder.input_shape()),
                got: format!("{:?}", code.values.shape()),
            }));
        }
        Ok(self.decoder.forward(params, &code.values)?)
    }
}

/// Shape of the semantic code for a dataset/width pair.
pub fn code_shape(dataset: DatasetName, z_dims: usize) -> Vec<usize> {
    match dataset {
        DatasetName::Mnist => vec![z_dims],
        DatasetName::Cifar10 => vec![z_dims, 6, 6],
    }
}

/// Builds the architecture and seeded initial parameters.
pub fn build_autoencoder(
    dataset: DatasetName,
    z_dims: usize,
    seed: u64,
) -> Result<(ParamSet<f32>, ParamSet<f32>, AutoencoderSpec), ModelError> {
    let spec = AutoencoderSpec::build(dataset, z_dims)?;
    let enc = spec.encoder.init_params(seed);
    let dec = spec.decoder.init_params(seed.wrapping_add(0x00DE_C0DE));
    Ok((enc, dec, spec))
}

fn mnist_encoder(z_dims: usize) -> Vec<Stage> {
    let conv = |cin, cout| {
        Stage::Layer(LayerSpec::conv2d(cin, cout, (3, 3), (2, 2), (0, 0), Activation::Relu))
    };
    vec![
        conv(1, 16),
        conv(16, 16),
        conv(16, 16),
        Stage::Flatten,
        Stage::Layer(LayerSpec::linear(64, z_dims, Activation::Relu)),
    ]
}

fn mnist_decoder(z_dims: usize) -> Vec<Stage> {
    let deconv = |cin, cout, op, act| {
        Stage::Layer(LayerSpec::conv_transpose2d(
            cin,
            cout,
            (3, 3),
            (2, 2),
            (0, 0),
            (op, op),
            act,
        ))
    };
    vec![
        Stage::Layer(LayerSpec::linear(z_dims, 64, Activation::Relu)),
        // the 64 linear outputs are read as the 16x2x2 feature map
        Stage::Reshape(vec![16, 2, 2]),
        deconv(16, 16, 1, Activation::Relu),
        deconv(16, 16, 0, Activation::Relu),
        deconv(16, 1, 1, Activation::Sigmoid),
    ]
}

fn cifar_encoder(z_dims: usize) -> Vec<Stage> {
    let down = |cin, cout| {
        Stage::Layer(LayerSpec::conv2d(cin, cout, (4, 4), (2, 2), (0, 0), Activation::Relu))
    };
    let conv = |cin, cout| {
        Stage::Layer(LayerSpec::conv2d(cin, cout, (3, 3), (1, 1), (1, 1), Activation::Relu))
    };
    vec![
        down(3, 32),
        conv(32, 64),
        conv(64, 128),
        conv(128, 256),
        down(256, 128),
        conv(128, 64),
        conv(64, 32),
        conv(32, z_dims),
    ]
}

fn cifar_decoder(z_dims: usize) -> Vec<Stage> {
    let up = |cin, cout, op| {
        Stage::Layer(LayerSpec::conv_transpose2d(
            cin,
            cout,
            (4, 4),
            (2, 2),
            (0, 0),
            (op, op),
            Activation::Relu,
        ))
    };
    let conv = |cin, cout, act| {
        Stage::Layer(LayerSpec::conv2d(cin, cout, (3, 3), (1, 1), (1, 1), act))
    };
    vec![
        up(z_dims, 64, 1),
        conv(64, 128, Activation::Relu),
        conv(128, 128, Activation::Relu),
        up(128, 128, 0),
        conv(128, 64, Activation::Relu),
        conv(64, 32, Activation::Relu),
        conv(32, 3, Activation::Sigmoid),
    ]
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

/// Frozen feature extractor and label predictor.
///
/// The penultimate activations serve as the semantic feature map; they are
/// only available once `trained` is set, since untrained features carry no
/// meaning for the semantic loss.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub dataset: DatasetName,
    pub network: Network,
    pub params: ParamSet<f32>,
    pub penultimate_dim: usize,
    pub trained: bool,
}

impl Classifier {
    /// Builds the untrained classifier for a dataset.
    ///
    /// MNIST: Conv(1-32) pool Conv(32-64) pool Linear(3136-128) Linear(128-10).
    /// CIFAR-10: three conv/pool blocks (32, 64, 128) then Linear(2048-256),
    /// Linear(256-10).
    pub fn build(dataset: DatasetName, seed: u64) -> Self {
        let conv = |cin, cout| {
            Stage::Layer(LayerSpec::conv2d(cin, cout, (3, 3), (1, 1), (1, 1), Activation::Relu))
        };
        let (stages, penultimate_dim) = match dataset {
            DatasetName::Mnist => (
                vec![
                    conv(1, 32),
                    Stage::MaxPool2x2,
                    conv(32, 64),
                    Stage::MaxPool2x2,
                    Stage::Flatten,
                    Stage::Layer(LayerSpec::linear(64 * 7 * 7, 128, Activation::Relu)),
                    Stage::Layer(LayerSpec::linear(128, 10, Activation::None)),
                ],
                128,
            ),
            DatasetName::Cifar10 => (
                vec![
                    conv(3, 32),
                    Stage::MaxPool2x2,
                    conv(32, 64),
                    Stage::MaxPool2x2,
                    conv(64, 128),
                    Stage::MaxPool2x2,
                    Stage::Flatten,
                    Stage::Layer(LayerSpec::linear(128 * 4 * 4, 256, Activation::Relu)),
                    Stage::Layer(LayerSpec::linear(256, 10, Activation::None)),
                ],
                256,
            ),
        };
        let [c, h, w] = dataset.image_shape();
        let network = Network::new(stages, vec![c, h, w]).expect("classifier shape chain");
        let params = network.init_params(seed);
        Self {
            dataset,
            network,
            params,
            penultimate_dim,
            trained: false,
        }
    }

    /// Index of the stage whose output is the penultimate feature map.
    pub fn penultimate_stage(&self) -> usize {
        self.network.stages().len() - 2
    }

    /// The semantic feature map `M(S)`.
    pub fn penultimate_features(&self, image: &Tensor<f32>) -> Result<Tensor<f32>, ModelError> {
        if !self.trained {
            return Err(ModelError::UntrainedClassifier);
        }
        let cache = self.network.forward_cached(&self.params, image)?;
        Ok(cache.stage_output(self.penultimate_stage()).clone())
    }

    /// Raw class scores.
    pub fn logits<T: Scalar>(&self, params: &ParamSet<T>, image: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        Ok(self.network.forward(params, image)?)
    }

    /// Argmax class with ties broken toward the lowest index.
    pub fn classify(&self, image: &Tensor<f32>) -> Result<u8, ModelError> {
        let logits = self.network.forward(&self.params, image)?;
        Ok(argmax(logits.data()))
    }
}

/// First index of the maximum value.
pub fn argmax<T: Scalar>(values: &[T]) -> u8 {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best as u8
}

// ---------------------------------------------------------------------------
// Architecture audit
// ---------------------------------------------------------------------------

/// Renders encoder and decoder as one audit table.
pub fn audit_autoencoder(spec: &AutoencoderSpec) -> String {
    format!(
        "# {} z_dims={}\n## encoder\n{}\n## decoder\n{}\n",
        spec.dataset.label(),
        spec.z_dims,
        spec.encoder.render_architecture(),
        spec.decoder.render_architecture()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_encoder_geometry() {
        let spec = AutoencoderSpec::build(DatasetName::Mnist, 40).unwrap();
        assert_eq!(spec.encoder.output_shape(), &[40]);
        // pre-linear flat size is 64
        assert_eq!(spec.encoder.stage_shape(3), &[64]);
        assert_eq!(spec.decoder.output_shape(), &[1, 28, 28]);
    }

    #[test]
    fn cifar_encoder_geometry() {
        let spec = AutoencoderSpec::build(DatasetName::Cifar10, 8).unwrap();
        assert_eq!(spec.encoder.output_shape(), &[8, 6, 6]);
        assert_eq!(spec.decoder.input_shape(), &[8, 6, 6]);
        assert_eq!(spec.decoder.output_shape(), &[3, 32, 32]);
    }

    #[test]
    fn decoder_input_matches_encoder_output_for_every_z() {
        for z in [1, 4, 8, 12, 32, 40, 98, 196, 784] {
            for ds in [DatasetName::Mnist, DatasetName::Cifar10] {
                let spec = AutoencoderSpec::build(ds, z).unwrap();
                assert_eq!(spec.encoder.output_shape(), spec.decoder.input_shape());
            }
        }
    }

    #[test]
    fn build_is_seed_deterministic() {
        let (e1, d1, _) = build_autoencoder(DatasetName::Mnist, 40, 9).unwrap();
        let (e2, d2, _) = build_autoencoder(DatasetName::Mnist, 40, 9).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(d1, d2);
        let (e3, _, _) = build_autoencoder(DatasetName::Mnist, 40, 10).unwrap();
        assert_ne!(e1, e3);
    }

    #[test]
    fn zero_z_dims_rejected() {
        assert!(matches!(
            AutoencoderSpec::build(DatasetName::Mnist, 0),
            Err(ModelError::BadZDims(0, _))
        ));
    }

    #[test]
    fn zero_image_zero_bias_gives_zero_code() {
        let spec = AutoencoderSpec::build(DatasetName::Mnist, 16).unwrap();
        let params = spec.encoder.param_template(); // all zeros
        let img = Tensor::<f32>::zeros(vec![1, 28, 28]);
        let code = spec.encode(&params, &img).unwrap();
        assert!(code.values.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_stays_in_unit_interval() {
        let (_, dec, spec) = build_autoencoder(DatasetName::Mnist, 8, 3).unwrap();
        let code = SemanticCode {
            values: Tensor::from_fn(vec![8], |i| i as f32 * 0.25),
            model_id: spec.model_id(),
        };
        let img = spec.decode(&dec, &code).unwrap();
        assert_eq!(img.shape(), &[1, 28, 28]);
        assert!(img.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn decode_rejects_wrong_code_shape() {
        let (_, dec, spec) = build_autoencoder(DatasetName::Mnist, 8, 3).unwrap();
        let code = SemanticCode {
            values: Tensor::zeros(vec![9]),
            model_id: spec.model_id(),
        };
        assert!(spec.decode(&dec, &code).is_err());
    }

    #[test]
    fn classifier_shapes_and_argmax() {
        let c = Classifier::build(DatasetName::Mnist, 1);
        assert_eq!(c.network.output_shape(), &[10]);
        assert_eq!(c.penultimate_dim, 128);
        assert_eq!(
            c.network.stage_shape(c.penultimate_stage()),
            &[c.penultimate_dim]
        );
        let c = Classifier::build(DatasetName::Cifar10, 1);
        assert_eq!(c.penultimate_dim, 256);
        assert_eq!(
            c.network.stage_shape(c.penultimate_stage()),
            &[c.penultimate_dim]
        );

        assert_eq!(argmax(&[0.1f32, 0.5, 0.5, 0.2]), 1); // tie -> lowest index
    }

    #[test]
    fn untrained_classifier_rejects_feature_request() {
        let c = Classifier::build(DatasetName::Mnist, 1);
        let img = Tensor::<f32>::zeros(vec![1, 28, 28]);
        assert!(matches!(
            c.penultimate_features(&img),
            Err(ModelError::UntrainedClassifier)
        ));
    }

    #[test]
    fn classify_invariant_to_positive_logit_scaling() {
        let logits = [0.3f32, -1.0, 2.5, 0.0, 1.0, -0.4, 0.2, 0.9, -2.0, 0.1];
        let scaled: Vec<f32> = logits.iter().map(|v| v * 7.5).collect();
        assert_eq!(argmax(&logits), argmax(&scaled));
    }

    #[test]
    fn audit_tables_match_frozen_renderings() {
        let spec = AutoencoderSpec::build(DatasetName::Mnist, 40).unwrap();
        let expected = "\
# mnist z_dims=40
## encoder
0: Conv2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), in=1, out=16, ReLU -> [16, 13, 13]
1: Conv2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), in=16, out=16, ReLU -> [16, 6, 6]
2: Conv2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), in=16, out=16, ReLU -> [16, 2, 2]
3: Flatten -> [64]
4: Linear, in_features=64, out_features=40, ReLU -> [40]
## decoder
0: Linear, in_features=40, out_features=64, ReLU -> [64]
1: Reshape[16, 2, 2] -> [16, 2, 2]
2: ConvTranspose2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), output_padding=(1, 1), in=16, out=16, ReLU -> [16, 6, 6]
3: ConvTranspose2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), output_padding=(0, 0), in=16, out=16, ReLU -> [16, 13, 13]
4: ConvTranspose2d, kernel=(3, 3), stride=(2, 2), padding=(0, 0), output_padding=(1, 1), in=16, out=1, Sigmoid -> [1, 28, 28]
";
        assert_eq!(audit_autoencoder(&spec), expected);

        let spec = AutoencoderSpec::build(DatasetName::Cifar10, 8).unwrap();
        let expected = "\
# cifar10 z_dims=8
## encoder
0: Conv2d, kernel=(4, 4), stride=(2, 2), padding=(0, 0), in=3, out=32, ReLU -> [32, 15, 15]
1: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=32, out=64, ReLU -> [64, 15, 15]
2: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=64, out=128, ReLU -> [128, 15, 15]
3: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=128, out=256, ReLU -> [256, 15, 15]
4: Conv2d, kernel=(4, 4), stride=(2, 2), padding=(0, 0), in=256, out=128, ReLU -> [128, 6, 6]
5: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=128, out=64, ReLU -> [64, 6, 6]
6: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=64, out=32, ReLU -> [32, 6, 6]
7: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=32, out=8, ReLU -> [8, 6, 6]
## decoder
0: ConvTranspose2d, kernel=(4, 4), stride=(2, 2), padding=(0, 0), output_padding=(1, 1), in=8, out=64, ReLU -> [64, 15, 15]
1: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=64, out=128, ReLU -> [128, 15, 15]
2: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=128, out=128, ReLU -> [128, 15, 15]
3: ConvTranspose2d, kernel=(4, 4), stride=(2, 2), padding=(0, 0), output_padding=(0, 0), in=128, out=128, ReLU -> [128, 32, 32]
4: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=128, out=64, ReLU -> [64, 32, 32]
5: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=64, out=32, ReLU -> [32, 32, 32]
6: Conv2d, kernel=(3, 3), stride=(1, 1), padding=(1, 1), in=32, out=3, Sigmoid -> [3, 32, 32]
";
        assert_eq!(audit_autoencoder(&spec), expected);
    }

    #[test]
    fn batch_encode_equals_loop_of_singles() {
        let (enc, _, spec) = build_autoencoder(DatasetName::Mnist, 8, 4).unwrap();
        let images: Vec<Tensor<f32>> = (0..5)
            .map(|i| Tensor::from_fn(vec![1, 28, 28], |j| ((i * 131 + j) % 97) as f32 / 96.0))
            .collect();
        let batch: Vec<_> = images.iter().map(|im| spec.encode(&enc, im).unwrap()).collect();
        for (im, code) in images.iter().zip(&batch) {
            assert_eq!(spec.encode(&enc, im).unwrap(), *code);
        }
    }
}
