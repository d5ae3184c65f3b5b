//! Training loops for the autoencoders and the classifier.
//!
//! Single-threaded and fully deterministic: the batch order derives from
//! (seed, epoch), gradients accumulate in sample order, and the best-epoch
//! parameters are returned after patience-based early stopping on the
//! combined validation loss.

use crate::data::{epoch_batches, BatchConfig, Dataset};
use crate::models::{
    build_autoencoder, AutoencoderSpec, Classifier, ModelError, OutputGrad,
};
use crate::nn::{adam_step, AdamState, ParamSet};
use crate::tensor::Tensor;
use crate::training::{
    cross_entropy, cross_entropy_grad, loss_bce, loss_mse, mse_grad, semantic_loss_and_grad,
    LossConfig, ReconstructionKind, TrainConfig, TrainError,
};

/// One epoch of averaged losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_recon: f64,
    pub train_sem: f64,
    pub val_recon: f64,
    pub val_sem: f64,
}

/// Loss history, persisted as `epoch,train_recon,train_sem,val_recon,val_sem`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_recon,train_sem,val_recon,val_sem\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_recon, e.train_sem, e.val_recon, e.val_sem
            ));
        }
        out
    }
}

/// Result of an autoencoder run: best-epoch parameters and the full log.
#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub spec: AutoencoderSpec,
    pub encoder_params: ParamSet<f32>,
    pub decoder_params: ParamSet<f32>,
    pub log: TrainLog,
    /// 1-based epoch whose validation loss was best.
    pub best_epoch: usize,
    /// Whether the patience rule fired before `max_epochs`.
    pub stopped_early: bool,
}

struct SampleGrads {
    recon: f64,
    sem: f64,
    encoder: ParamSet<f32>,
    decoder: ParamSet<f32>,
}

/// Forward/backward for one image; returns losses and parameter gradients.
fn autoencoder_sample_pass(
    spec: &AutoencoderSpec,
    enc_params: &ParamSet<f32>,
    dec_params: &ParamSet<f32>,
    classifier: &Classifier,
    features: &Tensor<f32>,
    image: &Tensor<f32>,
    loss_cfg: &LossConfig,
) -> Result<SampleGrads, TrainError> {
    let gamma = loss_cfg.gamma as f32;
    let enc_cache = spec.encoder.forward_cached(enc_params, image)?;
    let dec_cache = spec.decoder.forward_cached(dec_params, enc_cache.output())?;
    let s_hat = dec_cache.output();

    let (sem, g_sem) = semantic_loss_and_grad(
        features,
        s_hat,
        &classifier.network,
        &classifier.params,
        classifier.penultimate_stage(),
    )?;

    let (recon, out_grad) = match loss_cfg.reconstruction {
        ReconstructionKind::Mse => {
            let recon = loss_mse(image, s_hat)?;
            let gm = mse_grad(image, s_hat);
            let g = Tensor::from_fn(s_hat.shape().to_vec(), |i| {
                gamma * g_sem.data()[i] + (1.0 - gamma) * gm.data()[i]
            });
            (recon, OutputGrad::PostActivation(g))
        }
        ReconstructionKind::Bce => {
            // The final layer is a sigmoid; fusing it with BCE gives the
            // pre-activation gradient (s_hat - s) / N, which stays finite
            // even where the sigmoid saturates. The semantic term still
            // passes through the sigmoid derivative.
            let recon = loss_bce(image, s_hat)?;
            let n = s_hat.len() as f32;
            let g = Tensor::from_fn(s_hat.shape().to_vec(), |i| {
                let y = s_hat.data()[i];
                (1.0 - gamma) * (y - image.data()[i]) / n
                    + gamma * g_sem.data()[i] * y * (1.0 - y)
            });
            (recon, OutputGrad::PreActivation(g))
        }
    };

    let last_dec = spec.decoder.stages().len() - 1;
    let (grad_code, dec_grads) =
        spec.decoder.backward(dec_params, &dec_cache, out_grad, last_dec, true)?;
    let last_enc = spec.encoder.stages().len() - 1;
    let (_, enc_grads) = spec.encoder.backward(
        enc_params,
        &enc_cache,
        OutputGrad::PostActivation(grad_code),
        last_enc,
        true,
    )?;

    Ok(SampleGrads {
        recon: recon as f64,
        sem: sem as f64,
        encoder: enc_grads.unwrap(),
        decoder: dec_grads.unwrap(),
    })
}

/// Precomputes the frozen classifier's penultimate features per image.
fn precompute_features(
    classifier: &Classifier,
    data: &Dataset,
) -> Result<Vec<Tensor<f32>>, TrainError> {
    (0..data.len())
        .map(|i| Ok(classifier.penultimate_features(&data.image(i))?))
        .collect()
}

/// Trains the autoencoder for `z_dims` against a frozen classifier.
///
/// Early-stops when the combined validation loss has not improved for
/// `early_stop_patience` epochs; the returned parameters are the best
/// epoch's snapshot. Divergence (non-finite loss) aborts with the epoch.
pub fn train_autoencoder(
    train: &Dataset,
    val: &Dataset,
    z_dims: usize,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    classifier: &Classifier,
) -> Result<TrainedAutoencoder, TrainError> {
    loss_cfg.validate()?;
    if !classifier.trained {
        return Err(TrainError::Model(ModelError::UntrainedClassifier));
    }
    let (mut enc_params, mut dec_params, spec) =
        build_autoencoder(train.name, z_dims, train_cfg.seed)?;
    let train_features = precompute_features(classifier, train)?;
    let val_features = precompute_features(classifier, val)?;

    let mut enc_state = AdamState::new(&enc_params, train_cfg.lr);
    let mut dec_state = AdamState::new(&dec_params, train_cfg.lr);
    let batch_cfg = BatchConfig {
        batch_size: train_cfg.batch_size.min(train.len()),
        seed: train_cfg.seed,
        drop_last: false,
    };

    let gamma = loss_cfg.gamma;
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, ParamSet<f32>, ParamSet<f32>)> = None;
    let mut since_improve = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=train_cfg.max_epochs {
        let mut train_recon = 0.0;
        let mut train_sem = 0.0;
        for batch in epoch_batches(train.len(), &batch_cfg, epoch) {
            let mut enc_acc = enc_params.zeros_like();
            let mut dec_acc = dec_params.zeros_like();
            for &i in &batch {
                let sample = autoencoder_sample_pass(
                    &spec,
                    &enc_params,
                    &dec_params,
                    classifier,
                    &train_features[i],
                    &train.image(i),
                    loss_cfg,
                )?;
                enc_acc.add_assign(&sample.encoder);
                dec_acc.add_assign(&sample.decoder);
                train_recon += sample.recon;
                train_sem += sample.sem;
            }
            let scale = 1.0 / batch.len() as f32;
            enc_acc.scale(scale);
            dec_acc.scale(scale);
            adam_step(&mut enc_params, &enc_acc, &mut enc_state)?;
            adam_step(&mut dec_params, &dec_acc, &mut dec_state)?;
        }
        train_recon /= train.len() as f64;
        train_sem /= train.len() as f64;

        let mut val_recon = 0.0;
        let mut val_sem = 0.0;
        for i in 0..val.len() {
            let image = val.image(i);
            let code = spec.encoder.forward(&enc_params, &image)?;
            let s_hat = spec.decoder.forward(&dec_params, &code)?;
            val_recon += match loss_cfg.reconstruction {
                ReconstructionKind::Mse => loss_mse(&image, &s_hat)? as f64,
                ReconstructionKind::Bce => loss_bce(&image, &s_hat)? as f64,
            };
            let fh = classifier
                .network
                .forward_cached(&classifier.params, &s_hat)?;
            val_sem += loss_mse(&val_features[i], fh.stage_output(classifier.penultimate_stage()))?
                as f64;
        }
        val_recon /= val.len() as f64;
        val_sem /= val.len() as f64;

        let stats = EpochStats {
            epoch,
            train_recon,
            train_sem,
            val_recon,
            val_sem,
        };
        if !(stats.train_recon.is_finite()
            && stats.train_sem.is_finite()
            && stats.val_recon.is_finite()
            && stats.val_sem.is_finite())
        {
            return Err(TrainError::Diverged { epoch });
        }
        log.epochs.push(stats);

        let val_combined = gamma * val_sem + (1.0 - gamma) * val_recon;
        let improved = best.as_ref().map_or(true, |(b, _, _, _)| val_combined < *b);
        if improved {
            best = Some((val_combined, epoch, enc_params.clone(), dec_params.clone()));
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve >= train_cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (_, best_epoch, enc_best, dec_best) = best.expect("at least one epoch ran");
    Ok(TrainedAutoencoder {
        spec,
        encoder_params: enc_best,
        decoder_params: dec_best,
        log,
        best_epoch,
        stopped_early,
    })
}

/// Fraction of `data` (up to `limit` images) the classifier labels correctly.
pub fn evaluate_accuracy(
    classifier: &Classifier,
    data: &Dataset,
    limit: Option<usize>,
) -> Result<f64, TrainError> {
    let n = limit.unwrap_or(data.len()).min(data.len());
    assert!(n > 0, "empty evaluation set");
    let mut correct = 0usize;
    for i in 0..n {
        if classifier.classify(&data.image(i))? == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Trains the classifier with cross-entropy; returns it frozen together
/// with its best validation accuracy.
pub fn train_classifier(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Classifier, f64), TrainError> {
    let mut classifier = Classifier::build(train.name, cfg.seed);
    let mut state = AdamState::new(&classifier.params, cfg.lr);
    let batch_cfg = BatchConfig {
        batch_size: cfg.batch_size.min(train.len()),
        seed: cfg.seed,
        drop_last: false,
    };
    let last = classifier.network.stages().len() - 1;

    let mut best: Option<(f64, ParamSet<f32>)> = None;
    let mut since_improve = 0usize;
    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0f64;
        for batch in epoch_batches(train.len(), &batch_cfg, epoch) {
            let mut acc = classifier.params.zeros_like();
            for &i in &batch {
                let image = train.image(i);
                let cache = classifier.network.forward_cached(&classifier.params, &image)?;
                let loss = cross_entropy(cache.output(), train.label(i));
                epoch_loss += loss as f64;
                let grad = cross_entropy_grad(cache.output(), train.label(i));
                let (_, grads) = classifier.network.backward(
                    &classifier.params,
                    &cache,
                    OutputGrad::PostActivation(grad),
                    last,
                    true,
                )?;
                acc.add_assign(&grads.unwrap());
            }
            acc.scale(1.0 / batch.len() as f32);
            adam_step(&mut classifier.params, &acc, &mut state)?;
        }
        if !epoch_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }

        classifier.trained = true; // enables classify for evaluation
        let val_acc = evaluate_accuracy(&classifier, val, None)?;
        let improved = best.as_ref().map_or(true, |(b, _)| val_acc > *b);
        if improved {
            best = Some((val_acc, classifier.params.clone()));
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve >= cfg.early_stop_patience {
                break;
            }
        }
    }

    let (best_acc, best_params) = best.expect("at least one epoch ran");
    classifier.params = best_params;
    classifier.trained = true;
    Ok((classifier, best_acc))
}
