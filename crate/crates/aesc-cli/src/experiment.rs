//! Sweep engine: drives trained models across the SNR x compression grid
//! for every scheme, collects metric rows and sample reconstructions.

use std::collections::BTreeMap;
use std::path::Path;

use aesc_core::data::{Dataset, DatasetName};
use aesc_core::metrics::{psnr, recognition_rate_ratio, semantic_service, ssim, StMapping};
use aesc_core::models::{AutoencoderSpec, Classifier};
use aesc_core::nn::ParamSet;
use aesc_core::phy::{transmit, ChannelFamily, LdpcCode};
use aesc_core::tensor::Tensor;
use aesc_core::training::compression_ratio;

use crate::baselines::{direct_transmission, external_codec_transmission, CodecCommand};
use crate::config::ExperimentConfig;
use crate::HarnessError;

/// One line of results.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub z_dims: usize,
    pub compression_ratio: f64,
    pub channel: String,
    pub snr_db: f64,
    pub scheme: String,
    pub psnr: f64,
    pub ssim: f64,
    pub rr_ratio: f64,
    pub ss_index: f64,
    pub outage_rate: f64,
    pub ber_pre: f64,
    pub ber_post: f64,
    pub bits_per_image: f64,
}

pub const CSV_HEADER: &str = "dataset,z_dims,compression_ratio,channel,snr_db,scheme,psnr,ssim,rr_ratio,ss_index,outage_rate,ber_pre,ber_post,bits_per_image";

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.z_dims,
            fmt(self.compression_ratio),
            self.channel,
            fmt(self.snr_db),
            self.scheme,
            fmt(self.psnr),
            fmt(self.ssim),
            fmt(self.rr_ratio),
            fmt(self.ss_index),
            fmt(self.outage_rate),
            fmt(self.ber_pre),
            fmt(self.ber_post),
            fmt(self.bits_per_image),
        )
    }
}

/// A dumped image for the report mosaics, in planar [C,H,W] f32.
#[derive(Debug, Clone)]
pub struct SampleImage {
    pub z_dims: usize,
    pub snr_db: f64,
    pub scheme: String,
    pub index: usize,
    pub pixels: Tensor<f32>,
}

/// Everything one `run` produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub samples: Vec<SampleImage>,
}

impl ExperimentOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }
}

/// Trained models needed for one latent width.
pub struct ModelSet {
    pub spec: AutoencoderSpec,
    pub encoder_params: ParamSet<f32>,
    pub decoder_params: ParamSet<f32>,
}

/// Splitmix-style seed derivation: decorrelates grid/frame indices while
/// staying independent of the SNR point (common random numbers across SNR).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-point accumulation shared by all schemes.
pub(crate) struct PointOutcome {
    pub(crate) reconstructions: Vec<Option<Tensor<f32>>>,
    pub(crate) outages: usize,
    pub(crate) ber_pre_sum: f64,
    pub(crate) ber_post_sum: f64,
    pub(crate) bits_sum: f64,
    pub(crate) frames: usize,
}

fn finish_row(
    cfg: &ExperimentConfig,
    images: &[Tensor<f32>],
    labels: &[u8],
    classifier: &Classifier,
    outcome: PointOutcome,
    z: usize,
    cr: f64,
    snr_db: f64,
    scheme: &str,
) -> Result<ResultRow, HarnessError> {
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    let mut delivered = 0usize;
    for (s, s_hat) in images.iter().zip(&outcome.reconstructions) {
        if let Some(s_hat) = s_hat {
            psnr_sum += psnr(s, s_hat)?;
            ssim_sum += ssim(s, s_hat)?;
            delivered += 1;
        }
    }
    let rr = recognition_rate_ratio(images, &outcome.reconstructions, labels, classifier)?;
    // canonical instantiation: the task score is classifier accuracy, so the
    // identity-mapped service index coincides with the recognition ratio
    let mut orig_correct = 0usize;
    let mut recon_correct = 0usize;
    for ((s, s_hat), &label) in images.iter().zip(&outcome.reconstructions).zip(labels) {
        if classifier.classify(s)? == label {
            orig_correct += 1;
        }
        if let Some(s_hat) = s_hat {
            if classifier.classify(s_hat)? == label {
                recon_correct += 1;
            }
        }
    }
    let n = images.len() as f64;
    let ss = semantic_service(
        orig_correct as f64 / n,
        recon_correct as f64 / n,
        StMapping::Identity,
    )?;
    Ok(ResultRow {
        dataset: cfg.dataset.label().to_string(),
        z_dims: z,
        compression_ratio: cr,
        channel: cfg.channel_family.label().to_string(),
        snr_db,
        scheme: scheme.to_string(),
        psnr: if delivered > 0 {
            psnr_sum / delivered as f64
        } else {
            f64::NAN
        },
        ssim: if delivered > 0 {
            ssim_sum / delivered as f64
        } else {
            f64::NAN
        },
        rr_ratio: rr,
        ss_index: ss,
        outage_rate: outcome.outages as f64 / outcome.frames as f64,
        ber_pre: outcome.ber_pre_sum / outcome.frames as f64,
        ber_post: outcome.ber_post_sum / outcome.frames as f64,
        bits_per_image: outcome.bits_sum / outcome.frames as f64,
    })
}

/// Runs the semantic scheme at one grid point.
#[allow(clippy::too_many_arguments)]
fn run_aesc_point(
    cfg: &ExperimentConfig,
    models: &ModelSet,
    images: &[Tensor<f32>],
    ldpc: &LdpcCode,
    snr_db: f64,
    z_index: usize,
) -> Result<PointOutcome, HarnessError> {
    let channel = cfg.channel_at(snr_db);
    let param_bits = cfg.param_bits();
    let mut reconstructions = Vec::with_capacity(images.len());
    let mut outages = 0usize;
    let mut ber_pre_sum = 0.0;
    let mut ber_post_sum = 0.0;
    let mut bits_sum = 0.0;
    // in amortized mode the decoder travels only in the first frame; the
    // receiver keeps the delivered parameters for the rest of the session
    let mut session_params: Option<ParamSet<f32>> = None;
    for (i, image) in images.iter().enumerate() {
        let code = models.spec.encode(&models.encoder_params, image)?;
        let send_params = !cfg.amortize_decoder || i == 0;
        let frame_seed = derive_seed(cfg.seed, z_index as u64, i as u64);
        let (received, report) = transmit(
            &code,
            send_params.then_some(&models.decoder_params),
            param_bits,
            &channel,
            ldpc,
            frame_seed,
        )?;
        ber_pre_sum += report.transport.pre_ber;
        ber_post_sum += report.transport.post_ber;
        bits_sum += (report.frame_bytes * 8) as f64;
        match received {
            Some(frame) => {
                if let Some(params) = frame.decoder_params {
                    session_params = Some(params);
                }
                match &session_params {
                    Some(params) => {
                        let s_hat = models.spec.decode(params, &frame.code)?;
                        reconstructions.push(Some(s_hat));
                    }
                    None => {
                        // code arrived but no decoder is available yet
                        outages += 1;
                        reconstructions.push(None);
                    }
                }
            }
            None => {
                outages += 1;
                reconstructions.push(None);
            }
        }
    }
    Ok(PointOutcome {
        reconstructions,
        outages,
        ber_pre_sum,
        ber_post_sum,
        bits_sum,
        frames: images.len(),
    })
}

/// Runs the full experiment grid. Rows come out in deterministic order:
/// z_dims (outer), snr (middle), scheme (inner).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    test_data: &Dataset,
    models: &BTreeMap<usize, ModelSet>,
    classifier: &Classifier,
) -> Result<ExperimentOutput, HarnessError> {
    let ldpc = LdpcCode::standard(derive_seed(cfg.seed, 0x1D9C, 0))?;
    let n = cfg.frames_per_point.min(test_data.len());
    let images: Vec<Tensor<f32>> = (0..n).map(|i| test_data.image(i)).collect();
    let labels: Vec<u8> = (0..n).map(|i| test_data.label(i)).collect();

    let codec = if cfg.baselines.codec_cmd.is_empty() {
        None
    } else {
        Some(CodecCommand::new(
            cfg.baselines.codec_cmd.clone(),
            cfg.baselines.codec_quality,
        ))
    };

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for (zi, (&z, models_z)) in models.iter().enumerate() {
        let cr = compression_ratio(cfg.dataset, z);
        for &snr_db in &cfg.snr_db {
            // semantic scheme
            let outcome = run_aesc_point(cfg, models_z, &images, &ldpc, snr_db, zi)?;
            dump_samples(&mut samples, cfg, &images, &outcome.reconstructions, z, snr_db, "aesc_i");
            rows.push(finish_row(
                cfg, &images, &labels, classifier, outcome, z, cr, snr_db, "aesc_i",
            )?);

            // direct transmission: raw 8-bit pixels through the same channel
            if cfg.baselines.direct {
                let outcome = direct_transmission(cfg, &images, &ldpc, snr_db)?;
                dump_samples(&mut samples, cfg, &images, &outcome.reconstructions, z, snr_db, "direct");
                rows.push(finish_row(
                    cfg, &images, &labels, classifier, outcome, z, 1.0, snr_db, "direct",
                )?);
            }

            // external codec baseline
            if let Some(codec) = &codec {
                match external_codec_transmission(cfg, codec, &images, &ldpc, snr_db) {
                    Ok((outcome, measured_cr)) => {
                        dump_samples(
                            &mut samples,
                            cfg,
                            &images,
                            &outcome.reconstructions,
                            z,
                            snr_db,
                            "external_codec",
                        );
                        rows.push(finish_row(
                            cfg,
                            &images,
                            &labels,
                            classifier,
                            outcome,
                            z,
                            measured_cr,
                            snr_db,
                            "external_codec",
                        )?);
                    }
                    Err(HarnessError::CodecUnavailable(cmd)) => {
                        eprintln!("warning: external codec '{cmd}' unavailable, scheme skipped");
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(ExperimentOutput { rows, samples })
}

fn dump_samples(
    samples: &mut Vec<SampleImage>,
    cfg: &ExperimentConfig,
    originals: &[Tensor<f32>],
    reconstructions: &[Option<Tensor<f32>>],
    z: usize,
    snr_db: f64,
    scheme: &str,
) {
    for i in 0..cfg.sample_images.min(originals.len()) {
        let pixels = match &reconstructions[i] {
            Some(t) => t.clone(),
            // outage placeholder: mid-gray
            None => Tensor::filled(originals[i].shape().to_vec(), 0.5),
        };
        samples.push(SampleImage {
            z_dims: z,
            snr_db,
            scheme: scheme.to_string(),
            index: i,
            pixels,
        });
    }
}

/// Loads a trained model set for one width from the model directory.
pub fn load_model_set(
    dir: &Path,
    dataset: DatasetName,
    z: usize,
) -> Result<ModelSet, HarnessError> {
    use aesc_core::models::{load_model_file, ModelKind};
    let enc_path = dir.join(format!("{}_z{z}_encoder.aesm", dataset.label()));
    let dec_path = dir.join(format!("{}_z{z}_decoder.aesm", dataset.label()));
    let enc = load_model_file(&enc_path)?;
    let dec = load_model_file(&dec_path)?;
    if enc.kind != ModelKind::Encoder || dec.kind != ModelKind::Decoder || enc.z_dims != z {
        return Err(HarnessError::Config(format!(
            "model files in {} do not match dataset {} z_dims {z}",
            dir.display(),
            dataset.label()
        )));
    }
    let spec = AutoencoderSpec::build(dataset, z)?;
    Ok(ModelSet {
        spec,
        encoder_params: enc.params,
        decoder_params: dec.params,
    })
}

/// Loads the frozen classifier for a dataset.
pub fn load_classifier(dir: &Path, dataset: DatasetName) -> Result<Classifier, HarnessError> {
    use aesc_core::models::load_model_file;
    let path = dir.join(format!("{}_classifier.aesm", dataset.label()));
    let file = load_model_file(&path)?;
    let mut classifier = Classifier::build(dataset, 0);
    classifier.params = file.params;
    classifier.trained = true;
    Ok(classifier)
}
