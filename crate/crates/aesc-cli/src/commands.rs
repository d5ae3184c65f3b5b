//! Subcommand implementations shared by the binary and the test suites.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aesc_core::data::{load_cifar10, load_mnist, synth, Dataset, DatasetName};
use aesc_core::models::{audit_autoencoder, save_model_file, AutoencoderSpec, Classifier, ModelKind};
use aesc_core::training::{
    evaluate_accuracy, train_autoencoder, train_classifier, LossConfig, TrainConfig,
    TrainedAutoencoder,
};

use crate::config::{ExperimentConfig, TrainSection};
use crate::experiment::{load_classifier, load_model_set, run_experiment, ModelSet};
use crate::report::{parse_results, write_mosaic, write_pnm, write_report};
use crate::HarnessError;

/// Loads train and test splits for a dataset from `data_dir`.
pub fn load_dataset(dataset: DatasetName, data_dir: &Path) -> Result<(Dataset, Dataset), HarnessError> {
    Ok(match dataset {
        DatasetName::Mnist => load_mnist(data_dir)?,
        DatasetName::Cifar10 => load_cifar10(data_dir)?,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Builds loss/train configs from dataset defaults plus config overrides.
pub fn effective_configs(
    dataset: DatasetName,
    section: &TrainSection,
    seed: u64,
) -> (LossConfig, TrainConfig) {
    let mut loss = LossConfig::defaults_for(dataset);
    if let Some(g) = section.gamma {
        loss.gamma = g;
    }
    let mut train = TrainConfig::defaults_for(dataset);
    train.seed = seed;
    if let Some(lr) = section.lr {
        train.lr = lr;
    }
    if let Some(b) = section.batch_size {
        train.batch_size = b;
    }
    if let Some(e) = section.max_epochs {
        train.max_epochs = e;
    }
    if let Some(p) = section.patience {
        train.early_stop_patience = p;
    }
    (loss, train)
}

/// Trains (or reuses) the classifier, saving it under the model directory.
pub fn ensure_classifier(
    dataset: DatasetName,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    model_dir: &Path,
    section: &TrainSection,
    seed: u64,
) -> Result<Classifier, HarnessError> {
    let path = model_dir.join(format!("{}_classifier.aesm", dataset.label()));
    if path.exists() {
        eprintln!("classifier: reusing {}", path.display());
        return load_classifier(model_dir, dataset);
    }
    let (_, mut cfg) = effective_configs(dataset, section, seed);
    cfg.max_epochs = section.classifier_epochs.unwrap_or(8);
    cfg.early_stop_patience = 4;
    eprintln!(
        "classifier: training on {} images ({} epochs max)",
        train.len(),
        cfg.max_epochs
    );
    let (classifier, val_acc) = train_classifier(train, val, &cfg)?;
    let test_acc = evaluate_accuracy(&classifier, test, None)?;
    let crc = save_model_file(
        &path,
        ModelKind::Classifier,
        aesc_core::models::ModelId { dataset, z_dims: 0 },
        classifier.penultimate_dim as u32,
        &classifier.params,
    )?;
    eprintln!(
        "classifier: val accuracy {val_acc:.4}, test accuracy {test_acc:.4}, checksum {crc:#010x} -> {}",
        path.display()
    );
    Ok(classifier)
}

/// `train`: fit the autoencoder(s) and classifier, write model files.
#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    dataset: DatasetName,
    z_dims: &[usize],
    data_dir: &Path,
    model_dir: &Path,
    section: &TrainSection,
    seed: u64,
) -> Result<(), HarnessError> {
    // validate every width before any expensive work
    for &z in z_dims {
        AutoencoderSpec::build(dataset, z).map_err(HarnessError::Model)?;
    }
    let (full_train, test) = load_dataset(dataset, data_dir)?;
    let (mut train, mut val) = full_train.split_train_val(0.1, seed);
    if section.max_train_images > 0 {
        train = train.take(section.max_train_images);
    }
    if section.max_val_images > 0 {
        val = val.take(section.max_val_images);
    }
    fs::create_dir_all(model_dir).map_err(io_err(model_dir))?;

    let classifier = ensure_classifier(dataset, &train, &val, &test, model_dir, section, seed)?;

    for &z in z_dims {
        let (loss_cfg, train_cfg) = effective_configs(dataset, section, seed);
        eprintln!(
            "autoencoder z={z}: training on {} images (batch {}, lr {}, gamma {})",
            train.len(),
            train_cfg.batch_size,
            train_cfg.lr,
            loss_cfg.gamma
        );
        let result = train_autoencoder(&train, &val, z, &loss_cfg, &train_cfg, &classifier)?;
        save_trained(dataset, z, &result, model_dir)?;
    }
    Ok(())
}

/// Persists one trained autoencoder pair plus its training log.
pub fn save_trained(
    dataset: DatasetName,
    z: usize,
    result: &TrainedAutoencoder,
    model_dir: &Path,
) -> Result<(), HarnessError> {
    let id = result.spec.model_id();
    let enc_path = model_dir.join(format!("{}_z{z}_encoder.aesm", dataset.label()));
    let dec_path = model_dir.join(format!("{}_z{z}_decoder.aesm", dataset.label()));
    let enc_crc = save_model_file(&enc_path, ModelKind::Encoder, id, 0, &result.encoder_params)?;
    let dec_crc = save_model_file(&dec_path, ModelKind::Decoder, id, 0, &result.decoder_params)?;
    let log_path = model_dir.join(format!("{}_z{z}_trainlog.csv", dataset.label()));
    fs::write(&log_path, result.log.to_csv()).map_err(io_err(&log_path))?;
    eprintln!(
        "autoencoder z={z}: best epoch {}, {} epochs run, encoder {enc_crc:#010x}, decoder {dec_crc:#010x}",
        result.best_epoch,
        result.log.epochs.len()
    );
    Ok(())
}

/// `run`: execute the experiment grid and write results + samples.
pub fn cmd_run(config: &ExperimentConfig, data_dir: &Path) -> Result<PathBuf, HarnessError> {
    let (_, test) = load_dataset(config.dataset, data_dir)?;
    let classifier = load_classifier(&config.model_dir, config.dataset)?;
    let mut models: BTreeMap<usize, ModelSet> = BTreeMap::new();
    for &z in &config.z_dims {
        models.insert(z, load_model_set(&config.model_dir, config.dataset, z)?);
    }

    let output = run_experiment(config, &test, &models, &classifier)?;

    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let csv_path = config.output_dir.join("results.csv");
    fs::write(&csv_path, output.to_csv()).map_err(io_err(&csv_path))?;

    let samples_dir = config.output_dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;
    let ext = match config.dataset {
        DatasetName::Mnist => "pgm",
        DatasetName::Cifar10 => "ppm",
    };
    for i in 0..config.sample_images.min(config.frames_per_point).min(test.len()) {
        let path = samples_dir.join(format!("original_i{i}.{ext}"));
        write_pnm(&path, &test.image(i))?;
    }
    for s in &output.samples {
        let path = samples_dir.join(format!(
            "{}_z{}_snr{}_i{}.{ext}",
            s.scheme,
            s.z_dims,
            (s.snr_db * 1000.0).round() as i64,
            s.index
        ));
        write_pnm(&path, &s.pixels)?;
    }
    eprintln!(
        "run: {} rows -> {}",
        output.rows.len(),
        csv_path.display()
    );
    Ok(csv_path)
}

/// `report`: charts from results.csv plus mosaics from dumped samples.
pub fn cmd_report(results_path: &Path, out_dir: &Path) -> Result<(), HarnessError> {
    let text = fs::read_to_string(results_path).map_err(io_err(results_path))?;
    let rows = parse_results(&text)?;
    let written = write_report(&rows, out_dir)?;
    eprintln!("report: wrote {} charts to {}", written.len(), out_dir.display());

    // stitch mosaics when the run directory carries sample dumps
    let samples_dir = results_path
        .parent()
        .unwrap_or(Path::new("."))
        .join("samples");
    if samples_dir.is_dir() {
        let mosaics = build_mosaics(&rows, &samples_dir, out_dir)?;
        if mosaics > 0 {
            eprintln!("report: wrote {mosaics} image grids");
        }
    }
    Ok(())
}

fn build_mosaics(
    rows: &[crate::report::CsvRow],
    samples_dir: &Path,
    out_dir: &Path,
) -> Result<usize, HarnessError> {
    use crate::report::read_pnm;
    use std::collections::BTreeSet;

    let mut count = 0usize;
    let datasets: BTreeSet<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    for dataset in datasets {
        let ext = if dataset == "mnist" { "pgm" } else { "ppm" };
        let Some(original) = read_pnm(&samples_dir.join(format!("original_i0.{ext}")))? else {
            continue;
        };
        let z_values: BTreeSet<usize> = rows
            .iter()
            .filter(|r| r.dataset == dataset)
            .map(|r| r.z_dims)
            .collect();
        for z in z_values {
            let mut snrs: Vec<f64> = rows
                .iter()
                .filter(|r| r.dataset == dataset && r.z_dims == z)
                .map(|r| r.snr_db)
                .collect();
            snrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            snrs.dedup();
            let schemes: Vec<&str> = ["aesc_i", "direct", "external_codec"]
                .into_iter()
                .filter(|s| rows.iter().any(|r| r.z_dims == z && r.scheme == *s))
                .collect();
            let mut tiles = Vec::new();
            for scheme in &schemes {
                for &snr in &snrs {
                    let name = format!(
                        "{scheme}_z{z}_snr{}_i0.{ext}",
                        (snr * 1000.0).round() as i64
                    );
                    if let Some(pixels) = read_pnm(&samples_dir.join(&name))? {
                        tiles.push(crate::experiment::SampleImage {
                            z_dims: z,
                            snr_db: snr,
                            scheme: scheme.to_string(),
                            index: 0,
                            pixels,
                        });
                    }
                }
            }
            if tiles.is_empty() {
                continue;
            }
            let refs: Vec<&crate::experiment::SampleImage> = tiles.iter().collect();
            let path = out_dir.join(format!("grid_{dataset}_z{z}.{ext}"));
            write_mosaic(&path, &original, &refs, &snrs, &schemes)?;
            count += 1;
        }
    }
    Ok(count)
}

/// `synth-data`: writes a synthetic corpus in the real binary formats.
pub fn cmd_synth(
    dataset: DatasetName,
    out_dir: &Path,
    train_count: usize,
    test_count: usize,
    seed: u64,
) -> Result<(), HarnessError> {
    match dataset {
        DatasetName::Mnist => synth::generate_mnist_like(out_dir, train_count, test_count, seed)?,
        DatasetName::Cifar10 => synth::generate_cifar_like(out_dir, train_count, test_count, seed)?,
    }
    eprintln!(
        "synth-data: wrote {} corpus to {}",
        dataset.label(),
        out_dir.display()
    );
    Ok(())
}

/// `audit`: print the instantiated architecture tables.
pub fn cmd_audit(dataset: DatasetName, z_dims: &[usize]) -> Result<String, HarnessError> {
    let mut out = String::new();
    for &z in z_dims {
        let spec = AutoencoderSpec::build(dataset, z)?;
        out.push_str(&audit_autoencoder(&spec));
    }
    Ok(out)
}
