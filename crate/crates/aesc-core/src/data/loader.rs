//! Binary readers for the published MNIST IDX and CIFAR-10 formats.

use std::fs;
use std::path::Path;

use crate::data::{DataError, Dataset, DatasetName, Split};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3072;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Parses one IDX images file (big-endian header: magic, count, rows, cols).
fn read_idx_images(path: &Path) -> Result<(Vec<u8>, usize), DataError> {
    let bytes = read_file(path)?;
    let name = path.display().to_string();
    if bytes.len() < 16 {
        return Err(DataError::Truncated {
            path: name,
            expected: 16,
            got: bytes.len(),
        });
    }
    let magic = be_u32(&bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            path: name,
            got: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    if rows != 28 || cols != 28 {
        return Err(DataError::CountMismatch {
            path: name,
            detail: format!("unexpected image size {rows}x{cols}"),
        });
    }
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            path: name,
            expected,
            got: bytes.len(),
        });
    }
    Ok((bytes[16..].to_vec(), count))
}

fn read_idx_labels(path: &Path, expected_count: usize) -> Result<Vec<u8>, DataError> {
    let bytes = read_file(path)?;
    let name = path.display().to_string();
    if bytes.len() < 8 {
        return Err(DataError::Truncated {
            path: name,
            expected: 8,
            got: bytes.len(),
        });
    }
    let magic = be_u32(&bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            path: name,
            got: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let count = be_u32(&bytes, 4) as usize;
    if count != expected_count {
        return Err(DataError::CountMismatch {
            path: name,
            detail: format!("{count} labels for {expected_count} images"),
        });
    }
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            path: name,
            expected,
            got: bytes.len(),
        });
    }
    Ok(bytes[8..].to_vec())
}

/// Loads MNIST train and test splits from `dir` (the four canonical IDX
/// files, uncompressed).
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let (train_px, n_train) = read_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let train_labels = read_idx_labels(&dir.join("train-labels-idx1-ubyte"), n_train)?;
    let (test_px, n_test) = read_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
    let test_labels = read_idx_labels(&dir.join("t10k-labels-idx1-ubyte"), n_test)?;
    Ok((
        Dataset::from_bytes(DatasetName::Mnist, Split::Train, &train_px, train_labels),
        Dataset::from_bytes(DatasetName::Mnist, Split::Test, &test_px, test_labels),
    ))
}

/// Parses one CIFAR-10 batch file: records of 1 label byte + 3072 planar
/// R,G,B pixel bytes.
fn read_cifar_batch(path: &Path, pixels: &mut Vec<u8>, labels: &mut Vec<u8>) -> Result<(), DataError> {
    let bytes = read_file(path)?;
    let name = path.display().to_string();
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(DataError::Truncated {
            path: name,
            expected: (bytes.len() / CIFAR_RECORD + 1) * CIFAR_RECORD,
            got: bytes.len(),
        });
    }
    for record in bytes.chunks_exact(CIFAR_RECORD) {
        let label = record[0];
        if label > 9 {
            return Err(DataError::CountMismatch {
                path: name,
                detail: format!("label byte {label} out of range"),
            });
        }
        labels.push(label);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok(())
}

/// Loads CIFAR-10 train (`data_batch_1..5.bin`) and test (`test_batch.bin`).
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let mut train_px = Vec::new();
    let mut train_labels = Vec::new();
    for i in 1..=5 {
        read_cifar_batch(&dir.join(format!("data_batch_{i}.bin")), &mut train_px, &mut train_labels)?;
    }
    let mut test_px = Vec::new();
    let mut test_labels = Vec::new();
    read_cifar_batch(&dir.join("test_batch.bin"), &mut test_px, &mut test_labels)?;
    Ok((
        Dataset::from_bytes(DatasetName::Cifar10, Split::Train, &train_px, train_labels),
        Dataset::from_bytes(DatasetName::Cifar10, Split::Test, &test_px, test_labels),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, count: u32) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&vec![7u8; count as usize * 784]).unwrap();
    }

    fn write_idx_labels(path: &Path, count: u32) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&(0..count).map(|i| (i % 10) as u8).collect::<Vec<_>>())
            .unwrap();
    }

    #[test]
    fn mnist_roundtrip_through_idx() {
        let dir = tempfile::tempdir().unwrap();
        write_idx_images(&dir.path().join("train-images-idx3-ubyte"), 30);
        write_idx_labels(&dir.path().join("train-labels-idx1-ubyte"), 30);
        write_idx_images(&dir.path().join("t10k-images-idx3-ubyte"), 10);
        write_idx_labels(&dir.path().join("t10k-labels-idx1-ubyte"), 10);
        let (train, test) = load_mnist(dir.path()).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(test.len(), 10);
        assert_eq!(train.image(0).shape(), &[1, 28, 28]);
        assert_eq!(train.image(0).data()[0], 7.0 / 255.0);
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_mnist(dir.path()).unwrap_err();
        assert!(err.to_string().contains("train-images-idx3-ubyte"));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train-images-idx3-ubyte");
        fs::write(&path, [0u8; 32]).unwrap();
        let err = load_mnist(dir.path()).unwrap_err();
        assert!(matches!(err, DataError::BadMagic { .. }));
    }

    #[test]
    fn truncated_images_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train-images-idx3-ubyte");
        write_idx_images(&path, 30);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let err = load_mnist(dir.path()).unwrap_err();
        assert!(matches!(err, DataError::Truncated { .. }));
    }

    #[test]
    fn label_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_idx_images(&dir.path().join("train-images-idx3-ubyte"), 30);
        write_idx_labels(&dir.path().join("train-labels-idx1-ubyte"), 29);
        let err = load_mnist(dir.path()).unwrap_err();
        assert!(matches!(err, DataError::CountMismatch { .. }));
    }

    #[test]
    fn cifar_batches_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        for i in 1..=5 {
            let mut rec = Vec::new();
            for j in 0..4u8 {
                rec.push((i + j as usize) as u8 % 10);
                rec.extend_from_slice(&[i as u8; 3072]);
            }
            fs::write(dir.path().join(format!("data_batch_{i}.bin")), &rec).unwrap();
        }
        let mut rec = Vec::new();
        rec.push(3u8);
        rec.extend_from_slice(&[9u8; 3072]);
        fs::write(dir.path().join("test_batch.bin"), &rec).unwrap();

        let (train, test) = load_cifar10(dir.path()).unwrap();
        assert_eq!(train.len(), 20);
        assert_eq!(test.len(), 1);
        assert_eq!(test.image(0).shape(), &[3, 32, 32]);
        assert_eq!(test.label(0), 3);
    }

    #[test]
    fn cifar_partial_record_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for i in 1..=5 {
            fs::write(dir.path().join(format!("data_batch_{i}.bin")), vec![0u8; 3073]).unwrap();
        }
        fs::write(dir.path().join("test_batch.bin"), vec![0u8; 3072]).unwrap();
        let err = load_cifar10(dir.path()).unwrap_err();
        assert!(err.to_string().contains("test_batch.bin"));
    }
}
