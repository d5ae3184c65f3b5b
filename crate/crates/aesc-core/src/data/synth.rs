//! Synthetic stand-in corpora written in the real dataset binary formats.
//!
//! The generator renders class-distinct images (stroke glyphs for the
//! MNIST-format files, colored texture patterns for the CIFAR-format files)
//! with per-image geometric and photometric jitter, then serializes them as
//! canonical IDX / CIFAR-10 batch files so the production loaders are
//! exercised end to end. Everything derives from one seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::DataError;

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Balanced shuffled labels: `n / 10` of each class.
fn balanced_labels(n: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    labels.shuffle(rng);
    labels
}

fn image_rng(seed: u64, split: u64, index: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (split << 56) ^ index as u64,
    )
}

// ---------------------------------------------------------------------------
// Digit glyphs (28x28 grayscale)
// ---------------------------------------------------------------------------

type Pt = (f32, f32);

fn arc(c: Pt, rx: f32, ry: f32, deg0: f32, deg1: f32, n: usize) -> Vec<Pt> {
    (0..=n)
        .map(|i| {
            let t = (deg0 + (deg1 - deg0) * i as f32 / n as f32).to_radians();
            (c.0 + rx * t.cos(), c.1 + ry * t.sin())
        })
        .collect()
}

/// Stroke polylines per digit class, in unit coordinates (y down).
fn digit_strokes(class: u8) -> Vec<Vec<Pt>> {
    match class {
        0 => vec![arc((0.50, 0.52), 0.24, 0.32, 0.0, 360.0, 28)],
        1 => vec![vec![(0.36, 0.30), (0.52, 0.16), (0.52, 0.84)]],
        2 => vec![
            arc((0.50, 0.32), 0.21, 0.17, 150.0, 390.0, 14),
            vec![(0.68, 0.43), (0.30, 0.82), (0.30, 0.84), (0.74, 0.84)],
        ],
        3 => vec![
            arc((0.46, 0.32), 0.21, 0.165, 220.0, 500.0, 16),
            arc((0.46, 0.67), 0.23, 0.18, 220.0, 500.0, 16),
        ],
        4 => vec![
            vec![(0.58, 0.14), (0.28, 0.56), (0.76, 0.56)],
            vec![(0.58, 0.20), (0.58, 0.86)],
        ],
        5 => vec![
            vec![(0.68, 0.16), (0.32, 0.16), (0.32, 0.48)],
            arc((0.47, 0.645), 0.22, 0.185, 230.0, 520.0, 16),
        ],
        6 => vec![
            vec![(0.62, 0.14), (0.48, 0.28), (0.36, 0.48), (0.31, 0.62)],
            arc((0.48, 0.64), 0.21, 0.19, 0.0, 360.0, 24),
        ],
        7 => vec![vec![(0.28, 0.18), (0.74, 0.18), (0.42, 0.85)]],
        8 => vec![
            arc((0.49, 0.32), 0.17, 0.15, 0.0, 360.0, 22),
            arc((0.49, 0.68), 0.20, 0.17, 0.0, 360.0, 22),
        ],
        9 => vec![
            arc((0.50, 0.35), 0.18, 0.16, 0.0, 360.0, 22),
            vec![(0.67, 0.38), (0.62, 0.62), (0.52, 0.85)],
        ],
        _ => unreachable!("classes are 0..10"),
    }
}

/// Renders one 28x28 glyph with random affine jitter, stroke thickness and
/// brightness. Strokes are stamped as soft disks along each polyline.
fn render_digit(class: u8, rng: &mut ChaCha12Rng) -> [u8; 784] {
    const S: usize = 28;
    let angle: f32 = rng.random_range(-0.22..0.22);
    let scale: f32 = rng.random_range(0.85..1.12);
    let shear: f32 = rng.random_range(-0.12..0.12);
    let (dx, dy): (f32, f32) = (rng.random_range(-1.6..1.6), rng.random_range(-1.6..1.6));
    let thickness: f32 = rng.random_range(0.95..1.45);
    let brightness: f32 = rng.random_range(0.78..1.0);

    let (sin, cos) = angle.sin_cos();
    let transform = |p: Pt| -> Pt {
        // unit -> pixel space, jitter around the glyph center
        let (x, y) = ((p.0 - 0.5) * S as f32, (p.1 - 0.5) * S as f32);
        let (x, y) = (x + shear * y, y);
        let (x, y) = (scale * (cos * x - sin * y), scale * (sin * x + cos * y));
        (x + S as f32 / 2.0 + dx, y + S as f32 / 2.0 + dy)
    };

    let mut canvas = [0.0f32; 784];
    for stroke in digit_strokes(class) {
        let pts: Vec<Pt> = stroke.into_iter().map(transform).collect();
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(1e-6);
            let steps = (len / 0.25).ceil() as usize;
            for i in 0..=steps {
                let t = i as f32 / steps as f32;
                let q = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
                stamp(&mut canvas, q, thickness);
            }
        }
    }

    let mut out = [0u8; 784];
    for (dst, &v) in out.iter_mut().zip(canvas.iter()) {
        let noisy = (v * brightness + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
        *dst = (noisy * 255.0).round() as u8;
    }
    out
}

/// Max-blends a soft disk of radius ~`t` at `q` into the canvas.
fn stamp(canvas: &mut [f32; 784], q: Pt, t: f32) {
    const S: isize = 28;
    let r = (t + 1.4).ceil() as isize;
    let (cx, cy) = (q.0.round() as isize, q.1.round() as isize);
    for y in (cy - r).max(0)..=(cy + r).min(S - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(S - 1) {
            let d = ((x as f32 - q.0).powi(2) + (y as f32 - q.1).powi(2)).sqrt();
            // logistic falloff around the stroke radius
            let v = 1.0 / (1.0 + ((d - t) / 0.38).exp());
            let cell = &mut canvas[(y * S + x) as usize];
            if v > *cell {
                *cell = v;
            }
        }
    }
}

/// Writes the four canonical MNIST IDX files filled with synthetic glyphs.
///
/// `train_n` and `test_n` default to the canonical 60000/10000 when 0.
pub fn generate_mnist_like(
    dir: &Path,
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(), DataError> {
    let train_n = if train_n == 0 { 60_000 } else { train_n };
    let test_n = if test_n == 0 { 10_000 } else { test_n };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_idx_pair(dir, "train", train_n, seed, 0)?;
    write_idx_pair(dir, "t10k", test_n, seed, 1)?;
    Ok(())
}

fn write_idx_pair(dir: &Path, prefix: &str, n: usize, seed: u64, split: u64) -> Result<(), DataError> {
    let mut label_rng = ChaCha12Rng::seed_from_u64(seed ^ (split << 32) ^ 0xA5A5);
    let labels = balanced_labels(n, &mut label_rng);

    let img_path = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let mut img = Vec::with_capacity(16 + n * 784);
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&28u32.to_be_bytes());
    img.extend_from_slice(&28u32.to_be_bytes());
    for (i, &label) in labels.iter().enumerate() {
        let mut rng = image_rng(seed, split, i);
        img.extend_from_slice(&render_digit(label, &mut rng));
    }
    fs::write(&img_path, img).map_err(|e| io_err(&img_path, e))?;

    let lbl_path = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    let mut lbl = Vec::with_capacity(8 + n);
    lbl.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    lbl.extend_from_slice(&labels);
    fs::write(&lbl_path, lbl).map_err(|e| io_err(&lbl_path, e))
}

// ---------------------------------------------------------------------------
// Color texture classes (3x32x32)
// ---------------------------------------------------------------------------

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Renders one 3x32x32 image (planar RGB bytes) for a texture class.
fn render_texture(class: u8, rng: &mut ChaCha12Rng) -> Vec<u8> {
    const S: i32 = 32;
    let hue = [0.00f32, 0.60, 0.33, 0.12, 0.80, 0.50, 0.07, 0.45, 0.90, 0.25][class as usize]
        + rng.random_range(-0.05..0.05);
    let brightness: f32 = rng.random_range(0.65..1.0);
    let cx: f32 = 16.0 + rng.random_range(-3.0..3.0);
    let cy: f32 = 16.0 + rng.random_range(-3.0..3.0);
    let size: f32 = rng.random_range(8.0..12.0);
    let phase: f32 = rng.random_range(0.0..6.0);
    let (bg_r, bg_g, bg_b) = hsv_to_rgb(hue + 0.5, 0.35, 0.25 * brightness);

    let mut planes = vec![0u8; 3072];
    for y in 0..S {
        for x in 0..S {
            let (fx, fy) = (x as f32 - cx, y as f32 - cy);
            let r = (fx * fx + fy * fy).sqrt();
            let on = match class {
                0 => r < size,
                1 => {
                    let d = fx.abs().max(fy.abs());
                    d < size && d > size - 3.0
                }
                2 => ((y as f32 + phase) / 5.0) as i32 % 2 == 0,
                3 => ((x as f32 + phase) / 5.0) as i32 % 2 == 0,
                4 => (fx - fy).abs() < 2.5 || (fx + fy).abs() < 2.5,
                5 => fy > -size * 0.8 && fy < size * 0.6 && fx.abs() < (fy + size * 0.8) * 0.6,
                6 => (((x as f32 + phase) / 4.0) as i32 + ((y as f32 + phase) / 4.0) as i32) % 2 == 0,
                7 => ((r + phase) / 4.0) as i32 % 2 == 0,
                8 => (fx + fy).abs() < 4.0,
                _ => {
                    let r2 = ((fx - 6.0).powi(2) + (fy - 5.0).powi(2)).sqrt();
                    let r3 = ((fx + 6.0).powi(2) + (fy + 5.0).powi(2)).sqrt();
                    r2 < 5.5 || r3 < 5.5
                }
            };
            let (mut pr, mut pg, mut pb) = if on {
                hsv_to_rgb(hue, 0.85, brightness)
            } else {
                (bg_r, bg_g, bg_b)
            };
            pr += rng.random_range(-0.04..0.04);
            pg += rng.random_range(-0.04..0.04);
            pb += rng.random_range(-0.04..0.04);
            let idx = (y * S + x) as usize;
            planes[idx] = (pr.clamp(0.0, 1.0) * 255.0).round() as u8;
            planes[1024 + idx] = (pg.clamp(0.0, 1.0) * 255.0).round() as u8;
            planes[2048 + idx] = (pb.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    planes
}

/// Writes `data_batch_1..5.bin` and `test_batch.bin` with synthetic textures.
///
/// `train_n` must be divisible by 5; 0 selects the canonical 50000/10000.
pub fn generate_cifar_like(
    dir: &Path,
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(), DataError> {
    let train_n = if train_n == 0 { 50_000 } else { train_n };
    let test_n = if test_n == 0 { 10_000 } else { test_n };
    assert!(train_n % 5 == 0, "train count must divide into 5 batch files");
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut label_rng = ChaCha12Rng::seed_from_u64(seed ^ 0xC1FA_0001);
    let train_labels = balanced_labels(train_n, &mut label_rng);
    let per_batch = train_n / 5;
    for b in 0..5 {
        let path = dir.join(format!("data_batch_{}.bin", b + 1));
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut buf = Vec::with_capacity(per_batch * 3073);
        for i in 0..per_batch {
            let global = b * per_batch + i;
            let label = train_labels[global];
            let mut rng = image_rng(seed, 2, global);
            buf.push(label);
            buf.extend_from_slice(&render_texture(label, &mut rng));
        }
        f.write_all(&buf).map_err(|e| io_err(&path, e))?;
    }

    let mut label_rng = ChaCha12Rng::seed_from_u64(seed ^ 0xC1FA_0002);
    let test_labels = balanced_labels(test_n, &mut label_rng);
    let path = dir.join("test_batch.bin");
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut buf = Vec::with_capacity(test_n * 3073);
    for (i, &label) in test_labels.iter().enumerate() {
        let mut rng = image_rng(seed, 3, i);
        buf.push(label);
        buf.extend_from_slice(&render_texture(label, &mut rng));
    }
    f.write_all(&buf).map_err(|e| io_err(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_cifar10, load_mnist};

    #[test]
    fn mnist_like_roundtrips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        generate_mnist_like(dir.path(), 200, 50, 11).unwrap();
        let (train, test) = load_mnist(dir.path()).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(test.len(), 50);
        assert!(train.class_histogram().iter().all(|&c| c > 0));
        // glyphs have ink
        let img = train.image(0);
        assert!(img.data().iter().copied().fold(0.0f32, f32::max) > 0.5);
    }

    #[test]
    fn generation_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_mnist_like(d1.path(), 50, 10, 3).unwrap();
        generate_mnist_like(d2.path(), 50, 10, 3).unwrap();
        let a = std::fs::read(d1.path().join("train-images-idx3-ubyte")).unwrap();
        let b = std::fs::read(d2.path().join("train-images-idx3-ubyte")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cifar_like_roundtrips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        generate_cifar_like(dir.path(), 100, 20, 5).unwrap();
        let (train, test) = load_cifar10(dir.path()).unwrap();
        assert_eq!(train.len(), 100);
        assert_eq!(test.len(), 20);
        assert!(train.class_histogram().iter().all(|&c| c > 0));
    }
}
