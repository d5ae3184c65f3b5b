//! Report generation: self-contained SVG line charts from results.csv and
//! PGM/PPM mosaics of sample reconstructions.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aesc_core::tensor::Tensor;

use crate::experiment::{SampleImage, CSV_HEADER};
use crate::HarnessError;

/// Parsed results.csv row (stringly typed fields kept as written).
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub dataset: String,
    pub z_dims: usize,
    pub compression_ratio: f64,
    pub channel: String,
    pub snr_db: f64,
    pub scheme: String,
    pub metrics: Vec<f64>, // psnr, ssim, rr_ratio, ss_index, outage_rate, ber_pre, ber_post, bits
}

pub const METRIC_NAMES: [&str; 8] = [
    "psnr",
    "ssim",
    "rr_ratio",
    "ss_index",
    "outage_rate",
    "ber_pre",
    "ber_post",
    "bits_per_image",
];

fn parse_value(s: &str) -> f64 {
    match s {
        "inf" => f64::INFINITY,
        "nan" => f64::NAN,
        _ => s.parse().unwrap_or(f64::NAN),
    }
}

/// Parses results.csv; rejects empty or malformed files.
pub fn parse_results(text: &str) -> Result<Vec<CsvRow>, HarnessError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_HEADER {
        return Err(HarnessError::Report(format!(
            "unexpected CSV header: '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(HarnessError::Report(format!(
                "line {}: expected 14 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        rows.push(CsvRow {
            dataset: fields[0].to_string(),
            z_dims: fields[1]
                .parse()
                .map_err(|_| HarnessError::Report(format!("line {}: bad z_dims", i + 2)))?,
            compression_ratio: parse_value(fields[2]),
            channel: fields[3].to_string(),
            snr_db: parse_value(fields[4]),
            scheme: fields[5].to_string(),
            metrics: fields[6..14].iter().map(|f| parse_value(f)).collect(),
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Report("results.csv has no data rows".into()));
    }
    Ok(rows)
}

const SCHEME_COLORS: [(&str, &str); 3] = [
    ("aesc_i", "#c0392b"),
    ("direct", "#2471a3"),
    ("external_codec", "#1e8449"),
];

fn scheme_color(scheme: &str) -> &'static str {
    SCHEME_COLORS
        .iter()
        .find(|(s, _)| *s == scheme)
        .map(|(_, c)| *c)
        .unwrap_or("#7d3c98")
}

/// One polyline per scheme over (x, y) points.
struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

impl Chart {
    fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 440.0;
        const ML: f64 = 70.0;
        const MR: f64 = 30.0;
        const MT: f64 = 44.0;
        const MB: f64 = 56.0;
        let finite: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|(_, pts)| pts.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let (x0, x1) = finite
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
        let (mut y0, mut y1) = finite
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
        if !finite.is_empty() && (y1 - y0).abs() < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| ML + (x - x0) / (x1 - x0).max(1e-12) * (W - ML - MR);
        let sy = |y: f64| H - MB - (y - y0) / (y1 - y0).max(1e-12) * (H - MT - MB);

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            W / 2.0,
            self.title
        ));
        // axes
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            W - MR,
            H - MB
        ));
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB
        ));
        if !finite.is_empty() {
            // ticks
            for i in 0..=5 {
                let xv = x0 + (x1 - x0) * i as f64 / 5.0;
                let yv = y0 + (y1 - y0) * i as f64 / 5.0;
                svg.push_str(&format!(
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
                    sx(xv),
                    H - MB + 18.0,
                    xv
                ));
                svg.push_str(&format!(
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
                    ML - 6.0,
                    sy(yv) + 4.0,
                    yv
                ));
                svg.push_str(&format!(
                    "<line x1=\"{ML}\" y1=\"{0:.1}\" x2=\"{1}\" y2=\"{0:.1}\" stroke=\"#dddddd\"/>\n",
                    sy(yv),
                    W - MR
                ));
            }
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 14.0,
            self.x_label
        ));
        svg.push_str(&format!(
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            self.y_label
        ));
        // series
        for (si, (scheme, pts)) in self.series.iter().enumerate() {
            let color = scheme_color(scheme);
            let path: Vec<String> = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                .collect();
            if path.len() > 1 {
                svg.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                    path.join(" ")
                ));
            }
            for p in &path {
                let (px, py) = p.split_once(',').unwrap();
                svg.push_str(&format!(
                    "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n"
                ));
            }
            // legend
            let ly = MT + 16.0 * si as f64;
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n",
                W - MR - 150.0,
                ly
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{scheme}</text>\n",
                W - MR - 132.0,
                ly + 6.0
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Writes every chart family; returns the file names written.
pub fn write_report(rows: &[CsvRow], out_dir: &Path) -> Result<Vec<String>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    let datasets: BTreeSet<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    for dataset in datasets {
        let dataset_rows: Vec<&CsvRow> = rows.iter().filter(|r| r.dataset == dataset).collect();
        let channels: BTreeSet<&str> =
            dataset_rows.iter().map(|r| r.channel.as_str()).collect();
        for channel in channels {
            let ch_rows: Vec<&&CsvRow> = dataset_rows
                .iter()
                .filter(|r| r.channel == channel)
                .collect();
            let z_values: BTreeSet<usize> = ch_rows.iter().map(|r| r.z_dims).collect();
            let snrs: BTreeSet<i64> = ch_rows
                .iter()
                .map(|r| (r.snr_db * 1000.0).round() as i64)
                .collect();

            // metric vs SNR, per z
            for &z in &z_values {
                for (mi, metric) in METRIC_NAMES.iter().enumerate() {
                    let schemes: BTreeSet<&str> = ch_rows
                        .iter()
                        .filter(|r| r.z_dims == z)
                        .map(|r| r.scheme.as_str())
                        .collect();
                    let series: Vec<(String, Vec<(f64, f64)>)> = schemes
                        .iter()
                        .map(|&s| {
                            let mut pts: Vec<(f64, f64)> = ch_rows
                                .iter()
                                .filter(|r| r.z_dims == z && r.scheme == s)
                                .map(|r| (r.snr_db, r.metrics[mi]))
                                .collect();
                            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                            (s.to_string(), pts)
                        })
                        .collect();
                    let chart = Chart {
                        title: format!("{metric} vs SNR ({dataset}, z={z}, {channel})"),
                        x_label: "SNR (dB)".into(),
                        y_label: (*metric).into(),
                        series,
                    };
                    let name = format!("{dataset}_{channel}_z{z}_{metric}_vs_snr.svg");
                    fs::write(out_dir.join(&name), chart.to_svg()).map_err(|e| {
                        HarnessError::Io {
                            path: name.clone(),
                            source: e,
                        }
                    })?;
                    written.push(name);
                }
            }

            // metric vs compression ratio, per SNR (needs >= 2 widths)
            if z_values.len() >= 2 {
                for &snr_key in &snrs {
                    let snr = snr_key as f64 / 1000.0;
                    for (mi, metric) in METRIC_NAMES.iter().enumerate() {
                        let schemes: BTreeSet<&str> =
                            ch_rows.iter().map(|r| r.scheme.as_str()).collect();
                        let series: Vec<(String, Vec<(f64, f64)>)> = schemes
                            .iter()
                            .map(|&s| {
                                let mut pts: Vec<(f64, f64)> = ch_rows
                                    .iter()
                                    .filter(|r| {
                                        r.scheme == s
                                            && ((r.snr_db * 1000.0).round() as i64) == snr_key
                                    })
                                    .map(|r| (r.compression_ratio, r.metrics[mi]))
                                    .collect();
                                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                                (s.to_string(), pts)
                            })
                            .collect();
                        let chart = Chart {
                            title: format!(
                                "{metric} vs compression ratio ({dataset}, {channel}, {snr} dB)"
                            ),
                            x_label: "compression ratio".into(),
                            y_label: (*metric).into(),
                            series,
                        };
                        let name =
                            format!("{dataset}_{channel}_snr{snr}_{metric}_vs_cr.svg");
                        fs::write(out_dir.join(&name), chart.to_svg()).map_err(|e| {
                            HarnessError::Io {
                                path: name.clone(),
                                source: e,
                            }
                        })?;
                        written.push(name);
                    }
                }
            }
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Image grids
// ---------------------------------------------------------------------------

/// Writes a single image as binary PGM (1 channel) or PPM (3 channels).
pub fn write_pnm(path: &Path, image: &Tensor<f32>) -> Result<(), HarnessError> {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let mut buf = Vec::with_capacity(h * w * c + 32);
    if c == 1 {
        buf.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
        for &v in image.data() {
            buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    } else {
        buf.extend_from_slice(format!("P6\n{w} {h}\n255\n").as_bytes());
        for y in 0..h {
            for x in 0..w {
                for ch in 0..3 {
                    buf.push(
                        (image.data()[(ch * h + y) * w + x].clamp(0.0, 1.0) * 255.0).round() as u8,
                    );
                }
            }
        }
    }
    fs::write(path, buf).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads back a binary PGM/PPM written by [`write_pnm`]; `Ok(None)` when the
/// file does not exist.
pub fn read_pnm(path: &Path) -> Result<Option<Tensor<f32>>, HarnessError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => {
            return Err(HarnessError::Io {
                path: path.display().to_string(),
                source: e,
            })
        }
    };
    let bad = |msg: &str| HarnessError::Report(format!("{}: {msg}", path.display()));
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(2)
        .map(|(i, _)| i + 1)
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("non-ASCII header"))?;
    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    let channels = match magic {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(bad("unsupported magic")),
    };
    let dims = lines.next().unwrap_or_default();
    let (w, h) = dims
        .split_once(' ')
        .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)))
        .ok_or_else(|| bad("bad dimensions"))?;
    let data = &bytes[header_end..];
    if data.len() != w * h * channels {
        return Err(bad("pixel payload size mismatch"));
    }
    let mut planar = vec![0f32; channels * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..channels {
                planar[(c * h + y) * w + x] = data[(y * w + x) * channels + c] as f32 / 255.0;
            }
        }
    }
    Ok(Some(Tensor::new(vec![channels, h, w], planar)))
}

/// Mosaic: one row per scheme (original first), one column per SNR point,
/// separated by 1-pixel white gutters.
pub fn write_mosaic(
    path: &Path,
    original: &Tensor<f32>,
    samples: &[&SampleImage],
    snrs: &[f64],
    schemes: &[&str],
) -> Result<(), HarnessError> {
    let (c, h, w) = (
        original.shape()[0],
        original.shape()[1],
        original.shape()[2],
    );
    let cols = snrs.len();
    let rows = schemes.len() + 1;
    let mw = cols * w + cols - 1;
    let mh = rows * h + rows - 1;
    let mut mosaic = Tensor::<f32>::filled(vec![c, mh, mw], 1.0);

    let mut blit = |tile: &Tensor<f32>, row: usize, col: usize| {
        let oy = row * (h + 1);
        let ox = col * (w + 1);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    mosaic.data_mut()[(ch * mh + oy + y) * mw + ox + x] =
                        tile.data()[(ch * h + y) * w + x];
                }
            }
        }
    };

    for col in 0..cols {
        blit(original, 0, col);
    }
    for (ri, scheme) in schemes.iter().enumerate() {
        for (col, &snr) in snrs.iter().enumerate() {
            if let Some(sample) = samples
                .iter()
                .find(|s| s.scheme == *scheme && (s.snr_db - snr).abs() < 1e-9)
            {
                blit(&sample.pixels, ri + 1, col);
            }
        }
    }
    write_pnm(path, &mosaic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_csv() -> String {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        for scheme in ["aesc_i", "direct", "external_codec"] {
            for snr in [0, 2, 4, 6, 8, 10] {
                text.push_str(&format!(
                    "mnist,40,19.600000,awgn,{snr}.000000,{scheme},12.0,0.5,0.9,0.9,0.1,0.01,0.001,60000\n"
                ));
            }
        }
        text
    }

    #[test]
    fn parses_and_charts_three_schemes() {
        let rows = parse_results(&sample_csv()).unwrap();
        assert_eq!(rows.len(), 18);
        let dir = tempfile::tempdir().unwrap();
        let written = write_report(&rows, dir.path()).unwrap();
        // one SVG per metric for the single z
        assert_eq!(written.len(), METRIC_NAMES.len());
        let svg = fs::read_to_string(dir.path().join(&written[0])).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn empty_csv_is_an_error() {
        assert!(parse_results("").is_err());
        assert!(parse_results(&format!("{CSV_HEADER}\n")).is_err());
    }

    #[test]
    fn inf_sentinel_roundtrips() {
        let mut text = String::from(CSV_HEADER);
        text.push('\n');
        text.push_str("mnist,40,19.6,awgn,10.0,aesc_i,inf,1.0,1.0,1.0,0.0,0.0,0.0,60000\n");
        let rows = parse_results(&text).unwrap();
        assert!(rows[0].metrics[0].is_infinite());
    }

    #[test]
    fn pnm_writers_produce_valid_headers() {
        let dir = tempfile::tempdir().unwrap();
        let gray = Tensor::<f32>::filled(vec![1, 4, 6], 0.5);
        let p = dir.path().join("g.pgm");
        write_pnm(&p, &gray).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n6 4\n255\n"));
        assert_eq!(bytes.len(), 11 + 24);

        let color = Tensor::<f32>::filled(vec![3, 4, 6], 0.25);
        let p = dir.path().join("c.ppm");
        write_pnm(&p, &color).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P6\n6 4\n255\n"));
        assert_eq!(bytes.len(), 11 + 72);
    }

    #[test]
    fn mosaic_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let original = Tensor::<f32>::filled(vec![1, 8, 8], 0.0);
        let sample = SampleImage {
            z_dims: 4,
            snr_db: 5.0,
            scheme: "aesc_i".into(),
            index: 0,
            pixels: Tensor::filled(vec![1, 8, 8], 1.0),
        };
        let p = dir.path().join("m.pgm");
        write_mosaic(&p, &original, &[&sample], &[0.0, 5.0], &["aesc_i"]).unwrap();
        let bytes = fs::read(&p).unwrap();
        // 2 cols x 2 rows of 8x8 with 1px gutters -> 17x17
        assert!(bytes.starts_with(b"P5\n17 17\n255\n"));
    }
}
