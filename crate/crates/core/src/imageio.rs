//! Writers and readers for render buffers: 8-bit PNG, PFM and raw float
//! feature maps with a JSON sidecar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::scalar::Real;

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn save_png<P: image::Pixel<Subpixel = u8> + image::PixelWithColorType>(
    img: ImageBuffer<P, Vec<u8>>,
    path: &Path,
) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Writes an interleaved RGB buffer in `[0, 1]` as an 8-bit PNG.
pub fn write_rgb_png<T: Real>(path: &Path, width: usize, height: usize, rgb: &[T]) -> Result<()> {
    ensure!(rgb.len() == 3 * width * height, Shape, "rgb buffer has {} values for {width}x{height}", rgb.len());
    let data = rgb.iter().map(|v| to_u8(v.to_f64_lossy())).collect();
    let img = ImageBuffer::<Rgb<u8>, _>::from_raw(width as u32, height as u32, data).expect("sized above");
    save_png(img, path)
}

/// Writes a single-channel buffer, mapping `[lo, hi]` to `[0, 255]`.
pub fn write_gray_png<T: Real>(path: &Path, width: usize, height: usize, values: &[T], lo: f64, hi: f64) -> Result<()> {
    ensure!(values.len() == width * height, Shape, "buffer has {} values for {width}x{height}", values.len());
    ensure!(hi > lo, Parameter, "normalisation range [{lo}, {hi}] is empty");
    let data = values.iter().map(|v| to_u8((v.to_f64_lossy() - lo) / (hi - lo))).collect();
    let img = ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, data).expect("sized above");
    save_png(img, path)
}

/// Depth visualisation: near maps to white, far to black, invalid pixels to 0.
pub fn write_depth_png<T: Real>(
    path: &Path,
    width: usize,
    height: usize,
    depth: &[T],
    valid: &[bool],
    near: f64,
    far: f64,
) -> Result<()> {
    ensure!(valid.len() == depth.len(), Shape, "mask and depth sizes differ");
    let inv: Vec<f64> = depth
        .iter()
        .zip(valid)
        .map(|(d, v)| if *v { far - d.to_f64_lossy() + near } else { f64::NEG_INFINITY })
        .collect();
    write_gray_png(path, width, height, &inv, near, far)
}

/// Reads an 8-bit PNG into interleaved RGB values in `[0, 1]`.
pub fn read_rgb_png(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect()))
}

/// Writes a PFM image (`PF` for 3 channels, `Pf` for 1), little endian.
/// Input rows run top to bottom; PFM stores them bottom to top.
pub fn write_pfm<T: Real>(path: &Path, width: usize, height: usize, channels: usize, data: &[T]) -> Result<()> {
    ensure!(channels == 1 || channels == 3, Parameter, "PFM supports 1 or 3 channels, got {channels}");
    ensure!(
        data.len() == width * height * channels,
        Shape,
        "buffer has {} values for {width}x{height}x{channels}",
        data.len()
    );
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let tag = if channels == 3 { "PF" } else { "Pf" };
    let mut bytes = format!("{tag}\n{width} {height}\n-1.0\n").into_bytes();
    let row = width * channels;
    bytes.reserve(data.len() * 4);
    for j in (0..height).rev() {
        for v in &data[j * row..(j + 1) * row] {
            bytes.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    }
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Top row first.
    pub data: Vec<f32>,
}

fn next_token<'a>(it: &mut impl Iterator<Item = &'a str>, path: &Path) -> Result<&'a str> {
    it.next().ok_or_else(|| Error::format(path, "truncated PFM header"))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    // Header is three whitespace-separated lines.
    let mut newlines = 0;
    let mut body = None;
    for (k, b) in bytes.iter().enumerate() {
        if *b == b'\n' {
            newlines += 1;
            if newlines == 3 {
                body = Some(k + 1);
                break;
            }
        }
    }
    let body = body.ok_or_else(|| Error::format(path, "truncated PFM header"))?;
    let header = std::str::from_utf8(&bytes[..body]).map_err(|_| Error::format(path, "header is not text"))?;
    let mut tok = header.split_whitespace();
    let channels = match next_token(&mut tok, path)? {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format(path, format!("unknown PFM tag {other:?}"))),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad dimension {s:?}")));
    let width = parse(next_token(&mut tok, path)?)?;
    let height = parse(next_token(&mut tok, path)?)?;
    let scale: f64 = next_token(&mut tok, path)?
        .parse()
        .map_err(|_| Error::format(path, "bad scale"))?;
    let little = scale < 0.0;
    let count = width * height * channels;
    let raw = &bytes[body..];
    if raw.len() != count * 4 {
        return Err(Error::format(path, format!("expected {} data bytes, found {}", count * 4, raw.len())));
    }
    let row = width * channels;
    let mut data = vec![0f32; count];
    for (k, chunk) in raw.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (j, i) = (k / row, k % row);
        data[(height - 1 - j) * row + i] = v;
    }
    Ok(PfmImage { width, height, channels, data })
}

/// Shape description written next to a raw float feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub dtype: String,
    pub endian: String,
    /// Outermost first.
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

/// Writes `data` as little-endian f32 to `path` and its shape to
/// `path` + `.json`.
pub fn write_raw_f32<T: Real>(path: &Path, shape: &[usize], layout: Option<&str>, data: &[T]) -> Result<()> {
    let n: usize = shape.iter().product();
    ensure!(n == data.len(), Shape, "shape {shape:?} holds {n} values, buffer has {}", data.len());
    let mut bytes = Vec::with_capacity(n * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = RawSidecar {
        dtype: "float32".into(),
        endian: "little".into(),
        shape: shape.to_vec(),
        layout: layout.map(str::to_owned),
    };
    let side_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).expect("sidecar serialises");
    std::fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}

pub fn read_raw_f32(path: &Path) -> Result<(RawSidecar, Vec<f32>)> {
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: RawSidecar =
        serde_json::from_str(&text).map_err(|source| Error::Json { path: side_path.clone(), source })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let n: usize = side.shape.iter().product();
    if side.dtype != "float32" || side.endian != "little" || bytes.len() != n * 4 {
        return Err(Error::format(path, "raw data does not match its sidecar"));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((side, data))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_keeps_row_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let data: Vec<f64> = (0..2 * 3 * 3).map(|k| k as f64 * 0.5 - 1.0).collect();
        write_pfm(&p, 2, 3, 3, &data).unwrap();
        let img = read_pfm(&p).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 3, 3));
        assert_eq!(img.data, data.iter().map(|v| *v as f32).collect::<Vec<_>>());
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"PF\n2 3\n-1.0\n"));
    }

    #[test]
    fn pfm_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.pfm");
        std::fs::write(&p, b"P6\n1 1\n255\n").unwrap();
        assert!(read_pfm(&p).is_err());
        std::fs::write(&p, b"Pf\n2 2\n-1.0\n\0\0").unwrap();
        assert!(read_pfm(&p).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let rgb = [0.0, 0.5, 1.0, 1.0, 0.0, 0.25f64];
        write_rgb_png(&p, 2, 1, &rgb).unwrap();
        let (w, h, back) = read_rgb_png(&p).unwrap();
        assert_eq!((w, h), (2, 1));
        for (a, b) in rgb.iter().zip(back) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn raw_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.raw");
        let data = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        write_raw_f32(&p, &[1, 2, 3], Some("hwc"), &data).unwrap();
        let (side, back) = read_raw_f32(&p).unwrap();
        assert_eq!(side.shape, vec![1, 2, 3]);
        assert_eq!(back, data);
        assert!(write_raw_f32(&p, &[4], None, &data).is_err());
    }
}
