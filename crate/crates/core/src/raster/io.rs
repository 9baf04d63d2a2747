//! Lossless raster I/O (PNG, binary PPM/PGM). 8-bit samples map to `[0, 1]`
//! by division by 255.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::raster::color::normalize_lab;
use crate::raster::image::{ColorSpace, PlanarImage};

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "ppm" | "pgm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(Error::invalid(format!(
            "unsupported raster extension for {}",
            path.display()
        ))),
    }
}

/// Whether the path names a raster file this module can read.
pub fn is_raster_path(path: &Path) -> bool {
    format_for(path).is_ok()
}

/// Reads a raster as RGB01, or GRAY01 when the file has no color channels.
pub fn read_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let reader = image::ImageReader::with_format(
        std::io::BufReader::new(std::fs::File::open(path)?),
        format,
    );
    let decoded = reader.decode()?;
    Ok(from_dynamic(&decoded))
}

pub(crate) fn from_dynamic(decoded: &DynamicImage) -> PlanarImage {
    if decoded.color().has_color() {
        let rgb = decoded.to_rgb8();
        let (w, h) = rgb.dimensions();
        let (w, h) = (w as usize, h as usize);
        let mut data = vec![0.0; 3 * w * h];
        for (i, px) in rgb.pixels().enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = px[c] as f64 / 255.0;
            }
        }
        PlanarImage::from_parts(w, h, ColorSpace::Rgb01, data)
    } else {
        let gray = decoded.to_luma8();
        let (w, h) = gray.dimensions();
        let data = gray.pixels().map(|p| p[0] as f64 / 255.0).collect();
        PlanarImage::from_parts(w as usize, h as usize, ColorSpace::Gray01, data)
    }
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes an image as 8-bit. CIELAB is min-max normalized first; LAB01
/// channels are written as `round(255 * v)`.
pub fn to_dynamic(img: &PlanarImage) -> Result<DynamicImage> {
    let (w, h) = (img.width(), img.height());
    match img.space() {
        ColorSpace::Gray01 => {
            let buf = img.plane(0).iter().map(|&v| to_u8(v)).collect();
            Ok(DynamicImage::ImageLuma8(
                GrayImage::from_raw(w as u32, h as u32, buf).expect("buffer sized for image"),
            ))
        }
        ColorSpace::Cielab => to_dynamic(&normalize_lab(img)?),
        ColorSpace::Rgb01 | ColorSpace::Lab01 => {
            let mut buf = Vec::with_capacity(3 * w * h);
            for i in 0..w * h {
                for c in 0..3 {
                    buf.push(to_u8(img.plane(c)[i]));
                }
            }
            Ok(DynamicImage::ImageRgb8(
                RgbImage::from_raw(w as u32, h as u32, buf).expect("buffer sized for image"),
            ))
        }
    }
}

pub fn write_image(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("pgm") && img.channels() != 1 {
        return Err(Error::invalid("PGM output needs a single-channel image"));
    }
    to_dynamic(img)?.save_with_format(path, format)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pnm_round_trip_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = PlanarImage::from_fn(5, 4, ColorSpace::Rgb01, |x, y, c| {
            ((x * 37 + y * 11 + c * 71) % 256) as f64 / 255.0
        })
        .unwrap();
        for name in ["a.png", "a.ppm"] {
            let path = dir.path().join(name);
            write_image(&img, &path).unwrap();
            let back = read_image(&path).unwrap();
            assert_eq!(back, img, "{name}");
        }
        let gray = PlanarImage::from_fn(3, 3, ColorSpace::Gray01, |x, y, _| (x + y) as f64 / 255.0)
            .unwrap();
        let path = dir.path().join("g.pgm");
        write_image(&gray, &path).unwrap();
        assert_eq!(read_image(&path).unwrap(), gray);
        assert!(write_image(&img, dir.path().join("bad.pgm")).is_err());
        assert!(write_image(&img, dir.path().join("bad.jpg")).is_err());
    }
}
