//! Training-crop extraction and dataset manifests.
//!
//! Crops are taken on an inclusive grid with stride 30 over every image of
//! a directory tree. Each crop is assigned to the training or held-out split
//! by ranking a seeded hash of `(image path, center)`, so the assignment is
//! reproducible and the held-out count is exact.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dfe::CropDataset;
use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::matchcore::position_grid;
use crate::raster::{extract_crop, is_raster_path, read_image, rgb_to_lab01, ColorSpace, PlanarImage};

pub const DEFAULT_WINDOW: usize = 31;
pub const DEFAULT_STRIDE: usize = 30;

/// Window centers on the inclusive stride grid; empty (with a warning) when
/// the image is smaller than the window.
pub fn extract_training_crops(width: usize, height: usize, window: usize, stride: usize) -> Vec<Pixel> {
    match position_grid(width, height, window, stride) {
        Ok(grid) => grid.centers().collect(),
        Err(e) => {
            log::warn!("skipping {width}x{height} image: {e}");
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub cx: usize,
    pub cy: usize,
    pub split: Split,
}

impl ManifestEntry {
    pub fn center(&self) -> Pixel {
        Pixel { x: self.cx, y: self.cy }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropManifest {
    pub seed: u64,
    pub window: usize,
    pub entries: Vec<ManifestEntry>,
}

/// Files that could not be used, with the reason.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SkipReport {
    pub skipped: Vec<(String, String)>,
}

/// FNV-1a over the bytes, then a SplitMix64 finalizer mixed with the seed.
fn entry_hash(path: &str, cx: usize, cy: usize, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = path
        .as_bytes()
        .iter()
        .copied()
        .chain((cx as u64).to_le_bytes())
        .chain((cy as u64).to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Marks the `round(fraction·n)` entries with the smallest hashes as
/// held out.
pub fn assign_splits(entries: &mut [ManifestEntry], seed: u64, heldout_fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&heldout_fraction) {
        return Err(Error::invalid(format!("held-out fraction must lie in [0, 1], got {heldout_fraction}")));
    }
    let mut keyed: Vec<(u64, usize)> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (entry_hash(&e.image_path, e.cx, e.cy, seed), i))
        .collect();
    keyed.sort_unstable();
    let heldout = (heldout_fraction * entries.len() as f64).round() as usize;
    for (rank, &(_, i)) in keyed.iter().enumerate() {
        entries[i].split = if rank < heldout { Split::Heldout } else { Split::Train };
    }
    Ok(())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if is_raster_path(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Scans `dir` recursively for PNG/PNM files and lists every training crop.
pub fn build_manifest(
    dir: impl AsRef<Path>,
    seed: u64,
    heldout_fraction: f64,
    window: usize,
    stride: usize,
) -> Result<(CropManifest, SkipReport)> {
    let mut files = Vec::new();
    collect_files(dir.as_ref(), &mut files)?;
    files.sort();
    let scanned: Vec<std::result::Result<Vec<ManifestEntry>, (String, String)>> = files
        .par_iter()
        .map(|path| {
            let name = path.to_string_lossy().into_owned();
            let (w, h) = image::ImageReader::open(path)
                .and_then(|r| r.with_guessed_format())
                .map_err(|e| (name.clone(), e.to_string()))?
                .into_dimensions()
                .map_err(|e| (name.clone(), e.to_string()))?;
            let centers = extract_training_crops(w as usize, h as usize, window, stride);
            if centers.is_empty() {
                return Err((name, format!("{w}x{h} is smaller than the {window}x{window} window")));
            }
            Ok(centers
                .into_iter()
                .map(|c| ManifestEntry { image_path: name.clone(), cx: c.x, cy: c.y, split: Split::Train })
                .collect())
        })
        .collect();
    let mut entries = Vec::new();
    let mut report = SkipReport::default();
    for r in scanned {
        match r {
            Ok(e) => entries.extend(e),
            Err(skip) => {
                log::warn!("skipping {}: {}", skip.0, skip.1);
                report.skipped.push(skip);
            }
        }
    }
    assign_splits(&mut entries, seed, heldout_fraction)?;
    Ok((CropManifest { seed, window, entries }, report))
}

/// Stride-grid crops of in-memory RGB01 images, as LAB01.
pub fn crops_from_images(images: &[PlanarImage], window: usize, stride: usize) -> Result<CropDataset> {
    let crops: Vec<Vec<Vec<f64>>> = images
        .par_iter()
        .map(|img| {
            let lab = rgb_to_lab01(img)?;
            extract_training_crops(img.width(), img.height(), window, stride)
                .into_iter()
                .map(|c| Ok(extract_crop(&lab, c, window)?.to_hwc()))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut data = CropDataset::new(window, 3);
    for hwc in crops.iter().flatten() {
        data.push_hwc(hwc)?;
    }
    Ok(data)
}

impl CropManifest {
    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    /// CSV with header `image_path,cx,cy,split`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, seed: u64, window: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let entries = r.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        Ok(CropManifest { seed, window, entries })
    }

    /// Reads every image once and gathers the crops of `split` as LAB01.
    pub fn load_dataset(&self, split: Split) -> Result<CropDataset> {
        let mut by_image: Vec<(&str, Vec<Pixel>)> = Vec::new();
        for e in self.entries.iter().filter(|e| e.split == split) {
            match by_image.last_mut() {
                Some((p, v)) if *p == e.image_path => v.push(e.center()),
                _ => by_image.push((&e.image_path, vec![e.center()])),
            }
        }
        let crops: Vec<Vec<Vec<f64>>> = by_image
            .par_iter()
            .map(|(path, centers)| {
                let img = read_image(path)?;
                let lab = match img.space() {
                    ColorSpace::Rgb01 => rgb_to_lab01(&img)?,
                    other => return Err(Error::invalid(format!("{path}: expected a color image, got {other:?}"))),
                };
                centers.iter().map(|&c| Ok(extract_crop(&lab, c, self.window)?.to_hwc())).collect()
            })
            .collect::<Result<_>>()?;
        let mut data = CropDataset::new(self.window, 3);
        for hwc in crops.iter().flatten() {
            data.push_hwc(hwc)?;
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::write_image;

    #[test]
    fn crop_grid_examples() {
        let c = extract_training_crops(200, 200, 31, 30);
        assert_eq!(c.len(), 36);
        // Enumeration oracle: offsets o with o + 31 <= 200.
        let offs: Vec<usize> = (0..200).step_by(30).filter(|o| o + 31 <= 200).collect();
        let want: Vec<Pixel> = offs
            .iter()
            .flat_map(|&oy| offs.iter().map(move |&ox| Pixel { x: ox + 15, y: oy + 15 }))
            .collect();
        assert_eq!(c, want);
        assert_eq!(extract_training_crops(31, 31, 31, 30), vec![Pixel { x: 15, y: 15 }]);
        assert_eq!(
            extract_training_crops(61, 31, 31, 30),
            vec![Pixel { x: 15, y: 15 }, Pixel { x: 45, y: 15 }]
        );
        assert!(extract_training_crops(30, 100, 31, 30).is_empty());
    }

    #[test]
    fn split_counts_are_exact_and_deterministic() {
        let mut entries: Vec<ManifestEntry> = (0..10_000)
            .map(|i| ManifestEntry {
                image_path: format!("img{}.png", i / 100),
                cx: 15 + 30 * (i % 10),
                cy: 15 + 30 * ((i / 10) % 10),
                split: Split::Train,
            })
            .collect();
        assign_splits(&mut entries, 7, 0.1).unwrap();
        let held = entries.iter().filter(|e| e.split == Split::Heldout).count();
        assert!((990..=1010).contains(&held));
        let mut again = entries.clone();
        assign_splits(&mut again, 7, 0.1).unwrap();
        assert_eq!(again, entries);
        let mut other = entries.clone();
        assign_splits(&mut other, 8, 0.1).unwrap();
        assert_ne!(other, entries);
        assert!(assign_splits(&mut entries, 7, 1.5).is_err());
    }

    #[test]
    fn manifest_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        let empty = build_manifest(dir.path(), 1, 0.1, 31, 30).unwrap();
        assert!(empty.0.entries.is_empty() && empty.1.skipped.is_empty());

        let img = PlanarImage::from_fn(100, 70, ColorSpace::Rgb01, |x, y, c| ((x + 2 * y + c) % 7) as f64 / 7.0).unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        write_image(&img, dir.path().join("a.png")).unwrap();
        write_image(&img, dir.path().join("sub/b.ppm")).unwrap();
        let tiny = PlanarImage::filled(10, 10, ColorSpace::Rgb01, 0.5).unwrap();
        write_image(&tiny, dir.path().join("tiny.png")).unwrap();
        fs::write(dir.path().join("broken.png"), b"not a png").unwrap();

        let (m, skips) = build_manifest(dir.path(), 3, 0.25, 31, 30).unwrap();
        assert_eq!(m.entries.len(), 2 * 3 * 2);
        assert_eq!(skips.skipped.len(), 2);
        assert_eq!(m.count(Split::Heldout), 3);
        let (m2, _) = build_manifest(dir.path(), 3, 0.25, 31, 30).unwrap();
        assert_eq!(m, m2);

        // Every center is a valid crop on its source image.
        for e in &m.entries {
            let src = read_image(&e.image_path).unwrap();
            assert!(extract_crop(&src, e.center(), 31).is_ok());
        }

        let csv = dir.path().join("manifest.csv");
        m.write_csv(&csv).unwrap();
        let header = fs::read_to_string(&csv).unwrap();
        assert!(header.starts_with("image_path,cx,cy,split\n"));
        assert_eq!(CropManifest::read_csv(&csv, 3, 31).unwrap(), m);

        let train = m.load_dataset(Split::Train).unwrap();
        assert_eq!(train.len(), 9);
    }
}
