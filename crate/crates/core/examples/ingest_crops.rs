//! Writes a small image folder, scans it into a crop manifest with a
//! reproducible held-out split and loads both splits as LAB01 crops.

use dfe_track::raster::write_image;
use dfe_track::synthgen::training_images;
use dfe_track::trainpipe::{build_manifest, Split};

fn main() -> dfe_track::Result<()> {
    let dir = std::env::temp_dir().join("dfe-ingest");
    std::fs::create_dir_all(&dir)?;
    for (i, img) in training_images(6, 200, 150, 3).iter().enumerate() {
        write_image(img, dir.join(format!("face_{i:02}.png")))?;
    }
    let (manifest, skipped) = build_manifest(&dir, 11, 0.1, 31, 30)?;
    println!(
        "{} crops: {} train, {} held out; {} files skipped",
        manifest.entries.len(),
        manifest.count(Split::Train),
        manifest.count(Split::Heldout),
        skipped.skipped.len()
    );
    manifest.write_csv(dir.join("manifest.csv"))?;
    let train = manifest.load_dataset(Split::Train)?;
    println!("loaded {} training crops of {}x{}x{}", train.len(), train.size(), train.size(), train.channels());
    Ok(())
}
