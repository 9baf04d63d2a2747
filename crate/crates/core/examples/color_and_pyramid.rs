//! Converts a synthetic skin image to CIELAB and LAB01, then builds the
//! resolution pyramid used by optical flow.
//!
//! cargo run --example color_and_pyramid [-- out_dir]

use dfe_track::raster::{build_pyramid, rgb_to_cielab, rgb_to_lab01, rgb_to_lab_pixel, to_grayscale, write_image};
use dfe_track::synthgen::{skin_texture, Feature};

fn main() -> dfe_track::Result<()> {
    for (name, rgb) in [("white", [1.0; 3]), ("black", [0.0; 3]), ("mid gray", [0.5; 3])] {
        let [l, a, b] = rgb_to_lab_pixel(rgb);
        println!("{name:>8}: L* {l:7.3}  a* {a:7.3}  b* {b:7.3}");
    }

    let mole = Feature { x: 80.0, y: 60.0, radius: 3.0, depth: 0.6 };
    let img = skin_texture(160, 120, 7, 0.45, &[mole]);
    let lab = rgb_to_cielab(&img)?;
    let lab01 = rgb_to_lab01(&img)?;
    let l_range = lab.plane(0).iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("L* spans {:.1}..{:.1}; LAB01 at the mole: {:?}", l_range.0, l_range.1, lab01.pixel(80, 60));

    let gray = to_grayscale(&img)?;
    let pyramid = build_pyramid(&gray, 3, 12)?;
    for (l, level) in pyramid.levels().iter().enumerate() {
        println!("level {l}: {}x{}", level.width(), level.height());
    }

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        write_image(&img, format!("{dir}/rgb.png"))?;
        write_image(&lab01, format!("{dir}/lab01.png"))?;
        write_image(&gray, format!("{dir}/gray.png"))?;
    }
    Ok(())
}
