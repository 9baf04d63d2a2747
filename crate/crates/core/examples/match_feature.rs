//! Dense SSR matching with raw-pixel descriptors: builds the landscape of a
//! reference window over a shifted frame, refines the minimum to subpixel
//! precision and reports the nearest-neighbor ratio.

use dfe_track::matchcore::{landscape_for, match_feature, DenseDescriber, RawPixelDescriber};
use dfe_track::synthgen::{generate, Motion, Regime, SynthSpec};

fn main() -> dfe_track::Result<()> {
    let mut spec = SynthSpec::preset(Regime::Static, 96, 80, 2, 5);
    spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [2.4, 1.7]] };
    let seq = generate(&spec)?;

    let describer = RawPixelDescriber::default();
    let reference = describer.prepare(&seq.frames[0])?;
    let target = describer.prepare(&seq.frames[1])?;
    let center = seq.truth[0].round_to_pixel().expect("feature inside the frame");

    let (_, land) = landscape_for(&describer, &reference, center, &target)?;
    let m = match_feature(&land)?;
    println!("landscape: {}x{} centers", land.grid().cols, land.grid().rows);
    println!(
        "pixel {} -> subpixel {} ({:?}), truth {}",
        m.pixel_pos, m.subpixel_pos, m.outcome, seq.truth[1]
    );
    println!("error {:.3} px, nn ratio {:.3}", m.subpixel_pos.distance(seq.truth[1]), m.nn_ratio);
    Ok(())
}
