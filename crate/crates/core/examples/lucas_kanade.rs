//! Tracks one point between two synthetic frames with pyramidal
//! Lucas-Kanade and compares against the known shift.

use dfe_track::flow_lk::{lk_pyramidal, FlowWindow};
use dfe_track::raster::to_grayscale;
use dfe_track::synthgen::{generate, Motion, Regime, SynthSpec};
use dfe_track::Point;

fn main() -> dfe_track::Result<()> {
    let shift = [6.3, -4.7];
    let mut spec = SynthSpec::preset(Regime::Static, 256, 256, 2, 3);
    spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], shift] };
    spec.noise_sigma = 0.0;
    let seq = generate(&spec)?;
    let (a, b) = (to_grayscale(&seq.frames[0])?, to_grayscale(&seq.frames[1])?);

    let win = FlowWindow::default();
    for p in [seq.truth[0], Point::new(90.0, 170.0), Point::new(180.5, 100.25)] {
        let res = lk_pyramidal(&a, &b, p, &win)?;
        let err = (res.displacement - Point::new(shift[0], shift[1])).norm();
        println!(
            "{p} -> {} [{:?}, eigen ratio {:.2}, {} iterations] error {err:.4} px",
            res.position,
            res.status,
            res.eigen_ratio,
            res.increments.len()
        );
    }
    Ok(())
}
