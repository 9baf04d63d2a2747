//! Tracks a planted mole through a synthetic "bike" sequence under both
//! reference schemes and evaluates the tracks against an error model.

use dfe_track::evalstat::{simulate_distance_cdf, ErrorModel};
use dfe_track::flow_lk::FlowWindow;
use dfe_track::matchcore::RawPixelDescriber;
use dfe_track::synthgen::{generate, Regime, SynthSpec};
use dfe_track::tracker::{evaluate, track, Matcher, TrackScheme, UnmatchedPolicy};

fn main() -> dfe_track::Result<()> {
    let seq = generate(&SynthSpec::preset(Regime::Bike, 96, 96, 40, 1))?;
    let model = ErrorModel::by_name("bike-face-mole")?;
    let cdf = simulate_distance_cdf(&model, 100_000, 0)?;
    let raw = RawPixelDescriber::default();

    let runs = [
        ("raw pixels, fixed", Matcher::Descriptor(&raw), TrackScheme::fixed()),
        ("raw pixels, previous", Matcher::Descriptor(&raw), TrackScheme::previous()),
        ("lucas-kanade, fixed", Matcher::Lk(FlowWindow::default()), TrackScheme::fixed()),
        ("lucas-kanade, previous", Matcher::Lk(FlowWindow::default()), TrackScheme::previous()),
    ];
    for (name, matcher, scheme) in runs {
        let t = track(&seq.frames, seq.truth[0], matcher, &scheme)?;
        let r = evaluate(&t, &seq.truth, UnmatchedPolicy::AssignDiagonal, &model, &cdf)?;
        let last = r.rows.last().expect("non-empty report");
        println!(
            "{name:<24} mean {:.3} px  max {:.3} px  weighted {:.3}  cumulative {:.1} / 99% line {:.1}",
            r.mean_error, r.max_error, r.weighted_mean_error, last.cumulative, last.ci
        );
    }
    Ok(())
}
