//! Labelling-error statistics: distance thresholds for every bundled
//! condition, a chi-square test of simulated tracking errors and an error
//! model recovered from repeated labels.

use dfe_track::evalstat::{
    calibrate_error_model, chi2_inv, chi2_statistic, distance_threshold, pp_plot_data, ErrorModel, FrameError, Relabel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> dfe_track::Result<()> {
    println!("{:<18} {:>8} {:>8} {:>8}", "condition", "a=0.5", "a=0.05", "a=0.01");
    for m in ErrorModel::catalog() {
        let t: Vec<String> = [0.5, 0.05, 0.01]
            .iter()
            .map(|&a| distance_threshold(&m, a, 0).map(|t| format!("{:8.3}", t.pixels)))
            .collect::<dfe_track::Result<_>>()?;
        println!("{:<18} {}", m.condition, t.join(" "));
    }
    println!("chi2_inv(0.99, 2) = {:.5}", chi2_inv(0.99, 2.0)?);

    let model = ErrorModel::by_name("static-face-mole")?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nx = Normal::new(0.0, model.sigma_x).unwrap();
    let ny = Normal::new(0.0, model.sigma_y).unwrap();
    for scale in [1.0, 2.0] {
        let errors: Vec<FrameError> = (0..130)
            .map(|i| FrameError::new(i, scale * nx.sample(&mut rng), scale * ny.sample(&mut rng)))
            .collect();
        let chi = chi2_statistic(&errors, &model)?;
        let pp = pp_plot_data(&errors, &model)?;
        println!(
            "errors x{scale}: chi2 {:.1} on {} dof, p = {:.2e}, reject at 1%: {}, P-P deviation {:.3}",
            chi.statistic,
            chi.dof,
            chi.p_value,
            chi.rejects(0.01),
            pp.max_deviation
        );
    }

    let truth = Normal::new(0.0, 1.2).unwrap();
    let relabels: Vec<Relabel> = (0..15u64)
        .flat_map(|image| (0..6u32).map(move |attempt| (image, attempt)))
        .map(|(image_id, attempt)| Relabel {
            image_id,
            attempt,
            x: 100.0 + truth.sample(&mut rng),
            y: 50.0 + truth.sample(&mut rng),
        })
        .collect();
    let fitted = calibrate_error_model("relabel-demo", &relabels)?;
    println!("calibrated from 90 relabels: sigma_x {:.3}, sigma_y {:.3} (true 1.2)", fitted.sigma_x, fitted.sigma_y);
    Ok(())
}
