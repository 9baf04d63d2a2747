use dfe_track::evalstat::{chi2_cdf, chi2_inv, simulate_distance_cdf, weighted_error, EmpiricalCdf, ErrorModel};
use dfe_track::flow_lk::{lk_pyramidal, FlowStatus, FlowWindow};
use dfe_track::matchcore::{match_feature, nn_ratio, position_grid, RawPixelDescriber, SsrLandscape};
use dfe_track::raster::{normalize_lab, pyramid_coords, rgb_to_cielab, rgb_to_lab_pixel, to_grayscale, ColorSpace, PlanarImage};
use dfe_track::synthgen::{generate, Illumination, Motion, Regime, SynthSpec};
use dfe_track::tracker::{track, Matcher, TrackScheme};
use dfe_track::Point;
use proptest::prelude::*;

/// Scalar CIELAB written out longhand: sRGB primaries to XYZ, D65 white.
fn lab_oracle(r: f64, g: f64, b: f64) -> [f64; 3] {
    let x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / 0.950456;
    let y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    let z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / 1.088754;
    let f = |t: f64| if t > 0.008856 { t.powf(1.0 / 3.0) } else { 7.787 * t + 16.0 / 116.0 };
    let l = if y > 0.008856 { 116.0 * y.powf(1.0 / 3.0) - 16.0 } else { 903.3 * y };
    [l.min(100.0), 500.0 * (f(x) - f(y)), 200.0 * (f(y) - f(z))]
}

/// Local-minimum test of the least-squares quadratic through a 3x3 patch,
/// from the closed-form normal equations on the unit grid.
fn is_local_min(z: &[f64; 9]) -> bool {
    let at = |col: usize, row: usize| z[row * 3 + col];
    let col_sum = |c: usize| at(c, 0) + at(c, 1) + at(c, 2);
    let row_sum = |r: usize| at(0, r) + at(1, r) + at(2, r);
    let d = (col_sum(0) + col_sum(2) - 2.0 * col_sum(1)) / 6.0;
    let f = (row_sum(0) + row_sum(2) - 2.0 * row_sum(1)) / 6.0;
    let e = (at(0, 0) + at(2, 2) - at(2, 0) - at(0, 2)) / 4.0;
    4.0 * d * f - e * e > 0.0 && d > 0.0
}

fn landscape(w: usize, h: usize, values: Vec<f64>) -> SsrLandscape {
    SsrLandscape::new(position_grid(w + 30, h + 30, 31, 1).unwrap(), values).unwrap()
}

fn oracle_min(cols: usize, rows: usize, v: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for r in 1..rows.saturating_sub(1) {
        for c in 1..cols.saturating_sub(1) {
            let mut z = [0.0; 9];
            for dr in 0..3 {
                for dc in 0..3 {
                    z[dr * 3 + dc] = v[(r + dr - 1) * cols + c + dc - 1];
                }
            }
            if is_local_min(&z) {
                let here = v[r * cols + c];
                best = Some(best.map_or(here, |b: f64| b.min(here)));
            }
        }
    }
    best
}

fn arb_landscape() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..=50, 3usize..=50).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0.0..100.0f64, w * h)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cielab_matches_scalar_oracle(r in 0.0..=1.0f64, g in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let got = rgb_to_lab_pixel([r, g, b]);
        let want = lab_oracle(r, g, b);
        for c in 0..3 {
            prop_assert!((got[c] - want[c]).abs() < 1e-6, "channel {c}: {} vs {}", got[c], want[c]);
        }
    }

    #[test]
    fn normalization_is_affine_and_monotone(p in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 2..20)) {
        let n = p.len();
        let mut data = vec![0.0; 3 * n];
        for (i, &(r, g, b)) in p.iter().enumerate() {
            data[i] = r;
            data[n + i] = g;
            data[2 * n + i] = b;
        }
        let lab = rgb_to_cielab(&PlanarImage::new(n, 1, ColorSpace::Rgb01, data).unwrap()).unwrap();
        let norm = normalize_lab(&lab).unwrap();
        let bounds = [(0.0, 100.0), (-127.0, 127.0), (-127.0, 127.0)];
        for (c, (lo, hi)) in bounds.into_iter().enumerate() {
            let (src, dst) = (lab.plane(c), norm.plane(c));
            for i in 0..n {
                prop_assert!((dst[i] - (src[i] - lo) / (hi - lo)).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&dst[i]));
                for j in 0..n {
                    if src[i] < src[j] {
                        prop_assert!(dst[i] < dst[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn pyramid_coords_compose(x in -500.0..500.0f64, y in -500.0..500.0f64, a in 0usize..=4, b in 0usize..=4) {
        let p = Point::new(x, y);
        let twice = pyramid_coords(pyramid_coords(p, a), b);
        let once = pyramid_coords(p, a + b);
        prop_assert!((twice.x - once.x).abs() < 1e-9 && (twice.y - once.y).abs() < 1e-9);
    }

    #[test]
    fn argmin_matches_exhaustive_oracle((w, h, v) in arb_landscape(), shift in 0.1..1000.0f64) {
        let land = landscape(w, h, v.clone());
        let m = match_feature(&land).unwrap();
        match oracle_min(w, h, &v) {
            Some(best) => prop_assert_eq!(m.ssr_min, best),
            None => prop_assert!(!m.accepted),
        }
        let ratio = nn_ratio(&land).unwrap();
        prop_assert!((0.0..=1.0).contains(&ratio));

        let lifted = landscape(w, h, v.iter().map(|x| x + shift).collect());
        let m2 = match_feature(&lifted).unwrap();
        prop_assert_eq!(m.pixel_pos, m2.pixel_pos);
        prop_assert!((m.subpixel_pos.x - m2.subpixel_pos.x).abs() < 1e-6);
        prop_assert!((m.subpixel_pos.y - m2.subpixel_pos.y).abs() < 1e-6);
        if m.accepted {
            let off = m.subpixel_pos - m.pixel_pos.to_point();
            prop_assert!(off.x.abs() <= 1.0 && off.y.abs() <= 1.0);
        }
    }

    #[test]
    fn chi2_inverse_round_trips(p in 1e-6..(1.0 - 1e-6), k in prop::sample::select(vec![1.0, 2.0, 3.0, 10.0, 80.0, 338.0, 520.0])) {
        let x = chi2_inv(p, k).unwrap();
        let back = chi2_cdf(x, k).unwrap();
        prop_assert!(((back - p) / p).abs() < 1e-9, "k {k}: p {p} -> {x} -> {back}");
    }

    #[test]
    fn chi2_cdf_is_monotone(a in 0.0..600.0f64, d in 0.0..50.0f64, k in 1.0..600.0f64) {
        prop_assert!(chi2_cdf(a, k).unwrap() <= chi2_cdf(a + d, k).unwrap());
    }

    #[test]
    fn weighted_error_is_monotone(samples in prop::collection::vec(0.0..10.0f64, 1..200), a in 0.0..12.0f64, d in 0.0..5.0f64) {
        let cdf = EmpiricalCdf::new(samples).unwrap();
        prop_assert!(weighted_error(a, &cdf) <= weighted_error(a + d, &cdf));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lk_round_trip_is_symmetric(seed in 0u64..1000, tx in -0.5..0.5f64, ty in -0.5..0.5f64) {
        let mut spec = SynthSpec::preset(Regime::Static, 96, 96, 2, seed);
        spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [tx, ty]] };
        spec.noise_sigma = 0.0;
        let seq = generate(&spec).unwrap();
        let (a, b) = (to_grayscale(&seq.frames[0]).unwrap(), to_grayscale(&seq.frames[1]).unwrap());
        let win = FlowWindow { max_level: 0, ..FlowWindow::default() };
        let p = Point::new(48.0, 48.0);
        let fwd = lk_pyramidal(&a, &b, p, &win).unwrap();
        let back = lk_pyramidal(&b, &a, fwd.position, &win).unwrap();
        prop_assert!(back.position.distance(p) < 0.1);
        if fwd.status == FlowStatus::Converged {
            prop_assert!(*fwd.increments.last().unwrap() < win.epsilon);
        }
    }

    #[test]
    fn zero_motion_estimates_are_level_coordinates(seed in 0u64..1000, x in 40.0..88.0f64, y in 40.0..88.0f64) {
        let seq = generate(&SynthSpec::preset(Regime::Static, 128, 128, 1, seed)).unwrap();
        let g = to_grayscale(&seq.frames[0]).unwrap();
        let win = FlowWindow { max_level: 2, ..FlowWindow::default() };
        let p = Point::new(x, y);
        let res = lk_pyramidal(&g, &g, p, &win).unwrap();
        for (k, est) in res.level_estimates.iter().enumerate() {
            let want = pyramid_coords(p, 2 - k);
            prop_assert!(est.distance(want) < 1e-9, "level {}: {est} vs {want}", 2 - k);
        }
    }

    #[test]
    fn previous_equals_fixed_on_two_frames(seed in 0u64..1000, tx in -3.0..3.0f64, ty in -3.0..3.0f64) {
        let mut spec = SynthSpec::preset(Regime::Static, 72, 72, 2, seed);
        spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [tx, ty]] };
        let seq = generate(&spec).unwrap();
        let raw = RawPixelDescriber::default();
        let fixed = track(&seq.frames, seq.truth[0], Matcher::Descriptor(&raw), &TrackScheme::fixed()).unwrap();
        let prev = track(&seq.frames, seq.truth[0], Matcher::Descriptor(&raw), &TrackScheme::previous()).unwrap();
        prop_assert_eq!(fixed.predictions(), prev.predictions());
        let lk_fixed = track(&seq.frames, seq.truth[0], Matcher::Lk(FlowWindow::default()), &TrackScheme::fixed()).unwrap();
        let lk_prev = track(&seq.frames, seq.truth[0], Matcher::Lk(FlowWindow::default()), &TrackScheme::previous()).unwrap();
        prop_assert_eq!(lk_fixed.predictions(), lk_prev.predictions());
    }

    #[test]
    fn illumination_only_keeps_truth_stationary(seed in 0u64..1000, gain in 0.8..1.2f64, offset in -0.05..0.05f64) {
        let mut spec = SynthSpec::preset(Regime::Static, 64, 64, 5, seed);
        spec.motion = Motion::Still;
        spec.illumination = Illumination::ramp(1.0, gain, 0.0, offset);
        let seq = generate(&spec).unwrap();
        prop_assert!(seq.truth.iter().all(|&p| p == seq.truth[0]));
    }
}

#[test]
fn rayleigh_quantiles_match_closed_form() {
    let sigma = 1.3;
    let model = ErrorModel::new("isotropic", sigma, sigma).unwrap();
    let cdf = simulate_distance_cdf(&model, 400_000, 11).unwrap();
    for q in [0.5, 0.95, 0.99] {
        let exact = sigma * (-2.0 * (1.0f64 - q).ln()).sqrt();
        let got = cdf.quantile(q).unwrap();
        let se = cdf.quantile_std_error(q).unwrap();
        assert!((got - exact).abs() < 3.0 * se, "q {q}: {got} vs {exact} (se {se})");
    }
}
