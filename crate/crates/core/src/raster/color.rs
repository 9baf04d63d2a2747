//! RGB to CIELAB conversion (D65 white, no gamma decoding) and the fixed-bound
//! min-max normalization used for network inputs.

use crate::error::{Error, Result};
use crate::raster::image::{ColorSpace, PlanarImage};

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
];

pub const WHITE_X: f64 = 0.950456;
pub const WHITE_Z: f64 = 1.088754;

const LINEAR_LIMIT: f64 = 0.008856;

pub const L_BOUNDS: (f64, f64) = (0.0, 100.0);
pub const AB_BOUNDS: (f64, f64) = (-127.0, 127.0);

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LINEAR_LIMIT {
        t.cbrt()
    } else {
        7.787 * t + 16.0 / 116.0
    }
}

/// Converts one RGB triple in `[0, 1]` to `(L*, a*, b*)`.
pub fn rgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = RGB_TO_XYZ.map(|row| row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]);
    let x = x / WHITE_X;
    let z = z / WHITE_Z;
    let l = if y > LINEAR_LIMIT {
        116.0 * y.cbrt() - 16.0
    } else {
        903.3 * y
    };
    // Y can exceed 1 by an ulp for white input.
    let l = l.clamp(L_BOUNDS.0, L_BOUNDS.1);
    let a = 500.0 * (lab_f(x) - lab_f(y));
    let b = 200.0 * (lab_f(y) - lab_f(z));
    [l, a, b]
}

fn map_pixels(img: &PlanarImage, space: ColorSpace, f: impl Fn([f64; 3]) -> [f64; 3]) -> PlanarImage {
    let n = img.width() * img.height();
    let (p0, p1, p2) = (img.plane(0), img.plane(1), img.plane(2));
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        let v = f([p0[i], p1[i], p2[i]]);
        out[i] = v[0];
        out[n + i] = v[1];
        out[2 * n + i] = v[2];
    }
    PlanarImage::from_parts(img.width(), img.height(), space, out)
}

pub fn rgb_to_cielab(img: &PlanarImage) -> Result<PlanarImage> {
    if img.space() != ColorSpace::Rgb01 {
        return Err(Error::invalid(format!(
            "rgb_to_cielab expects an RGB01 image, got {:?}",
            img.space()
        )));
    }
    Ok(map_pixels(img, ColorSpace::Cielab, rgb_to_lab_pixel))
}

fn normalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Maps CIELAB to `[0, 1]` per channel using the absolute channel bounds.
pub fn normalize_lab(img: &PlanarImage) -> Result<PlanarImage> {
    if img.space() != ColorSpace::Cielab {
        return Err(Error::invalid(format!(
            "normalize_lab expects a CIELAB image, got {:?}",
            img.space()
        )));
    }
    Ok(map_pixels(img, ColorSpace::Lab01, |[l, a, b]| {
        [
            normalize(l, L_BOUNDS),
            normalize(a, AB_BOUNDS),
            normalize(b, AB_BOUNDS),
        ]
    }))
}

/// Inverse of [`normalize_lab`].
pub fn denormalize_lab(img: &PlanarImage) -> Result<PlanarImage> {
    if img.space() != ColorSpace::Lab01 {
        return Err(Error::invalid(format!(
            "denormalize_lab expects a LAB01 image, got {:?}",
            img.space()
        )));
    }
    let lift = |v: f64, (lo, hi): (f64, f64)| lo + v * (hi - lo);
    Ok(map_pixels(img, ColorSpace::Cielab, |[l, a, b]| {
        [lift(l, L_BOUNDS), lift(a, AB_BOUNDS), lift(b, AB_BOUNDS)]
    }))
}

/// RGB01 straight to LAB01, the network input space.
pub fn rgb_to_lab01(img: &PlanarImage) -> Result<PlanarImage> {
    normalize_lab(&rgb_to_cielab(img)?)
}

/// Grayscale as `L*/100`.
pub fn to_grayscale(img: &PlanarImage) -> Result<PlanarImage> {
    let lightness: Vec<f64> = match img.space() {
        ColorSpace::Gray01 => {
            return Err(Error::invalid("to_grayscale needs a 3-channel image"));
        }
        ColorSpace::Rgb01 => rgb_to_cielab(img)?.plane(0).iter().map(|l| l / 100.0).collect(),
        ColorSpace::Cielab => img.plane(0).iter().map(|l| l / 100.0).collect(),
        ColorSpace::Lab01 => img.plane(0).to_vec(),
    };
    Ok(PlanarImage::from_parts(
        img.width(),
        img.height(),
        ColorSpace::Gray01,
        lightness,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Scalar re-derivation kept apart from the matrix code path above.
    fn oracle(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
        let x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / 0.950456;
        let y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
        let z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / 1.088754;
        let f = |t: f64| {
            if t > 0.008856 {
                t.powf(1.0 / 3.0)
            } else {
                7.787 * t + 16.0 / 116.0
            }
        };
        let l = if y > 0.008856 {
            116.0 * y.powf(1.0 / 3.0) - 16.0
        } else {
            903.3 * y
        };
        (l, 500.0 * (f(x) - f(y)), 200.0 * (f(y) - f(z)))
    }

    fn single(rgb: [f64; 3]) -> PlanarImage {
        PlanarImage::new(1, 1, ColorSpace::Rgb01, rgb.to_vec()).unwrap()
    }

    #[test]
    fn anchors() {
        let white = rgb_to_cielab(&single([1.0; 3])).unwrap();
        assert!((white.get(0, 0, 0) - 100.0).abs() < 1e-6);
        assert!(white.get(0, 0, 1).abs() < 1e-6);
        assert!(white.get(0, 0, 2).abs() < 1e-6);

        let black = rgb_to_cielab(&single([0.0; 3])).unwrap();
        assert_eq!(black.pixel(0, 0), vec![0.0, 0.0, 0.0]);

        // 116 * 0.5^(1/3) - 16, Y = 0.5 since the middle matrix row sums to 1.
        let gray = rgb_to_cielab(&single([0.5; 3])).unwrap();
        let expected = 116.0 * 0.5f64.powf(1.0 / 3.0) - 16.0;
        assert!((expected - 76.0693).abs() < 1e-4);
        assert!((gray.get(0, 0, 0) - expected).abs() < 1e-9);
        assert!(gray.get(0, 0, 1).abs() < 1e-6);
        assert!(gray.get(0, 0, 2).abs() < 1e-6);
    }

    #[test]
    fn normalization_anchors() {
        let lab = PlanarImage::new(3, 1, ColorSpace::Cielab, vec![50.0, 0.0, 100.0, 0.0, 127.0, -127.0, -127.0, 0.0, 127.0])
            .unwrap();
        let n = normalize_lab(&lab).unwrap();
        assert_eq!(n.get(0, 0, 0), 0.5);
        assert_eq!(n.get(0, 0, 1), 0.5);
        assert_eq!(n.get(0, 0, 2), 0.0);
        assert_eq!(n.get(2, 0, 0), 1.0);
        let back = denormalize_lab(&n).unwrap();
        for (a, b) in back.samples().iter().zip(lab.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grayscale_anchors() {
        let g = |v: f64| to_grayscale(&single([v; 3])).unwrap().get(0, 0, 0);
        assert!((g(1.0) - 1.0).abs() < 1e-9);
        assert_eq!(g(0.0), 0.0);
        assert!((g(0.5) - 0.760693).abs() < 1e-6);
        let gray = PlanarImage::filled(2, 2, ColorSpace::Gray01, 0.3).unwrap();
        assert!(to_grayscale(&gray).is_err());
    }

    #[test]
    fn wrong_space_is_rejected() {
        let lab = rgb_to_cielab(&single([0.2, 0.4, 0.6])).unwrap();
        assert!(rgb_to_cielab(&lab).is_err());
        assert!(normalize_lab(&single([0.1; 3])).is_err());
    }

    #[test]
    fn matches_scalar_oracle_on_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let rgb = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let got = rgb_to_lab_pixel(rgb);
            let (l, a, b) = oracle(rgb[0], rgb[1], rgb[2]);
            assert!((got[0] - l).abs() < 1e-6, "{rgb:?}");
            assert!((got[1] - a).abs() < 1e-6, "{rgb:?}");
            assert!((got[2] - b).abs() < 1e-6, "{rgb:?}");
        }
    }

    proptest! {
        #[test]
        fn conversion_stays_in_declared_boxes(r in 0.0..=1.0f64, g in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let lab = rgb_to_cielab(&single([r, g, b])).unwrap();
            let (l, a, bb) = (lab.get(0, 0, 0), lab.get(0, 0, 1), lab.get(0, 0, 2));
            prop_assert!((0.0..=100.0).contains(&l));
            prop_assert!((-127.0..=127.0).contains(&a));
            prop_assert!((-127.0..=127.0).contains(&bb));
            let n = normalize_lab(&lab).unwrap();
            prop_assert!(n.samples().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn normalization_preserves_order(a in -127.0..127.0f64, b in -127.0..127.0f64) {
            let lab = PlanarImage::new(2, 1, ColorSpace::Cielab, vec![50.0, 50.0, a, b, b, a]).unwrap();
            let n = normalize_lab(&lab).unwrap();
            prop_assert_eq!(a < b, n.get(0, 0, 1) < n.get(1, 0, 1));
            prop_assert_eq!(b < a, n.get(0, 0, 2) < n.get(1, 0, 2));
        }
    }
}
