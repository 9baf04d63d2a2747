//! Image representation, color conversion, crops and resolution pyramids.

mod color;
pub(crate) mod image;
mod io;
mod pyramid;

pub use self::color::{
    denormalize_lab, normalize_lab, rgb_to_cielab, rgb_to_lab01, rgb_to_lab_pixel, to_grayscale,
    AB_BOUNDS, L_BOUNDS, WHITE_X, WHITE_Z,
};
pub use self::image::{extract_crop, ColorSpace, Crop, PlanarImage};
pub use self::io::{is_raster_path, read_image, to_dynamic, write_image};
pub use self::pyramid::{
    build_pyramid, downsample_half, pyramid_coords, resize_bilinear, ImagePyramid,
    MAX_PYRAMID_LEVEL,
};
