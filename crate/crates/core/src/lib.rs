//! Skin-feature matching and tracking.
//!
//! The crate implements dense SSR-landscape matching with learned crop
//! encodings from a convolutional autoencoder ([`dfe`], [`matchcore`]), a
//! pyramidal Lucas-Kanade baseline ([`flow_lk`]), frame-by-frame tracking
//! under fixed or rolling references ([`tracker`]) and the chi-square
//! machinery used to decide whether tracking errors are explained by human
//! labelling noise ([`evalstat`]). [`synthgen`] produces image sequences with
//! exact ground truth for testing all of the above.
//!
//! Every coordinate is `(x, y)`: column rightward, row downward, origin at the
//! center of the top-left pixel.

pub mod cli;
pub mod dfe;
pub mod error;
pub mod evalstat;
pub mod flow_lk;
pub mod geom;
pub mod matchcore;
pub mod plot;
pub mod raster;
pub mod synthgen;
pub mod tracker;
pub mod trainpipe;

pub use error::{Error, Result};
pub use geom::{Pixel, Point};
