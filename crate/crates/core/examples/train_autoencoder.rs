//! Trains the default 31x31 convolutional autoencoder on synthetic skin
//! crops, saves it, reloads it and uses the encoder as a descriptor.
//!
//! cargo run --release --example train_autoencoder [-- images epochs]

use dfe_track::dfe::{load_model, save_with_history, train, CaeConfig, DfeEncoder, TrainOptions};
use dfe_track::matchcore::{landscape_for, match_feature, DenseDescriber};
use dfe_track::synthgen::{generate, training_images, Motion, Regime, SynthSpec};
use dfe_track::trainpipe::crops_from_images;

fn main() -> dfe_track::Result<()> {
    let mut args = std::env::args().skip(1);
    let images: usize = args.next().map_or(8, |s| s.parse().expect("image count"));
    let epochs: usize = args.next().map_or(1, |s| s.parse().expect("epoch count"));

    let train_set = crops_from_images(&training_images(images, 241, 241, 1), 31, 30)?;
    let heldout = crops_from_images(&training_images(2, 241, 241, 2), 31, 30)?;
    let config = CaeConfig::default();
    println!(
        "{} training crops, latent {:?} ({}x compression), {} parameters",
        train_set.len(),
        config.latent_shape(),
        config.compression_factor(),
        config.param_count()
    );

    let opts = TrainOptions { epochs, ..TrainOptions::default() };
    let state = train(config, &train_set, &opts)?;
    for r in &state.history {
        println!("epoch {}: training mse {:.5}", r.epoch, r.mse);
    }
    println!("held-out mse {:.5}", state.model.reconstruction_loss(&heldout.all())?);

    let path = std::env::temp_dir().join("example.dfecae");
    save_with_history(&state.model, &state.history, &path)?;
    let encoder = DfeEncoder::new(load_model(&path)?);

    let mut spec = SynthSpec::preset(Regime::Static, 80, 80, 2, 9);
    spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [3.0, -2.0]] };
    let seq = generate(&spec)?;
    let a = encoder.prepare(&seq.frames[0])?;
    let b = encoder.prepare(&seq.frames[1])?;
    let (_, land) = landscape_for(&encoder, &a, seq.truth[0].round_to_pixel().unwrap(), &b)?;
    let m = match_feature(&land)?;
    println!("DFE match {} vs truth {}", m.subpixel_pos, seq.truth[1]);
    Ok(())
}
