use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamax::{Adamax, AdamaxConfig};
use super::config::CaeConfig;
use super::io::save_checkpoint;
use super::layers::Tensor;
use super::model::CaeModel;
use crate::error::{Error, Result};
use crate::raster::Crop;

/// In-memory set of equally sized crops, HWC per crop.
#[derive(Debug, Clone, PartialEq)]
pub struct CropDataset {
    size: usize,
    channels: usize,
    data: Vec<f32>,
}

impl CropDataset {
    pub fn new(size: usize, channels: usize) -> Self {
        CropDataset { size, channels, data: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn crop_len(&self) -> usize {
        self.size * self.size * self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.crop_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Appends a crop given in HWC order.
    pub fn push_hwc(&mut self, hwc: &[f64]) -> Result<()> {
        if hwc.len() != self.crop_len() {
            return Err(Error::invalid(format!(
                "crop has {} samples, dataset expects {}",
                hwc.len(),
                self.crop_len()
            )));
        }
        if hwc.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("training crops must be normalized to [0, 1]"));
        }
        self.data.extend(hwc.iter().map(|&v| v as f32));
        Ok(())
    }

    pub fn push(&mut self, crop: &Crop) -> Result<()> {
        if crop.size() != self.size || crop.image().channels() != self.channels {
            return Err(Error::invalid(format!(
                "crop is {}x{}x{}, dataset expects {}x{}x{}",
                crop.size(),
                crop.size(),
                crop.image().channels(),
                self.size,
                self.size,
                self.channels
            )));
        }
        self.push_hwc(&crop.to_hwc())
    }

    pub fn crop_hwc(&self, i: usize) -> &[f32] {
        let n = self.crop_len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Gathers the listed crops into one batch tensor.
    pub fn batch(&self, indices: &[usize]) -> Tensor<f32> {
        let mut data = Vec::with_capacity(indices.len() * self.crop_len());
        for &i in indices {
            data.extend_from_slice(self.crop_hwc(i));
        }
        Tensor::from_vec(indices.len(), self.size, self.size, self.channels, data)
    }

    /// Every crop as one batch.
    pub fn all(&self) -> Tensor<f32> {
        Tensor::from_vec(self.len(), self.size, self.size, self.channels, self.data.clone())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Total epochs; a resumed run continues until this many are done.
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamaxConfig,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            batch_size: 32,
            optimizer: AdamaxConfig::default(),
            checkpoint_every: 0,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mse: f64,
}

/// Model, optimizer and loss history of a (possibly resumed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: CaeModel,
    pub optimizer: Adamax<f32>,
    pub history: Vec<EpochRecord>,
    /// Training-mode loss of every batch of the most recent epoch.
    pub last_batch_losses: Vec<f64>,
}

impl TrainState {
    pub fn new(config: CaeConfig, optimizer: AdamaxConfig) -> Result<Self> {
        let model = CaeModel::new(config)?;
        let lens: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Ok(TrainState {
            optimizer: Adamax::new(optimizer, &lens),
            model,
            history: Vec::new(),
            last_batch_losses: Vec::new(),
        })
    }

    pub fn epochs_completed(&self) -> usize {
        self.history.len()
    }

    /// Batches of epoch `epoch`: a permutation drawn from stream `epoch` of
    /// the config seed, cut into `batch_size` chunks. A trailing single
    /// crop is dropped.
    pub fn epoch_batches(seed: u64, epoch: usize, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        order
            .chunks(batch_size)
            .filter(|c| c.len() >= 2)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// One epoch of Adamax steps; returns the crop-weighted mean batch loss.
    pub fn run_epoch(&mut self, data: &CropDataset, batch_size: usize) -> Result<f64> {
        let epoch = self.epochs_completed();
        let names = self.model.param_names();
        let mut weighted = 0.0;
        let mut count = 0usize;
        self.last_batch_losses.clear();
        for idx in Self::epoch_batches(self.model.config().seed, epoch, data.len(), batch_size) {
            let batch = data.batch(&idx);
            let step = self.model.loss_and_gradients(&batch)?;
            if !step.loss.is_finite() {
                return Err(Error::Numeric(format!("training loss is {} in epoch {epoch}", step.loss)));
            }
            self.optimizer.apply(self.model.params_mut(), &step.gradients, &names)?;
            self.model.apply_running_stats(&step);
            weighted += step.loss * idx.len() as f64;
            count += idx.len();
            self.last_batch_losses.push(step.loss);
        }
        let mse = weighted / count as f64;
        self.history.push(EpochRecord { epoch, mse });
        Ok(mse)
    }

    /// Trains until `opts.epochs` epochs are complete, writing checkpoints
    /// at the requested cadence.
    pub fn run(&mut self, data: &CropDataset, opts: &TrainOptions) -> Result<()> {
        check_dataset(self.model.config(), data, opts)?;
        while self.epochs_completed() < opts.epochs {
            let mse = self.run_epoch(data, opts.batch_size)?;
            let done = self.epochs_completed();
            log::info!("epoch {done}/{}: training mse {mse:.6}", opts.epochs);
            if let Some(dir) = &opts.checkpoint_dir {
                if opts.checkpoint_every > 0 && done.is_multiple_of(opts.checkpoint_every) {
                    save_checkpoint(self, dir.join(format!("checkpoint-{done:05}.dfecae")))?;
                }
            }
        }
        Ok(())
    }
}

fn check_dataset(config: &CaeConfig, data: &CropDataset, opts: &TrainOptions) -> Result<()> {
    if data.size() != config.input_size || data.channels() != config.channels {
        return Err(Error::invalid(format!(
            "dataset crops are {}x{}x{}, model expects {}x{}x{}",
            data.size(),
            data.size(),
            data.channels(),
            config.input_size,
            config.input_size,
            config.channels
        )));
    }
    if opts.batch_size < 2 {
        return Err(Error::invalid("batch size must be at least 2"));
    }
    if data.len() < 2 {
        return Err(Error::invalid("training needs a dataset of at least two crops"));
    }
    Ok(())
}

/// Trains a fresh model from `config`.
pub fn train(config: CaeConfig, data: &CropDataset, opts: &TrainOptions) -> Result<TrainState> {
    let mut state = TrainState::new(config, opts.optimizer)?;
    state.run(data, opts)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfe::config::BlockSpec;
    use rand::Rng;

    fn small_config() -> CaeConfig {
        CaeConfig {
            input_size: 9,
            channels: 3,
            encoder: vec![BlockSpec::new(4, 5), BlockSpec::new(8, 5)],
            seed: 11,
        }
    }

    fn dataset(n: usize, seed: u64) -> CropDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = CropDataset::new(9, 3);
        for _ in 0..n {
            let base: f64 = rng.gen_range(0.2..0.8);
            let v: Vec<f64> = (0..243).map(|_| base + rng.gen_range(-0.1..0.1)).collect();
            d.push_hwc(&v).unwrap();
        }
        d
    }

    #[test]
    fn batches_are_a_seeded_permutation() {
        let a = TrainState::epoch_batches(1, 0, 101, 10);
        assert_eq!(a, TrainState::epoch_batches(1, 0, 101, 10));
        assert_ne!(a, TrainState::epoch_batches(1, 1, 101, 10));
        assert_eq!(a.len(), 10);
        let mut all: Vec<usize> = a.concat();
        all.sort();
        assert_eq!(all.len(), 100);
        all.dedup();
        assert_eq!(all.len(), 100);
        assert_eq!(TrainState::epoch_batches(1, 0, 103, 10).last().unwrap().len(), 3);
    }

    #[test]
    fn repeated_crop_loss_decreases() {
        let one = dataset(1, 3);
        let mut d = CropDataset::new(9, 3);
        for _ in 0..64 {
            d.push_hwc(&one.crop_hwc(0).iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        }
        let opts = TrainOptions { epochs: 1, batch_size: 4, ..Default::default() };
        let state = train(small_config(), &d, &opts).unwrap();
        let l = &state.last_batch_losses;
        assert_eq!(l.len(), 16);
        assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
    }

    #[test]
    fn equal_seeds_equal_curves() {
        let d = dataset(40, 5);
        let opts = TrainOptions { epochs: 3, batch_size: 8, ..Default::default() };
        let a = train(small_config(), &d, &opts).unwrap();
        let b = train(small_config(), &d, &opts).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        assert!(a.history[2].mse < a.history[0].mse);
    }

    #[test]
    fn rejects_bad_inputs() {
        let opts = TrainOptions::default();
        assert!(train(small_config(), &CropDataset::new(9, 3), &opts).is_err());
        assert!(train(small_config(), &dataset(10, 1), &TrainOptions { batch_size: 1, ..opts.clone() }).is_err());
        assert!(train(CaeConfig::default(), &dataset(10, 1), &opts).is_err());
        assert!(CropDataset::new(9, 3).push_hwc(&[2.0; 243]).is_err());
    }
}
