use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{accumulate, Adam, AdamConfig, FeatureMap};
use crate::par::{self, Mode};
use crate::seed;
use crate::synthgen::DatasetManifest;

use super::arch::{Network, SampleLoss};
use super::checkpoint;
use super::config::ModelConfig;
use super::jitter::color_jitter;
use super::loss;

pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Epoch means of the logged loss components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub arc_image: f64,
    pub arc_template: f64,
    pub rec: f64,
    pub total: f64,
}

/// Parameters, optimiser state and progress of a training run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: ModelConfig,
    pub network: Network,
    pub params: Vec<f32>,
    pub optimizer: Adam,
    /// Completed epochs.
    pub epoch: usize,
    pub history: Vec<LossRecord>,
    pub seed: u64,
}

pub(crate) fn image_to_map(img: &Image) -> FeatureMap {
    FeatureMap::new(
        img.channels(),
        img.height(),
        img.width(),
        img.data().to_vec(),
    )
}

pub(crate) fn map_to_image(map: FeatureMap) -> Image {
    Image::from_planar(map.channels, map.width, map.height, map.data)
        .expect("consistent feature map")
}

impl TrainState {
    /// Freshly initialised, untrained state.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let network = Network::new(config)?;
        let params = network.init_params(seed);
        let adam_config = AdamConfig {
            weight_decay: config.weight_decay() as f32,
            ..Default::default()
        };
        Ok(TrainState {
            config: config.clone(),
            optimizer: Adam::new(adam_config, params.len()),
            network,
            params,
            epoch: 0,
            history: Vec::new(),
            seed,
        })
    }

    fn check_batch(&self, images: &[Image], channels: usize) -> Result<()> {
        let s = self.config.input_side;
        for img in images {
            if img.channels() != channels || img.width() != s || img.height() != s {
                return Err(Error::invalid_arg(format!(
                    "expected {channels}x{s}x{s} images, got {}x{}x{}",
                    img.channels(),
                    img.height(),
                    img.width()
                )));
            }
        }
        Ok(())
    }

    /// Reconstructed templates and the cycle-reconstructed images.
    pub fn itt_forward(&self, images: &[Image]) -> Result<(Vec<Image>, Vec<Image>)> {
        self.check_batch(images, 3)?;
        let out = par::try_map_range(Mode::default(), images.len(), |i| {
            let (rt, ri) = self
                .network
                .translate(&self.params, image_to_map(&images[i]))?;
            Ok::<_, Error>((map_to_image(rt), map_to_image(ri)))
        })?;
        Ok(out.into_iter().unzip())
    }

    /// Unit-norm embeddings from the raw-image branch.
    pub fn embed_raw(&self, images: &[Image]) -> Result<Vec<Vec<f32>>> {
        self.check_batch(images, 3)?;
        par::try_map_range(Mode::default(), images.len(), |i| {
            self.network
                .embed_image(&self.params, image_to_map(&images[i]))
        })
    }

    /// Unit-norm embeddings from the template branch.
    pub fn embed_template(&self, templates: &[Image]) -> Result<Vec<Vec<f32>>> {
        self.check_batch(templates, 1)?;
        par::try_map_range(Mode::default(), templates.len(), |i| {
            self.network
                .embed_template(&self.params, image_to_map(&templates[i]))
        })
    }

    /// `2K` retrieval features: raw-image embedding followed by the embedding
    /// of the reconstructed template. The halves are each unit-norm and the
    /// concatenation is not re-normalised.
    pub fn extract_features(&self, images: &[Image]) -> Result<Vec<Vec<f32>>> {
        self.extract_features_with(Mode::default(), images)
    }

    pub fn extract_features_with(&self, mode: Mode, images: &[Image]) -> Result<Vec<Vec<f32>>> {
        self.check_batch(images, 3)?;
        par::try_map_range(mode, images.len(), |i| {
            self.network.feature(&self.params, image_to_map(&images[i]))
        })
    }
}

/// Training images, clean-template targets and labels held in memory.
#[derive(Clone, Debug, Default)]
pub struct TrainingData {
    pub images: Vec<Image>,
    pub targets: Vec<Image>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl TrainingData {
    /// Loads every manifest entry, resizing to `side` when needed.
    pub fn load(manifest: &DatasetManifest, side: usize) -> Result<Self> {
        let loaded = par::try_map_range(Mode::default(), manifest.entries.len(), |i| {
            let e = &manifest.entries[i];
            let img = Image::load_png(&manifest.sample_path(e), 3)?;
            let tgt = Image::load_png(&manifest.target_path(e), 1)?;
            Ok::<_, Error>((img.resize(side, side), tgt.resize(side, side), e.label))
        })?;
        let mut data = TrainingData {
            num_classes: manifest.num_categories,
            ..Default::default()
        };
        for (img, tgt, label) in loaded {
            data.images.push(img);
            data.targets.push(tgt);
            data.labels.push(label);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Knobs that do not belong in the persisted model config.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub seed: u64,
    /// Directory for checkpoints and the loss history; `None` keeps the run
    /// in memory.
    pub out_dir: Option<PathBuf>,
    pub mode: Mode,
    /// Stop after this many epochs in this call (resumable later).
    pub max_epochs_this_call: Option<usize>,
}

/// Loads the manifest and trains from scratch. See [`train_on`].
pub fn train(
    manifest: &DatasetManifest,
    config: &ModelConfig,
    out: &Path,
    seed: u64,
) -> Result<TrainState> {
    if manifest.num_categories != config.num_classes {
        return Err(Error::invalid_arg(format!(
            "manifest has {} categories, config expects {}",
            manifest.num_categories, config.num_classes
        )));
    }
    let data = TrainingData::load(manifest, config.input_side)?;
    let opts = TrainOptions {
        seed,
        out_dir: Some(out.to_path_buf()),
        ..Default::default()
    };
    train_on(&data, TrainState::new(config, seed)?, &opts, |_| {})
}

/// Runs mini-batch Adam on the combined loss from `state.epoch` up to
/// `state.config.epochs`, calling `on_epoch` after every epoch.
///
/// Inputs get colour jitter, targets never do. Batches are evaluated per
/// sample (possibly in parallel) and reduced in a fixed order, so results
/// only depend on the seed. A non-finite loss writes `checkpoint_abort.bin`
/// (when an output directory is set) and returns an invalid-state error.
pub fn train_on(
    data: &TrainingData,
    mut state: TrainState,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&LossRecord),
) -> Result<TrainState> {
    let cfg = state.config.clone();
    if data.is_empty() {
        return Err(Error::invalid_arg("no training samples"));
    }
    if data.num_classes != cfg.num_classes || data.labels.iter().any(|&l| l >= cfg.num_classes) {
        return Err(Error::invalid_arg(format!(
            "training data has {} categories, config expects {}",
            data.num_classes, cfg.num_classes
        )));
    }
    state.check_batch(&data.images, 3)?;
    state.check_batch(&data.targets, 1)?;
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let net = state.network.clone();
    let n_params = net.num_params();
    let end = match opts.max_epochs_this_call {
        Some(n) => cfg.epochs.min(state.epoch + n),
        None => cfg.epochs,
    };
    while state.epoch < end {
        let epoch = state.epoch;
        let lr = cfg.lr_at(epoch) as f32;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut seed::rng(
            opts.seed,
            &[seed::STREAM_SHUFFLE, epoch as u64],
        ));
        let mut sums = SampleLoss::default();
        for batch in order.chunks(cfg.batch_size) {
            let heads = net.head_weights(&state.params);
            let params = &state.params;
            let results = par::map_slice(opts.mode, batch, |&idx| {
                let mut rng =
                    seed::rng(opts.seed, &[seed::STREAM_JITTER, epoch as u64, idx as u64]);
                let input = color_jitter(&data.images[idx], &cfg.jitter, &mut rng);
                let mut grads = vec![0.0f32; n_params];
                let target = image_to_map(&data.targets[idx]);
                let loss = net.sample_gradient(
                    params,
                    &heads,
                    image_to_map(&input),
                    &target,
                    data.labels[idx],
                    &mut grads,
                );
                loss.map(|l| (l, grads))
            });
            let mut grads = vec![0.0f32; n_params];
            for r in results {
                let (l, g) = r?;
                if ![l.arc_image, l.arc_template, l.rec_template, l.rec_image]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(abort(&state, opts, "non-finite sample loss"));
                }
                sums.arc_image += l.arc_image;
                sums.arc_template += l.arc_template;
                sums.rec_template += l.rec_template;
                sums.rec_image += l.rec_image;
                accumulate(&mut grads, &g);
            }
            let inv = 1.0 / batch.len() as f32;
            grads.iter_mut().for_each(|g| *g *= inv);
            net.finish_gradient(&heads, &mut grads);
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(abort(&state, opts, "non-finite gradient"));
            }
            state.optimizer.update(&mut state.params, &grads, lr);
        }
        let n = data.len() as f64;
        let (arc_image, arc_template, rec) =
            (sums.arc_image / n, sums.arc_template / n, sums.rec() / n);
        let total = match loss::total_loss(arc_image, arc_template, rec, cfg.lambda) {
            Ok(t) => t,
            Err(e) => return Err(abort(&state, opts, &e.to_string())),
        };
        let record = LossRecord {
            epoch: epoch + 1,
            arc_image,
            arc_template,
            rec,
            total,
        };
        state.epoch += 1;
        state.history.push(record);
        on_epoch(&record);
        if let Some(dir) = &opts.out_dir {
            write_loss_history(&state.history, &dir.join(LOSS_HISTORY_FILE))?;
            checkpoint::save(&state, &dir.join(CHECKPOINT_FILE))?;
            if cfg.checkpoint_every > 0 && state.epoch.is_multiple_of(cfg.checkpoint_every) {
                checkpoint::save(
                    &state,
                    &dir.join(format!("checkpoint_epoch_{:04}.bin", state.epoch)),
                )?;
            }
        }
    }
    Ok(state)
}

fn abort(state: &TrainState, opts: &TrainOptions, why: &str) -> Error {
    if let Some(dir) = &opts.out_dir {
        let path = dir.join("checkpoint_abort.bin");
        if let Err(e) = checkpoint::save(state, &path) {
            return Error::invalid_state(format!(
                "{why} at epoch {}; abort checkpoint failed: {e}",
                state.epoch + 1
            ));
        }
    }
    Error::invalid_state(format!("{why} at epoch {}", state.epoch + 1))
}

/// Writes `epoch,L_I_arc,L_T_arc,L_rec,total`.
pub fn write_loss_history(history: &[LossRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("loss history", e))?;
    let csv_err = |e: csv::Error| Error::format("loss history", e);
    w.write_record(["epoch", "L_I_arc", "L_T_arc", "L_rec", "total"])
        .map_err(csv_err)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.arc_image.to_string(),
            r.arc_template.to_string(),
            r.rec.to_string(),
            r.total.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_loss_history(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format("loss history", e))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| Error::format("loss history", e))?;
        let f = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format("loss history", format!("bad field {i}")))
        };
        out.push(LossRecord {
            epoch: f(0)? as usize,
            arc_image: f(1)?,
            arc_template: f(2)?,
            rec: f(3)?,
            total: f(4)?,
        });
    }
    Ok(out)
}
