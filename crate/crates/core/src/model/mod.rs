//! The template-reconstruction network: a cyclic image <-> template
//! translator, two independently weighted embedding backbones trained with
//! an additive angular margin loss, and the training loop that optimises
//! `(L_arc,image + L_arc,template + lambda * L_rec) / 3`.

mod arch;
pub mod checkpoint;
mod config;
mod jitter;
pub mod loss;
mod train;

pub use arch::{ArcHead, Backbone, ClassWeights, HeadWeights, Network, SampleLoss, Translator};
pub use config::{
    BackboneSpec, DecayMode, ImageRecTarget, JitterConfig, ModelConfig, TranslatorSpec,
};
pub use jitter::color_jitter;
pub use train::{
    read_loss_history, train, train_on, write_loss_history, LossRecord, TrainOptions, TrainState,
    TrainingData, CHECKPOINT_FILE, LOSS_HISTORY_FILE,
};
