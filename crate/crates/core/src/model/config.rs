use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the configured `decay` factor is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Learning rate at epoch `e` is `lr * decay^e`.
    LrSchedule,
    /// `decay` is an L2 weight-decay coefficient added to the gradient.
    WeightDecay,
}

/// Target of the image-reconstruction BCE term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageRecTarget {
    /// Cycle consistency: the reconstructed image is compared to the input.
    Input,
    /// Compare the reconstructed image to the clean template (replicated
    /// over colour channels).
    Template,
}

/// Encoder-decoder size for the translation networks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorSpec {
    /// Channels at full resolution; doubled at each of the two downsamplings.
    pub base_channels: usize,
}

impl Default for TranslatorSpec {
    fn default() -> Self {
        TranslatorSpec { base_channels: 8 }
    }
}

/// Strided convolutional encoder followed by global average pooling and a
/// linear projection to the embedding size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneSpec {
    pub name: String,
    pub base_channels: usize,
    pub stages: usize,
    /// Extra stride-1 convolutions after each stride-2 one.
    pub extra_convs_per_stage: usize,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            name: "strided-cnn".into(),
            base_channels: 16,
            stages: 4,
            extra_convs_per_stage: 0,
        }
    }
}

/// Colour-jitter magnitudes applied to training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterConfig {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    /// Fraction of a full hue turn.
    pub hue: f32,
}

impl Default for JitterConfig {
    fn default() -> Self {
        JitterConfig {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            hue: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Size K of each branch embedding; the retrieval feature has 2K values.
    pub embedding_dim: usize,
    /// Additive angular margin m (radians).
    pub margin: f64,
    /// Logit scale s.
    pub scale: f64,
    /// Weight of the reconstruction loss in the combined objective.
    pub lambda: f64,
    pub num_classes: usize,
    pub input_side: usize,
    pub translator: TranslatorSpec,
    pub backbone: BackboneSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub decay: f64,
    pub decay_mode: DecayMode,
    pub image_rec_target: ImageRecTarget,
    pub jitter: JitterConfig,
    /// Write a numbered checkpoint every this many epochs (0 = only the
    /// rolling latest checkpoint).
    pub checkpoint_every: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 512,
            margin: 0.5,
            scale: 64.0,
            lambda: 4.0,
            num_classes: 0,
            input_side: 224,
            translator: TranslatorSpec::default(),
            backbone: BackboneSpec::default(),
            epochs: 100,
            batch_size: 64,
            lr: 1e-5,
            decay: 0.95,
            decay_mode: DecayMode::LrSchedule,
            image_rec_target: ImageRecTarget::Input,
            jitter: JitterConfig::default(),
            checkpoint_every: 10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid_arg(msg));
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be positive".into());
        }
        if !(0.0..std::f64::consts::PI).contains(&self.margin) {
            return fail(format!("margin {} outside [0, pi)", self.margin));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return fail(format!("scale {} must be positive", self.scale));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be >= 0", self.lambda));
        }
        if self.num_classes == 0 {
            return fail("num_classes must be positive".into());
        }
        if self.input_side < 16 || !self.input_side.is_multiple_of(4) {
            return fail(format!(
                "input_side {} must be a multiple of 4, at least 16",
                self.input_side
            ));
        }
        if self.translator.base_channels == 0
            || self.backbone.base_channels == 0
            || self.backbone.stages == 0
        {
            return fail("network widths and depths must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.decay >= 0.0 && self.decay.is_finite())
        {
            return fail("lr must be positive and decay non-negative".into());
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.decay_mode {
            DecayMode::LrSchedule => self.lr * self.decay.powi(epoch as i32),
            DecayMode::WeightDecay => self.lr,
        }
    }

    pub fn weight_decay(&self) -> f64 {
        match self.decay_mode {
            DecayMode::LrSchedule => 0.0,
            DecayMode::WeightDecay => self.decay,
        }
    }

    pub fn feature_len(&self) -> usize {
        2 * self.embedding_dim
    }
}
