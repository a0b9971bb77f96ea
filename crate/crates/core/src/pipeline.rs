//! Glue between datasets, a trained model and retrieval features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::model::TrainState;
use crate::par::{self, Mode};
use crate::retrieval::FeatureVector;
use crate::synthgen::DatasetManifest;

/// Which embedding(s) make up a retrieval feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Raw-image embedding concatenated with the reconstructed-template
    /// embedding (`2K`).
    #[default]
    Full,
    /// Raw-image branch only (`K`).
    Raw,
    /// Reconstructed-template branch only (`K`).
    Template,
}

impl FeatureKind {
    /// Number of unit-norm segments in a feature of this kind.
    pub fn segments(self) -> usize {
        match self {
            FeatureKind::Full => 2,
            FeatureKind::Raw | FeatureKind::Template => 1,
        }
    }
}

/// Loads every sample image of a manifest at the model input side.
pub fn load_images(manifest: &DatasetManifest, side: usize) -> Result<Vec<Image>> {
    par::try_map_range(Mode::default(), manifest.entries.len(), |i| {
        let img = Image::load_png(&manifest.sample_path(&manifest.entries[i]), 3)?;
        Ok::<_, Error>(img.resize(side, side))
    })
}

/// Features of the given kind for a batch of input-side images.
pub fn image_features(
    state: &TrainState,
    images: &[Image],
    kind: FeatureKind,
    mode: Mode,
) -> Result<Vec<Vec<f32>>> {
    let full = state.extract_features_with(mode, images)?;
    let k = state.config.embedding_dim;
    Ok(full
        .into_iter()
        .map(|f| match kind {
            FeatureKind::Full => f,
            FeatureKind::Raw => f[..k].to_vec(),
            FeatureKind::Template => f[k..].to_vec(),
        })
        .collect())
}

/// Labelled features for every manifest entry, ids from the sample paths.
pub fn manifest_features(
    state: &TrainState,
    manifest: &DatasetManifest,
    kind: FeatureKind,
    mode: Mode,
) -> Result<Vec<FeatureVector>> {
    let images = load_images(manifest, state.config.input_side)?;
    let feats = image_features(state, &images, kind, mode)?;
    Ok(manifest
        .entries
        .iter()
        .zip(feats)
        .map(|(e, v)| FeatureVector::new(DatasetManifest::sample_id(e), e.label, v))
        .collect())
}
