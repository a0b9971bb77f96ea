//! Semi-synthetic tattooed-skin generation: procedural or loaded templates
//! blended onto skin bases with colour, blur and opacity degradations, then
//! cropped around the tattoo and written out with a manifest.

mod compose;
mod dataset;
mod skin;
mod template;

pub use compose::{
    compose, crop_rect, crop_to_tattoo, AugmentationParams, AugmentationRanges, Mask,
    SyntheticSample, MASK_EPS,
};
pub use dataset::{
    build_dataset, build_dataset_with, plan_dataset, render_sample, DatasetConfig, DatasetManifest,
    ManifestEntry, PlannedSample, DATASET_META_FILE, MANIFEST_FILE,
};
pub use skin::{load_skin_dir, procedural_skin, procedural_skins, SkinBase};
pub use template::{
    generate_glyph_template, load_template_dir, procedural_templates, TattooTemplate, MIN_PEAK_INK,
    MIN_TEMPLATE_SIDE,
};
