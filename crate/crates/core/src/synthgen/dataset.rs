use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::par::{self, Mode};
use crate::seed;

use super::compose::{compose, crop_to_tattoo, AugmentationParams, AugmentationRanges};
use super::skin::SkinBase;
use super::template::TattooTemplate;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATASET_META_FILE: &str = "dataset.json";

/// Generation settings for [`build_dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub per_template_count: usize,
    pub global_seed: u64,
    /// Side of the emitted (cropped, resized) samples.
    pub output_side: usize,
    pub margin_frac: f32,
    pub ranges: AugmentationRanges,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            per_template_count: 50,
            global_seed: 0,
            output_side: 224,
            margin_frac: 0.1,
            ranges: AugmentationRanges::default(),
        }
    }
}

/// One manifest record. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub template_id: String,
    pub label: usize,
    pub params: AugmentationParams,
    pub target_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DatasetMeta {
    num_categories: usize,
    per_template_count: usize,
    global_seed: u64,
    output_side: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub num_categories: usize,
    pub per_template_count: usize,
    pub global_seed: u64,
    /// Directory the entry paths are relative to.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn sample_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn target_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.target_path)
    }

    /// Stable identifier of an entry, its sample path without extension.
    pub fn sample_id(entry: &ManifestEntry) -> String {
        entry.path.trim_end_matches(".png").to_string()
    }

    pub fn is_balanced(&self) -> bool {
        let mut counts = vec![0usize; self.num_categories];
        for e in &self.entries {
            if e.label >= self.num_categories {
                return false;
            }
            counts[e.label] += 1;
        }
        counts.iter().all(|&c| c == self.per_template_count)
    }

    /// Reads `manifest.jsonl` (or the given file) plus the sibling
    /// `dataset.json` when present.
    pub fn load(path: &Path) -> Result<Self> {
        let file_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let root = file_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let f = File::open(&file_path).map_err(|e| Error::io(&file_path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&file_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| Error::format("manifest", format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        let meta_path = root.join(DATASET_META_FILE);
        let (num_categories, per_template_count, global_seed) = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            let meta: DatasetMeta =
                serde_json::from_str(&text).map_err(|e| Error::format("dataset metadata", e))?;
            (
                meta.num_categories,
                meta.per_template_count,
                meta.global_seed,
            )
        } else {
            let n = entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
            let mut counts = vec![0usize; n];
            entries.iter().for_each(|e| counts[e.label] += 1);
            (n, counts.into_iter().min().unwrap_or(0), 0)
        };
        Ok(DatasetManifest {
            entries,
            num_categories,
            per_template_count,
            global_seed,
            root,
        })
    }
}

/// The generation decision for one sample, fixed before any rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedSample {
    pub template_index: usize,
    pub index_in_template: usize,
    pub pool: usize,
    pub base_index: usize,
    pub params: AugmentationParams,
}

/// Draws base choices and augmentation parameters for every sample.
///
/// With several base pools the samples of each template are split evenly
/// between them (first half from pool 0, second from pool 1, ...).
pub fn plan_dataset(
    templates: &[TattooTemplate],
    pools: &[Vec<SkinBase>],
    config: &DatasetConfig,
) -> Result<Vec<PlannedSample>> {
    if templates.is_empty() {
        return Err(Error::invalid_arg("template list is empty"));
    }
    if config.per_template_count == 0 {
        return Err(Error::invalid_arg("per_template_count must be at least 1"));
    }
    if pools.is_empty() || pools.iter().any(Vec::is_empty) {
        return Err(Error::invalid_arg(
            "every skin pool needs at least one base",
        ));
    }
    config.ranges.validate()?;
    let mut labels: Vec<usize> = templates.iter().map(|t| t.category_label).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != templates.len() {
        return Err(Error::invalid_arg(
            "template category labels must be unique",
        ));
    }
    let count = config.per_template_count;
    let mut plan = Vec::with_capacity(templates.len() * count);
    for (ti, _) in templates.iter().enumerate() {
        for j in 0..count {
            let sample_seed = seed::derive(
                config.global_seed,
                &[seed::STREAM_SAMPLE, ti as u64, j as u64],
            );
            let mut rng = seed::rng(sample_seed, &[]);
            let pool = j * pools.len() / count;
            let base_index = rng.random_range(0..pools[pool].len());
            let base = &pools[pool][base_index];
            let params = AugmentationParams::sample(&mut rng, &config.ranges, base, sample_seed);
            plan.push(PlannedSample {
                template_index: ti,
                index_in_template: j,
                pool,
                base_index,
                params,
            });
        }
    }
    Ok(plan)
}

/// Renders one planned sample: composite, crop, resize.
pub fn render_sample(
    planned: &PlannedSample,
    templates: &[TattooTemplate],
    pools: &[Vec<SkinBase>],
    config: &DatasetConfig,
) -> Result<(Image, Image)> {
    let template = &templates[planned.template_index];
    let base = &pools[planned.pool][planned.base_index];
    let full = compose(template, base, &planned.params)?;
    let cropped = crop_to_tattoo(&full, config.margin_frac, config.output_side)?;
    Ok((cropped.image, cropped.target))
}

pub fn build_dataset(
    templates: &[TattooTemplate],
    pools: &[Vec<SkinBase>],
    config: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    build_dataset_with(Mode::default(), templates, pools, config, out_dir)
}

/// Generates the balanced dataset under `out_dir`: `samples/*.png`,
/// `targets/*.png`, `manifest.jsonl` and `dataset.json`. Output bytes depend
/// only on the inputs and `config.global_seed`.
pub fn build_dataset_with(
    mode: Mode,
    templates: &[TattooTemplate],
    pools: &[Vec<SkinBase>],
    config: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let plan = plan_dataset(templates, pools, config)?;
    let samples_dir = out_dir.join("samples");
    let targets_dir = out_dir.join("targets");
    for d in [&samples_dir, &targets_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let entries = par::try_map_range(mode, plan.len(), |i| {
        let p = &plan[i];
        let template = &templates[p.template_index];
        let name = format!(
            "{:05}_{:04}.png",
            template.category_label, p.index_in_template
        );
        let (image, target) = render_sample(p, templates, pools, config)?;
        image.save_png(&samples_dir.join(&name))?;
        target.save_png(&targets_dir.join(&name))?;
        Ok::<_, Error>(ManifestEntry {
            path: format!("samples/{name}"),
            template_id: template.id.clone(),
            label: template.category_label,
            params: p.params.clone(),
            target_path: format!("targets/{name}"),
        })
    })?;
    let num_categories = templates
        .iter()
        .map(|t| t.category_label + 1)
        .max()
        .unwrap_or(0);
    let manifest = DatasetManifest {
        entries,
        num_categories,
        per_template_count: config.per_template_count,
        global_seed: config.global_seed,
        root: out_dir.to_path_buf(),
    };
    write_manifest(&manifest, config.output_side)?;
    Ok(manifest)
}

fn write_manifest(manifest: &DatasetManifest, output_side: usize) -> Result<()> {
    let path = manifest.root.join(MANIFEST_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(f);
    for e in &manifest.entries {
        let line = serde_json::to_string(e).map_err(|e| Error::format("manifest", e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let meta = DatasetMeta {
        num_categories: manifest.num_categories,
        per_template_count: manifest.per_template_count,
        global_seed: manifest.global_seed,
        output_side,
    };
    let meta_path = manifest.root.join(DATASET_META_FILE);
    let text =
        serde_json::to_string_pretty(&meta).map_err(|e| Error::format("dataset metadata", e))?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))
}
