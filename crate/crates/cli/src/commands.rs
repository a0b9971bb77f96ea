//! Subcommand implementations. Each resolves its output directory, writes a
//! `run_config.toml` there and delegates to `tattoo-core`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use tattoo_core::evalkit::{self, SampleRef, SplitMode};
use tattoo_core::imaging::Image;
use tattoo_core::model::{
    checkpoint, train_on, ModelConfig, TrainOptions, TrainState, TrainingData, CHECKPOINT_FILE,
};
use tattoo_core::par::Mode;
use tattoo_core::pipeline::{self, FeatureKind};
use tattoo_core::retrieval::{self, FeatureVector, Gallery};
use tattoo_core::synthgen::{self, DatasetManifest, MANIFEST_FILE};

use crate::run::{output_dir, ConfigFile, EvalSettings, RunConfig, SplitProtocol};
use crate::{plot, EnrollArgs, EvalArgs, EvalMode, GenDataArgs, PlotArgs, SearchArgs, TrainArgs};

const TEMPLATE_SIDE: usize = 128;
const SKIN_SIDE: usize = 256;
const SKINS_PER_POOL: usize = 6;
pub const GALLERY_FILE: &str = "gallery.csv";
pub const FEATURES_FILE: &str = "features.csv";

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let mut cfg = file.synth.unwrap_or_default();
    cfg.global_seed = args.seed;
    if let Some(m) = args.per_template {
        cfg.per_template_count = m;
    }
    if let Some(s) = args.side {
        cfg.output_side = s;
    }
    let out = output_dir(args.out.out, "gen-data")?;

    let templates = match &args.template_dir {
        Some(dir) => synthgen::load_template_dir(dir, TEMPLATE_SIDE)?,
        None => synthgen::procedural_templates(args.templates, args.seed, TEMPLATE_SIDE)?,
    };
    let pools = if args.skin_dir.is_empty() {
        // Two procedural pools stand in for two skin databases.
        (0..2u64)
            .map(|p| {
                synthgen::procedural_skins(
                    SKINS_PER_POOL,
                    args.seed.wrapping_add(p),
                    SKIN_SIDE,
                    SKIN_SIDE,
                )
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        args.skin_dir
            .iter()
            .map(|d| synthgen::load_skin_dir(d, TEMPLATE_SIDE / 2))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut run = RunConfig::new("gen-data", Some(args.seed))
        .input("templates", templates.len())
        .input("out", path_str(&out));
    if let Some(d) = &args.template_dir {
        run = run.input("template_dir", path_str(d));
    }
    for (i, d) in args.skin_dir.iter().enumerate() {
        run = run.input(&format!("skin_dir_{i}"), path_str(d));
    }
    run.synth = Some(cfg.clone());
    run.write(&out)?;

    let manifest = synthgen::build_dataset(&templates, &pools, &cfg, &out)?;
    eprintln!(
        "generated {} samples over {} categories",
        manifest.entries.len(),
        manifest.num_categories
    );
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

fn model_config(
    base: Option<ModelConfig>,
    args: &TrainArgs,
    manifest: &DatasetManifest,
) -> ModelConfig {
    let mut cfg = base.unwrap_or_default();
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.embedding_dim {
        cfg.embedding_dim = v;
    }
    if let Some(v) = args.input_side {
        cfg.input_side = v;
    }
    if cfg.num_classes == 0 {
        cfg.num_classes = manifest.num_categories;
    }
    cfg
}

pub fn train(args: TrainArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let file = ConfigFile::load(args.config.as_deref())?;
    let cfg = model_config(file.model, &args, &manifest);
    cfg.validate()?;
    ensure!(
        cfg.num_classes == manifest.num_categories,
        "config expects {} categories, manifest has {}",
        cfg.num_classes,
        manifest.num_categories
    );
    let state = match &args.resume {
        Some(path) => {
            let mut state = checkpoint::load_compatible(path, &cfg)?;
            state.config.epochs = cfg.epochs;
            state
        }
        None => TrainState::new(&cfg, args.seed)?,
    };
    let out = output_dir(args.out.out, "train")?;
    let mut run = RunConfig::new("train", Some(args.seed))
        .input("manifest", path_str(&args.manifest))
        .input("out", path_str(&out));
    if let Some(r) = &args.resume {
        run = run.input("resume", path_str(r));
    }
    run.model = Some(state.config.clone());
    run.write(&out)?;

    let data = TrainingData::load(&manifest, cfg.input_side)?;
    let opts = TrainOptions {
        seed: state.seed,
        out_dir: Some(out.clone()),
        mode: Mode::default(),
        max_epochs_this_call: None,
    };
    train_on(&data, state, &opts, |r| {
        eprintln!(
            "epoch {:>4}  L_I_arc {:.4}  L_T_arc {:.4}  L_rec {:.4}  total {:.4}",
            r.epoch, r.arc_image, r.arc_template, r.rec, r.total
        )
    })?;
    println!("{}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

/// Features for a manifest under a checkpoint.
fn extract(
    manifest: &Path,
    checkpoint_path: &Path,
    kind: FeatureKind,
) -> Result<(usize, Vec<FeatureVector>)> {
    let manifest = DatasetManifest::load(manifest)?;
    let state = checkpoint::load(checkpoint_path)?;
    let feats = pipeline::manifest_features(&state, &manifest, kind, Mode::default())?;
    Ok((state.config.embedding_dim, feats))
}

fn load_or_extract(
    features: &Option<PathBuf>,
    manifest: &Option<PathBuf>,
    checkpoint_path: &Option<PathBuf>,
    kind: FeatureKind,
) -> Result<(usize, Vec<FeatureVector>)> {
    match (features, manifest, checkpoint_path) {
        (Some(f), _, _) => Ok(retrieval::read_features(f)?),
        (None, Some(m), Some(c)) => extract(m, c, kind),
        _ => bail!("give either --features or both --manifest and --checkpoint"),
    }
}

fn segments(k: usize, feats: &[FeatureVector]) -> Result<usize> {
    let len = feats
        .first()
        .map(|f| f.values.len())
        .context("no features")?;
    ensure!(
        k > 0 && len % k == 0,
        "feature length {len} is not a multiple of K={k}"
    );
    Ok(len / k)
}

pub fn enroll(args: EnrollArgs) -> Result<()> {
    let kind = FeatureKind::from(args.feature);
    let (k, feats) = load_or_extract(&args.features, &args.manifest, &args.checkpoint, kind)?;
    let parts = segments(k, &feats)?;
    let gallery = Gallery::enroll_segments(feats, parts)?;
    let out = output_dir(args.out.out, "enroll")?;
    let mut run = RunConfig::new("enroll", None)
        .input("feature", format!("{kind:?}").to_lowercase())
        .input("out", path_str(&out));
    for (key, v) in [
        ("features", &args.features),
        ("manifest", &args.manifest),
        ("checkpoint", &args.checkpoint),
    ] {
        if let Some(p) = v {
            run = run.input(key, path_str(p));
        }
    }
    run.write(&out)?;
    let path = out.join(GALLERY_FILE);
    retrieval::write_features(&path, k, gallery.features())?;
    eprintln!(
        "enrolled {} samples from {} categories",
        gallery.len(),
        gallery.categories().len()
    );
    println!("{}", path.display());
    Ok(())
}

fn gallery_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(GALLERY_FILE)
    } else {
        p.to_path_buf()
    }
}

pub fn search(args: SearchArgs) -> Result<()> {
    let kind = FeatureKind::from(args.feature);
    let gpath = gallery_path(&args.gallery);
    let (k, feats) = retrieval::read_features(&gpath)?;
    let parts = segments(k, &feats)?;
    ensure!(
        parts == kind.segments(),
        "gallery holds {parts}-part features but --feature {kind:?} has {}",
        kind.segments()
    );
    let gallery = Gallery::enroll_segments(feats, parts)?;
    let state = checkpoint::load(&args.checkpoint)?;
    ensure!(
        state.config.embedding_dim == k,
        "checkpoint embeds into K={}, gallery has K={k}",
        state.config.embedding_dim
    );
    let side = state.config.input_side;
    let image = Image::load_png(&args.probe, 3)?.resize(side, side);
    let values = pipeline::image_features(&state, &[image], kind, Mode::default())?
        .pop()
        .context("no probe feature")?;
    let probe_id = args
        .probe
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "probe".into());
    let probe = FeatureVector::new(probe_id, usize::MAX, values);
    let list = gallery.search(&probe, args.top_k)?;
    let accepted = args.tau.map(|t| retrieval::decide(&list, t).len());

    let out = output_dir(args.out.out, "search")?;
    let mut run = RunConfig::new("search", None)
        .input("gallery", path_str(&gpath))
        .input("probe", path_str(&args.probe))
        .input("checkpoint", path_str(&args.checkpoint))
        .input("top_k", args.top_k)
        .input("out", path_str(&out));
    if let Some(t) = args.tau {
        run = run.input("tau", t);
    }
    run.write(&out)?;

    let mut w = csv::Writer::from_path(out.join("candidates.csv"))?;
    w.write_record(["rank", "sample_id", "label", "similarity", "accepted"])?;
    for (r, c) in list.entries.iter().enumerate() {
        let ok = accepted.is_none_or(|n| r < n);
        w.write_record([
            (r + 1).to_string(),
            c.sample_id.clone(),
            c.category_label.to_string(),
            c.similarity.to_string(),
            ok.to_string(),
        ])?;
        println!(
            "{:>4}  {:<24} label {:<6} similarity {:.4}{}",
            r + 1,
            c.sample_id,
            c.category_label,
            c.similarity,
            if ok { "" } else { "  (rejected)" }
        );
    }
    w.flush()?;
    if accepted == Some(0) {
        eprintln!(
            "no candidate reaches tau = {}",
            args.tau.unwrap_or_default()
        );
    }
    Ok(())
}

fn eval_settings(base: Option<EvalSettings>, args: &EvalArgs) -> EvalSettings {
    let mut s = base.unwrap_or_default();
    s.protocol = match args.mode {
        EvalMode::Closed => SplitProtocol::Closed,
        EvalMode::Open => SplitProtocol::Open,
    };
    s.feature = args.feature.into();
    if let Some(v) = args.splits {
        s.splits = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.rank {
        s.rank = v;
    }
    if let Some(v) = args.max_rank {
        s.max_rank = Some(v);
    }
    if let Some(v) = args.unenrolled_fraction {
        s.unenrolled_fraction = v;
    }
    s
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let settings = eval_settings(file.eval, &args);
    let (k, feats) = load_or_extract(
        &args.features,
        &args.manifest,
        &args.checkpoint,
        settings.feature,
    )?;
    let parts = segments(k, &feats)?;
    let out = output_dir(args.out.out, "eval")?;
    let mut run = RunConfig::new("eval", Some(settings.seed)).input("out", path_str(&out));
    for (key, v) in [
        ("features", &args.features),
        ("manifest", &args.manifest),
        ("checkpoint", &args.checkpoint),
    ] {
        if let Some(p) = v {
            run = run.input(key, path_str(p));
        }
    }
    run.eval = Some(settings.clone());
    run.write(&out)?;
    if args.features.is_none() {
        retrieval::write_features(&out.join(FEATURES_FILE), k, &feats)?;
    }

    let refs: Vec<SampleRef> = feats
        .iter()
        .map(|f| SampleRef {
            sample_id: f.sample_id.clone(),
            label: f.category_label,
        })
        .collect();
    let mode = match settings.protocol {
        SplitProtocol::Closed => SplitMode::Closed,
        SplitProtocol::Open => SplitMode::Open {
            unenrolled_fraction: settings.unenrolled_fraction,
        },
    };
    let splits = evalkit::make_splits(&refs, settings.splits, mode, settings.seed)?;
    fs::write(
        out.join("splits.json"),
        serde_json::to_string_pretty(&splits)?,
    )?;

    match settings.protocol {
        SplitProtocol::Closed => {
            let r_max = settings.max_rank.unwrap_or(usize::MAX);
            let summary = evalkit::evaluate_closed(Mode::default(), &feats, &splits, parts, r_max)?;
            evalkit::write_cmc_csv(&out.join("cmc.csv"), &summary)?;
            let (m1, s1) = summary.rank1();
            let mut rows = vec![("rank1_ir", m1, s1)];
            if summary.mean.len() >= 5 {
                rows.push(("rank5_ir", summary.mean[4], summary.std[4]));
            }
            evalkit::write_summary(&out.join("summary.csv"), &rows)?;
            eprintln!(
                "closed-set rank-1 IR {m1:.4} +/- {s1:.4} over {} splits",
                splits.len()
            );
        }
        SplitProtocol::Open => {
            let summary =
                evalkit::evaluate_open(Mode::default(), &feats, &splits, parts, settings.rank)?;
            evalkit::write_det_csv(&out.join("det.csv"), &summary)?;
            evalkit::write_summary(
                &out.join("summary.csv"),
                &[("eer", summary.eer.0, summary.eer.1)],
            )?;
            eprintln!(
                "open-set EER {:.4} +/- {:.4} over {} splits",
                summary.eer.0,
                summary.eer.1,
                splits.len()
            );
        }
    }
    println!("{}", out.display());
    Ok(())
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let pick = |explicit: &Option<PathBuf>, name: &str| {
        explicit.clone().or_else(|| {
            args.input
                .as_ref()
                .map(|d| d.join(name))
                .filter(|p| p.exists())
        })
    };
    let cmc = pick(&args.cmc, "cmc.csv");
    let det = pick(&args.det, "det.csv");
    ensure!(
        cmc.is_some() || det.is_some(),
        "nothing to plot: no cmc.csv or det.csv given"
    );
    let out = output_dir(args.out.out, "plot")?;
    let mut run = RunConfig::new("plot", None).input("out", path_str(&out));
    if let Some(p) = &cmc {
        run = run.input("cmc", path_str(p));
    }
    if let Some(p) = &det {
        run = run.input("det", path_str(p));
    }
    run.write(&out)?;
    if let Some(p) = cmc {
        let path = out.join("cmc.png");
        plot::cmc_plot(&p, &path)?;
        println!("{}", path.display());
    }
    if let Some(p) = det {
        let path = out.join("det.png");
        plot::det_plot(&p, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
