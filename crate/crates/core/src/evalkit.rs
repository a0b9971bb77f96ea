//! Evaluation protocols: repeated enrol/probe splits, closed-set CMC curves
//! and open-set DET curves, plus mean/std aggregation across splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Mode};
use crate::retrieval::{self, FeatureVector, Gallery};
use crate::seed;
use crate::synthgen::DatasetManifest;

/// Fraction of categories kept out of the gallery in open-set splits.
pub const DEFAULT_UNENROLLED_FRACTION: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    Closed,
    Open { unenrolled_fraction: f64 },
}

impl SplitMode {
    pub fn open() -> Self {
        SplitMode::Open {
            unenrolled_fraction: DEFAULT_UNENROLLED_FRACTION,
        }
    }
}

/// Sample reference used to build splits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRef {
    pub sample_id: String,
    pub label: usize,
}

pub fn samples_from_manifest(manifest: &DatasetManifest) -> Vec<SampleRef> {
    manifest
        .entries
        .iter()
        .map(|e| SampleRef {
            sample_id: DatasetManifest::sample_id(e),
            label: e.label,
        })
        .collect()
}

/// One enrol/probe partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub split_id: usize,
    pub seed: u64,
    pub mode: SplitMode,
    pub enrol_ids: Vec<String>,
    pub probe_ids: Vec<String>,
    /// Categories with no enrolled sample (open-set only).
    pub unenrolled_labels: Vec<usize>,
}

/// Builds `n_splits` partitions with one enrolled sample per enrolled
/// category; all other samples become probes. Open mode additionally
/// withholds `round(fraction * C)` whole categories from the gallery.
pub fn make_splits(
    samples: &[SampleRef],
    n_splits: usize,
    mode: SplitMode,
    seed: u64,
) -> Result<Vec<SplitSpec>> {
    if n_splits == 0 {
        return Err(Error::invalid_arg("n_splits must be at least 1"));
    }
    let mut by_label: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    let mut ids = BTreeSet::new();
    for s in samples {
        if !ids.insert(s.sample_id.as_str()) {
            return Err(Error::invalid_arg(format!(
                "duplicate sample id {}",
                s.sample_id
            )));
        }
        by_label.entry(s.label).or_default().push(&s.sample_id);
    }
    for v in by_label.values_mut() {
        v.sort_unstable();
    }
    let labels: Vec<usize> = by_label.keys().copied().collect();
    let withheld = match mode {
        SplitMode::Closed => 0,
        SplitMode::Open {
            unenrolled_fraction,
        } => {
            if !(0.0..1.0).contains(&unenrolled_fraction) || unenrolled_fraction == 0.0 {
                return Err(Error::invalid_arg("unenrolled fraction must lie in (0, 1)"));
            }
            (unenrolled_fraction * labels.len() as f64).round() as usize
        }
    };
    if labels.len() < 2 || withheld >= labels.len() {
        return Err(Error::invalid_arg(format!(
            "{} categories are too few for this protocol",
            labels.len()
        )));
    }
    if let SplitMode::Open { .. } = mode {
        if withheld == 0 {
            return Err(Error::invalid_arg(
                "open-set protocol withholds no category",
            ));
        }
    }
    if let Some((l, _)) = by_label.iter().find(|(_, v)| v.len() < 2) {
        // Every enrolled category must leave at least one mated probe.
        if withheld == 0 {
            return Err(Error::invalid_arg(format!(
                "category {l} has fewer than 2 samples"
            )));
        }
    }

    (0..n_splits)
        .map(|split_id| {
            let split_seed = seed::derive(seed, &[seed::STREAM_SPLIT, split_id as u64]);
            let mut rng = seed::rng(split_seed, &[]);
            let mut order = labels.clone();
            order.shuffle(&mut rng);
            let mut unenrolled: Vec<usize> = Vec::new();
            if withheld > 0 {
                // Withhold categories first, only from those that cannot
                // be enrolled (single sample) or at random otherwise.
                let (singles, multi): (Vec<usize>, Vec<usize>) =
                    order.iter().partition(|l| by_label[l].len() < 2);
                if singles.len() > withheld {
                    return Err(Error::invalid_arg(
                        "too many categories with a single sample",
                    ));
                }
                unenrolled.extend(&singles);
                unenrolled.extend(multi.iter().take(withheld - singles.len()));
            }
            unenrolled.sort_unstable();
            let mut enrol_ids = Vec::new();
            let mut probe_ids = Vec::new();
            for (&label, members) in &by_label {
                if unenrolled.binary_search(&label).is_ok() {
                    probe_ids.extend(members.iter().map(|s| s.to_string()));
                    continue;
                }
                let pick = members
                    .choose(&mut rng)
                    .expect("category lists are non-empty");
                for m in members {
                    if m == pick {
                        enrol_ids.push(m.to_string());
                    } else {
                        probe_ids.push(m.to_string());
                    }
                }
            }
            Ok(SplitSpec {
                split_id,
                seed: split_seed,
                mode,
                enrol_ids,
                probe_ids,
                unenrolled_labels: unenrolled,
            })
        })
        .collect()
}

/// Resolves a split against a feature table: `(gallery, probes)`.
pub fn materialize<'a>(
    features: &'a [FeatureVector],
    split: &SplitSpec,
    segments: usize,
) -> Result<(Gallery, Vec<&'a FeatureVector>)> {
    let index: HashMap<&str, &FeatureVector> =
        features.iter().map(|f| (f.sample_id.as_str(), f)).collect();
    let lookup = |id: &String| {
        index
            .get(id.as_str())
            .copied()
            .ok_or_else(|| Error::invalid_arg(format!("no feature for sample {id}")))
    };
    let enrol = split
        .enrol_ids
        .iter()
        .map(|id| lookup(id).cloned())
        .collect::<Result<Vec<_>>>()?;
    let probes = split
        .probe_ids
        .iter()
        .map(lookup)
        .collect::<Result<Vec<_>>>()?;
    Ok((Gallery::enroll_segments(enrol, segments)?, probes))
}

/// Closed-set identification rates `IR[r]` for ranks `1..=r_max`, ranking
/// categories by their best-scoring gallery sample.
pub fn cmc(
    mode: Mode,
    gallery: &Gallery,
    probes: &[&FeatureVector],
    r_max: usize,
) -> Result<Vec<f64>> {
    if probes.is_empty() {
        return Err(Error::invalid_arg("no probes"));
    }
    if r_max == 0 {
        return Err(Error::invalid_arg("r_max must be at least 1"));
    }
    let ranks = par::try_map_range(mode, probes.len(), |i| {
        let p = probes[i];
        let list = gallery.search(p, gallery.len())?;
        list.category_rank(p.category_label).ok_or_else(|| {
            Error::invalid_state(format!(
                "category {} of probe {} is not enrolled",
                p.category_label, p.sample_id
            ))
        })
    })?;
    let mut hits = vec![0usize; r_max];
    for r in ranks {
        if r <= r_max {
            hits[r - 1] += 1;
        }
    }
    let n = probes.len() as f64;
    let mut acc = 0;
    Ok(hits
        .into_iter()
        .map(|h| {
            acc += h;
            acc as f64 / n
        })
        .collect())
}

/// Per-probe scores that fully determine an open-set DET curve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OpenSetScores {
    /// Best same-category similarity within the top `rank` candidates for
    /// each mated probe, or `-inf` when the category is missed.
    pub mated: Vec<f64>,
    /// Top-1 similarity for each non-mated probe.
    pub non_mated: Vec<f64>,
}

impl OpenSetScores {
    pub fn all_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.mated
            .iter()
            .chain(&self.non_mated)
            .copied()
            .filter(|s| s.is_finite())
    }
}

/// Scores probes for open-set evaluation. A probe is mated when its
/// category is enrolled.
pub fn open_set_scores(
    mode: Mode,
    gallery: &Gallery,
    probes: &[&FeatureVector],
    rank: usize,
) -> Result<OpenSetScores> {
    if rank == 0 {
        return Err(Error::invalid_arg("rank must be at least 1"));
    }
    let enrolled = gallery.categories();
    let per_probe = par::try_map_range(mode, probes.len(), |i| {
        let p = probes[i];
        let mated = enrolled.binary_search(&p.category_label).is_ok();
        let list = gallery.search(p, if mated { rank } else { 1 })?;
        let score = if mated {
            list.entries
                .iter()
                .find(|c| c.category_label == p.category_label)
                .map_or(f64::NEG_INFINITY, |c| c.similarity)
        } else {
            list.entries[0].similarity
        };
        Ok::<_, Error>((mated, score))
    })?;
    let mut out = OpenSetScores::default();
    for (mated, s) in per_probe {
        if mated {
            out.mated.push(s);
        } else {
            out.non_mated.push(s);
        }
    }
    if out.non_mated.is_empty() {
        return Err(Error::invalid_arg(
            "open-set evaluation needs non-mated probes",
        ));
    }
    if out.mated.is_empty() {
        return Err(Error::invalid_arg("open-set evaluation needs mated probes"));
    }
    Ok(out)
}

/// Distinct observed scores in descending order, bracketed by `+inf` and
/// `-inf`.
pub fn threshold_grid(scores: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = scores.into_iter().filter(|s| s.is_finite()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    let mut grid = Vec::with_capacity(v.len() + 2);
    grid.push(f64::INFINITY);
    grid.extend(v);
    grid.push(f64::NEG_INFINITY);
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fpir: f64,
    pub fnir: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetCurve {
    /// Ordered by descending threshold.
    pub points: Vec<DetPoint>,
    pub eer: f64,
}

/// FPIR/FNIR at each threshold; thresholds must be strictly descending.
pub fn det_from_scores(scores: &OpenSetScores, thresholds: &[f64]) -> Result<DetCurve> {
    if thresholds.is_empty() {
        return Err(Error::invalid_arg("empty threshold grid"));
    }
    if thresholds.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid_arg("thresholds must be strictly descending"));
    }
    if scores.mated.is_empty() || scores.non_mated.is_empty() {
        return Err(Error::invalid_arg(
            "open-set evaluation needs mated and non-mated probes",
        ));
    }
    let mut mated = scores.mated.clone();
    let mut non = scores.non_mated.clone();
    mated.sort_by(f64::total_cmp);
    non.sort_by(f64::total_cmp);
    let (nm, nn) = (mated.len() as f64, non.len() as f64);
    let points: Vec<DetPoint> = thresholds
        .iter()
        .map(|&t| {
            // Count of scores below t; acceptance is `s >= t`. A missed
            // category (-inf) is a false negative at every threshold.
            let below_m = mated.partition_point(|&s| s == f64::NEG_INFINITY || s < t);
            let below_n = non.partition_point(|&s| s < t);
            DetPoint {
                threshold: t,
                fpir: (non.len() - below_n) as f64 / nn,
                fnir: below_m as f64 / nm,
            }
        })
        .collect();
    let eer = equal_error_rate(&points);
    Ok(DetCurve { points, eer })
}

/// Rate where FNIR crosses FPIR, linearly interpolated between grid points.
pub fn equal_error_rate(points: &[DetPoint]) -> f64 {
    let diff = |p: &DetPoint| p.fnir - p.fpir;
    let Some(first) = points.first() else {
        return f64::NAN;
    };
    if diff(first) <= 0.0 {
        return (first.fnir + first.fpir) / 2.0;
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (da, db) = (diff(a), diff(b));
        if db <= 0.0 {
            let t = da / (da - db);
            return a.fpir + t * (b.fpir - a.fpir);
        }
    }
    let last = points.last().unwrap();
    (last.fnir + last.fpir) / 2.0
}

/// Open-set DET curve on the grid of observed scores.
pub fn det_open_set(
    mode: Mode,
    gallery: &Gallery,
    probes: &[&FeatureVector],
    rank: usize,
) -> Result<DetCurve> {
    let scores = open_set_scores(mode, gallery, probes, rank)?;
    let grid = threshold_grid(scores.all_scores());
    det_from_scores(&scores, &grid)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation per rank.
#[derive(Clone, Debug, PartialEq)]
pub struct CmcSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub per_split: Vec<Vec<f64>>,
}

impl CmcSummary {
    pub fn rank1(&self) -> (f64, f64) {
        (self.mean[0], self.std[0])
    }
}

pub fn aggregate_cmc(per_split: Vec<Vec<f64>>) -> Result<CmcSummary> {
    if per_split.len() < 2 {
        return Err(Error::invalid_arg("aggregation needs at least 2 splits"));
    }
    let len = per_split[0].len();
    if len == 0 || per_split.iter().any(|c| c.len() != len) {
        return Err(Error::invalid_arg("CMC curves have inconsistent lengths"));
    }
    let (mean, std) = (0..len)
        .map(|r| mean_std(&per_split.iter().map(|c| c[r]).collect::<Vec<_>>()))
        .unzip();
    Ok(CmcSummary {
        mean,
        std,
        per_split,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetSummary {
    pub thresholds: Vec<f64>,
    pub mean_fpir: Vec<f64>,
    pub std_fpir: Vec<f64>,
    pub mean_fnir: Vec<f64>,
    pub std_fnir: Vec<f64>,
    pub eer: (f64, f64),
    pub per_split: Vec<DetCurve>,
}

/// Pointwise aggregation of DET curves computed on a shared threshold grid.
pub fn aggregate_det(per_split: Vec<DetCurve>) -> Result<DetSummary> {
    if per_split.len() < 2 {
        return Err(Error::invalid_arg("aggregation needs at least 2 splits"));
    }
    let thresholds: Vec<f64> = per_split[0].points.iter().map(|p| p.threshold).collect();
    if per_split.iter().any(|c| {
        c.points.len() != thresholds.len()
            || c.points
                .iter()
                .zip(&thresholds)
                .any(|(p, t)| p.threshold != *t)
    }) {
        return Err(Error::invalid_arg(
            "DET curves use different threshold grids",
        ));
    }
    let col = |i: usize, f: fn(&DetPoint) -> f64| {
        mean_std(
            &per_split
                .iter()
                .map(|c| f(&c.points[i]))
                .collect::<Vec<_>>(),
        )
    };
    let (mean_fpir, std_fpir) = (0..thresholds.len()).map(|i| col(i, |p| p.fpir)).unzip();
    let (mean_fnir, std_fnir) = (0..thresholds.len()).map(|i| col(i, |p| p.fnir)).unzip();
    let eer = mean_std(&per_split.iter().map(|c| c.eer).collect::<Vec<_>>());
    Ok(DetSummary {
        thresholds,
        mean_fpir,
        std_fpir,
        mean_fnir,
        std_fnir,
        eer,
        per_split,
    })
}

/// Runs the closed-set protocol over all splits. Splits are evaluated in
/// parallel; searches inside a split run sequentially.
pub fn evaluate_closed(
    mode: Mode,
    features: &[FeatureVector],
    splits: &[SplitSpec],
    segments: usize,
    r_max: usize,
) -> Result<CmcSummary> {
    let curves = par::try_map_range(mode, splits.len(), |i| {
        let (gallery, probes) = materialize(features, &splits[i], segments)?;
        cmc(
            Mode::Sequential,
            &gallery,
            &probes,
            r_max.min(gallery.categories().len()),
        )
    })?;
    let shortest = curves.iter().map(Vec::len).min().unwrap_or(0);
    aggregate_cmc(
        curves
            .into_iter()
            .map(|mut c| {
                c.truncate(shortest);
                c
            })
            .collect(),
    )
}

/// Runs the open-set protocol over all splits on the union threshold grid.
pub fn evaluate_open(
    mode: Mode,
    features: &[FeatureVector],
    splits: &[SplitSpec],
    segments: usize,
    rank: usize,
) -> Result<DetSummary> {
    let scores = par::try_map_range(mode, splits.len(), |i| {
        let (gallery, probes) = materialize(features, &splits[i], segments)?;
        open_set_scores(Mode::Sequential, &gallery, &probes, rank)
    })?;
    let grid = threshold_grid(scores.iter().flat_map(OpenSetScores::all_scores));
    let curves = scores
        .iter()
        .map(|s| det_from_scores(s, &grid))
        .collect::<Result<Vec<_>>>()?;
    aggregate_det(curves)
}

fn csv_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Writes `rank,mean_ir,std_ir,split_0,...`.
pub fn write_cmc_csv(path: &Path, summary: &CmcSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("cmc csv", e))?;
    let mut header = vec!["rank".to_string(), "mean_ir".into(), "std_ir".into()];
    header.extend((0..summary.per_split.len()).map(|i| format!("split_{i}")));
    w.write_record(&header)
        .map_err(|e| Error::format("cmc csv", e))?;
    for r in 0..summary.mean.len() {
        let mut row = vec![
            (r + 1).to_string(),
            csv_num(summary.mean[r]),
            csv_num(summary.std[r]),
        ];
        row.extend(summary.per_split.iter().map(|c| csv_num(c[r])));
        w.write_record(&row)
            .map_err(|e| Error::format("cmc csv", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `threshold,mean_fpir,std_fpir,mean_fnir,std_fnir`.
pub fn write_det_csv(path: &Path, summary: &DetSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("det csv", e))?;
    w.write_record([
        "threshold",
        "mean_fpir",
        "std_fpir",
        "mean_fnir",
        "std_fnir",
    ])
    .map_err(|e| Error::format("det csv", e))?;
    for i in 0..summary.thresholds.len() {
        w.write_record([
            csv_num(summary.thresholds[i]),
            csv_num(summary.mean_fpir[i]),
            csv_num(summary.std_fpir[i]),
            csv_num(summary.mean_fnir[i]),
            csv_num(summary.std_fnir[i]),
        ])
        .map_err(|e| Error::format("det csv", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a one-line-per-metric summary: `metric,mean,std`.
pub fn write_summary(path: &Path, rows: &[(&str, f64, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "metric,mean,std").map_err(|e| Error::io(path, e))?;
    for (name, m, s) in rows {
        writeln!(f, "{name},{},{}", csv_num(*m), csv_num(*s)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Similarity matrix helper kept public for oracle-style checks.
pub fn pairwise_similarity(a: &[FeatureVector], b: &[FeatureVector]) -> Result<Vec<Vec<f64>>> {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| retrieval::similarity(&x.values, &y.values))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn refs(c: usize, m: usize) -> Vec<SampleRef> {
        (0..c)
            .flat_map(|l| {
                (0..m).map(move |j| SampleRef {
                    sample_id: format!("{l:03}_{j:02}"),
                    label: l,
                })
            })
            .collect()
    }

    fn unit_feat(id: &str, label: usize, a: f64, b: f64) -> FeatureVector {
        FeatureVector::new(
            id,
            label,
            vec![
                a.cos() as f32,
                a.sin() as f32,
                b.cos() as f32,
                b.sin() as f32,
            ],
        )
    }

    #[test]
    fn closed_splits_partition() {
        let s = make_splits(&refs(10, 4), 5, SplitMode::Closed, 3).unwrap();
        assert_eq!(s.len(), 5);
        for sp in &s {
            assert_eq!(sp.enrol_ids.len(), 10);
            assert_eq!(sp.probe_ids.len(), 30);
            let e: BTreeSet<_> = sp.enrol_ids.iter().collect();
            assert!(sp.probe_ids.iter().all(|p| !e.contains(p)));
        }
        assert_ne!(s[0].enrol_ids, s[1].enrol_ids);
        assert_eq!(
            s,
            make_splits(&refs(10, 4), 5, SplitMode::Closed, 3).unwrap()
        );
    }

    #[test]
    fn open_splits_withhold_three_of_ten() {
        for sp in make_splits(&refs(10, 3), 5, SplitMode::open(), 9).unwrap() {
            assert_eq!(sp.unenrolled_labels.len(), 3);
            assert_eq!(sp.enrol_ids.len(), 7);
            assert_eq!(sp.probe_ids.len(), 7 * 2 + 3 * 3);
        }
    }

    #[test]
    fn insufficient_samples_rejected() {
        assert!(make_splits(&refs(5, 1), 5, SplitMode::Closed, 0).is_err());
        assert!(make_splits(&refs(1, 5), 5, SplitMode::Closed, 0).is_err());
        assert!(make_splits(&refs(5, 3), 0, SplitMode::Closed, 0).is_err());
    }

    #[test]
    fn perfect_and_worst_cmc() {
        // Probe j of category l sits exactly on its enrolled sample.
        let enrol: Vec<_> = (0..4)
            .map(|l| unit_feat(&format!("e{l}"), l, l as f64, l as f64))
            .collect();
        let g = Gallery::enroll_segments(enrol, 2).unwrap();
        let probes: Vec<_> = (0..4)
            .map(|l| unit_feat(&format!("p{l}"), l, l as f64, l as f64))
            .collect();
        let refs: Vec<_> = probes.iter().collect();
        assert_eq!(cmc(Mode::Sequential, &g, &refs, 4).unwrap(), vec![1.0; 4]);
        // Labels permuted so each probe's category is always ranked last.
        let worst: Vec<_> = (0..4)
            .map(|l| {
                unit_feat(
                    &format!("w{l}"),
                    (l + 2) % 4,
                    l as f64 * 0.01,
                    l as f64 * 0.01,
                )
            })
            .collect();
        let g = Gallery::enroll_segments(
            (0..4)
                .map(|l| unit_feat(&format!("e{l}"), l, l as f64, l as f64))
                .collect(),
            2,
        )
        .unwrap();
        let refs: Vec<_> = worst.iter().collect();
        let ir = cmc(Mode::Sequential, &g, &refs, 4).unwrap();
        assert!(ir.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(ir[3], 1.0);
    }

    #[test]
    fn cmc_missing_category_is_state_error() {
        let g = Gallery::enroll_segments(vec![unit_feat("e", 0, 0.0, 0.0)], 2).unwrap();
        let p = unit_feat("p", 5, 0.0, 0.0);
        assert!(matches!(
            cmc(Mode::Sequential, &g, &[&p], 1),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn det_hand_example() {
        let scores = OpenSetScores {
            mated: vec![0.9, 0.8, 0.3],
            non_mated: vec![0.85, 0.2],
        };
        let grid = threshold_grid(scores.all_scores());
        assert_eq!(
            grid,
            vec![f64::INFINITY, 0.9, 0.85, 0.8, 0.3, 0.2, f64::NEG_INFINITY]
        );
        let c = det_from_scores(&scores, &grid).unwrap();
        let fpir: Vec<f64> = c.points.iter().map(|p| p.fpir).collect();
        let fnir: Vec<f64> = c.points.iter().map(|p| p.fnir).collect();
        assert_eq!(fpir, vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0]);
        let third = 1.0 / 3.0;
        let want = [1.0, 2.0 * third, 2.0 * third, third, 0.0, 0.0, 0.0];
        for (a, b) in fnir.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        // fnir - fpir goes 1/6 at tau=0.85 (2/3 vs 1/2) to -1/6 at tau=0.8
        // (1/3 vs 1/2); halfway between them both rates equal 1/2.
        assert!((c.eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn det_needs_non_mated() {
        let g = Gallery::enroll_segments(vec![unit_feat("e", 0, 0.0, 0.0)], 2).unwrap();
        let p = unit_feat("p", 0, 0.1, 0.0);
        assert!(det_open_set(Mode::Sequential, &g, &[&p], 1).is_err());
    }

    #[test]
    fn aggregation_mean_and_population_std() {
        let s = aggregate_cmc(vec![vec![0.5, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(s.mean, vec![0.75, 1.0]);
        assert_eq!(s.std, vec![0.25, 0.0]);
        assert!(aggregate_cmc(vec![vec![1.0]]).is_err());
        assert!(aggregate_cmc(vec![vec![1.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let s = aggregate_cmc(vec![vec![0.5, 1.0], vec![1.0, 1.0]]).unwrap();
        write_cmc_csv(&dir.path().join("cmc.csv"), &s).unwrap();
        let text = std::fs::read_to_string(dir.path().join("cmc.csv")).unwrap();
        assert!(text.starts_with("rank,mean_ir,std_ir,split_0,split_1\n1,0.75,0.25,0.5,1\n"));
    }

    // Brute-force oracle: full similarity matrix, explicit definitions.
    fn oracle_ir(enrol: &[FeatureVector], probes: &[FeatureVector], r: usize) -> f64 {
        let sims = pairwise_similarity(probes, enrol).unwrap();
        let mut hit = 0;
        for (pi, p) in probes.iter().enumerate() {
            let mut best: BTreeMap<usize, (f64, std::cmp::Reverse<String>)> = BTreeMap::new();
            for (ei, e) in enrol.iter().enumerate() {
                let key = (sims[pi][ei], std::cmp::Reverse(e.sample_id.clone()));
                let slot = best.entry(e.category_label).or_insert(key.clone());
                if key.0 > slot.0 || (key.0 == slot.0 && key.1 > slot.1) {
                    *slot = key;
                }
            }
            let mine = best[&p.category_label].clone();
            let better = best
                .iter()
                .filter(|(l, v)| {
                    **l != p.category_label && (v.0 > mine.0 || (v.0 == mine.0 && v.1 > mine.1))
                })
                .count();
            if better < r {
                hit += 1;
            }
        }
        hit as f64 / probes.len() as f64
    }

    fn features(angles: &[(f64, f64)], cats: usize) -> Vec<FeatureVector> {
        angles
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| unit_feat(&format!("s{i:03}"), i % cats, a, b))
            .collect()
    }

    proptest! {
        #[test]
        fn cmc_matches_oracle(angles in prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.0f64..std::f64::consts::TAU), 12..40), cats in 2usize..6) {
            let feats = features(&angles, cats);
            let splits = make_splits(
                &feats.iter().map(|f| SampleRef { sample_id: f.sample_id.clone(), label: f.category_label }).collect::<Vec<_>>(),
                2, SplitMode::Closed, 11).unwrap();
            for sp in &splits {
                let (g, probes) = materialize(&feats, sp, 2).unwrap();
                let ir = cmc(Mode::Parallel, &g, &probes, cats).unwrap();
                let enrol: Vec<_> = g.features().to_vec();
                let owned: Vec<_> = probes.iter().map(|p| (*p).clone()).collect();
                for r in 1..=cats {
                    prop_assert!((ir[r - 1] - oracle_ir(&enrol, &owned, r)).abs() < 1e-12);
                }
                prop_assert!(ir.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!((ir[cats - 1] - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn det_matches_oracle(angles in prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.0f64..std::f64::consts::TAU), 12..40), cats in 4usize..8) {
            let feats = features(&angles, cats);
            let refs: Vec<_> = feats.iter().map(|f| SampleRef { sample_id: f.sample_id.clone(), label: f.category_label }).collect();
            let sp = &make_splits(&refs, 1, SplitMode::open(), 5).unwrap()[0];
            let (g, probes) = materialize(&feats, sp, 2).unwrap();
            let curve = det_open_set(Mode::Parallel, &g, &probes, 1).unwrap();
            let enrol = g.features();
            let enrolled: BTreeSet<usize> = enrol.iter().map(|e| e.category_label).collect();
            let mut last = (0.0, 1.0);
            for pt in &curve.points {
                let (mut fp, mut nn, mut fne, mut nm) = (0, 0, 0, 0);
                for p in &probes {
                    // Rank-1 candidate by brute force with the id tie-break.
                    let top = enrol.iter().map(|e| (retrieval::similarity(&p.values, &e.values).unwrap(), e))
                        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| b.1.sample_id.cmp(&a.1.sample_id)))
                        .unwrap();
                    if enrolled.contains(&p.category_label) {
                        nm += 1;
                        if !(top.1.category_label == p.category_label && top.0 >= pt.threshold) { fne += 1; }
                    } else {
                        nn += 1;
                        if top.0 >= pt.threshold { fp += 1; }
                    }
                }
                prop_assert!((pt.fpir - fp as f64 / nn as f64).abs() < 1e-12);
                prop_assert!((pt.fnir - fne as f64 / nm as f64).abs() < 1e-12);
                prop_assert!(pt.fpir >= last.0 && pt.fnir <= last.1);
                last = (pt.fpir, pt.fnir);
            }
            prop_assert!((0.0..=1.0).contains(&curve.eer));
        }
    }
}
