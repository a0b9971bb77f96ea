//! Gallery enrolment and exhaustive cosine-similarity search over
//! concatenated feature vectors, with threshold-based candidate acceptance.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::{self, Mode};

/// Tolerance on the norm of each feature segment.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// A labelled feature, normally `2K` values made of two unit-norm halves.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub category_label: usize,
    pub sample_id: String,
}

impl FeatureVector {
    pub fn new(sample_id: impl Into<String>, category_label: usize, values: Vec<f32>) -> Self {
        FeatureVector {
            values,
            category_label,
            sample_id: sample_id.into(),
        }
    }

    /// Whether each of `segments` equal parts has unit norm.
    pub fn has_unit_segments(&self, segments: usize) -> bool {
        if segments == 0 || self.values.is_empty() || !self.values.len().is_multiple_of(segments) {
            return false;
        }
        self.values
            .chunks(self.values.len() / segments)
            .all(|seg| (norm(seg) - 1.0).abs() <= UNIT_NORM_TOL)
    }
}

fn norm_sq(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64) * (*x as f64)).sum()
}

fn norm(v: &[f32]) -> f64 {
    norm_sq(v).sqrt()
}

// sqrt(|a|^2 |b|^2) rather than |a| |b| so that a vector scores exactly 1
// against itself.
fn cosine(dot: f64, na_sq: f64, nb_sq: f64) -> f64 {
    (dot / (na_sq * nb_sq).sqrt()).clamp(-1.0, 1.0)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as f64) * (*y as f64))
        .sum()
}

/// Cosine similarity `a . b / (|a| |b|)`, clamped to `[-1, 1]`.
///
/// For two features made of unit-norm halves this equals the mean of the
/// per-half cosines.
pub fn similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid_arg(format!(
            "feature lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm_sq(a), norm_sq(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid_arg("similarity of a zero vector"));
    }
    Ok(cosine(dot(a, b), na, nb))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub sample_id: String,
    pub category_label: usize,
    pub similarity: f64,
}

/// Ranked search result: similarity non-increasing, ties by sample id.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateList {
    pub probe_id: String,
    pub entries: Vec<Candidate>,
}

impl CandidateList {
    /// 1-based rank of `label` when candidates are collapsed to their first
    /// occurrence per category.
    pub fn category_rank(&self, label: usize) -> Option<usize> {
        let mut seen = Vec::new();
        for c in &self.entries {
            if !seen.contains(&c.category_label) {
                seen.push(c.category_label);
                if c.category_label == label {
                    return Some(seen.len());
                }
            }
        }
        None
    }
}

/// Total order used for candidate lists.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.similarity
        .partial_cmp(&a.similarity)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.sample_id.cmp(&b.sample_id))
}

/// Immutable set of enrolled features.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gallery {
    features: Vec<FeatureVector>,
    norms_sq: Vec<f64>,
    /// Per-branch embedding size (feature length / segments).
    k: usize,
    segments: usize,
    id_index: HashMap<String, usize>,
}

/// Enrols `2K` features made of two unit-norm halves.
pub fn enroll(features: Vec<FeatureVector>) -> Result<Gallery> {
    Gallery::enroll_segments(features, 2)
}

impl Gallery {
    /// Enrols features made of `segments` unit-norm parts of equal length.
    pub fn enroll_segments(features: Vec<FeatureVector>, segments: usize) -> Result<Gallery> {
        let Some(first) = features.first() else {
            return Err(Error::invalid_arg("cannot enrol an empty feature list"));
        };
        let len = first.values.len();
        if segments == 0 || len == 0 || len % segments != 0 {
            return Err(Error::invalid_arg(format!(
                "feature length {len} not divisible into {segments} parts"
            )));
        }
        let mut id_index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.values.len() != len {
                return Err(Error::invalid_arg(format!(
                    "feature {} has length {}, expected {len}",
                    f.sample_id,
                    f.values.len()
                )));
            }
            if !f.has_unit_segments(segments) {
                return Err(Error::invalid_arg(format!(
                    "feature {} is not made of unit-norm parts",
                    f.sample_id
                )));
            }
            if id_index.insert(f.sample_id.clone(), i).is_some() {
                return Err(Error::invalid_arg(format!(
                    "duplicate sample id {}",
                    f.sample_id
                )));
            }
        }
        let norms_sq = features.iter().map(|f| norm_sq(&f.values)).collect();
        Ok(Gallery {
            features,
            norms_sq,
            k: len / segments,
            segments,
            id_index,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn feature_len(&self) -> usize {
        self.k * self.segments
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn get(&self, sample_id: &str) -> Option<&FeatureVector> {
        self.id_index.get(sample_id).map(|&i| &self.features[i])
    }

    pub fn categories(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.features.iter().map(|f| f.category_label).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn search(&self, probe: &FeatureVector, top_k: usize) -> Result<CandidateList> {
        self.search_with(Mode::Sequential, probe, top_k)
    }

    /// Exhaustive exact search returning the best `top_k` candidates.
    pub fn search_with(
        &self,
        mode: Mode,
        probe: &FeatureVector,
        top_k: usize,
    ) -> Result<CandidateList> {
        if self.is_empty() {
            return Err(Error::invalid_state("search on an empty gallery"));
        }
        if top_k == 0 {
            return Err(Error::invalid_arg("top_k must be at least 1"));
        }
        if probe.values.len() != self.feature_len() {
            return Err(Error::invalid_arg(format!(
                "probe length {} does not match gallery feature length {}",
                probe.values.len(),
                self.feature_len()
            )));
        }
        let pn = norm_sq(&probe.values);
        if pn == 0.0 {
            return Err(Error::invalid_arg("probe is a zero vector"));
        }
        let scores = par::map_range(mode, self.features.len(), |i| {
            cosine(
                dot(&probe.values, &self.features[i].values),
                pn,
                self.norms_sq[i],
            )
        });
        let mut entries: Vec<Candidate> = self
            .features
            .iter()
            .zip(scores)
            .map(|(f, s)| Candidate {
                sample_id: f.sample_id.clone(),
                category_label: f.category_label,
                similarity: s,
            })
            .collect();
        let keep = top_k.min(entries.len());
        if keep < entries.len() {
            entries.select_nth_unstable_by(keep - 1, rank_order);
            entries.truncate(keep);
        }
        entries.sort_by(rank_order);
        Ok(CandidateList {
            probe_id: probe.sample_id.clone(),
            entries,
        })
    }
}

/// Accepted prefix of a candidate list: entries with similarity `>= tau`.
pub fn decide(candidates: &CandidateList, tau: f64) -> &[Candidate] {
    let n = candidates
        .entries
        .iter()
        .take_while(|c| c.similarity >= tau)
        .count();
    &candidates.entries[..n]
}

const STORE_MAGIC: &str = "# tattoo-features v1";

/// Writes features as a header line `# tattoo-features v1 k=K count=N`
/// followed by CSV rows `sample_id,label,v0,v1,...`.
pub fn write_features(path: &Path, k: usize, features: &[FeatureVector]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{STORE_MAGIC} k={k} count={}", features.len()).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for feat in features {
        let mut row = Vec::with_capacity(feat.values.len() + 2);
        row.push(feat.sample_id.clone());
        row.push(feat.category_label.to_string());
        row.extend(feat.values.iter().map(|v| v.to_string()));
        csv.write_record(&row)
            .map_err(|e| Error::format("feature store", e))?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature file; returns `(k, features)`.
pub fn read_features(path: &Path) -> Result<(usize, Vec<FeatureVector>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let rest = header
        .trim()
        .strip_prefix(STORE_MAGIC)
        .ok_or_else(|| Error::format("feature store", "missing header"))?;
    let field = |name: &str| -> Result<usize> {
        rest.split_whitespace()
            .find_map(|kv| kv.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format("feature store", format!("header lacks {name}")))
    };
    let (k, count) = (field("k")?, field("count")?);
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::with_capacity(count);
    for rec in csv.records() {
        let rec = rec.map_err(|e| Error::format("feature store", e))?;
        let bad = || Error::format("feature store", format!("bad row {}", out.len() + 1));
        let id = rec.get(0).ok_or_else(bad)?.to_string();
        let label = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        out.push(FeatureVector::new(id, label, values));
    }
    if out.len() != count {
        return Err(Error::format(
            "feature store",
            format!("header says {count} rows, found {}", out.len()),
        ));
    }
    Ok((k, out))
}
