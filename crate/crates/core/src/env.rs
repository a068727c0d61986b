//! Bandit problem generators.
//!
//! Synthetic reward families, classification-to-bandit conversion, adversarial
//! orderings and CSV ingestion. Every generator is a pure function of its seed.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::net::{random_unit_vector, sigmoid, InitSnapshot, NetworkParams};
use crate::perturb::LossKind;
use crate::rng::{derive_seed, stream_rng, tags};

/// Synthetic loss families `h(x)` driven by a hidden unit vector `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// `½(1 + ⟨a, x⟩)`
    Linear,
    /// `min(1, c_q⟨a, x⟩²)`
    Quadratic,
    /// `½(1 + cos(3⟨a, x⟩))`
    Cosine,
}

/// Scale of the quadratic family.
pub const QUADRATIC_SCALE: f64 = 10.0;

impl SynthKind {
    pub fn loss(self, a: &[f64], x: &[f64]) -> f64 {
        let s = dot(a, x);
        match self {
            SynthKind::Linear => 0.5 * (1.0 + s),
            SynthKind::Quadratic => (QUADRATIC_SCALE * s * s).min(1.0),
            SynthKind::Cosine => 0.5 * (1.0 + (3.0 * s).cos()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Linear => "linear",
            SynthKind::Quadratic => "quadratic",
            SynthKind::Cosine => "cosine",
        }
    }
}

/// Order in which rounds are presented.
///
/// `sorted_by_label` and `cluster_blocks` are deliberately non-i.i.d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingMode {
    IidShuffle,
    #[default]
    SortedByLabel,
    ClusterBlocks,
}

impl OrderingMode {
    pub fn name(self) -> &'static str {
        match self {
            OrderingMode::IidShuffle => "iid_shuffle",
            OrderingMode::SortedByLabel => "sorted_by_label",
            OrderingMode::ClusterBlocks => "cluster_blocks",
        }
    }
}

/// One round of a bandit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRound {
    /// One context per arm.
    pub contexts: Vec<Vec<f64>>,
    /// Loss of every arm, in `[0, 1]`.
    pub losses: Vec<f64>,
    /// True class for classification streams, best arm otherwise.
    pub label: usize,
}

impl BanditRound {
    pub fn best_loss(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Reproducibility record written next to generated streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub generator: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub arms: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub ordering: Option<OrderingMode>,
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditStream {
    pub rounds: Vec<BanditRound>,
    pub manifest: StreamManifest,
}

impl BanditStream {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn arms(&self) -> usize {
        self.manifest.arms
    }

    /// Context dimension.
    pub fn dim(&self) -> usize {
        self.manifest.d
    }

    /// Checks the stream invariants: shapes, unit-ball contexts and losses in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let (k, d) = (self.arms(), self.dim());
        for (i, r) in self.rounds.iter().enumerate() {
            if r.contexts.len() != k || r.losses.len() != k {
                return Err(Error::Shape(format!("round {} does not have {k} arms", i + 1)));
            }
            for x in &r.contexts {
                if x.len() != d {
                    return Err(Error::Shape(format!("round {} has a context of dimension {}", i + 1, x.len())));
                }
                if norm(x) > 1.0 + 1e-9 {
                    return Err(Error::Domain(format!("round {} has a context outside the unit ball", i + 1)));
                }
            }
            if r.losses.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return Err(Error::Domain(format!("round {} has a loss outside [0, 1]", i + 1)));
            }
        }
        Ok(())
    }

    /// Number of contexts that repeat an earlier one exactly.
    pub fn duplicate_contexts(&self) -> usize {
        count_duplicates(self.rounds.iter().flat_map(|r| r.contexts.iter()))
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.manifest)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `x` to unit norm; the zero vector is returned unchanged.
pub fn normalize(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    if n == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

pub fn count_duplicates<'a>(vectors: impl Iterator<Item = &'a Vec<f64>>) -> usize {
    let mut seen = HashSet::new();
    let mut dups = 0;
    for v in vectors {
        let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        if !seen.insert(key) {
            dups += 1;
        }
    }
    dups
}

fn warn_duplicates(stream: &BanditStream) {
    let dups = stream.duplicate_contexts();
    if dups > 0 {
        log::warn!(
            "{} stream contains {dups} duplicated contexts; the NTK Gram matrix will be singular",
            stream.manifest.generator
        );
    }
}

/// Synthetic stream: per-arm hidden unit vectors `a_k`, contexts uniform on the
/// sphere, observed loss `clip(h(x) + N(0, noise_sd²), 0, 1)`.
pub fn synth_stream(kind: SynthKind, d: usize, k: usize, horizon: usize, noise_sd: f64, seed: u64) -> Result<BanditStream> {
    if d == 0 || k == 0 || horizon == 0 {
        return config_err(format!("synthetic stream needs d, K, T >= 1, got d={d}, K={k}, T={horizon}"));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return config_err(format!("noise_sd must be nonnegative, got {noise_sd}"));
    }
    let mut rng = stream_rng(seed, tags::ENVIRONMENT);
    let hidden: Vec<Vec<f64>> = (0..k).map(|_| random_unit_vector(d, &mut rng)).collect();
    let noise = Normal::new(0.0, noise_sd).expect("validated noise_sd");
    let mut rounds = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let contexts: Vec<Vec<f64>> = (0..k).map(|_| random_unit_vector(d, &mut rng)).collect();
        let losses: Vec<f64> = contexts
            .iter()
            .zip(&hidden)
            .map(|(x, a)| {
                let h = kind.loss(a, x);
                let eps = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (h + eps).clamp(0.0, 1.0)
            })
            .collect();
        let label = argmin(&losses);
        rounds.push(BanditRound { contexts, losses, label });
    }
    let stream = BanditStream {
        rounds,
        manifest: StreamManifest {
            generator: kind.name().to_string(),
            seed,
            arms: k,
            d,
            horizon,
            ordering: None,
            noise_sd: Some(noise_sd),
        },
    };
    warn_duplicates(&stream);
    Ok(stream)
}

/// Lowest index attaining the minimum.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// A feature vector with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Separable `k`-class data: points uniform on the sphere, labelled by the
/// nearest of `k` random unit centers.
pub fn separable_classes(d: usize, k: usize, n: usize, seed: u64) -> Result<Vec<LabeledRow>> {
    if d == 0 || k == 0 {
        return config_err(format!("class generator needs d, K >= 1, got d={d}, K={k}"));
    }
    let mut rng = stream_rng(seed, tags::ENVIRONMENT);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| random_unit_vector(d, &mut rng)).collect();
    Ok((0..n)
        .map(|_| {
            let x = random_unit_vector(d, &mut rng);
            let dists: Vec<f64> = centers.iter().map(|c| -dot(c, &x)).collect();
            LabeledRow { label: argmin(&dists), features: x }
        })
        .collect())
}

/// Per-column z-scoring. Constant columns are dropped.
pub fn standardize(rows: &[LabeledRow]) -> Vec<LabeledRow> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let n = rows.len() as f64;
    let d = first.features.len();
    let mut stats = Vec::new();
    for j in 0..d {
        let mean = rows.iter().map(|r| r.features[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r.features[j] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            stats.push((j, mean, var.sqrt()));
        }
    }
    rows.iter()
        .map(|r| LabeledRow {
            features: stats.iter().map(|(j, m, s)| (r.features[*j] - m) / s).collect(),
            label: r.label,
        })
        .collect()
}

/// Classification rows to a `K`-armed bandit.
///
/// Features are scaled to unit norm and arm `a` sees them in block `a` of a
/// `d·K` vector (zeros elsewhere). Loss is 0 on the true class, 1 otherwise.
pub fn dataset_to_bandit(rows: &[LabeledRow], k: usize) -> Result<BanditStream> {
    if rows.is_empty() {
        return Err(Error::Ingest("dataset has no rows".into()));
    }
    if k == 0 {
        return Err(Error::Ingest("class count K must be at least 1".into()));
    }
    let d = rows[0].features.len();
    let mut rounds = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.features.len() != d {
            return Err(Error::Ingest(format!(
                "row {} has {} features, expected {d}",
                i + 1,
                row.features.len()
            )));
        }
        if row.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingest(format!("row {} has a non-finite feature", i + 1)));
        }
        if row.label >= k {
            return Err(Error::Ingest(format!("row {} has label {} outside [0, {k})", i + 1, row.label)));
        }
        let x = normalize(&row.features);
        let contexts = (0..k)
            .map(|a| {
                let mut c = vec![0.0; d * k];
                c[a * d..(a + 1) * d].copy_from_slice(&x);
                normalize(&c)
            })
            .collect();
        let losses = (0..k).map(|a| if a == row.label { 0.0 } else { 1.0 }).collect();
        rounds.push(BanditRound { contexts, losses, label: row.label });
    }
    let stream = BanditStream {
        manifest: StreamManifest {
            generator: "classification".into(),
            seed: 0,
            arms: k,
            d: d * k,
            horizon: rounds.len(),
            ordering: None,
            noise_sd: None,
        },
        rounds,
    };
    warn_duplicates(&stream);
    Ok(stream)
}

/// Reorders the rounds of `stream`.
///
/// - `iid_shuffle`: uniform random permutation.
/// - `sorted_by_label`: stable sort by label, so classes arrive one after another.
/// - `cluster_blocks`: k-means with `K` clusters on the concatenated arm
///   contexts; clusters are emitted in order of their first member.
pub fn apply_ordering(stream: &BanditStream, mode: OrderingMode, seed: u64) -> BanditStream {
    let mut idx: Vec<usize> = (0..stream.len()).collect();
    match mode {
        OrderingMode::IidShuffle => {
            idx.shuffle(&mut stream_rng(seed, tags::ORDERING));
        }
        OrderingMode::SortedByLabel => {
            idx.sort_by_key(|&i| stream.rounds[i].label);
        }
        OrderingMode::ClusterBlocks => {
            let points: Vec<Vec<f64>> = stream.rounds.iter().map(|r| r.contexts.concat()).collect();
            let assign = kmeans(&points, stream.arms().max(1), derive_seed(seed, tags::ORDERING));
            let mut rank = vec![usize::MAX; stream.arms().max(1)];
            let mut next = 0;
            for &c in &assign {
                if rank[c] == usize::MAX {
                    rank[c] = next;
                    next += 1;
                }
            }
            idx.sort_by_key(|&i| rank[assign[i]]);
        }
    }
    let mut manifest = stream.manifest.clone();
    manifest.ordering = Some(mode);
    BanditStream {
        rounds: idx.iter().map(|&i| stream.rounds[i].clone()).collect(),
        manifest,
    }
}

/// Lloyd's algorithm from randomly chosen distinct starting points. Returns the
/// cluster index of every point.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    const MAX_ITERS: usize = 100;
    if points.is_empty() {
        return Vec::new();
    }
    let k = k.min(points.len());
    let mut rng = stream_rng(seed, 0);
    let mut centers: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, points.len(), k)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut assign = vec![0; points.len()];
    for iter in 0..MAX_ITERS {
        let mut changed = false;
        for (p, a) in points.iter().zip(assign.iter_mut()) {
            let dists: Vec<f64> = centers.iter().map(|c| sq(p, c)).collect();
            let best = argmin(&dists);
            changed |= best != *a;
            *a = best;
        }
        if iter > 0 && !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    assign
}

/// Reads a numeric CSV with a header row. `label_column` names the class column.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Vec<LabeledRow>> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::Ingest(format!("cannot open {}: {e}", path.display())))?
        .read_to_string(&mut text)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: &str) -> Result<Vec<LabeledRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("cannot read header: {e}")))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Ingest(format!("label column \"{label_column}\" not found in header")))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Ingest(format!("row {row}: {e}")))?;
        let mut features = Vec::with_capacity(record.len().saturating_sub(1));
        let mut label = None;
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Ingest(format!(
                    "row {row}, column {} (\"{}\"): cannot parse \"{cell}\" as a number",
                    j + 1,
                    headers.get(j).unwrap_or("")
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Ingest(format!("row {row}, column {}: value is not finite", j + 1)));
            }
            if j == label_idx {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Ingest(format!(
                        "row {row}, column {}: label {value} is not a nonnegative integer",
                        j + 1
                    )));
                }
                label = Some(value as usize);
            } else {
                features.push(value);
            }
        }
        let label = label.ok_or_else(|| Error::Ingest(format!("row {row}: missing label cell")))?;
        rows.push(LabeledRow { features, label });
    }
    Ok(rows)
}

/// Classification stream as used by the harness: standardize, embed, order.
pub fn classification_stream(rows: &[LabeledRow], k: usize, ordering: OrderingMode, seed: u64) -> Result<BanditStream> {
    let std_rows = standardize(rows);
    if std_rows.first().is_some_and(|r| r.features.is_empty()) {
        return Err(Error::Ingest("every feature column is constant".into()));
    }
    let mut stream = dataset_to_bandit(&std_rows, k)?;
    stream.manifest.seed = seed;
    Ok(apply_ordering(&stream, ordering, seed))
}

/// A teacher network in the learner's own function class: θ₀ with the output
/// vector moved by `strength` along a random kernel expansion
/// `Σ_k c_k α(z_k)` (normalized), so labels are `O(1)` at any width.
pub fn planted_teacher(snapshot: &InitSnapshot, centers: usize, strength: f64, seed: u64) -> Result<NetworkParams> {
    let theta0 = snapshot.theta0();
    let d = theta0.input_dim();
    let mut rng = stream_rng(seed, tags::TEACHER);
    let mut dv = vec![0.0; theta0.width()];
    for _ in 0..centers {
        let z = random_unit_vector(d, &mut rng);
        let c: f64 = rng.gen_range(-1.0..1.0);
        for (o, a) in dv.iter_mut().zip(theta0.features(&z)?) {
            *o += c * a;
        }
    }
    let n = norm(&dv);
    let mut teacher = theta0.clone();
    if n > 0.0 {
        for (v, u) in teacher.output_mut().iter_mut().zip(&dv) {
            *v += strength * u / n;
        }
    }
    Ok(teacher)
}

/// Realizable regression stream: contexts uniform on the sphere, labels
/// `f(θ*; x)` (square) or `σ(f(θ*; x))` clipped to `[z, 1 − z]` (KL).
pub fn teacher_stream(
    teacher: &NetworkParams,
    horizon: usize,
    loss_kind: LossKind,
    z: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut rng = stream_rng(seed, tags::ENVIRONMENT);
    (0..horizon)
        .map(|_| {
            let x = random_unit_vector(teacher.input_dim(), &mut rng);
            let f = teacher.forward(&x)?;
            let y = match loss_kind {
                LossKind::Square => f,
                LossKind::Kl => sigmoid(f).clamp(z, 1.0 - z),
            };
            Ok((x, y))
        })
        .collect()
}

/// `n` contexts uniform on the sphere with labels uniform in `[0, 1]`.
pub fn random_label_points(d: usize, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = stream_rng(seed, tags::ENVIRONMENT);
    (0..n)
        .map(|_| {
            let x = random_unit_vector(d, &mut rng);
            let y = rng.gen::<f64>();
            (x, y)
        })
        .collect()
}

/// `n` contexts uniform on the unit sphere of `R^d`.
pub fn sphere_contexts(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, tags::ENVIRONMENT);
    (0..n).map(|_| random_unit_vector(d, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, NetConfig};

    #[test]
    fn linear_orthogonal_context_gives_half() {
        let a = [1.0, 0.0, 0.0];
        assert_eq!(SynthKind::Linear.loss(&a, &[0.0, 1.0, 0.0]), 0.5);
        assert_eq!(SynthKind::Cosine.loss(&a, &[0.0, 0.0, 1.0]), 1.0);
        assert_eq!(SynthKind::Quadratic.loss(&a, &[0.5, 0.5f64.sqrt(), 0.5]), 1.0);
    }

    #[test]
    fn synthetic_losses_in_unit_interval() {
        let mut count = 0;
        for (i, kind) in [SynthKind::Linear, SynthKind::Quadratic, SynthKind::Cosine].into_iter().enumerate() {
            let s = synth_stream(kind, 5, 4, 8400, 0.3, i as u64).unwrap();
            s.validate().unwrap();
            for r in &s.rounds {
                for x in &r.contexts {
                    assert!((norm(x) - 1.0).abs() <= 1e-9);
                }
                count += r.losses.len();
            }
        }
        assert!(count >= 100_000);
    }

    #[test]
    fn synthetic_streams_are_deterministic() {
        let a = synth_stream(SynthKind::Cosine, 3, 2, 50, 0.1, 9).unwrap();
        let b = synth_stream(SynthKind::Cosine, 3, 2, 50, 0.1, 9).unwrap();
        let c = synth_stream(SynthKind::Cosine, 3, 2, 50, 0.1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.duplicate_contexts(), 0);
    }

    #[test]
    fn synth_rejects_bad_dims() {
        assert!(synth_stream(SynthKind::Linear, 0, 2, 5, 0.0, 0).is_err());
        assert!(synth_stream(SynthKind::Linear, 2, 2, 5, -1.0, 0).is_err());
    }

    #[test]
    fn block_embedding() {
        let rows = vec![LabeledRow { features: vec![0.6, 0.8], label: 0 }];
        let s = dataset_to_bandit(&rows, 2).unwrap();
        assert_eq!(s.rounds[0].contexts, vec![vec![0.6, 0.8, 0.0, 0.0], vec![0.0, 0.0, 0.6, 0.8]]);
        assert_eq!(s.rounds[0].losses, vec![0.0, 1.0]);
        assert_eq!(s.dim(), 4);
    }

    #[test]
    fn label_policy_has_zero_loss() {
        let rows = separable_classes(3, 4, 200, 1).unwrap();
        let s = dataset_to_bandit(&rows, 4).unwrap();
        assert_eq!(s.len(), 200);
        let total: f64 = s.rounds.iter().map(|r| r.losses[r.label]).sum();
        assert_eq!(total, 0.0);
        s.validate().unwrap();
    }

    #[test]
    fn ingestion_errors() {
        assert!(matches!(dataset_to_bandit(&[], 2), Err(Error::Ingest(_))));
        let rows = vec![LabeledRow { features: vec![1.0], label: 3 }];
        assert!(matches!(dataset_to_bandit(&rows, 2), Err(Error::Ingest(_))));
    }

    #[test]
    fn sorted_by_label_groups_classes() {
        let rows = separable_classes(4, 2, 100, 3).unwrap();
        let s = dataset_to_bandit(&rows, 2).unwrap();
        let sorted = apply_ordering(&s, OrderingMode::SortedByLabel, 0);
        let labels: Vec<usize> = sorted.rounds.iter().map(|r| r.label).collect();
        let first_one = labels.iter().position(|&l| l == 1).unwrap();
        assert!(labels[..first_one].iter().all(|&l| l == 0));
        assert!(labels[first_one..].iter().all(|&l| l == 1));
        let again = apply_ordering(&sorted, OrderingMode::SortedByLabel, 5);
        assert_eq!(again.rounds, sorted.rounds);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let s = synth_stream(SynthKind::Linear, 3, 2, 100, 0.0, 4).unwrap();
        let shuffled = apply_ordering(&s, OrderingMode::IidShuffle, 1);
        assert_ne!(shuffled.rounds, s.rounds);
        let key = |r: &BanditRound| format!("{:?}", r);
        let mut a: Vec<String> = s.rounds.iter().map(key).collect();
        let mut b: Vec<String> = shuffled.rounds.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn cluster_blocks_are_contiguous() {
        let rows = separable_classes(2, 3, 150, 8).unwrap();
        let s = dataset_to_bandit(&rows, 3).unwrap();
        let c = apply_ordering(&s, OrderingMode::ClusterBlocks, 2);
        assert_eq!(c.len(), s.len());
        let points: Vec<Vec<f64>> = c.rounds.iter().map(|r| r.contexts.concat()).collect();
        let assign = kmeans(&points, 3, derive_seed(2, tags::ORDERING));
        // a second clustering of the reordered points need not reuse labels,
        // but every block boundary must be a change of cluster
        let changes = assign.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(changes <= 2 + points.len() / 10, "{changes}");
    }

    #[test]
    fn standardize_drops_constant_columns() {
        let rows = vec![
            LabeledRow { features: vec![1.0, 5.0, 2.0], label: 0 },
            LabeledRow { features: vec![3.0, 5.0, 4.0], label: 1 },
        ];
        let s = standardize(&rows);
        assert_eq!(s[0].features, vec![-1.0, -1.0]);
        assert_eq!(s[1].features, vec![1.0, 1.0]);
    }

    #[test]
    fn csv_parsing() {
        let rows = parse_csv("a,b,label\n1,2,0\n3,4,1\n5,6,1\n", "label").unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1], LabeledRow { features: vec![3.0, 4.0], label: 1 });
        let err = parse_csv("a,label\n1,0\n", "class").unwrap_err().to_string();
        assert!(err.contains("\"class\""), "{err}");
        let err = parse_csv("a,label\n1,0\nx,1\n", "label").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(parse_csv("a,label\n1,0.5\n", "label").is_err());
    }

    #[test]
    fn teacher_labels_are_order_one() {
        let net = NetConfig::new(4, 256, 1, 1.0);
        let snap = init_params(&net, 3).unwrap();
        let teacher = planted_teacher(&snap, 5, 0.9, 3).unwrap();
        let d = teacher.layer_distances(snap.theta0()).unwrap();
        assert!((d[1] - 0.9).abs() < 1e-12 && d[0] == 0.0);
        let s = teacher_stream(&teacher, 200, LossKind::Square, 0.01, 3).unwrap();
        let ms = s.iter().map(|(_, y)| y * y).sum::<f64>() / 200.0;
        assert!(ms > 1e-3, "{ms}");
        let k = teacher_stream(&teacher, 200, LossKind::Kl, 0.01, 3).unwrap();
        assert!(k.iter().all(|(_, y)| (0.01..=0.99).contains(y)));
    }
}
