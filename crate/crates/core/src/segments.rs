//! Item segments derived from the sparse latent structure.
//!
//! Items are grouped by their dominant signed latent factor, groups with
//! similar descriptors are merged, and each segment is placed in latent space
//! as a ±1 pattern over its constituent dimensions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::infer::SparseInferenceEngine;
use crate::interactions::ItemVocab;
use crate::linalg::CsrMatrix;
use crate::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.8;
pub const DESCRIPTOR_TOKENS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "(usize, i8)", from = "(usize, i8)")]
pub struct SignedFactor {
    pub dim: usize,
    /// `+1` or `−1`.
    pub sign: i8,
}

impl From<SignedFactor> for (usize, i8) {
    fn from(f: SignedFactor) -> Self {
        (f.dim, f.sign)
    }
}

impl From<(usize, i8)> for SignedFactor {
    fn from((dim, sign): (usize, i8)) -> Self {
        Self { dim, sign }
    }
}

/// Largest-magnitude entry of row `item` (lower column on ties) and its sign.
pub fn dominant_factor(a_bar_s: &CsrMatrix, item: usize) -> Result<SignedFactor> {
    if item >= a_bar_s.rows() {
        return Err(Error::IndexOutOfRange {
            index: item,
            bound: a_bar_s.rows(),
        });
    }
    let (idx, val) = a_bar_s.row(item);
    let mut best: Option<(u32, f32)> = None;
    for (&j, &v) in idx.iter().zip(val) {
        if v == 0.0 {
            continue;
        }
        match best {
            Some((bj, bv)) if v.abs() < bv.abs() || (v.abs() == bv.abs() && j > bj) => {}
            _ => best = Some((j, v)),
        }
    }
    best.map(|(j, v)| SignedFactor {
        dim: j as usize,
        sign: if v > 0.0 { 1 } else { -1 },
    })
    .ok_or(Error::DeadRow(item))
}

/// Items sharing one dominant signed factor.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGroup {
    pub factor: SignedFactor,
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    /// Ordered by factor.
    pub groups: Vec<InitialGroup>,
    /// Items with an all-zero row; left unsegmented.
    pub dead_items: Vec<u32>,
}

pub fn group_items(a_bar_s: &CsrMatrix) -> Grouping {
    let mut by_factor: BTreeMap<SignedFactor, Vec<u32>> = BTreeMap::new();
    let mut dead_items = Vec::new();
    for i in 0..a_bar_s.rows() {
        match dominant_factor(a_bar_s, i) {
            Ok(f) => by_factor.entry(f).or_default().push(i as u32),
            Err(_) => dead_items.push(i as u32),
        }
    }
    if !dead_items.is_empty() {
        log::warn!("{} items have dead rows and stay unsegmented", dead_items.len());
    }
    Grouping {
        groups: by_factor
            .into_iter()
            .map(|(factor, members)| InitialGroup { factor, members })
            .collect(),
        dead_items,
    }
}

/// Produces a text descriptor for a set of items and embeds text as a unit vector.
pub trait DescriptorProvider: Sync {
    /// `None` when no descriptor can be produced for `members`.
    fn describe(&self, members: &[u32]) -> Result<Option<String>>;
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
}

/// Lowercased alphanumeric runs (underscore included) of length ≥ 2, skipping
/// purely numeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.chars().count() >= 2 && !t.chars().all(|c| c.is_ascii_digit()))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Deserialize)]
struct MetadataRow {
    item_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    tags: String,
}

/// Title and tag tokens per item index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ItemMetadata {
    tokens: Vec<Vec<String>>,
    titles: Vec<String>,
    vocabulary: BTreeMap<String, usize>,
}

impl ItemMetadata {
    /// Builds from `(item_id, title, tags)` records; ids absent from `items` are ignored.
    pub fn from_records(items: &ItemVocab, records: &[(String, String, String)]) -> Self {
        let mut tokens = vec![Vec::new(); items.len()];
        let mut titles = vec![String::new(); items.len()];
        let mut unknown = 0usize;
        for (id, title, tags) in records {
            let Some(i) = items.index_of(id) else {
                unknown += 1;
                continue;
            };
            let i = i as usize;
            let mut toks = tokenize(title);
            toks.extend(tokenize(tags));
            tokens[i] = toks;
            titles[i] = title.clone();
        }
        if unknown > 0 {
            log::warn!("{unknown} metadata rows name items outside the vocabulary");
        }
        let vocabulary: BTreeSet<&String> = tokens.iter().flatten().collect();
        let vocabulary = vocabulary.into_iter().enumerate().map(|(k, t)| (t.clone(), k)).collect();
        Self {
            tokens,
            titles,
            vocabulary,
        }
    }

    /// Reads a comma-separated `item_id,title,tags` file with a header row.
    pub fn load(path: impl AsRef<Path>, items: &ItemVocab) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
                _ => Error::Csv(e),
            })?;
        let mut records = Vec::new();
        for row in reader.deserialize::<MetadataRow>() {
            let row = row?;
            records.push((row.item_id, row.title, row.tags));
        }
        Ok(Self::from_records(items, &records))
    }

    pub fn n_items(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self, item: usize) -> &[String] {
        self.tokens.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn title(&self, item: usize) -> &str {
        self.titles.get(item).map_or("", String::as_str)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }
}

/// Offline provider: the most frequent member tokens form the descriptor; the
/// embedding is the normalized term-frequency vector over the metadata vocabulary.
#[derive(Debug, Clone)]
pub struct MetadataDescriptor<'a> {
    pub metadata: &'a ItemMetadata,
    pub top_tokens: usize,
}

impl<'a> MetadataDescriptor<'a> {
    pub fn new(metadata: &'a ItemMetadata) -> Self {
        Self {
            metadata,
            top_tokens: DESCRIPTOR_TOKENS,
        }
    }
}

impl DescriptorProvider for MetadataDescriptor<'_> {
    fn describe(&self, members: &[u32]) -> Result<Option<String>> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in members {
            for t in self.metadata.tokens(i as usize) {
                *counts.entry(t).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Ok(None);
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let words: Vec<&str> = ranked.iter().take(self.top_tokens).map(|&(t, _)| t).collect();
        Ok(Some(words.join(" ")))
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let mut v = vec![0.0f64; self.metadata.vocabulary.len()];
        for t in tokenize(text) {
            if let Some(&k) = self.metadata.vocabulary.get(&t) {
                v[k] += 1.0;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Provider {
                groups: Vec::new(),
                message: format!("descriptor {text:?} has no vocabulary tokens"),
            });
        }
        Ok(v.into_iter().map(|x| (x / norm) as f32).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemGroup {
    pub members: Vec<u32>,
    /// Signed factors of the constituent groups with the number of members
    /// whose dominant factor each one is.
    pub factors: BTreeMap<SignedFactor, usize>,
    pub descriptor: String,
    pub descriptor_vector: Vec<f32>,
}

impl ItemGroup {
    pub fn latent_dims(&self) -> Vec<SignedFactor> {
        self.factors.keys().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub kept: usize,
    pub absorbed: usize,
    pub similarity: f64,
}

/// A dimension that ended up with both signs inside one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignConflict {
    pub segment: usize,
    pub dim: usize,
    pub kept_sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub segments: Vec<ItemGroup>,
    /// `C × d`, row `c` places segment `c` in latent space.
    pub b_bar_s: CsrMatrix,
    pub tau: f64,
    pub merges: Vec<MergeEvent>,
    pub conflicts: Vec<SignConflict>,
    pub dead_items: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: usize,
    pub descriptor: String,
    pub member_items: Vec<String>,
    pub latent_dims: Vec<SignedFactor>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Output records with raw item ids; `segment_id` is the row of `b_bar_s`
    /// and `latent_dims` carry the signs kept there.
    pub fn records(&self, items: &ItemVocab) -> Vec<SegmentRecord> {
        self.segments
            .iter()
            .enumerate()
            .map(|(c, g)| SegmentRecord {
                segment_id: c,
                descriptor: g.descriptor.clone(),
                member_items: g.members.iter().map(|&i| items.raw_id(i).to_string()).collect(),
                latent_dims: {
                    let (idx, val) = self.b_bar_s.row(c);
                    idx.iter()
                        .zip(val)
                        .map(|(&j, &v)| SignedFactor {
                            dim: j as usize,
                            sign: if v > 0.0 { 1 } else { -1 },
                        })
                        .collect()
                },
            })
            .collect()
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

fn provider_error(groups: Vec<usize>, e: Error) -> Error {
    match e {
        Error::Provider { message, .. } => Error::Provider { groups, message },
        other => Error::Provider {
            groups,
            message: other.to_string(),
        },
    }
}

fn describe_group(
    provider: &dyn DescriptorProvider,
    members: &[u32],
    ids: Vec<usize>,
) -> Result<Option<(String, Vec<f32>)>> {
    let Some(text) = provider.describe(members).map_err(|e| provider_error(ids.clone(), e))? else {
        return Ok(None);
    };
    let vector = provider.embed(&text).map_err(|e| provider_error(ids, e))?;
    Ok(Some((text, vector)))
}

/// Repeatedly merges the most similar pair of groups while their descriptor
/// cosine exceeds `tau`. Ties go to the pair with the smaller ids; the merged
/// group keeps the smaller id and is re-described by `provider`, falling back
/// to the normalized mean of both vectors when no description is available.
pub fn merge_segments(
    grouping: Grouping,
    provider: &dyn DescriptorProvider,
    tau: f64,
    d: usize,
) -> Result<SegmentSet> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must lie in [-1, 1], got {tau}")));
    }
    let mut slots: Vec<Option<ItemGroup>> = Vec::with_capacity(grouping.groups.len());
    for (id, g) in grouping.groups.into_iter().enumerate() {
        let (descriptor, descriptor_vector) =
            describe_group(provider, &g.members, vec![id])?.ok_or_else(|| Error::Provider {
                groups: vec![id],
                message: "no descriptor for initial group".into(),
            })?;
        let support = g.members.len();
        slots.push(Some(ItemGroup {
            members: g.members,
            factors: BTreeMap::from([(g.factor, support)]),
            descriptor,
            descriptor_vector,
        }));
    }
    let dim = slots.first().and_then(|s| s.as_ref()).map(|g| g.descriptor_vector.len());
    if let Some(dim) = dim {
        for (id, g) in slots.iter().flatten().enumerate() {
            if g.descriptor_vector.len() != dim {
                return Err(provider_error(vec![id], Error::shape(dim, g.descriptor_vector.len())));
            }
        }
    }

    let n = slots.len();
    // sim[i][j] for i < j; NaN marks a retired slot.
    let mut sim: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let gi = slots[i].as_ref().expect("all slots live");
            (0..n)
                .map(|j| {
                    if j > i {
                        cosine(&gi.descriptor_vector, &slots[j].as_ref().expect("live").descriptor_vector)
                    } else {
                        f64::NAN
                    }
                })
                .collect()
        })
        .collect();

    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if slots[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                let s = sim[i][j];
                if slots[j].is_none() || s.is_nan() || s <= tau {
                    continue;
                }
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((keep, absorb, similarity)) = best else {
            break;
        };
        let a = slots[keep].take().expect("live");
        let b = slots[absorb].take().expect("live");
        let mut members = a.members.clone();
        members.extend_from_slice(&b.members);
        members.sort_unstable();
        let mut factors = a.factors.clone();
        for (f, c) in &b.factors {
            *factors.entry(*f).or_default() += c;
        }
        let (descriptor, descriptor_vector) = match describe_group(provider, &members, vec![keep, absorb])? {
            Some(found) => found,
            None => {
                let mut mean: Vec<f32> = a
                    .descriptor_vector
                    .iter()
                    .zip(&b.descriptor_vector)
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect();
                crate::linalg::normalize_slice(&mut mean);
                (format!("{} / {}", a.descriptor, b.descriptor), mean)
            }
        };
        slots[keep] = Some(ItemGroup {
            members,
            factors,
            descriptor,
            descriptor_vector,
        });
        merges.push(MergeEvent {
            kept: keep,
            absorbed: absorb,
            similarity,
        });
        let merged = &slots[keep].as_ref().expect("just set").descriptor_vector;
        let updated: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&j| j != keep)
            .filter_map(|j| slots[j].as_ref().map(|g| (j, cosine(merged, &g.descriptor_vector))))
            .collect();
        for (j, s) in updated {
            let (lo, hi) = (keep.min(j), keep.max(j));
            sim[lo][hi] = s;
        }
    }

    let segments: Vec<ItemGroup> = slots.into_iter().flatten().collect();
    let (b_bar_s, conflicts) = build_segment_matrix(&segments, d)?;
    Ok(SegmentSet {
        segments,
        b_bar_s,
        tau,
        merges,
        conflicts,
        dead_items: grouping.dead_items,
    })
}

/// `C × d` matrix with `s/√|L_c|` at every dimension of segment `c`.
///
/// When a dimension carries both signs within one segment, the sign supported
/// by more members is kept (positive on a tie) and the conflict is reported.
pub fn build_segment_matrix(segments: &[ItemGroup], d: usize) -> Result<(CsrMatrix, Vec<SignConflict>)> {
    let mut conflicts = Vec::new();
    let mut rows = Vec::with_capacity(segments.len());
    for (c, g) in segments.iter().enumerate() {
        let mut per_dim: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (f, &support) in &g.factors {
            if f.dim >= d {
                return Err(Error::IndexOutOfRange { index: f.dim, bound: d });
            }
            let e = per_dim.entry(f.dim).or_default();
            if f.sign > 0 {
                e.0 += support;
            } else {
                e.1 += support;
            }
        }
        let signs: Vec<(u32, i8)> = per_dim
            .into_iter()
            .map(|(dim, (pos, neg))| {
                let sign = if pos >= neg { 1 } else { -1 };
                if pos > 0 && neg > 0 {
                    log::warn!("segment {c}: dimension {dim} carries both signs, keeping {sign:+}");
                    conflicts.push(SignConflict {
                        segment: c,
                        dim,
                        kept_sign: sign,
                    });
                }
                (dim as u32, sign)
            })
            .collect();
        let scale = 1.0 / (signs.len() as f64).sqrt();
        rows.push(signs.into_iter().map(|(j, s)| (j, (f64::from(s) * scale) as f32)).unzip());
    }
    Ok((CsrMatrix::from_sparse_rows(d, rows)?, conflicts))
}

/// `r̂_seg = B̄ₛ (Āₛᵀ x)`.
pub fn segment_scores(items: &[u32], engine: &SparseInferenceEngine, b_bar_s: &CsrMatrix) -> Result<Vec<f32>> {
    if b_bar_s.cols() != engine.d() {
        return Err(Error::shape(engine.d(), b_bar_s.cols()));
    }
    let z = engine.embed(items)?;
    b_bar_s.spmv(&z)
}

/// Member-weighted share of items whose label is the majority label of their group.
pub fn purity(groups: &[Vec<u32>], labels: &[usize]) -> f64 {
    let mut agree = 0usize;
    let mut total = 0usize;
    for g in groups {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in g {
            *counts.entry(labels[i as usize]).or_default() += 1;
        }
        agree += counts.values().max().copied().unwrap_or(0);
        total += g.len();
    }
    if total == 0 {
        0.0
    } else {
        agree as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(cols: usize, rows: &[&[f32]]) -> CsrMatrix {
        CsrMatrix::from_sparse_rows(
            cols,
            rows.iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(j, &v)| (j as u32, v))
                        .unzip()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dominant_factor_examples() {
        let a = csr(4, &[&[0.0, 0.8, 0.0, -0.6], &[0.0, 0.0, -1.0, 0.0], &[0.5, -0.5, 0.0, 0.0], &[0.0; 4]]);
        assert_eq!(dominant_factor(&a, 0).unwrap(), SignedFactor { dim: 1, sign: 1 });
        assert_eq!(dominant_factor(&a, 1).unwrap(), SignedFactor { dim: 2, sign: -1 });
        assert_eq!(dominant_factor(&a, 2).unwrap(), SignedFactor { dim: 0, sign: 1 });
        assert!(matches!(dominant_factor(&a, 3), Err(Error::DeadRow(3))));
    }

    #[test]
    fn grouping_splits_by_sign() {
        let a = csr(2, &[&[1.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]]);
        let g = group_items(&a);
        assert_eq!(g.groups.len(), 2);
        assert_eq!(g.dead_items, vec![3]);
        let pos = g.groups.iter().find(|g| g.factor.sign == 1).unwrap();
        assert_eq!(pos.members, vec![0, 2]);
    }

    struct Fixed(Vec<Vec<f32>>);

    impl DescriptorProvider for Fixed {
        fn describe(&self, members: &[u32]) -> Result<Option<String>> {
            // Initial groups have exactly one member here; merged ones get no description.
            Ok((members.len() == 1).then(|| members[0].to_string()))
        }

        fn embed(&self, text: &str) -> Result<Vec<f32>> {
            Ok(self.0[text.parse::<usize>().unwrap()].clone())
        }
    }

    fn singletons(n: usize) -> Grouping {
        Grouping {
            groups: (0..n)
                .map(|i| InitialGroup {
                    factor: SignedFactor { dim: i, sign: 1 },
                    members: vec![i as u32],
                })
                .collect(),
            dead_items: vec![],
        }
    }

    #[test]
    fn merge_stub_example() {
        let provider = Fixed(vec![vec![1.0, 0.0], vec![0.95, 0.31], vec![0.0, 1.0]]);
        let set = merge_segments(singletons(3), &provider, 0.9, 3).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.segments[0].members, vec![0, 1]);
        assert_eq!(set.segments[0].latent_dims().len(), 2);
        assert_eq!(set.segments[1].members, vec![2]);
        assert_eq!(set.merges.len(), 1);
    }

    #[test]
    fn tau_one_without_duplicates_is_identity() {
        let provider = Fixed(vec![vec![1.0, 0.0], vec![0.95, 0.31], vec![0.0, 1.0]]);
        let set = merge_segments(singletons(3), &provider, 1.0, 3).unwrap();
        assert_eq!(set.len(), 3);
        assert!(merge_segments(singletons(3), &provider, 1.5, 3).is_err());
    }

    #[test]
    fn identical_vectors_merge() {
        let provider = Fixed(vec![vec![0.6, 0.8], vec![0.6, 0.8]]);
        let set = merge_segments(singletons(2), &provider, 0.9, 2).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(
            set.segments[0].latent_dims(),
            vec![SignedFactor { dim: 0, sign: 1 }, SignedFactor { dim: 1, sign: 1 }]
        );
    }

    fn group(factors: &[(usize, i8, usize)]) -> ItemGroup {
        ItemGroup {
            members: vec![0],
            factors: factors.iter().map(|&(d, s, n)| (SignedFactor { dim: d, sign: s }, n)).collect(),
            descriptor: String::new(),
            descriptor_vector: vec![],
        }
    }

    #[test]
    fn segment_matrix_values() {
        let (b, conflicts) = build_segment_matrix(&[group(&[(3, 1, 1)]), group(&[(0, 1, 1), (5, -1, 1)])], 6).unwrap();
        assert!(conflicts.is_empty());
        assert_eq!(b.row(0), (&[3u32][..], &[1.0f32][..]));
        let h = (0.5f64).sqrt() as f32;
        assert_eq!(b.row(1), (&[0u32, 5][..], &[h, -h][..]));
        assert!(build_segment_matrix(&[group(&[(6, 1, 1)])], 6).is_err());
    }

    #[test]
    fn sign_conflict_keeps_majority() {
        let (b, conflicts) = build_segment_matrix(&[group(&[(2, 1, 1), (2, -1, 4), (4, 1, 2)])], 5).unwrap();
        assert_eq!(
            conflicts,
            vec![SignConflict {
                segment: 0,
                dim: 2,
                kept_sign: -1
            }]
        );
        let h = (0.5f64).sqrt() as f32;
        assert_eq!(b.row(0), (&[2u32, 4][..], &[-h, h][..]));
    }

    #[test]
    fn segment_scores_toy() {
        let a = csr(2, &[&[0.8, 0.6], &[0.0, 1.0]]);
        let engine = SparseInferenceEngine::build(a).unwrap();
        let (b, _) = build_segment_matrix(&[group(&[(0, 1, 1)]), group(&[(1, 1, 1)])], 2).unwrap();
        assert_eq!(segment_scores(&[], &engine, &b).unwrap(), vec![0.0, 0.0]);
        let s = segment_scores(&[0], &engine, &b).unwrap();
        assert!((s[0] - 0.8).abs() < 1e-6 && s[0] >= s[1]);
        let (wrong, _) = build_segment_matrix(&[group(&[(0, 1, 1)])], 3).unwrap();
        assert!(segment_scores(&[0], &engine, &wrong).is_err());
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The Hobbit (1937) sci_fi|a|B2"), vec!["the", "hobbit", "sci_fi", "b2"]);
    }

    #[test]
    fn metadata_provider() {
        let vocab = ItemVocab::new(vec!["a".into(), "b".into(), "c".into()]);
        let meta = ItemMetadata::from_records(
            &vocab,
            &[
                ("a".into(), "Space Opera".into(), "scifi|space".into()),
                ("b".into(), "Space Race".into(), "scifi".into()),
                ("zz".into(), "Unknown".into(), "".into()),
            ],
        );
        let p = MetadataDescriptor::new(&meta);
        assert_eq!(p.describe(&[0, 1]).unwrap().unwrap(), "space scifi opera race");
        assert_eq!(p.describe(&[2]).unwrap(), None);
        let v = p.embed("space scifi").unwrap();
        let norm: f32 = v.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!(p.embed("nothing known").is_err());
    }

    #[test]
    fn purity_counts_majorities() {
        let labels = [0, 0, 1, 1, 1];
        assert_eq!(purity(&[vec![0, 1, 2], vec![3, 4]], &labels), 0.8);
    }
}
