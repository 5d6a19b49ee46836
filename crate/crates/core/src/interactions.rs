//! Interaction ingestion, binarization and strong-generalization splits.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::CsrMatrix;
use crate::{Error, Result};

/// Binary user × item matrix stored as per-user sorted item lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    n_items: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl InteractionMatrix {
    /// Rows must already be strictly increasing and within `[0, n_items)`.
    pub fn try_from_rows(n_items: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        indptr.push(0);
        for (u, row) in rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "items of user {u} are not strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= n_items {
                    return Err(Error::IndexOutOfRange {
                        index: last as usize,
                        bound: n_items,
                    });
                }
            }
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        Ok(Self {
            n_items,
            indptr,
            indices,
        })
    }

    /// Sorts and deduplicates each row first.
    pub fn from_unsorted_rows(n_items: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Self::try_from_rows(n_items, &rows)
    }

    pub fn n_users(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    /// Interaction count per item (column sums).
    pub fn item_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_items];
        for &i in &self.indices {
            counts[i as usize] += 1;
        }
        counts
    }

    /// The rows listed in `users`, in that order.
    pub fn select_rows(&self, users: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(users.len() + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for &u in users {
            indices.extend_from_slice(self.row(u));
            indptr.push(indices.len());
        }
        Self {
            n_items: self.n_items,
            indptr,
            indices,
        }
    }

    /// Values are all 1.
    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::try_new(
            self.n_users(),
            self.n_items,
            self.indptr.clone(),
            self.indices.clone(),
            vec![1.0; self.indices.len()],
        )
        .expect("interaction matrix invariants imply a valid CSR structure")
    }

    /// Writes `user,item` lines of dense indices, with a header line.
    pub fn write_indexed(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "user,item")?;
            for (u, row) in self.iter_rows().enumerate() {
                for i in row {
                    writeln!(w, "{u},{i}")?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Reads a file produced by [`write_indexed`](Self::write_indexed). Indices
    /// are taken verbatim; `n_users` is one past the largest user index.
    pub fn load_indexed(path: impl AsRef<Path>, n_items: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line == "user,item") {
                continue;
            }
            let malformed = |message: &str| Error::Malformed {
                line: lineno + 1,
                message: message.to_string(),
            };
            let (u, i) = line
                .split_once(',')
                .ok_or_else(|| malformed("expected `user,item`"))?;
            let u: usize = u.trim().parse().map_err(|_| malformed("bad user index"))?;
            let i: u32 = i.trim().parse().map_err(|_| malformed("bad item index"))?;
            if u >= rows.len() {
                rows.resize(u + 1, Vec::new());
            }
            rows[u].push(i);
        }
        Self::from_unsorted_rows(n_items, rows)
    }
}

/// Raw item ids in dense-index order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ItemVocab {
    ids: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl ItemVocab {
    pub fn new(ids: Vec<String>) -> Self {
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Self { ids, lookup }
    }

    /// Raw ids `"0"`, `"1"`, … matching dense indices.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, raw: &str) -> Option<u32> {
        self.lookup.get(raw).copied()
    }

    pub fn raw_id(&self, index: u32) -> &str {
        &self.ids[index as usize]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// A loaded interaction log with its id vocabularies.
#[derive(Debug, Clone)]
pub struct Interactions {
    pub matrix: InteractionMatrix,
    pub user_ids: Vec<String>,
    pub items: ItemVocab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// A first row with no numeric field is treated as a header.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Interactions with rating below this are dropped. Lines without a rating always count.
    pub min_feedback: f64,
    pub delimiter: char,
    pub header: HeaderMode,
    /// Retain items whose interactions all fall below `min_feedback`.
    pub keep_all_items: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            min_feedback: 0.0,
            delimiter: ',',
            header: HeaderMode::Auto,
            keep_all_items: false,
        }
    }
}

pub fn load_interactions(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Interactions> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(BufReader::new(file), options)
}

/// Parses `user<delim>item[<delim>rating]` lines. Ids are densified by first
/// appearance in the input.
pub fn parse_interactions<R: BufRead>(reader: R, options: &LoadOptions) -> Result<Interactions> {
    if options.min_feedback < 0.0 || options.min_feedback.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "min_feedback must be >= 0, got {}",
            options.min_feedback
        )));
    }
    let mut user_lookup: HashMap<String, usize> = HashMap::new();
    let mut item_lookup: HashMap<String, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    // (user, item, kept)
    let mut records: Vec<(usize, usize, bool)> = Vec::new();
    let mut seen_first_row = false;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(options.delimiter).map(str::trim).collect();
        let first_row = !seen_first_row;
        seen_first_row = true;
        if first_row {
            let header = match options.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => fields.iter().all(|f| f.parse::<f64>().is_err()),
            };
            if header {
                continue;
            }
        }
        let malformed = |message: String| Error::Malformed {
            line: lineno + 1,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(malformed(format!(
                "expected 2 or 3 fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(malformed("empty user or item id".into()));
        }
        let kept = match fields.get(2) {
            Some(r) => {
                let rating: f64 = r
                    .parse()
                    .map_err(|_| malformed(format!("rating `{r}` is not a number")))?;
                rating >= options.min_feedback
            }
            None => true,
        };
        let u = *user_lookup.entry(fields[0].to_string()).or_insert_with(|| {
            user_ids.push(fields[0].to_string());
            user_ids.len() - 1
        });
        let i = *item_lookup.entry(fields[1].to_string()).or_insert_with(|| {
            item_ids.push(fields[1].to_string());
            item_ids.len() - 1
        });
        records.push((u, i, kept));
    }

    // Compact ids to those with at least one kept interaction, preserving
    // first-appearance order.
    let mut item_alive = vec![options.keep_all_items; item_ids.len()];
    let mut user_alive = vec![false; user_ids.len()];
    for &(u, i, kept) in &records {
        if kept {
            item_alive[i] = true;
            user_alive[u] = true;
        }
    }
    let remap = |alive: &[bool]| -> Vec<Option<u32>> {
        let mut next = 0u32;
        alive
            .iter()
            .map(|&a| {
                a.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let item_map = remap(&item_alive);
    let user_map = remap(&user_alive);
    let n_users = user_alive.iter().filter(|&&a| a).count();
    let mut rows = vec![Vec::new(); n_users];
    for &(u, i, kept) in &records {
        if kept {
            let (Some(u), Some(i)) = (user_map[u], item_map[i]) else {
                unreachable!("kept interactions always have live ids");
            };
            rows[u as usize].push(i);
        }
    }
    if rows.iter().all(Vec::is_empty) {
        return Err(Error::EmptyResult(
            "no interactions at or above the feedback threshold".into(),
        ));
    }
    let kept_ids = |ids: Vec<String>, map: &[Option<u32>]| -> Vec<String> {
        ids.into_iter()
            .zip(map)
            .filter_map(|(id, m)| m.map(|_| id))
            .collect()
    };
    let items = ItemVocab::new(kept_ids(item_ids, &item_map));
    let matrix = InteractionMatrix::from_unsorted_rows(items.len(), rows)?;
    Ok(Interactions {
        matrix,
        user_ids: kept_ids(user_ids, &user_map),
        items,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 0,
        }
    }
}

/// Train/validation/test partitions over disjoint users sharing one item vocabulary.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    /// Source user index of each partition row.
    pub train_users: Vec<usize>,
    pub validation_users: Vec<usize>,
    pub test_users: Vec<usize>,
    pub item_vocab: ItemVocab,
    pub config: SplitConfig,
}

/// JSON summary written next to a persisted split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub n_items: usize,
    pub train_users: usize,
    pub validation_users: usize,
    pub test_users: usize,
    pub seed: u64,
    pub val_frac: f64,
    pub test_frac: f64,
}

/// Users with fewer interactions cannot be folded in and always go to train.
pub const MIN_EVAL_INTERACTIONS: usize = 2;

/// Permutes users with a seeded PRNG and partitions them. Partition sizes are
/// `round(m · frac)`; validation and test are filled first from users with at
/// least [`MIN_EVAL_INTERACTIONS`] interactions, in permuted order.
pub fn split_strong_generalization(data: &Interactions, config: SplitConfig) -> Result<DatasetSplit> {
    let SplitConfig {
        val_frac,
        test_frac,
        seed,
    } = config;
    let in_unit = |f: f64| (0.0..1.0).contains(&f);
    if !in_unit(val_frac) || !in_unit(test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "fractions must satisfy 0 <= val ({val_frac}), test ({test_frac}) and val + test < 1"
        )));
    }
    let x = &data.matrix;
    let m = x.n_users();
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 users to split, found {m}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_val = (m as f64 * val_frac).round() as usize;
    let n_test = (m as f64 * test_frac).round() as usize;
    let mut validation_users = Vec::with_capacity(n_val);
    let mut test_users = Vec::with_capacity(n_test);
    let mut train_users = Vec::with_capacity(m);
    for &u in &order {
        let eligible = x.row(u).len() >= MIN_EVAL_INTERACTIONS;
        if eligible && validation_users.len() < n_val {
            validation_users.push(u);
        } else if eligible && test_users.len() < n_test {
            test_users.push(u);
        } else {
            train_users.push(u);
        }
    }
    if train_users.is_empty() {
        return Err(Error::InvalidArgument("split leaves no training users".into()));
    }
    if validation_users.len() < n_val || test_users.len() < n_test {
        log::warn!(
            "only {} users have >= {MIN_EVAL_INTERACTIONS} interactions; evaluation partitions are smaller than requested",
            validation_users.len() + test_users.len()
        );
    }
    Ok(DatasetSplit {
        train: x.select_rows(&train_users),
        validation: x.select_rows(&validation_users),
        test: x.select_rows(&test_users),
        train_users,
        validation_users,
        test_users,
        item_vocab: data.items.clone(),
        config,
    })
}

impl DatasetSplit {
    pub fn n_items(&self) -> usize {
        self.item_vocab.len()
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            n_items: self.n_items(),
            train_users: self.train.n_users(),
            validation_users: self.validation.n_users(),
            test_users: self.test.n_users(),
            seed: self.config.seed,
            val_frac: self.config.val_frac,
            test_frac: self.config.test_frac,
        }
    }

    /// Writes `train.csv`, `validation.csv`, `test.csv`, `items.csv`,
    /// `users.csv` and `split.json` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.train.write_indexed(dir.join("train.csv"))?;
        self.validation.write_indexed(dir.join("validation.csv"))?;
        self.test.write_indexed(dir.join("test.csv"))?;

        let mut items = String::from("index,item_id\n");
        for (i, id) in self.item_vocab.ids().iter().enumerate() {
            items.push_str(&format!("{i},{id}\n"));
        }
        write_file(&dir.join("items.csv"), items.as_bytes())?;

        let mut users = String::from("partition,row,source_user\n");
        for (name, list) in [
            ("train", &self.train_users),
            ("validation", &self.validation_users),
            ("test", &self.test_users),
        ] {
            for (row, u) in list.iter().enumerate() {
                users.push_str(&format!("{name},{row},{u}\n"));
            }
        }
        write_file(&dir.join("users.csv"), users.as_bytes())?;

        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        write_file(&dir.join("split.json"), manifest.as_bytes())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("split.json");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&text)?;
        let n = manifest.n_items;

        let items_path = dir.join("items.csv");
        let items_text = fs::read_to_string(&items_path).map_err(|e| Error::io(&items_path, e))?;
        let mut ids = vec![String::new(); n];
        for (lineno, line) in items_text.lines().enumerate().skip(1) {
            let malformed = || Error::Malformed {
                line: lineno + 1,
                message: format!("bad entry in {}", items_path.display()),
            };
            let (idx, id) = line.split_once(',').ok_or_else(malformed)?;
            let idx: usize = idx.parse().map_err(|_| malformed())?;
            *ids.get_mut(idx).ok_or_else(malformed)? = id.to_string();
        }

        let users_path = dir.join("users.csv");
        let users_text = fs::read_to_string(&users_path).map_err(|e| Error::io(&users_path, e))?;
        let (mut train_users, mut validation_users, mut test_users) = (vec![], vec![], vec![]);
        for (lineno, line) in users_text.lines().enumerate().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            let source = parts
                .get(2)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Malformed {
                    line: lineno + 1,
                    message: format!("bad entry in {}", users_path.display()),
                })?;
            match parts[0] {
                "train" => train_users.push(source),
                "validation" => validation_users.push(source),
                _ => test_users.push(source),
            }
        }

        let load = |name: &str, users: usize| -> Result<InteractionMatrix> {
            let mut m = InteractionMatrix::load_indexed(dir.join(name), n)?;
            // trailing users without interactions are not representable in the file
            if m.n_users() < users {
                let mut rows: Vec<Vec<u32>> = m.iter_rows().map(<[u32]>::to_vec).collect();
                rows.resize(users, Vec::new());
                m = InteractionMatrix::try_from_rows(n, &rows)?;
            }
            Ok(m)
        };
        Ok(Self {
            train: load("train.csv", manifest.train_users)?,
            validation: load("validation.csv", manifest.validation_users)?,
            test: load("test.csv", manifest.test_users)?,
            train_users,
            validation_users,
            test_users,
            item_vocab: ItemVocab::new(ids),
            config: SplitConfig {
                val_frac: manifest.val_frac,
                test_frac: manifest.test_frac,
                seed: manifest.seed,
            },
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A test user's interactions split into model input and held-out targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldInPair {
    pub input_items: Vec<u32>,
    pub target_items: Vec<u32>,
}

/// Moves `⌈holdout_frac · |row|⌉` items (at most `|row| - 1`) to the targets
/// via a seeded shuffle. Both outputs are sorted.
pub fn fold_in_split(user_row: &[u32], holdout_frac: f64, seed: u64) -> Result<FoldInPair> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in (0, 1), got {holdout_frac}"
        )));
    }
    if user_row.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "row of {} items is too small to split",
            user_row.len()
        )));
    }
    let n_target = ((holdout_frac * user_row.len() as f64).ceil() as usize).clamp(1, user_row.len() - 1);
    let mut shuffled = user_row.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut target_items = shuffled[..n_target].to_vec();
    let mut input_items = shuffled[n_target..].to_vec();
    target_items.sort_unstable();
    input_items.sort_unstable();
    Ok(FoldInPair {
        input_items,
        target_items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: &LoadOptions) -> Result<Interactions> {
        parse_interactions(text.as_bytes(), options)
    }

    #[test]
    fn threshold_drops_items_below_feedback() {
        let text = "u1,i1,5\nu1,i2,2\nu2,i1,4\n";
        let opts = LoadOptions {
            min_feedback: 4.0,
            ..LoadOptions::default()
        };
        let data = parse(text, &opts).unwrap();
        assert_eq!(data.matrix.n_users(), 2);
        assert_eq!(data.matrix.n_items(), 1);
        assert_eq!(data.matrix.row(0), &[0]);
        assert_eq!(data.matrix.row(1), &[0]);

        let keep = LoadOptions {
            keep_all_items: true,
            ..opts
        };
        let data = parse(text, &keep).unwrap();
        assert_eq!(data.matrix.n_items(), 2);
        assert_eq!(data.items.ids(), &["i1", "i2"]);
        assert_eq!(data.matrix.row(0), &[0]);
        assert_eq!(data.matrix.item_counts(), vec![2, 0]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse("", &LoadOptions::default()),
            Err(Error::EmptyResult(_))
        ));
        assert!(matches!(
            parse("user,item\n", &LoadOptions::default()),
            Err(Error::EmptyResult(_))
        ));
    }

    #[test]
    fn duplicates_are_stored_once() {
        let opts = LoadOptions {
            header: HeaderMode::Absent,
            ..LoadOptions::default()
        };
        let data = parse("u1,i1\nu1,i1\n", &opts).unwrap();
        assert_eq!(data.matrix.nnz(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("user,item,rating\n1,2,3\n1,x,bad\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        let err = parse("1,2\n3\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn header_detection_and_delimiters() {
        let opts = LoadOptions {
            delimiter: '\t',
            ..LoadOptions::default()
        };
        let data = parse("user\titem\n10\t7\n11\t7\n10\t8\n", &opts).unwrap();
        assert_eq!(data.user_ids, vec!["10", "11"]);
        assert_eq!(data.items.ids(), &["7", "8"]);
        assert_eq!(data.matrix.row(0), &[0, 1]);
    }

    #[test]
    fn first_appearance_densification() {
        let data = parse("b,z\na,y\nb,y\n", &LoadOptions {
            header: HeaderMode::Absent,
            ..LoadOptions::default()
        })
        .unwrap();
        assert_eq!(data.user_ids, vec!["b", "a"]);
        assert_eq!(data.items.ids(), &["z", "y"]);
        assert_eq!(data.matrix.row(0), &[0, 1]);
    }

    fn users(m: usize, per_user: usize) -> Interactions {
        let rows: Vec<Vec<u32>> = (0..m).map(|_| (0..per_user as u32).collect()).collect();
        Interactions {
            matrix: InteractionMatrix::try_from_rows(per_user, &rows).unwrap(),
            user_ids: (0..m).map(|u| u.to_string()).collect(),
            items: ItemVocab::identity(per_user),
        }
    }

    #[test]
    fn split_sizes() {
        let cfg = SplitConfig {
            val_frac: 0.2,
            test_frac: 0.2,
            seed: 7,
        };
        let split = split_strong_generalization(&users(10, 3), cfg).unwrap();
        assert_eq!(
            (split.train.n_users(), split.validation.n_users(), split.test.n_users()),
            (6, 2, 2)
        );
        let zero_val = SplitConfig {
            val_frac: 0.0,
            ..cfg
        };
        let split = split_strong_generalization(&users(10, 3), zero_val).unwrap();
        assert_eq!(split.validation.n_users(), 0);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let data = users(50, 4);
        let cfg = SplitConfig {
            val_frac: 0.1,
            test_frac: 0.3,
            seed: 3,
        };
        let a = split_strong_generalization(&data, cfg).unwrap();
        let b = split_strong_generalization(&data, cfg).unwrap();
        assert_eq!(a.train_users, b.train_users);
        assert_eq!(a.test_users, b.test_users);
        let mut all: Vec<usize> = a
            .train_users
            .iter()
            .chain(&a.validation_users)
            .chain(&a.test_users)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let bad = SplitConfig {
            val_frac: 0.6,
            test_frac: 0.4,
            seed: 0,
        };
        assert!(split_strong_generalization(&users(10, 2), bad).is_err());
        assert!(split_strong_generalization(&users(2, 2), SplitConfig::default()).is_err());
    }

    #[test]
    fn single_interaction_users_stay_in_train() {
        let mut rows = vec![vec![0u32]; 8];
        rows.extend(vec![vec![0u32, 1]; 2]);
        let data = Interactions {
            matrix: InteractionMatrix::try_from_rows(2, &rows).unwrap(),
            user_ids: (0..10).map(|u| u.to_string()).collect(),
            items: ItemVocab::identity(2),
        };
        let cfg = SplitConfig {
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 1,
        };
        let split = split_strong_generalization(&data, cfg).unwrap();
        for &u in split.validation_users.iter().chain(&split.test_users) {
            assert!(u >= 8);
        }
    }

    #[test]
    fn fold_in_sizes() {
        let row: Vec<u32> = (0..10).collect();
        let pair = fold_in_split(&row, 0.2, 1).unwrap();
        assert_eq!((pair.target_items.len(), pair.input_items.len()), (2, 8));
        let pair = fold_in_split(&[4, 9], 0.5, 1).unwrap();
        assert_eq!((pair.target_items.len(), pair.input_items.len()), (1, 1));
        assert_eq!(fold_in_split(&row, 0.2, 5).unwrap(), fold_in_split(&row, 0.2, 5).unwrap());
    }

    #[test]
    fn fold_in_rejects_small_rows() {
        assert!(fold_in_split(&[1], 0.5, 0).is_err());
        assert!(fold_in_split(&[1, 2], 1.0, 0).is_err());
    }
}
