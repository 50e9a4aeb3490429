//! The annotation set of a folksonomy: who tagged which item under which
//! category.
//!
//! Users and items are opaque string identifiers. A [`Folksonomy`] keeps them
//! in sorted order so that every index-based computation downstream is
//! independent of the row order of the input file.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ANNOTATION_HEADER: [&str; 3] = ["user", "item", "category"];

/// Ordered, duplicate-free list of category labels. The position of a label
/// is the component index used by every profile built over this set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategorySet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::Validation(format!(
                "a category set needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Validation(format!("category {} has an empty label", i)));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate category label {:?}", label)));
            }
        }
        Ok(Self { labels, index })
    }

    /// Reads one label per line. Blank lines are skipped; order is kept.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut labels = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let label = line.trim_end_matches('\r');
            if !label.trim().is_empty() {
                labels.push(label.to_string());
            }
        }
        Self::new(labels)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for label in &self.labels {
            writeln!(out, "{}", label).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// One tagging event. `user` and `item` index into the owning folksonomy's
/// sorted identifier tables; `category` indexes the category set (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Annotation {
    pub user: usize,
    pub item: usize,
    pub category: usize,
}

#[derive(Debug, Clone)]
pub struct Folksonomy {
    categories: Arc<CategorySet>,
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    annotations: Vec<Annotation>,
}

impl Folksonomy {
    /// Builds a folksonomy from `(user, item, category index)` triples.
    /// Duplicate triples are kept as separate tagging events.
    pub fn from_triples<U, I>(
        categories: Arc<CategorySet>,
        triples: impl IntoIterator<Item = (U, I, usize)>,
    ) -> Result<Self>
    where
        U: Into<String>,
        I: Into<String>,
    {
        let raw: Vec<(String, String, usize)> = triples.into_iter().map(|(u, i, c)| (u.into(), i.into(), c)).collect();
        if raw.is_empty() {
            return Err(Error::Validation("folksonomy has no annotations".into()));
        }
        let num_categories = categories.len();
        if let Some((_, _, c)) = raw.iter().find(|(_, _, c)| *c >= num_categories) {
            return Err(Error::Validation(format!(
                "category index {} out of range for {} categories",
                c, num_categories
            )));
        }

        let users: Vec<String> = raw
            .iter()
            .map(|(u, _, _)| u.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let items: Vec<String> = raw
            .iter()
            .map(|(_, i, _)| i.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let user_index: HashMap<String, usize> = users.iter().enumerate().map(|(k, u)| (u.clone(), k)).collect();
        let item_index: HashMap<String, usize> = items.iter().enumerate().map(|(k, i)| (i.clone(), k)).collect();
        let annotations = raw
            .iter()
            .map(|(u, i, c)| Annotation {
                user: user_index[u],
                item: item_index[i],
                category: *c,
            })
            .collect();

        Ok(Self {
            categories,
            users,
            items,
            user_index,
            item_index,
            annotations,
        })
    }

    /// Same identifier tables, different annotation multiset. Used for
    /// training restrictions, which may legitimately end up empty.
    pub(crate) fn with_annotations(&self, annotations: Vec<Annotation>) -> Self {
        Self {
            categories: Arc::clone(&self.categories),
            users: self.users.clone(),
            items: self.items.clone(),
            user_index: self.user_index.clone(),
            item_index: self.item_index.clone(),
            annotations,
        }
    }

    pub fn categories(&self) -> &Arc<CategorySet> {
        &self.categories
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn user_index(&self, user: &str) -> Option<usize> {
        self.user_index.get(user).copied()
    }

    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    /// Per-user category counts, indexed `[user][category]`.
    pub fn user_category_counts(&self) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.num_categories()]; self.users.len()];
        for a in &self.annotations {
            counts[a.user][a.category] += 1;
        }
        counts
    }

    /// Per-item category counts, indexed `[item][category]`.
    pub fn item_category_counts(&self) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.num_categories()]; self.items.len()];
        for a in &self.annotations {
            counts[a.item][a.category] += 1;
        }
        counts
    }

    /// Distinct items each user tagged, in ascending item order.
    pub fn user_items(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.users.len()];
        for a in &self.annotations {
            sets[a.user].insert(a.item);
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Serializes the annotations in their stored order as the TSV
    /// interchange format.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", ANNOTATION_HEADER.join("\t"))?;
        for a in &self.annotations {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.users[a.user],
                self.items[a.item],
                self.categories.label(a.category)
            )?;
        }
        Ok(())
    }
}

/// Loads an annotation TSV. The header must start with `user`, `item`,
/// `category`; further columns (timestamps and the like) are ignored, but
/// every row must have as many columns as the header.
pub fn load_annotations(path: impl AsRef<Path>, categories: Arc<CategorySet>) -> Result<Folksonomy> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = BufReader::new(file).lines().enumerate();
    let width = loop {
        match lines.next() {
            None => return Err(Error::Validation(format!("{}: empty annotation file", path.display()))),
            Some((n, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() < 3 || cols[..3] != ANNOTATION_HEADER {
                    return Err(parse_err(
                        n + 1,
                        format!("expected header starting with {:?}", ANNOTATION_HEADER.join("\t")),
                    ));
                }
                break cols.len();
            }
        }
    };

    let mut triples = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != width {
            return Err(parse_err(
                n + 1,
                format!("expected {} tab-separated columns, found {}", width, cols.len()),
            ));
        }
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(parse_err(n + 1, "empty user or item identifier".into()));
        }
        let category = categories
            .index_of(cols[2])
            .ok_or_else(|| Error::UnknownCategory(cols[2].to_string()))?;
        triples.push((cols[0].to_string(), cols[1].to_string(), category));
    }
    if triples.is_empty() {
        return Err(Error::Validation(format!("{}: no annotation rows", path.display())));
    }
    Folksonomy::from_triples(categories, triples)
}

pub fn write_annotations(f: &Folksonomy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    f.write_tsv(&mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic folksonomy generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub num_categories: usize,
    pub annotations_per_user: usize,
    /// Dirichlet concentration per category. Small values give users
    /// concentrated on few categories.
    pub concentration: f64,
    /// Zipf exponent of the Dirichlet base measure. `0` is the symmetric
    /// Dirichlet; positive values make some categories globally more popular.
    pub skew: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_users: 200,
            num_items: 2000,
            num_categories: 11,
            annotations_per_user: 100,
            concentration: 0.3,
            skew: 1.5,
            seed: 42,
        }
    }
}

/// Probability that a synthetic annotation lands on an item whose home
/// category matches the tagged category.
pub const SYNTH_ITEM_AFFINITY: f64 = 0.75;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_items == 0 || self.annotations_per_user == 0 {
            return Err(Error::Config("synthesis counts must be positive".into()));
        }
        if self.num_categories < 2 {
            return Err(Error::Config("synthesis needs at least 2 categories".into()));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::Config(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        if !(self.skew.is_finite() && self.skew >= 0.0) {
            return Err(Error::Config(format!("skew must be non-negative, got {}", self.skew)));
        }
        Ok(())
    }

    /// Dirichlet parameters: `concentration * L * base`, where `base` is the
    /// normalized Zipf weight `1 / (l + 1)^skew`.
    pub fn dirichlet_alpha(&self) -> Vec<f64> {
        let weights: Vec<f64> = (0..self.num_categories)
            .map(|l| ((l + 1) as f64).powf(-self.skew))
            .collect();
        let total: f64 = weights.iter().sum();
        let scale = self.concentration * self.num_categories as f64;
        weights.iter().map(|w| scale * w / total).collect()
    }

    pub fn category_set(&self) -> CategorySet {
        let width = digits(self.num_categories - 1);
        CategorySet::new((0..self.num_categories).map(|l| format!("c{:0width$}", l, width = width)))
            .expect("generated labels are unique")
    }
}

fn digits(n: usize) -> usize {
    n.to_string().len()
}

/// Generates a folksonomy from the given spec, deterministically in `seed`.
///
/// Each user draws a latent category PMF from a Dirichlet distribution and
/// then `annotations_per_user` categories from it. Items are split into home
/// categories by `item mod L`; an annotation picks an item from its
/// category's block with probability [`SYNTH_ITEM_AFFINITY`], otherwise any
/// item. Items therefore accumulate categories from the users who tag them.
pub fn synthesize(spec: &SynthSpec) -> Result<Folksonomy> {
    spec.validate()?;
    let categories = Arc::new(spec.category_set());
    let mut rng = Pcg64::seed_from_u64(spec.seed);
    let num_categories = spec.num_categories;

    let gammas: Vec<Gamma<f64>> = spec
        .dirichlet_alpha()
        .into_iter()
        .map(|a| Gamma::new(a, 1.0).expect("positive shape"))
        .collect();
    let blocks: Vec<Vec<usize>> = (0..num_categories)
        .map(|l| (l..spec.num_items).step_by(num_categories).collect())
        .collect();

    let user_width = digits(spec.num_users.saturating_sub(1)).max(4);
    let item_width = digits(spec.num_items.saturating_sub(1)).max(5);

    let mut triples = Vec::with_capacity(spec.num_users * spec.annotations_per_user);
    for u in 0..spec.num_users {
        let mut weights: Vec<f64> = gammas.iter().map(|g| g.sample(&mut rng)).collect();
        if weights.iter().sum::<f64>() <= 0.0 || weights.iter().any(|w| !w.is_finite()) {
            // every gamma draw underflowed: fall back to a single random category
            weights = vec![0.0; num_categories];
            weights[rng.random_range(0..num_categories)] = 1.0;
        }
        let picker = WeightedIndex::new(&weights).expect("non-negative weights with positive sum");
        let user = format!("u{:0width$}", u, width = user_width);
        for _ in 0..spec.annotations_per_user {
            let category = picker.sample(&mut rng);
            let block = &blocks[category];
            let item = if !block.is_empty() && rng.random_bool(SYNTH_ITEM_AFFINITY) {
                block[rng.random_range(0..block.len())]
            } else {
                rng.random_range(0..spec.num_items)
            };
            triples.push((user.clone(), format!("i{:0width$}", item, width = item_width), category));
        }
    }
    Folksonomy::from_triples(categories, triples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub num_users: usize,
    pub num_items: usize,
    pub num_categories: usize,
    pub num_annotations: usize,
    /// Distinct `(item, category)` pairs.
    pub num_item_category_tuples: usize,
    pub avg_tags_per_user: f64,
    pub avg_categories_per_item: f64,
}

pub fn dataset_stats(f: &Folksonomy) -> StatsReport {
    let tuples: HashSet<(usize, usize)> = f.annotations().iter().map(|a| (a.item, a.category)).collect();
    let num_users = f.users().len();
    let num_items = f.items().len();
    let num_annotations = f.annotations().len();
    StatsReport {
        num_users,
        num_items,
        num_categories: f.num_categories(),
        num_annotations,
        num_item_category_tuples: tuples.len(),
        avg_tags_per_user: ratio(num_annotations, num_users),
        avg_categories_per_item: ratio(tuples.len(), num_items),
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(labels: &[&str]) -> Arc<CategorySet> {
        Arc::new(CategorySet::new(labels.iter().copied()).unwrap())
    }

    fn tsv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn category_set_rejects_bad_labels() {
        assert!(CategorySet::new(["a"]).is_err());
        assert!(CategorySet::new(["a", "a"]).is_err());
        assert!(CategorySet::new(["a", ""]).is_err());
        let c = CategorySet::new(["x", "y", "z"]).unwrap();
        assert_eq!(c.index_of("z"), Some(2));
        assert_eq!(c.index_of("w"), None);
    }

    #[test]
    fn single_row_file() {
        let file = tsv("user\titem\tcategory\nu1\ti1\tc0\n");
        let f = load_annotations(file.path(), cats(&["c0", "c1"])).unwrap();
        assert_eq!(f.users(), ["u1"]);
        assert_eq!(f.items(), ["i1"]);
        assert_eq!(f.annotations().len(), 1);
    }

    #[test]
    fn duplicates_are_kept_and_extra_columns_ignored() {
        let file = tsv("user\titem\tcategory\ttimestamp\nu1\ti1\tc0\t1\nu1\ti1\tc0\t2\r\nu2\ti1\tc1\t3\n");
        let f = load_annotations(file.path(), cats(&["c0", "c1"])).unwrap();
        assert_eq!(f.annotations().len(), 3);
        assert_eq!(f.users().len(), 2);
    }

    #[test]
    fn unknown_category_names_the_token() {
        let file = tsv("user\titem\tcategory\nu1\ti1\tnope\n");
        let err = load_annotations(file.path(), cats(&["c0", "c1"])).unwrap_err();
        assert!(matches!(&err, Error::UnknownCategory(t) if t == "nope"), "{err}");
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let file = tsv("user\titem\tcategory\nu1\ti1\tc0\nu2\ti2\n");
        match load_annotations(file.path(), cats(&["c0", "c1"])).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty = tsv("");
        assert!(matches!(
            load_annotations(empty.path(), cats(&["a", "b"])),
            Err(Error::Validation(_))
        ));
        let header_only = tsv("user\titem\tcategory\n");
        assert!(matches!(
            load_annotations(header_only.path(), cats(&["a", "b"])),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_annotations("/nonexistent/annotations.tsv", cats(&["a", "b"])).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/annotations.tsv"));
    }

    #[test]
    fn stats_of_small_folksonomy() {
        let c = cats(&["a", "b"]);
        let f = Folksonomy::from_triples(c, [("u", "i1", 0), ("u", "i1", 1), ("u", "i2", 0), ("u", "i2", 0)]).unwrap();
        let s = dataset_stats(&f);
        assert_eq!(s.num_annotations, 4);
        assert_eq!(s.avg_tags_per_user, 4.0);
        assert_eq!(s.num_item_category_tuples, 3);
        assert_eq!(s.avg_categories_per_item, 1.5);
    }

    #[test]
    fn synthesize_counts_and_determinism() {
        let spec = SynthSpec {
            num_users: 10,
            num_items: 40,
            num_categories: 4,
            annotations_per_user: 50,
            concentration: 0.5,
            skew: 0.0,
            seed: 7,
        };
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.annotations().len(), 500);
        assert_eq!(dataset_stats(&a).num_annotations, 500);
        assert_eq!(a.annotations(), b.annotations());
        assert_eq!(a.items(), b.items());

        let other = synthesize(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.annotations(), other.annotations());
    }

    #[test]
    fn synthesize_rejects_bad_spec() {
        let bad = [
            SynthSpec {
                num_users: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                annotations_per_user: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                concentration: 0.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                concentration: -1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                num_categories: 1,
                ..SynthSpec::default()
            },
        ];
        for spec in bad {
            assert!(synthesize(&spec).is_err(), "{spec:?}");
        }
    }
}
