//! Multi-type relational datasets: in-memory model, on-disk manifest
//! format, validation report and a planted-partition generator.

pub mod mtx;
mod synthetic;

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Unordered type pair, stored with `h < l`.
pub type TypePair = (usize, usize);

/// `m` object types with pairwise non-negative relationship matrices.
///
/// Each unordered pair `{h, l}` stores at most one matrix, oriented as
/// `R_hl` with `h < l` (shape `n_h x n_l`); `R_lh` is its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAspectDataset {
    sizes: Vec<usize>,
    names: Option<Vec<String>>,
    relations: BTreeMap<TypePair, SparseMatrix>,
    truth: BTreeMap<usize, Vec<usize>>,
}

impl MultiAspectDataset {
    pub fn new(sizes: Vec<usize>, relations: BTreeMap<TypePair, SparseMatrix>) -> Result<Self> {
        let m = sizes.len();
        if m < 2 {
            return Err(Error::contract(format!("need at least 2 object types, got {m}")));
        }
        for (&(h, l), r) in &relations {
            if h >= l || l >= m {
                return Err(Error::contract(format!(
                    "relation key {h}-{l} must satisfy h < l < {m}"
                )));
            }
            if r.shape() != (sizes[h], sizes[l]) {
                return Err(Error::contract(format!(
                    "relation {h}-{l} has shape {:?}, expected ({}, {})",
                    r.shape(),
                    sizes[h],
                    sizes[l]
                )));
            }
            if !r.is_nonnegative() {
                return Err(Error::contract(format!("relation {h}-{l} has negative entries")));
            }
        }
        Ok(Self {
            sizes,
            names: None,
            relations,
            truth: BTreeMap::new(),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m() {
            return Err(Error::contract(format!(
                "{} names for {} types",
                names.len(),
                self.m()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn with_truth(mut self, h: usize, labels: Vec<usize>) -> Result<Self> {
        if h >= self.m() || labels.len() != self.sizes[h] {
            return Err(Error::contract(format!(
                "truth for type {h}: {} labels, type has {} objects",
                labels.len(),
                self.sizes.get(h).copied().unwrap_or(0)
            )));
        }
        self.truth.insert(h, labels);
        Ok(self)
    }

    /// Number of object types.
    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Stored relations keyed by `(h, l)` with `h < l`.
    pub fn relations(&self) -> &BTreeMap<TypePair, SparseMatrix> {
        &self.relations
    }

    pub fn pairs(&self) -> impl Iterator<Item = TypePair> + '_ {
        self.relations.keys().copied()
    }

    /// `R_hl` for any ordered pair; the transpose of the stored matrix when
    /// `h > l`.
    pub fn relation(&self, h: usize, l: usize) -> Option<Cow<'_, SparseMatrix>> {
        if h < l {
            self.relations.get(&(h, l)).map(Cow::Borrowed)
        } else {
            self.relations.get(&(l, h)).map(|r| Cow::Owned(r.transpose()))
        }
    }

    /// Types related to `h`, ascending.
    pub fn neighbors(&self, h: usize) -> Vec<usize> {
        self.relations
            .keys()
            .filter_map(|&(a, b)| {
                if a == h {
                    Some(b)
                } else if b == h {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn truth(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.truth
    }
}

/// Problems found by [`validate`]. None of these prevent solving.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// Object `index` of type `type_index` has no entries in relation `pair`.
    IsolatedObject {
        pair: TypePair,
        type_index: usize,
        index: usize,
    },
    /// Type takes part in no relation at all.
    UnrelatedType { type_index: usize },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::IsolatedObject {
                pair,
                type_index,
                index,
            } => write!(
                f,
                "isolated object: type {type_index} index {index} has no entries in relation {}-{}",
                pair.0, pair.1
            ),
            Finding::UnrelatedType { type_index } => {
                write!(f, "type {type_index} participates in no relation")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Stored-entry density `nnz / (n_h * n_l)` per relation.
    pub densities: BTreeMap<TypePair, f64>,
}

pub fn validate(dataset: &MultiAspectDataset) -> ValidationReport {
    let mut findings = Vec::new();
    let mut densities = BTreeMap::new();
    for (&(h, l), r) in dataset.relations() {
        let cells = (r.rows() * r.cols()) as f64;
        densities.insert((h, l), if cells > 0.0 { r.nnz() as f64 / cells } else { 0.0 });
        for i in 0..r.rows() {
            if r.row(i).0.is_empty() {
                findings.push(Finding::IsolatedObject {
                    pair: (h, l),
                    type_index: h,
                    index: i,
                });
            }
        }
        let mut col_nnz = vec![0usize; r.cols()];
        for (_, j, _) in r.triplets() {
            col_nnz[j] += 1;
        }
        for (j, _) in col_nnz.iter().enumerate().filter(|(_, &c)| c == 0) {
            findings.push(Finding::IsolatedObject {
                pair: (h, l),
                type_index: l,
                index: j,
            });
        }
    }
    for h in 0..dataset.m() {
        if dataset.neighbors(h).is_empty() {
            findings.push(Finding::UnrelatedType { type_index: h });
        }
    }
    ValidationReport {
        findings,
        densities,
    }
}

/// On-disk manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// `"h-l"` → MatrixMarket file holding `R_hl` (0-based type indices).
    pub relations: Entries,
    /// `"h"` → label file, one 0-based integer per line.
    #[serde(default, skip_serializing_if = "Entries::is_empty")]
    pub labels: Entries,
}

/// Ordered key/value list that keeps duplicate JSON keys visible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entries(pub Vec<(String, String)>);

impl Entries {
    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for Entries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl<'de> serde::de::Visitor<'de> for Visitor {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of strings to file paths")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(Visitor)
    }
}

fn parse_pair_key(key: &str) -> Option<(usize, usize)> {
    let (a, b) = key.split_once('-')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Reads a label file: one non-negative integer per line, blank lines ignored.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("invalid label '{}'", l.trim()),
            })
        })
        .collect()
}

pub fn labels_to_string(labels: &[usize]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, labels_to_string(labels)).map_err(|e| Error::io(path, e))
}

/// Loads a dataset from a JSON manifest and the files it references.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<MultiAspectDataset> {
    let manifest_path = manifest_path.as_ref();
    let bad = |msg: String| Error::Manifest {
        path: manifest_path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    if manifest.relations.is_empty() {
        return Err(bad("no relations listed".into()));
    }
    let mut relations: BTreeMap<TypePair, (SparseMatrix, PathBuf)> = BTreeMap::new();
    for (key, file) in &manifest.relations.0 {
        let (h, l) = parse_pair_key(key)
            .ok_or_else(|| bad(format!("relation key '{key}' is not of the form 'h-l'")))?;
        if h == l {
            return Err(bad(format!("relation key '{key}' relates a type to itself")));
        }
        let path = base.join(file);
        let (lo, hi) = (h.min(l), h.max(l));
        if relations.contains_key(&(lo, hi)) {
            return Err(Error::DuplicatePair {
                path: path.clone(),
                h: lo,
                l: hi,
            });
        }
        let r = mtx::read_relation(&path)?;
        let r = if h < l { r } else { r.transpose() };
        relations.insert((lo, hi), (r, path));
    }

    let max_type = relations.keys().map(|&(_, l)| l).max().unwrap_or(0);
    let m = manifest.types.unwrap_or(max_type + 1);
    if max_type >= m {
        return Err(bad(format!("relation references type {max_type} but types = {m}")));
    }

    let mut sizes: Vec<Option<usize>> = match &manifest.sizes {
        Some(s) if s.len() != m => {
            return Err(bad(format!("{} sizes listed for {m} types", s.len())));
        }
        Some(s) => s.iter().map(|&n| Some(n)).collect(),
        None => vec![None; m],
    };
    for (&(h, l), (r, path)) in &relations {
        for (t, n) in [(h, r.rows()), (l, r.cols())] {
            match sizes[t] {
                None => sizes[t] = Some(n),
                Some(expected) if expected != n => {
                    return Err(Error::ShapeMismatch {
                        path: path.clone(),
                        msg: format!(
                            "relation {h}-{l} is {}x{}, but type {t} has {expected} objects",
                            r.rows(),
                            r.cols()
                        ),
                    });
                }
                Some(_) => {}
            }
        }
    }
    let sizes = sizes
        .into_iter()
        .enumerate()
        .map(|(t, n)| n.ok_or_else(|| bad(format!("size of type {t} is unknown"))))
        .collect::<Result<Vec<_>>>()?;

    let mut ds = MultiAspectDataset::new(
        sizes,
        relations.into_iter().map(|(k, (r, _))| (k, r)).collect(),
    )?;
    if let Some(names) = manifest.names {
        ds = ds.with_names(names).map_err(|e| bad(e.to_string()))?;
    }
    for (key, file) in &manifest.labels.0 {
        let h: usize = key
            .trim()
            .parse()
            .map_err(|_| bad(format!("label key '{key}' is not a type index")))?;
        if h >= m {
            return Err(bad(format!("labels given for type {h}, only {m} types")));
        }
        let path = base.join(file);
        let labels = read_labels(&path)?;
        if labels.len() != ds.sizes()[h] {
            return Err(Error::ShapeMismatch {
                path,
                msg: format!(
                    "{} labels for type {h} with {} objects",
                    labels.len(),
                    ds.sizes()[h]
                ),
            });
        }
        ds = ds.with_truth(h, labels)?;
    }
    Ok(ds)
}

/// Writes the dataset as `manifest.json` plus one `.mtx` per relation and
/// one label file per type with ground truth. Returns the manifest path.
pub fn save_dataset(dataset: &MultiAspectDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest {
        types: Some(dataset.m()),
        names: dataset.names().map(<[String]>::to_vec),
        sizes: Some(dataset.sizes().to_vec()),
        ..Default::default()
    };
    for (&(h, l), r) in dataset.relations() {
        let file = format!("r_{h}_{l}.mtx");
        mtx::write_sparse(dir.join(&file), r)?;
        manifest.relations.0.push((format!("{h}-{l}"), file));
    }
    for (h, labels) in dataset.truth() {
        let file = format!("labels_{h}.txt");
        write_labels(dir.join(&file), labels)?;
        manifest.labels.0.push((h.to_string(), file));
    }
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
