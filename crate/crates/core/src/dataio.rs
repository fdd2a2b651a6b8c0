//! Dataset loading, stream orderings and cross-validation folds.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::caea::ClassId;
use crate::error::{Error, Result};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "CAEA_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub points: Vec<Vec<f64>>,
    /// Contiguous ids in first-appearance order.
    pub labels: Vec<ClassId>,
    /// Original label text, indexed by class id.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn from_parts(name: &str, points: Vec<Vec<f64>>, raw_labels: &[String]) -> Result<Self> {
        if points.len() != raw_labels.len() {
            return Err(Error::Data(format!(
                "{} points but {} labels",
                points.len(),
                raw_labels.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let d = points[0].len();
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(Error::Data(format!(
                "point {i} has dimension {}",
                points[i].len()
            )));
        }
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        let mut class_names = Vec::new();
        let mut labels = Vec::with_capacity(raw_labels.len());
        for l in raw_labels {
            let next = class_names.len();
            let id = *ids.entry(l.as_str()).or_insert_with(|| {
                class_names.push(l.clone());
                next
            });
            labels.push(id);
        }
        Ok(Dataset {
            name: name.to_string(),
            points,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Writes the dataset back as a headerless CSV with the label last.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (p, &l) in self.points.iter().zip(&self.labels) {
            for v in p {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(&self.class_names[l]);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
    /// Runs of spaces or tabs.
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
    pub delimiter: Delimiter,
}

pub fn load_csv(path: &Path, options: CsvOptions) -> Result<Dataset> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(BufReader::new(file), &name, options)
}

/// Parses delimited text. Features are read as `f64` without any scaling.
pub fn parse_csv<R: Read>(reader: R, name: &str, options: CsvOptions) -> Result<Dataset> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut header_skipped = !options.has_header;

    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_skipped {
            header_skipped = true;
            continue;
        }
        let fields: Vec<&str> = match options.delimiter {
            Delimiter::Comma => trimmed.split(',').map(str::trim).collect(),
            Delimiter::Tab => trimmed.split('\t').map(str::trim).collect(),
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
        };
        match width {
            None => {
                if fields.len() < 2 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "need at least one feature and a label".into(),
                    });
                }
                width = Some(fields.len());
            }
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => {}
        }
        let label_idx = match options.label_column {
            LabelColumn::Last => fields.len() - 1,
            LabelColumn::Index(i) if i < fields.len() => i,
            LabelColumn::Index(i) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("label column {i} out of range"),
                })
            }
        };
        let mut point = Vec::with_capacity(fields.len() - 1);
        for (j, f) in fields.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric feature '{f}' in column {}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite feature '{f}' in column {}", j + 1),
                });
            }
            point.push(v);
        }
        let label = fields[label_idx];
        if label.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty label".into(),
            });
        }
        points.push(point);
        labels.push(label.to_string());
    }
    if points.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    Dataset::from_parts(name, points, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamMode {
    /// Uniformly random order over all classes.
    Stationary,
    /// Class by class in ascending class id, random within each class.
    NonStationary,
}

impl std::str::FromStr for StreamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "stationary" => Ok(StreamMode::Stationary),
            "nonstationary" => Ok(StreamMode::NonStationary),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

impl std::fmt::Display for StreamMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StreamMode::Stationary => f.write_str("stationary"),
            StreamMode::NonStationary => f.write_str("nonstationary"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOrder {
    pub mode: StreamMode,
    pub seed: u64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for a purpose tag and index pair: nested SplitMix64 over
/// `seed`, then `tag`, then `a`, then `b`.
pub fn derive_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(mix64(seed) ^ tag) ^ a) ^ b)
}

pub const TAG_FOLDS: u64 = 1;
pub const TAG_STREAM: u64 = 2;

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Presentation order for the points at `indices`.
pub fn order_stream(labels: &[ClassId], indices: &[usize], order: StreamOrder) -> Vec<usize> {
    let mut rng = rng_from(order.seed);
    match order.mode {
        StreamMode::Stationary => {
            let mut out = indices.to_vec();
            out.shuffle(&mut rng);
            out
        }
        StreamMode::NonStationary => {
            let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
            for &i in indices {
                by_class.entry(labels[i]).or_default().push(i);
            }
            let mut out = Vec::with_capacity(indices.len());
            for (_, mut members) in by_class {
                members.shuffle(&mut rng);
                out.extend(members);
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub repeats: usize,
    pub folds: usize,
    /// `assignments[r][i]` is the fold of instance `i` in repeat `r`.
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn test_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified fold assignment. Within each repeat the instances of every
/// class are shuffled, the classes are laid end to end, and positions are
/// dealt round-robin to the folds.
pub fn make_folds(labels: &[ClassId], repeats: usize, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if repeats < 1 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    if labels.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} instances cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut assignments = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = rng_from(derive_seed(seed, TAG_FOLDS, r as u64, 0));
        let mut assignment = vec![0; labels.len()];
        let mut pos = 0;
        for members in by_class.values() {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            for i in members {
                assignment[i] = pos % folds;
                pos += 1;
            }
        }
        assignments.push(assignment);
    }
    Ok(FoldPlan {
        repeats,
        folds,
        assignments,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub format: String,
    pub url: String,
    pub rows: usize,
    pub cols: usize,
    /// Hex SHA-256 of the file, or `None` when unpinned.
    pub sha256: Option<String>,
}

impl ManifestEntry {
    pub fn csv_options(&self) -> CsvOptions {
        match self.format.as_str() {
            "csv-header" => CsvOptions {
                has_header: true,
                ..Default::default()
            },
            "whitespace" => CsvOptions {
                delimiter: Delimiter::Whitespace,
                ..Default::default()
            },
            "tsv" => CsvOptions {
                delimiter: Delimiter::Tab,
                ..Default::default()
            },
            _ => CsvOptions::default(),
        }
    }
}

/// Reads a tab-separated manifest: name, file, format, url, rows, cols, sha256.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!(
                    "manifest rows need 7 tab-separated fields, found {}",
                    f.len()
                ),
            });
        }
        let num = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("bad count '{s}'"),
            })
        };
        out.push(ManifestEntry {
            name: f[0].to_string(),
            file: f[1].to_string(),
            format: f[2].to_string(),
            url: f[3].to_string(),
            rows: num(f[4])?,
            cols: num(f[5])?,
            sha256: (f[6] != "-").then(|| f[6].to_ascii_lowercase()),
        });
    }
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Loads a manifest dataset from `dir`, checking its hash (when pinned) and
/// its shape.
pub fn load_manifest_entry(dir: &Path, entry: &ManifestEntry) -> Result<Dataset> {
    let path = dir.join(&entry.file);
    if !path.exists() {
        return Err(Error::Data(format!(
            "{} not found in {} (source: {})",
            entry.file,
            dir.display(),
            entry.url
        )));
    }
    if let Some(expected) = &entry.sha256 {
        let got = sha256_file(&path)?;
        if &got != expected {
            return Err(Error::Data(format!(
                "{}: sha256 {got} does not match manifest {expected}",
                entry.file
            )));
        }
    }
    let mut ds = load_csv(&path, entry.csv_options())?;
    if ds.len() != entry.rows || ds.dim() + 1 != entry.cols {
        return Err(Error::Data(format!(
            "{}: expected {} rows x {} columns, found {} x {}",
            entry.file,
            entry.rows,
            entry.cols,
            ds.len(),
            ds.dim() + 1
        )));
    }
    ds.name = entry.name.clone();
    Ok(ds)
}

/// `$CAEA_DATA_DIR`, else `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Resolves a dataset argument: an existing file path, or a name listed in
/// the manifest of `data_dir`.
pub fn resolve_dataset(arg: &str, data_dir: &Path, options: CsvOptions) -> Result<Dataset> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return load_csv(direct, options);
    }
    let manifest = data_dir.join("MANIFEST.tsv");
    if manifest.is_file() {
        if let Some(entry) = read_manifest(&manifest)?
            .into_iter()
            .find(|e| e.name == arg)
        {
            return load_manifest_entry(data_dir, &entry);
        }
    }
    let candidate = data_dir.join(format!("{arg}.csv"));
    if candidate.is_file() {
        return load_csv(&candidate, options);
    }
    Err(Error::Data(format!(
        "dataset '{arg}' is neither a file nor listed in {}",
        data_dir.display()
    )))
}
