//! Forum-post ingestion, label derivation and stratified splitting.

mod synthetic;

pub use synthetic::generate_synthetic_corpus;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::SeededRng;

/// Default share of each class that goes to the training side.
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

/// Required CSV header, in order.
pub const CSV_HEADER: [&str; 5] = ["id", "category", "title", "body", "timestamp"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: unknown category `{value}`")]
    UnknownCategory { line: u64, value: String },
    #[error("line {line}: empty id")]
    EmptyId { line: u64 },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("cannot split an empty example list")]
    NoExamples,
    #[error(
        "class {label} has only {count} example(s); both sides of the split need at least one"
    )]
    ClassTooSmall { label: usize, count: usize },
}

/// Forum section a thread was posted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Carding,
    Newbie,
    Scamming,
    Hacking,
    Review,
}

impl Category {
    /// All categories in multiclass index order.
    pub const ALL: [Category; 5] = [
        Category::Carding,
        Category::Newbie,
        Category::Scamming,
        Category::Hacking,
        Category::Review,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Carding => "Carding",
            Category::Newbie => "Newbie",
            Category::Scamming => "Scamming",
            Category::Hacking => "Hacking",
            Category::Review => "Review",
        }
    }

    /// Whether the binary scheme treats this section as threat-bearing.
    pub fn is_threat(self) -> bool {
        matches!(
            self,
            Category::Carding | Category::Scamming | Category::Hacking
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    /// Matches the section name ignoring ASCII case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumPost {
    pub id: String,
    pub category: Category,
    pub title: String,
    pub body: String,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            CorpusFormat::Csv => "csv",
            CorpusFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    /// Threat (Carding, Scamming, Hacking) = 1 versus community (Newbie, Review) = 0.
    Binary,
    /// One class per forum section, in [`Category::ALL`] order.
    Multiclass,
}

impl LabelScheme {
    pub fn num_classes(self) -> usize {
        match self {
            LabelScheme::Binary => 2,
            LabelScheme::Multiclass => 5,
        }
    }

    pub fn label_of(self, category: Category) -> usize {
        match self {
            LabelScheme::Binary => usize::from(category.is_threat()),
            LabelScheme::Multiclass => category as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub seed: u64,
    pub ratio: f64,
}

/// On-disk record shape shared by both formats.
#[derive(Debug, Serialize, Deserialize)]
struct PostRecord {
    id: String,
    category: String,
    title: String,
    body: String,
    #[serde(default)]
    timestamp: Option<String>,
}

impl PostRecord {
    fn into_post(self, line: u64) -> Result<ForumPost, CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::EmptyId { line });
        }
        let category = self
            .category
            .parse()
            .map_err(|value| CorpusError::UnknownCategory { line, value })?;
        Ok(ForumPost {
            id: self.id,
            category,
            title: self.title,
            body: self.body,
            timestamp: self.timestamp.filter(|t| !t.is_empty()),
        })
    }
}

impl From<&ForumPost> for PostRecord {
    fn from(post: &ForumPost) -> Self {
        PostRecord {
            id: post.id.clone(),
            category: post.category.to_string(),
            title: post.title.clone(),
            body: post.body.clone(),
            timestamp: post.timestamp.clone(),
        }
    }
}

/// Loads posts in file order. Any malformed record aborts the load.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<ForumPost>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let posts = match format {
        CorpusFormat::Csv => read_csv(file)?,
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)).map_err(|e| match e {
            ReadError::Io(source) => io_err(source),
            ReadError::Corpus(e) => e,
        })?,
    };
    Ok(posts)
}

enum ReadError {
    Io(std::io::Error),
    Corpus(CorpusError),
}

fn read_csv(reader: impl std::io::Read) -> Result<Vec<ForumPost>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for column in CSV_HEADER {
        if !headers.iter().any(|h| h == column) {
            return Err(CorpusError::MissingColumn(column.to_string()));
        }
    }
    let mut seen = HashSet::new();
    let mut posts = Vec::new();
    for result in rdr.records() {
        let raw = result.map_err(|e| CorpusError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = raw.position().map_or(0, |p| p.line());
        let record: PostRecord =
            raw.deserialize(Some(&headers))
                .map_err(|e| CorpusError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
        push_unique(&mut posts, &mut seen, record.into_post(line)?, line)?;
    }
    Ok(posts)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<ForumPost>, ReadError> {
    let mut seen = HashSet::new();
    let mut posts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(ReadError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PostRecord = serde_json::from_str(&line).map_err(|e| {
            let message = e.to_string();
            ReadError::Corpus(match missing_field(&message) {
                Some(field) => CorpusError::MissingColumn(field),
                None => CorpusError::Malformed {
                    line: line_no,
                    message,
                },
            })
        })?;
        let post = record.into_post(line_no).map_err(ReadError::Corpus)?;
        push_unique(&mut posts, &mut seen, post, line_no).map_err(ReadError::Corpus)?;
    }
    Ok(posts)
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

fn push_unique(
    posts: &mut Vec<ForumPost>,
    seen: &mut HashSet<String>,
    post: ForumPost,
    line: u64,
) -> Result<(), CorpusError> {
    if !seen.insert(post.id.clone()) {
        return Err(CorpusError::DuplicateId { line, id: post.id });
    }
    posts.push(post);
    Ok(())
}

/// Writes posts in the same schema [`load_corpus`] reads.
pub fn save_corpus(
    posts: &[ForumPost],
    path: &Path,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    match format {
        CorpusFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(file);
            wtr.write_record(CSV_HEADER).map_err(|e| io_err(e.into()))?;
            for post in posts {
                wtr.write_record([
                    post.id.as_str(),
                    post.category.as_str(),
                    post.title.as_str(),
                    post.body.as_str(),
                    post.timestamp.as_deref().unwrap_or(""),
                ])
                .map_err(|e| io_err(e.into()))?;
            }
            wtr.flush().map_err(io_err)?;
        }
        CorpusFormat::Jsonl => {
            let mut out = BufWriter::new(file);
            for post in posts {
                let line = serde_json::to_string(&PostRecord::from(post))
                    .expect("post records always serialize");
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

/// Maps posts to labeled examples; text is `title + " " + body`.
pub fn derive_labels(posts: &[ForumPost], scheme: LabelScheme) -> Vec<LabeledExample> {
    posts
        .iter()
        .map(|post| LabeledExample {
            text: format!("{} {}", post.title, post.body),
            label: scheme.label_of(post.category),
            source_id: post.id.clone(),
        })
        .collect()
}

/// Stratified, seeded train/validation split.
///
/// Each class contributes `round(ratio * n_c)` examples to training, clamped
/// so that both sides receive at least one. Both sides are shuffled.
pub fn split(
    examples: &[LabeledExample],
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    if examples.is_empty() {
        return Err(CorpusError::NoExamples);
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, ex) in examples.iter().enumerate() {
        by_class.entry(ex.label).or_default().push(idx);
    }
    let mut rng = SeededRng::new(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for (&label, indices) in &by_class {
        let n = indices.len();
        if n < 2 {
            return Err(CorpusError::ClassTooSmall { label, count: n });
        }
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        let mut shuffled = indices.clone();
        rng.shuffle(&mut shuffled);
        train_idx.extend_from_slice(&shuffled[..n_train]);
        val_idx.extend_from_slice(&shuffled[n_train..]);
    }
    rng.shuffle(&mut train_idx);
    rng.shuffle(&mut val_idx);
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&train_idx),
        validation: pick(&val_idx),
        seed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn post(id: &str, category: Category) -> ForumPost {
        ForumPost {
            id: id.into(),
            category,
            title: format!("title {id}"),
            body: format!("body {id}"),
            timestamp: None,
        }
    }

    #[test]
    fn loads_csv_in_file_order() {
        let f = write_tmp(
            "id,category,title,body,timestamp\n\
             a,Hacking,rat for sale,\"fud, undetected\",2019-01-01T00:00:00Z\n\
             b,Newbie,hello,,\n\
             c,Carding,fresh dumps,track 1+2,\n",
            ".csv",
        );
        let posts = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        let cats: Vec<_> = posts.iter().map(|p| p.category).collect();
        assert_eq!(
            cats,
            [Category::Hacking, Category::Newbie, Category::Carding]
        );
        assert_eq!(posts[0].body, "fud, undetected");
        assert_eq!(posts[0].timestamp.as_deref(), Some("2019-01-01T00:00:00Z"));
        assert_eq!(posts[1].body, "");
        assert_eq!(posts[1].timestamp, None);
    }

    #[test]
    fn unknown_category_reports_line() {
        let f = write_tmp(
            "id,category,title,body,timestamp\na,Hacking,t,b,\nb,Phishing,t,b,\n",
            ".csv",
        );
        let err = load_corpus(f.path(), CorpusFormat::Csv).unwrap_err();
        match err {
            CorpusError::UnknownCategory { line, value } => {
                assert_eq!(line, 3);
                assert_eq!(value, "Phishing");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn category_names_ignore_case() {
        assert_eq!("carding".parse::<Category>(), Ok(Category::Carding));
        assert_eq!("REVIEW".parse::<Category>(), Ok(Category::Review));
        assert!("cards".parse::<Category>().is_err());
    }

    #[test]
    fn missing_column_and_duplicate_id() {
        let f = write_tmp("id,category,title,timestamp\na,Hacking,t,\n", ".csv");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Csv),
            Err(CorpusError::MissingColumn(c)) if c == "body"
        ));
        let f = write_tmp(
            "id,category,title,body,timestamp\na,Hacking,t,b,\na,Review,t,b,\n",
            ".csv",
        );
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Csv),
            Err(CorpusError::DuplicateId { line: 3, .. })
        ));
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/corpus.csv"), CorpusFormat::Csv),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn loads_jsonl() {
        let f = write_tmp(
            "{\"id\":\"1\",\"category\":\"Review\",\"title\":\"t\",\"body\":\"b\",\"timestamp\":null}\n\
             {\"id\":\"2\",\"category\":\"Scamming\",\"title\":\"t\",\"body\":\"b\",\"timestamp\":\"2020-02-02\"}\n",
            ".jsonl",
        );
        let posts = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(posts.len(), 2);
        assert_eq!(posts[1].category, Category::Scamming);
        let f = write_tmp(
            "{\"id\":\"1\",\"category\":\"Review\",\"title\":\"t\"}\n",
            ".jsonl",
        );
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Jsonl),
            Err(CorpusError::MissingColumn(c)) if c == "body"
        ));
        let f = write_tmp(
            "{\"id\":\"1\",\"category\":\"Phishing\",\"title\":\"t\",\"body\":\"\"}\n",
            ".jsonl",
        );
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Jsonl),
            Err(CorpusError::UnknownCategory { line: 1, .. })
        ));
    }

    #[test]
    fn label_schemes() {
        let posts = [
            post("h", Category::Hacking),
            post("r", Category::Review),
            post("s", Category::Scamming),
        ];
        let binary = derive_labels(&posts, LabelScheme::Binary);
        assert_eq!(binary[0].label, 1);
        assert_eq!(binary[1].label, 0);
        assert_eq!(binary[0].text, "title h body h");
        let multi = derive_labels(&posts, LabelScheme::Multiclass);
        assert_eq!(multi[2].label, 2);
        assert_eq!(multi[1].label, 4);
    }

    fn balanced(n_per_class: usize) -> Vec<LabeledExample> {
        (0..2 * n_per_class)
            .map(|i| LabeledExample {
                text: format!("text {i}"),
                label: i % 2,
                source_id: format!("id{i}"),
            })
            .collect()
    }

    #[test]
    fn split_counts_and_determinism() {
        let ex = balanced(5);
        let s = split(&ex, 0.8, 42).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.validation.len(), 2);
        for label in 0..2 {
            assert_eq!(s.train.iter().filter(|e| e.label == label).count(), 4);
            assert_eq!(s.validation.iter().filter(|e| e.label == label).count(), 1);
        }
        assert_eq!(s, split(&ex, 0.8, 42).unwrap());
    }

    #[test]
    fn split_preconditions() {
        let ex = balanced(5);
        assert!(matches!(
            split(&ex, 1.0, 1),
            Err(CorpusError::InvalidRatio(_))
        ));
        assert!(matches!(
            split(&ex, 0.0, 1),
            Err(CorpusError::InvalidRatio(_))
        ));
        assert!(matches!(split(&[], 0.5, 1), Err(CorpusError::NoExamples)));
        let mut lonely = balanced(3);
        lonely.push(LabeledExample {
            text: "x".into(),
            label: 4,
            source_id: "solo".into(),
        });
        assert!(matches!(
            split(&lonely, 0.8, 1),
            Err(CorpusError::ClassTooSmall { label: 4, count: 1 })
        ));
    }

    #[test]
    fn save_load_identity() {
        let posts = generate_synthetic_corpus(3, 25);
        for format in [CorpusFormat::Csv, CorpusFormat::Jsonl] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(format!("c.{}", format.extension()));
            save_corpus(&posts, &path, format).unwrap();
            assert_eq!(load_corpus(&path, format).unwrap(), posts);
        }
    }

    proptest! {
        #[test]
        fn split_is_stratified_partition(
            counts in prop::collection::vec(2usize..40, 2..5),
            ratio in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let mut ex = Vec::new();
            for (label, &n) in counts.iter().enumerate() {
                for j in 0..n {
                    ex.push(LabeledExample {
                        text: String::new(),
                        label,
                        source_id: format!("{label}-{j}"),
                    });
                }
            }
            let s = split(&ex, ratio, seed).unwrap();
            let train_ids: HashSet<_> = s.train.iter().map(|e| e.source_id.clone()).collect();
            let val_ids: HashSet<_> = s.validation.iter().map(|e| e.source_id.clone()).collect();
            prop_assert!(train_ids.is_disjoint(&val_ids));
            prop_assert_eq!(train_ids.len() + val_ids.len(), ex.len());
            for (label, &n) in counts.iter().enumerate() {
                let tr = s.train.iter().filter(|e| e.label == label).count() as f64;
                let va = s.validation.iter().filter(|e| e.label == label).count() as f64;
                prop_assert!((tr - ratio * n as f64).abs() <= 1.0);
                prop_assert!((va - (1.0 - ratio) * n as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn binary_labels_partition(seed in any::<u64>(), n in 1usize..60) {
            let posts = generate_synthetic_corpus(seed, n);
            let ex = derive_labels(&posts, LabelScheme::Binary);
            let ones = ex.iter().filter(|e| e.label == 1).count();
            let zeros = ex.iter().filter(|e| e.label == 0).count();
            prop_assert_eq!(ones + zeros, posts.len());
        }
    }
}
