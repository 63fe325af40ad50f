//! Multilabel datasets: MULAN-style ARFF input, a canonical CSV format,
//! looped training streams and the reduced Mediamill subsample.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::RelevanceSet;

pub const MAX_LOOPS: usize = 20;
pub const REDUCED_TRAIN: usize = 1500;
pub const REDUCED_TEST: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// How the label attributes of an ARFF file are identified.
#[derive(Debug, Clone)]
pub enum LabelSpec {
    /// The last `n` attributes.
    Count(usize),
    /// Attributes with these names, in this order.
    Names(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct MultilabelDataset {
    pub name: String,
    pub split: Split,
    features: Vec<Vec<f64>>,
    labels: Vec<RelevanceSet>,
    m: usize,
    dim: usize,
}

impl MultilabelDataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        features: Vec<Vec<f64>>,
        labels: Vec<RelevanceSet>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Contract("dataset has no rows".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let dim = features[0].len();
        let m = labels[0].m();
        if m == 0 {
            return Err(Error::Contract("dataset has no labels".into()));
        }
        for (x, r) in features.iter().zip(&labels) {
            if x.len() != dim {
                return Err(Error::Dimension { expected: dim, got: x.len() });
            }
            if r.m() != m {
                return Err(Error::Dimension { expected: m, got: r.m() });
            }
        }
        Ok(Self {
            name: name.into(),
            split,
            features,
            labels,
            m,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, row: usize) -> &[f64] {
        &self.features[row]
    }

    pub fn labels(&self, row: usize) -> &RelevanceSet {
        &self.labels[row]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], &RelevanceSet)> {
        self.features.iter().map(Vec::as_slice).zip(&self.labels)
    }

    /// Min, mean and max number of relevant labels per row.
    pub fn cardinality(&self) -> (usize, f64, usize) {
        let sizes: Vec<usize> = self.labels.iter().map(RelevanceSet::len).collect();
        let min = sizes.iter().copied().min().unwrap_or(0);
        let max = sizes.iter().copied().max().unwrap_or(0);
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
        (min, mean, max)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>, split: Split) -> Result<Self> {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(name, split, features, labels)
    }
}

#[derive(Debug, Clone)]
enum AttrKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttrKind,
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn starts_with_keyword(line: &str, keyword: &str) -> bool {
    line.len() >= keyword.len() && line[..keyword.len()].eq_ignore_ascii_case(keyword)
}

/// Splits `@attribute <name> <type>` after the keyword.
fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let rest = rest.trim();
    let (name, ty) = match rest.chars().next() {
        Some(q @ ('\'' | '"')) => match rest[1..].find(q) {
            Some(end) => (&rest[1..end + 1], &rest[end + 2..]),
            None => return parse_err(line, "unterminated quoted attribute name"),
        },
        Some(_) => match rest.find(char::is_whitespace) {
            Some(end) => (&rest[..end], &rest[end..]),
            None => return parse_err(line, "attribute without a type"),
        },
        None => return parse_err(line, "empty attribute declaration"),
    };
    let ty = ty.trim();
    let kind = if let Some(body) = ty.strip_prefix('{') {
        let Some(body) = body.strip_suffix('}') else {
            return parse_err(line, "unterminated nominal value list");
        };
        AttrKind::Nominal(body.split(',').map(|v| unquote(v).to_string()).collect())
    } else {
        let lower = ty.to_ascii_lowercase();
        if ["numeric", "real", "integer"].contains(&lower.as_str()) {
            AttrKind::Numeric
        } else {
            return parse_err(line, format!("unsupported attribute type `{ty}`"));
        }
    };
    Ok(Attribute {
        name: name.to_string(),
        kind,
    })
}

enum Role {
    Feature(usize),
    Label(usize),
}

struct Layout {
    attrs: Vec<Attribute>,
    roles: Vec<Role>,
    m: usize,
    dim: usize,
}

impl Layout {
    fn new(attrs: Vec<Attribute>, spec: &LabelSpec) -> Result<Self> {
        let total = attrs.len();
        let label_of: Vec<Option<usize>> = match spec {
            LabelSpec::Count(m) => {
                if *m == 0 || *m > total {
                    return Err(Error::Config(format!("{m} labels requested from {total} attributes")));
                }
                (0..total).map(|j| (j >= total - m).then(|| j - (total - m))).collect()
            }
            LabelSpec::Names(names) => {
                let mut label_of = vec![None; total];
                for (l, name) in names.iter().enumerate() {
                    let Some(j) = attrs.iter().position(|a| &a.name == name) else {
                        return Err(Error::Config(format!("label attribute `{name}` not declared")));
                    };
                    if label_of[j].is_some() {
                        return Err(Error::Config(format!("label attribute `{name}` listed twice")));
                    }
                    label_of[j] = Some(l);
                }
                label_of
            }
        };
        let m = label_of.iter().flatten().count();
        let mut dim = 0;
        let roles = label_of
            .into_iter()
            .map(|l| match l {
                Some(l) => Role::Label(l),
                None => {
                    dim += 1;
                    Role::Feature(dim - 1)
                }
            })
            .collect();
        Ok(Self { attrs, roles, m, dim })
    }

    fn assign(&self, j: usize, value: &str, line: usize, x: &mut [f64], mask: &mut [bool]) -> Result<()> {
        let value = unquote(value);
        if value == "?" {
            return parse_err(line, format!("missing value for `{}`", self.attrs[j].name));
        }
        match self.roles[j] {
            Role::Label(l) => {
                mask[l] = match value {
                    "0" => false,
                    "1" => true,
                    other => {
                        return parse_err(line, format!("non-binary label value `{other}` for `{}`", self.attrs[j].name))
                    }
                }
            }
            Role::Feature(f) => {
                x[f] = match &self.attrs[j].kind {
                    AttrKind::Numeric => match value.parse::<f64>() {
                        Ok(v) if v.is_finite() => v,
                        _ => return parse_err(line, format!("bad numeric value `{value}`")),
                    },
                    AttrKind::Nominal(values) => match values.iter().position(|v| v == value) {
                        Some(i) => i as f64,
                        None => return parse_err(line, format!("undeclared nominal value `{value}`")),
                    },
                }
            }
        }
        Ok(())
    }

    fn row(&self, text: &str, line: usize) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut x = vec![0.0; self.dim];
        let mut mask = vec![false; self.m];
        let total = self.attrs.len();
        let body = match text.strip_prefix('{') {
            Some(b) => match b.strip_suffix('}') {
                Some(b) => Some(b.trim()),
                None => return parse_err(line, "unterminated `{` row"),
            },
            None => None,
        };
        let sparse = body.is_some_and(|b| {
            b.is_empty() || b.split(',').next().is_some_and(|first| first.split_whitespace().count() == 2)
        });
        if sparse {
            let mut seen = HashSet::new();
            for entry in body.unwrap().split(',').filter(|e| !e.trim().is_empty()) {
                let mut parts = entry.split_whitespace();
                let (Some(idx), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                    return parse_err(line, format!("bad sparse entry `{}`", entry.trim()));
                };
                let j: usize = match idx.parse() {
                    Ok(j) if j < total => j,
                    _ => return parse_err(line, format!("bad sparse index `{idx}`")),
                };
                if !seen.insert(j) {
                    return parse_err(line, format!("sparse index {j} repeated"));
                }
                self.assign(j, value, line, &mut x, &mut mask)?;
            }
        } else {
            let values: Vec<&str> = body.unwrap_or(text).split(',').collect();
            if values.len() != total {
                return parse_err(line, format!("expected {total} values, found {}", values.len()));
            }
            for (j, v) in values.iter().enumerate() {
                self.assign(j, v, line, &mut x, &mut mask)?;
            }
        }
        Ok((x, mask))
    }
}

/// Parses ARFF text. The relation name becomes the dataset name.
pub fn parse_arff_str(text: &str, spec: &LabelSpec, split: Split) -> Result<MultilabelDataset> {
    let mut name = String::new();
    let mut attrs = Vec::new();
    let mut layout: Option<Layout> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        match &layout {
            Some(layout) => {
                let (x, mask) = layout.row(t, line)?;
                features.push(x);
                labels.push(RelevanceSet::from_mask(mask));
            }
            None => {
                if starts_with_keyword(t, "@relation") {
                    name = unquote(&t["@relation".len()..]).to_string();
                } else if starts_with_keyword(t, "@attribute") {
                    attrs.push(parse_attribute(&t["@attribute".len()..], line)?);
                } else if starts_with_keyword(t, "@data") {
                    if attrs.is_empty() {
                        return parse_err(line, "@data before any @attribute");
                    }
                    layout = Some(Layout::new(std::mem::take(&mut attrs), spec)?);
                } else {
                    return parse_err(line, format!("unexpected header line `{t}`"));
                }
            }
        }
    }
    if layout.is_none() {
        return parse_err(last_line, "no @data section");
    }
    if features.is_empty() {
        return parse_err(last_line, "no data rows");
    }
    MultilabelDataset::new(name, split, features, labels)
}

pub fn parse_arff(path: impl AsRef<Path>, spec: &LabelSpec, split: Split) -> Result<MultilabelDataset> {
    parse_arff_str(&fs::read_to_string(path)?, spec, split)
}

fn meta_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes `path` as canonical CSV and `path.meta` as a key=value sidecar.
pub fn write_csv(ds: &MultilabelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=ds.dim)
        .map(|i| format!("f{i}"))
        .chain((1..=ds.m).map(|i| format!("l{i}")))
        .collect();
    w.write_record(&header)?;
    for (x, r) in ds.rows() {
        let record: Vec<String> = x
            .iter()
            .map(|v| v.to_string())
            .chain(r.mask().iter().map(|&b| if b { "1".into() } else { "0".into() }))
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    let meta = format!("name={}\nm={}\ndim={}\nsplit={}\n", ds.name, ds.m, ds.dim, ds.split);
    fs::write(meta_path(path), meta)?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<MultilabelDataset> {
    let path = path.as_ref();
    let meta_file = meta_path(path);
    let meta = fs::read_to_string(&meta_file)?;
    let mut name = None;
    let mut m = None;
    let mut dim = None;
    let mut split = Split::Train;
    for (i, line) in meta.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return parse_err(i + 1, format!("expected key=value in {}", meta_file.display()));
        };
        match key.trim() {
            "name" => name = Some(value.trim().to_string()),
            "m" => m = value.trim().parse::<usize>().ok(),
            "dim" => dim = value.trim().parse::<usize>().ok(),
            "split" => {
                split = match value.trim() {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    other => return parse_err(i + 1, format!("unknown split `{other}`")),
                }
            }
            _ => {}
        }
    }
    let (Some(m), Some(dim)) = (m, dim) else {
        return parse_err(0, format!("{} lacks m or dim", meta_file.display()));
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let width = rdr.headers()?.len();
    if width != m + dim {
        return parse_err(1, format!("header has {width} columns, metadata says {}", m + dim));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let mut x = Vec::with_capacity(dim);
        for v in rec.iter().take(dim) {
            match v.parse::<f64>() {
                Ok(v) if v.is_finite() => x.push(v),
                _ => return parse_err(line, format!("bad feature value `{v}`")),
            }
        }
        let mut mask = Vec::with_capacity(m);
        for v in rec.iter().skip(dim) {
            mask.push(match v {
                "0" => false,
                "1" => true,
                other => return parse_err(line, format!("non-binary label value `{other}`")),
            });
        }
        features.push(x);
        labels.push(RelevanceSet::from_mask(mask));
    }
    MultilabelDataset::new(name.unwrap_or_default(), split, features, labels)
}

/// Loads `.arff` through [`parse_arff`] and anything else as canonical CSV.
pub fn load(path: impl AsRef<Path>, spec: &LabelSpec, split: Split) -> Result<MultilabelDataset> {
    let path = path.as_ref();
    let is_arff = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff"));
    if is_arff {
        parse_arff(path, spec, split)
    } else {
        let mut ds = read_csv(path)?;
        ds.split = split;
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StreamPlan {
    loops: usize,
    shuffle_each_loop: bool,
    seed: u64,
}

impl StreamPlan {
    pub fn new(loops: usize, shuffle_each_loop: bool, seed: u64) -> Result<Self> {
        if loops == 0 || loops > MAX_LOOPS {
            return Err(Error::Config(format!("loops must be in 1..={MAX_LOOPS}, got {loops}")));
        }
        Ok(Self {
            loops,
            shuffle_each_loop,
            seed,
        })
    }

    pub fn loops(&self) -> usize {
        self.loops
    }

    /// Row indices in streaming order, `n · loops` of them.
    pub fn order(&self, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(n * self.loops);
        for _ in 0..self.loops {
            let mut pass: Vec<usize> = (0..n).collect();
            if self.shuffle_each_loop {
                pass.shuffle(&mut rng);
            }
            out.extend(pass);
        }
        out
    }
}

pub fn stream<'a>(
    ds: &'a MultilabelDataset,
    plan: &StreamPlan,
) -> impl Iterator<Item = (&'a [f64], &'a RelevanceSet)> + 'a {
    plan.order(ds.len())
        .into_iter()
        .map(move |i| (ds.features(i), ds.labels(i)))
}

/// Draws 1500 training rows from `train` and 500 test rows from `test`,
/// uniformly without replacement, keeping original row order.
pub fn reduce_mediamill(
    train: &MultilabelDataset,
    test: &MultilabelDataset,
    seed: u64,
) -> Result<(MultilabelDataset, MultilabelDataset)> {
    if train.m != test.m || train.dim != test.dim {
        return Err(Error::Dimension {
            expected: train.m + train.dim,
            got: test.m + test.dim,
        });
    }
    if train.len() < REDUCED_TRAIN || test.len() < REDUCED_TEST {
        return Err(Error::Contract(format!(
            "need at least {REDUCED_TRAIN} train and {REDUCED_TEST} test rows, have {} and {}",
            train.len(),
            test.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |n: usize, amount: usize| {
        let mut idx = rand::seq::index::sample(&mut rng, n, amount).into_vec();
        idx.sort_unstable();
        idx
    };
    let tr = pick(train.len(), REDUCED_TRAIN);
    let te = pick(test.len(), REDUCED_TEST);
    Ok((
        train.select(&tr, "mediamill-reduced", Split::Train)?,
        test.select(&te, "mediamill-reduced", Split::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "% tiny\n@relation 'tiny: -C -2'\n@attribute f1 numeric\n@attribute 'f 2' REAL\n@attribute a {0,1}\n@attribute b {0,1}\n@data\n";

    fn parse(body: &str) -> Result<MultilabelDataset> {
        parse_arff_str(&format!("{HEADER}{body}"), &LabelSpec::Count(2), Split::Train)
    }

    #[test]
    fn dense_row_with_braces() {
        let ds = parse("{0.1,0.2,1,0}\n").unwrap();
        assert_eq!(ds.features(0), &[0.1, 0.2]);
        assert_eq!(ds.labels(0).indices(), vec![0]);
        assert_eq!(ds.name, "tiny: -C -2");
    }

    #[test]
    fn sparse_row() {
        let ds = parse("{0 0.5, 3 1}\n").unwrap();
        assert_eq!(ds.features(0), &[0.5, 0.0]);
        assert_eq!(ds.labels(0).indices(), vec![1]);
    }

    #[test]
    fn plain_dense_and_empty_sparse_rows() {
        let ds = parse("1.5,-2,0,1\n{}\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.features(0), &[1.5, -2.0]);
        assert!(ds.labels(1).is_empty());
        assert_eq!((ds.m(), ds.dim()), (2, 2));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("0.1,0.2,1,0\n0.1,0.2,2,0\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 9);
                assert!(msg.contains("non-binary"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("0.1,?,1,0\n"), Err(Error::Parse { line: 8, .. })));
        assert!(matches!(parse("0.1,0.2,1\n"), Err(Error::Parse { line: 8, .. })));
        assert!(matches!(parse("{0 0.1, 9 1}\n"), Err(Error::Parse { line: 8, .. })));
    }

    #[test]
    fn labels_by_name() {
        let text = "@relation r\n@attribute y {0,1}\n@attribute x numeric\n@attribute z {0,1}\n@data\n1,3.5,0\n";
        let spec = LabelSpec::Names(vec!["z".into(), "y".into()]);
        let ds = parse_arff_str(text, &spec, Split::Test).unwrap();
        assert_eq!(ds.features(0), &[3.5]);
        assert_eq!(ds.labels(0).indices(), vec![1]);
        let missing = LabelSpec::Names(vec!["q".into()]);
        assert!(matches!(parse_arff_str(text, &missing, Split::Test), Err(Error::Config(_))));
    }

    #[test]
    fn csv_round_trip() {
        let ds = parse("0.1,0.2,1,0\n{0 1e-17, 3 1}\n-3.25,7,1,1\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        write_csv(&ds, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.name, ds.name);
        for i in 0..ds.len() {
            assert_eq!(back.features(i), ds.features(i));
            assert_eq!(back.labels(i), ds.labels(i));
        }
    }

    #[test]
    fn stream_orders() {
        let identity = StreamPlan::new(1, false, 3).unwrap().order(5);
        assert_eq!(identity, vec![0, 1, 2, 3, 4]);
        let twice = StreamPlan::new(2, true, 3).unwrap().order(50);
        let mut counts = [0; 50];
        for i in &twice {
            counts[*i] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2));
        assert_eq!(twice, StreamPlan::new(2, true, 3).unwrap().order(50));
        assert!(StreamPlan::new(21, true, 0).is_err());
        assert!(StreamPlan::new(0, true, 0).is_err());
    }

    fn synthetic(n: usize, split: Split) -> MultilabelDataset {
        let features = (0..n).map(|i| vec![i as f64, 1.0]).collect();
        let labels = (0..n).map(|i| RelevanceSet::from_indices(3, &[i % 3]).unwrap()).collect();
        MultilabelDataset::new("mm", split, features, labels).unwrap()
    }

    #[test]
    fn reduction_sizes_and_determinism() {
        let train = synthetic(3000, Split::Train);
        let test = synthetic(1200, Split::Test);
        let (a, b) = reduce_mediamill(&train, &test, 9).unwrap();
        assert_eq!((a.len(), b.len()), (REDUCED_TRAIN, REDUCED_TEST));
        assert_eq!((a.m(), a.dim()), (3, 2));
        let (a2, _) = reduce_mediamill(&train, &test, 9).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.features(i), a2.features(i));
        }
        let distinct: HashSet<u64> = a.rows().map(|(x, _)| x[0] as u64).collect();
        assert_eq!(distinct.len(), REDUCED_TRAIN);
        assert!(reduce_mediamill(&synthetic(100, Split::Train), &test, 1).is_err());
    }
}
