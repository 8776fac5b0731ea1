//! LETOR / SVMLight-with-qid datasets grouped by query.
//!
//! Each line reads `<label> qid:<id> <index>:<value> ... [# comment]` with
//! 1-based sparse feature indices. Documents of one query must be contiguous
//! unless [`ParseOptions::regroup_interleaved`] is set.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{invalid_input, Error, Result};

/// Dense row-major `rows × cols` matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid_input(format!(
                "feature buffer has {} values, expected {rows} x {cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("feature matrix contains non-finite values"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.data[r * self.cols + col])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Pads with zero-valued trailing features up to `cols`.
    pub fn widen(&mut self, cols: usize) {
        if cols <= self.cols {
            return;
        }
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend(std::iter::repeat_n(0.0, cols - self.cols));
        }
        self.cols = cols;
        self.data = data;
    }
}

/// Documents grouped into contiguous per-query blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<f64>,
    /// `K + 1` offsets; query `i` owns rows `offsets[i]..offsets[i + 1]`.
    pub query_offsets: Vec<usize>,
    pub query_ids: Vec<String>,
}

impl QueryDataset {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<f64>,
        query_offsets: Vec<usize>,
        query_ids: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if features.rows() != n {
            return Err(invalid_input(format!(
                "{} feature rows for {n} labels",
                features.rows()
            )));
        }
        if query_offsets.first() != Some(&0) || query_offsets.last() != Some(&n) {
            return Err(invalid_input("query offsets must start at 0 and end at the document count"));
        }
        if query_offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid_input("query offsets must be strictly increasing"));
        }
        if query_ids.len() + 1 != query_offsets.len() {
            return Err(invalid_input("one query id is required per query block"));
        }
        if let Some(bad) = labels.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(invalid_input(format!("labels must be finite and nonnegative, got {bad}")));
        }
        Ok(Self { features, labels, query_offsets, query_ids })
    }

    pub fn num_docs(&self) -> usize {
        self.labels.len()
    }

    pub fn num_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn query_range(&self, i: usize) -> Range<usize> {
        self.query_offsets[i]..self.query_offsets[i + 1]
    }

    pub fn query_ranges(&self) -> impl ExactSizeIterator<Item = Range<usize>> + '_ {
        self.query_offsets.windows(2).map(|w| w[0]..w[1])
    }

    pub fn query_labels(&self, i: usize) -> &[f64] {
        &self.labels[self.query_range(i)]
    }

    /// Pads features with zero columns so that `num_features() == cols`.
    pub fn widen_features(&mut self, cols: usize) {
        self.features.widen(cols);
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Regroup documents whose qid reappears after another query instead of
    /// failing. Queries keep their first-appearance order.
    pub regroup_interleaved: bool,
}

struct Doc {
    label: f64,
    qid: String,
    features: Vec<(usize, f64)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_line(text: &str, line: usize) -> Result<Option<Doc>> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| parse_err(line, "missing label"))?;
    let label: f64 = label_tok
        .parse()
        .map_err(|_| parse_err(line, format!("malformed label '{label_tok}'")))?;
    if !label.is_finite() || label < 0.0 {
        return Err(parse_err(line, format!("label must be finite and nonnegative, got '{label_tok}'")));
    }

    let qid_tok = tokens.next().ok_or_else(|| parse_err(line, "missing qid"))?;
    let qid = match qid_tok.split_once(':') {
        Some(("qid", id)) if !id.is_empty() => id.to_string(),
        _ => return Err(parse_err(line, format!("malformed qid token '{qid_tok}'"))),
    };

    let mut features = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("malformed feature token '{tok}'")))?;
        let idx: i64 = idx
            .parse()
            .map_err(|_| parse_err(line, format!("malformed feature index in '{tok}'")))?;
        if idx <= 0 {
            return Err(parse_err(line, format!("feature index must be >= 1, got {idx}")));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| parse_err(line, format!("malformed feature value in '{tok}'")))?;
        if !val.is_finite() {
            return Err(parse_err(line, format!("non-finite feature value in '{tok}'")));
        }
        features.push((idx as usize, val));
    }
    Ok(Some(Doc { label, qid, features }))
}

/// Parses a LETOR text stream. LF and CRLF line endings are accepted.
pub fn parse_letor<R: BufRead>(reader: R, options: ParseOptions) -> Result<QueryDataset> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(doc) = parse_line(&line, i + 1)? {
            docs.push((i + 1, doc));
        }
    }
    if docs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Group by qid in first-appearance order.
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_group = usize::MAX;
    for (pos, (line, doc)) in docs.iter().enumerate() {
        let g = match group_of.get(doc.qid.as_str()) {
            Some(&g) => {
                if g != last_group && !options.regroup_interleaved {
                    return Err(parse_err(
                        *line,
                        format!("qid {} reappears after another query (documents are not contiguous)", doc.qid),
                    ));
                }
                g
            }
            None => {
                group_of.insert(doc.qid.as_str(), groups.len());
                groups.push(Vec::new());
                groups.len() - 1
            }
        };
        groups[g].push(pos);
        last_group = g;
    }

    let d = docs
        .iter()
        .flat_map(|(_, doc)| doc.features.iter().map(|&(idx, _)| idx))
        .max()
        .unwrap_or(0);
    let n = docs.len();
    let mut features = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    let mut offsets = vec![0];
    let mut ids = Vec::with_capacity(groups.len());
    for group in &groups {
        ids.push(docs[group[0]].1.qid.clone());
        for &pos in group {
            let row = labels.len();
            let doc = &docs[pos].1;
            for &(idx, val) in &doc.features {
                // Repeated indices on one line: the last occurrence wins.
                features[row * d + idx - 1] = val;
            }
            labels.push(doc.label);
        }
        offsets.push(labels.len());
    }
    QueryDataset::new(FeatureMatrix::new(n, d, features)?, labels, offsets, ids)
}

pub fn read_letor_file(path: impl AsRef<Path>, options: ParseOptions) -> Result<QueryDataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_letor(BufReader::new(file), options)
}

/// Writes every feature densely so the dimension survives a round trip.
pub fn write_letor<W: Write>(dataset: &QueryDataset, mut out: W) -> Result<()> {
    for (q, range) in dataset.query_ranges().enumerate() {
        let qid = &dataset.query_ids[q];
        for row in range {
            write!(out, "{} qid:{qid}", dataset.labels[row])?;
            for (j, v) in dataset.features.row(row).iter().enumerate() {
                write!(out, " {}:{v}", j + 1)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Summary counts for a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub num_queries: usize,
    pub num_docs: usize,
    pub num_features: usize,
    /// `(label, count)` sorted by label.
    pub label_histogram: Vec<(f64, usize)>,
    pub min_query_size: usize,
    pub mean_query_size: f64,
    pub max_query_size: usize,
}

pub fn dataset_stats(dataset: &QueryDataset) -> DatasetStats {
    let mut hist: BTreeMap<u64, usize> = BTreeMap::new();
    for &l in &dataset.labels {
        // labels are nonnegative, so bit order matches numeric order
        *hist.entry(l.to_bits()).or_default() += 1;
    }
    let sizes: Vec<usize> = dataset.query_ranges().map(|r| r.len()).collect();
    let k = sizes.len();
    DatasetStats {
        num_queries: k,
        num_docs: dataset.num_docs(),
        num_features: dataset.num_features(),
        label_histogram: hist.into_iter().map(|(b, c)| (f64::from_bits(b), c)).collect(),
        min_query_size: sizes.iter().copied().min().unwrap_or(0),
        mean_query_size: if k == 0 { 0.0 } else { dataset.num_docs() as f64 / k as f64 },
        max_query_size: sizes.iter().copied().max().unwrap_or(0),
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries\t{}", self.num_queries)?;
        writeln!(f, "documents\t{}", self.num_docs)?;
        writeln!(f, "features\t{}", self.num_features)?;
        writeln!(
            f,
            "query_size\tmin={}\tmean={:.2}\tmax={}",
            self.min_query_size, self.mean_query_size, self.max_query_size
        )?;
        for (label, count) in &self.label_histogram {
            writeln!(f, "label {label}\t{count}")?;
        }
        Ok(())
    }
}
