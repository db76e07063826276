//! Embedding file parsing, frequency filtering and vocabulary alignment.
//!
//! Vectors are stored as `f32` rows in a flat row-major buffer. Everything
//! downstream accumulates in `f64`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `N d` header, then `token c1 .. cd` per line.
    Word2VecText,
    /// No header, `token c1 .. cd` per line.
    GloveText,
    /// Tab-separated `token\tc1\t..\tcd`.
    Tsv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec_text" | "word2vec" => Ok(Format::Word2VecText),
            "glove_text" | "glove" => Ok(Format::GloveText),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::InvalidConfig(format!("unknown embedding format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Word2VecText => "word2vec_text",
            Format::GloveText => "glove_text",
            Format::Tsv => "tsv",
        })
    }
}

/// One embedding space as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding {
    pub name: String,
    pub tokens: Vec<String>,
    pub dim: usize,
    /// Row-major `tokens.len() × dim`.
    pub data: Vec<f32>,
}

impl RawEmbedding {
    /// Builds an embedding after checking every invariant (unique tokens,
    /// finite components, consistent shape).
    pub fn new(name: impl Into<String>, tokens: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if tokens.is_empty() {
            return Err(Error::Empty("embedding".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::Mismatch(format!(
                "{} tokens × {} dims needs {} values, got {}",
                tokens.len(),
                dim,
                tokens.len() * dim,
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(tokens.len());
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(Error::DuplicateToken(t.clone()));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: pos / dim + 1,
                message: format!("non-finite component in row for {:?}", tokens[pos / dim]),
            });
        }
        Ok(RawEmbedding { name: name.into(), tokens, dim, data })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn parse_embedding_file(path: impl AsRef<Path>, format: Format, name: &str) -> Result<RawEmbedding> {
    let file = File::open(path.as_ref())?;
    parse_embedding(BufReader::new(file), format, name)
}

/// Parses an embedding from any buffered reader. Blank lines are ignored;
/// line numbers in errors are 1-based and count every physical line.
pub fn parse_embedding<R: BufRead>(reader: R, format: Format, name: &str) -> Result<RawEmbedding> {
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut declared_rows: Option<usize> = None;
    let mut seen: HashSet<String> = HashSet::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }

        if format == Format::Word2VecText && declared_rows.is_none() {
            let mut parts = line.split_ascii_whitespace();
            let header = (parts.next(), parts.next(), parts.next());
            let (Some(n), Some(d), None) = header else {
                return Err(parse_err(lineno, "expected header \"<rows> <dims>\""));
            };
            let n: usize = n.parse().map_err(|_| parse_err(lineno, "row count in header is not an integer"))?;
            let d: usize = d.parse().map_err(|_| parse_err(lineno, "dimension in header is not an integer"))?;
            if d == 0 {
                return Err(parse_err(lineno, "dimension in header must be at least 1"));
            }
            declared_rows = Some(n);
            dim = Some(d);
            continue;
        }

        let mut fields: Box<dyn Iterator<Item = &str>> = match format {
            Format::Tsv => Box::new(line.split('\t')),
            _ => Box::new(line.split_ascii_whitespace()),
        };
        let token = fields.next().unwrap_or_default();
        if token.is_empty() {
            return Err(parse_err(lineno, "missing token"));
        }
        let start = data.len();
        for field in fields {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("cannot parse component {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite component {field:?}")));
            }
            data.push(v);
        }
        let found = data.len() - start;
        match dim {
            None if found == 0 => return Err(parse_err(lineno, "row has no components")),
            None => dim = Some(found),
            Some(d) if d != found => {
                return Err(parse_err(lineno, format!("expected {d} components, found {found}")));
            }
            Some(_) => {}
        }
        if !seen.insert(token.to_owned()) {
            return Err(Error::DuplicateToken(token.to_owned()));
        }
        tokens.push(token.to_owned());
    }

    if tokens.is_empty() {
        return Err(Error::Empty(format!("embedding {name:?}")));
    }
    if let Some(n) = declared_rows {
        if n != tokens.len() {
            return Err(Error::Mismatch(format!("header declares {n} rows but file has {}", tokens.len())));
        }
    }
    let dim = dim.expect("dimension known once a row was read");
    Ok(RawEmbedding { name: name.to_owned(), tokens, dim, data })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Writes `token c1 .. cd` lines. Components use the shortest decimal that
/// parses back to the same `f32`, so re-parsing is bit-exact.
pub fn write_glove<W: Write>(out: W, tokens: &[String], dim: usize, data: &[f32]) -> Result<()> {
    write_embedding(out, Format::GloveText, tokens, dim, data)
}

/// Writes rows in any supported text format with shortest round-trip
/// decimals.
pub fn write_embedding<W: Write>(mut out: W, format: Format, tokens: &[String], dim: usize, data: &[f32]) -> Result<()> {
    if dim == 0 || data.len() != tokens.len() * dim {
        return Err(Error::Mismatch(format!("{} tokens do not match {} values of dim {dim}", tokens.len(), data.len())));
    }
    let sep = match format {
        Format::Tsv => '\t',
        Format::GloveText | Format::Word2VecText => ' ',
    };
    if format == Format::Word2VecText {
        writeln!(out, "{} {dim}", tokens.len())?;
    }
    for (token, row) in tokens.iter().zip(data.chunks_exact(dim)) {
        if token.is_empty() || token.contains(sep) || (sep == ' ' && token.contains(|c: char| c.is_ascii_whitespace())) {
            return Err(Error::InvalidConfig(format!("token {token:?} cannot be written as {format}")));
        }
        out.write_all(token.as_bytes())?;
        for v in row {
            write!(out, "{sep}{v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `token<TAB>count` sidecar.
pub fn read_frequencies<R: BufRead>(reader: R) -> Result<HashMap<String, u64>> {
    let mut freqs = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let (token, count) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse_err(lineno + 1, "expected \"token<TAB>count\""))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno + 1, format!("cannot parse count {count:?}")))?;
        freqs.insert(token.to_owned(), count);
    }
    Ok(freqs)
}

pub fn read_frequency_file(path: impl AsRef<Path>) -> Result<HashMap<String, u64>> {
    read_frequencies(BufReader::new(File::open(path.as_ref())?))
}

/// Frequencies implied by file order: the first row is the most frequent.
pub fn rank_frequencies(model: &RawEmbedding) -> HashMap<String, u64> {
    let n = model.len() as u64;
    model.tokens.iter().enumerate().map(|(i, t)| (t.clone(), n - i as u64)).collect()
}

/// Keeps the `n` most frequent tokens, ordered by descending count with
/// ties broken by token. Tokens absent from `frequencies` are dropped.
pub fn filter_top_n(model: &RawEmbedding, frequencies: &HashMap<String, u64>, n: usize) -> Result<RawEmbedding> {
    if n == 0 {
        return Err(Error::InvalidConfig("top-n must be at least 1".into()));
    }
    let mut ranked: Vec<(u64, &str, usize)> = model
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| frequencies.get(t).map(|&c| (c, t.as_str(), i)))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    ranked.truncate(n);
    if ranked.is_empty() {
        return Err(Error::Empty(format!("top-{n} filter of {:?}", model.name)));
    }

    let mut tokens = Vec::with_capacity(ranked.len());
    let mut data = Vec::with_capacity(ranked.len() * model.dim);
    for (_, t, i) in ranked {
        tokens.push(t.to_owned());
        data.extend_from_slice(model.row(i));
    }
    Ok(RawEmbedding { name: model.name.clone(), tokens, dim: model.dim, data })
}

/// One model restricted to a dataset's shared vocabulary, rows in
/// vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedModel {
    pub dataset: String,
    pub name: String,
    pub dim: usize,
    pub data: Vec<f32>,
    /// Shared index → row in the original file.
    pub source_rows: Vec<usize>,
}

impl AlignedModel {
    /// Wraps an already-aligned matrix (rows in vocabulary order).
    pub fn new(dataset: impl Into<String>, name: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Mismatch(format!("{} values do not form rows of {dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite component".into()));
        }
        let n = data.len() / dim;
        Ok(AlignedModel { dataset: dataset.into(), name: name.into(), dim, data, source_rows: (0..n).collect() })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub vocabulary: Vec<String>,
    pub models: Vec<AlignedModel>,
}

impl Dataset {
    /// Assembles a dataset from models that are already aligned to
    /// `vocabulary`.
    pub fn from_aligned(id: impl Into<String>, vocabulary: Vec<String>, models: Vec<AlignedModel>) -> Result<Self> {
        let id = id.into();
        let mut seen = HashSet::new();
        for t in &vocabulary {
            if !seen.insert(t.as_str()) {
                return Err(Error::DuplicateToken(t.clone()));
            }
        }
        let mut names = HashSet::new();
        for m in &models {
            if m.len() != vocabulary.len() {
                return Err(Error::Mismatch(format!(
                    "model {:?} has {} rows for a vocabulary of {}",
                    m.name,
                    m.len(),
                    vocabulary.len()
                )));
            }
            if m.dataset != id {
                return Err(Error::Mismatch(format!("model {:?} belongs to dataset {:?}", m.name, m.dataset)));
            }
            if !names.insert(m.name.as_str()) {
                return Err(Error::Mismatch(format!("duplicate model name {:?}", m.name)));
            }
        }
        Ok(Dataset { id, vocabulary, models })
    }

    pub fn model(&self, name: &str) -> Option<&AlignedModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.binary_search_by(|t| t.as_str().cmp(token)).ok().or_else(|| {
            // vocabularies built by intersection are sorted; loaded ones might not be
            self.vocabulary.iter().position(|t| t == token)
        })
    }
}

/// Aligns models onto the lexicographically sorted intersection of their
/// vocabularies. Tokens match byte-exact.
pub fn intersect_vocabulary(models: &[RawEmbedding], dataset_id: &str) -> Result<Dataset> {
    if models.len() < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 models to intersect, got {}", models.len())));
    }
    let mut shared: BTreeSet<&str> = models[0].tokens.iter().map(String::as_str).collect();
    for m in &models[1..] {
        let other: HashSet<&str> = m.tokens.iter().map(String::as_str).collect();
        shared.retain(|t| other.contains(t));
    }
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let vocabulary: Vec<String> = shared.into_iter().map(str::to_owned).collect();

    let aligned = models
        .iter()
        .map(|m| {
            let index: HashMap<&str, usize> = m.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
            let source_rows: Vec<usize> = vocabulary.iter().map(|t| index[t.as_str()]).collect();
            let mut data = Vec::with_capacity(vocabulary.len() * m.dim);
            for &r in &source_rows {
                data.extend_from_slice(m.row(r));
            }
            AlignedModel { dataset: dataset_id.to_owned(), name: m.name.clone(), dim: m.dim, data, source_rows }
        })
        .collect();
    Dataset::from_aligned(dataset_id, vocabulary, aligned)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn glove(s: &str) -> Result<RawEmbedding> {
        parse_embedding(s.as_bytes(), Format::GloveText, "m")
    }

    fn freqs(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn word2vec_header_and_rows() {
        let e = parse_embedding("2 3\na 1 0 0\nb 0 1 0".as_bytes(), Format::Word2VecText, "w").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.dim, 3);
        assert_eq!(e.tokens, ["a", "b"]);
        assert_eq!(e.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn word2vec_enforces_header_dim() {
        let err = parse_embedding("2 3\na 1 0 0\nb 0 1".as_bytes(), Format::Word2VecText, "w").unwrap_err();
        assert_eq!(err.to_string(), "line 3: expected 3 components, found 2");
        let err = parse_embedding("3 1\na 1\nb 0".as_bytes(), Format::Word2VecText, "w").unwrap_err();
        assert!(matches!(err, Error::Mismatch(_)));
    }

    #[test]
    fn glove_infers_dim() {
        let e = glove("a 1 0\nb 0 1\nc 1 1\n").unwrap();
        assert_eq!((e.len(), e.dim), (3, 2));
    }

    #[test]
    fn glove_wrong_component_count() {
        let err = glove("a 1 0\nb 0 1 7").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected 2 components, found 3");
    }

    #[test]
    fn rejects_duplicates_non_finite_and_empty() {
        assert!(matches!(glove("a 1\na 2"), Err(Error::DuplicateToken(t)) if t == "a"));
        assert!(matches!(glove("a 1\nb nan"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(glove("a 1\nb 1e60"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(glove(""), Err(Error::Empty(_))));
        assert!(matches!(glove("\n\n"), Err(Error::Empty(_))));
    }

    #[test]
    fn tsv_rows() {
        let e = parse_embedding("a\t1\t2\r\nb c\t3\t4\n".as_bytes(), Format::Tsv, "t").unwrap();
        assert_eq!(e.tokens, ["a", "b c"]);
        assert_eq!(e.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn top_n_orders_by_count() {
        let e = glove("a 1\nb 2\nc 3").unwrap();
        let f = filter_top_n(&e, &freqs(&[("a", 5), ("b", 9), ("c", 1)]), 2).unwrap();
        assert_eq!(f.tokens, ["b", "a"]);
        assert_eq!(f.data, [2.0, 1.0]);
    }

    #[test]
    fn top_n_larger_than_model_reorders_only() {
        let e = glove("a 1\nb 2\nc 3").unwrap();
        let f = filter_top_n(&e, &freqs(&[("a", 5), ("b", 9), ("c", 1)]), 10).unwrap();
        assert_eq!(f.tokens, ["b", "a", "c"]);
    }

    #[test]
    fn top_n_tie_breaks_lexicographically() {
        let e = glove("b 1\na 2").unwrap();
        let f = filter_top_n(&e, &freqs(&[("a", 5), ("b", 5)]), 1).unwrap();
        assert_eq!(f.tokens, ["a"]);
    }

    #[test]
    fn top_n_empty_result_is_error() {
        let e = glove("a 1").unwrap();
        assert!(filter_top_n(&e, &freqs(&[("z", 1)]), 1).is_err());
    }

    #[test]
    fn rank_frequencies_follow_file_order() {
        let e = glove("c 1\na 2\nb 3").unwrap();
        let f = filter_top_n(&e, &rank_frequencies(&e), 2).unwrap();
        assert_eq!(f.tokens, ["c", "a"]);
    }

    #[test]
    fn frequency_sidecar() {
        let f = read_frequencies("the\t100\nof\t50\r\n\n".as_bytes()).unwrap();
        assert_eq!(f["the"], 100);
        assert_eq!(f["of"], 50);
        assert!(read_frequencies("the 100".as_bytes()).is_err());
    }

    #[test]
    fn intersection_is_sorted_and_aligned() {
        let a = parse_embedding("c 3\nb 2\na 1".as_bytes(), Format::GloveText, "A").unwrap();
        let b = parse_embedding("d 40 0\nc 30 0\nb 20 0".as_bytes(), Format::GloveText, "B").unwrap();
        let ds = intersect_vocabulary(&[a, b], "d").unwrap();
        assert_eq!(ds.vocabulary, ["b", "c"]);
        assert_eq!(ds.models[0].data, [2.0, 3.0]);
        assert_eq!(ds.models[1].data, [20.0, 0.0, 30.0, 0.0]);
        assert_eq!(ds.models[1].source_rows, [2, 1]);
        assert_eq!(ds.index_of("c"), Some(1));
    }

    #[test]
    fn intersection_identity_and_errors() {
        let a = parse_embedding("z 1\ny 2".as_bytes(), Format::GloveText, "A").unwrap();
        let mut b = a.clone();
        b.name = "B".into();
        assert_eq!(intersect_vocabulary(&[a.clone(), b], "d").unwrap().vocabulary, ["y", "z"]);
        let c = parse_embedding("q 1".as_bytes(), Format::GloveText, "C").unwrap();
        assert!(matches!(intersect_vocabulary(&[a.clone(), c], "d"), Err(Error::EmptyIntersection)));
        assert!(intersect_vocabulary(&[a], "d").is_err());
    }

    #[test]
    fn writers_round_trip_every_format() {
        let tokens = vec!["a b".to_string(), "c".to_string()];
        let data = [0.1f32, -2.5e-8, 3.0, f32::MIN_POSITIVE];
        let mut buf = Vec::new();
        write_embedding(&mut buf, Format::Tsv, &tokens, 2, &data).unwrap();
        let back = parse_embedding(buf.as_slice(), Format::Tsv, "t").unwrap();
        assert_eq!((back.tokens, back.data), (tokens.clone(), data.to_vec()));

        assert!(write_embedding(Vec::new(), Format::GloveText, &tokens, 2, &data).is_err());
        let plain = vec!["a".to_string(), "c".to_string()];
        let mut buf = Vec::new();
        write_embedding(&mut buf, Format::Word2VecText, &plain, 2, &data).unwrap();
        assert!(buf.starts_with(b"2 2\n"));
        let back = parse_embedding(buf.as_slice(), Format::Word2VecText, "w").unwrap();
        assert_eq!(back.data, data.to_vec());
    }

    #[test]
    fn format_names() {
        for f in [Format::Word2VecText, Format::GloveText, Format::Tsv] {
            assert_eq!(f.to_string().parse::<Format>().unwrap(), f);
        }
        assert!("bin".parse::<Format>().is_err());
    }
}
