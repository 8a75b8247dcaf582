//! Pre-trained word vectors, average pooling and cosine similarity.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::container::{ByteReader, ByteWriter};
use crate::corpus::is_stopword;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// `word v1 ... vD` per line, optional `count dim` header.
    Text,
    /// word2vec binary: `count dim\n` then `word<space>` + D little-endian f32.
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            _ => Err(format!("unknown embedding format {s:?} (expected text or binary)")),
        }
    }
}

impl EmbeddingFormat {
    /// Guesses the format from the file extension; `.bin` means binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

/// Word vectors with case-normalized lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            index: HashMap::new(),
            words: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Adds `word` (lowercased). Returns false and keeps the existing vector
    /// if the word is already present.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite component in vector for {word:?}")));
        }
        let key = word.to_lowercase();
        if self.index.contains_key(&key) {
            return Ok(false);
        }
        self.index.insert(key.clone(), self.words.len());
        self.words.push(key);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        let i = match self.index.get(word) {
            Some(&i) => i,
            None => *self.index.get(&word.to_lowercase())?,
        };
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Row index of `word`, for compact token sequences.
    pub fn lookup(&self, word: &str) -> Option<u32> {
        match self.index.get(word) {
            Some(&i) => Some(i as u32),
            None => self.index.get(&word.to_lowercase()).map(|&i| i as u32),
        }
    }

    /// Vector stored at row `i`.
    pub fn row(&self, i: u32) -> &[f32] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    /// Copy restricted to `keep`, preserving insertion order.
    pub fn subset(&self, keep: &HashSet<String>) -> EmbeddingStore {
        let mut out = EmbeddingStore::new(self.dim);
        for (i, w) in self.words.iter().enumerate() {
            if keep.contains(w) {
                let _ = out.insert(w, &self.data[i * self.dim..(i + 1) * self.dim]);
            }
        }
        out
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.u64(self.dim as u64).u64(self.words.len() as u64);
        for word in &self.words {
            w.str(word);
        }
        w.f32s(&self.data);
        w.finish()
    }

    pub(crate) fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let dim = r.u64()? as usize;
        let n = r.u64()? as usize;
        let words = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let data = r.f32s()?;
        r.finish()?;
        if data.len() != n * dim {
            return Err(Error::Container("embedding table size mismatch".into()));
        }
        let mut store = EmbeddingStore::new(dim);
        for (i, w) in words.iter().enumerate() {
            store.insert(w, &data[i * dim..(i + 1) * dim])?;
        }
        Ok(store)
    }
}

/// Loads a word2vec file. When `keep` is given only those (lowercase) words
/// are retained, which keeps multi-gigabyte vocabularies out of memory.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 20, file);
    let source = path.display().to_string();
    match format {
        EmbeddingFormat::Text => read_text(reader, &source, keep),
        EmbeddingFormat::Binary => read_binary(reader, &source, keep),
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

pub fn read_text<R: BufRead>(reader: R, source: &str, keep: Option<&HashSet<String>>) -> Result<EmbeddingStore> {
    let mut store: Option<EmbeddingStore> = None;
    let mut declared_dim = None;
    let mut buf = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let row = n as u64 + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if n == 0 {
            if let Some((_, dim)) = parse_header(line) {
                declared_dim = Some(dim);
                continue;
            }
        }
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        buf.clear();
        for f in fields.filter(|f| !f.is_empty()) {
            let v: f32 = f.parse().map_err(|_| Error::MalformedRow {
                path: source.to_string(),
                row,
                message: format!("unparsable component {f:?}"),
            })?;
            buf.push(v);
        }
        let store = store.get_or_insert_with(|| EmbeddingStore::new(declared_dim.unwrap_or(buf.len())));
        if buf.len() != store.dim {
            return Err(Error::MalformedRow {
                path: source.to_string(),
                row,
                message: format!("expected {} components, found {}", store.dim, buf.len()),
            });
        }
        if keep.is_none_or(|k| k.contains(&word.to_lowercase())) {
            store.insert(word, &buf)?;
        }
    }
    Ok(store.unwrap_or_else(|| EmbeddingStore::new(declared_dim.unwrap_or(0))))
}

pub fn read_binary<R: BufRead>(mut reader: R, source: &str, keep: Option<&HashSet<String>>) -> Result<EmbeddingStore> {
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(source, e))?;
    let (count, dim) = parse_header(header.trim()).ok_or_else(|| Error::MalformedRow {
        path: source.to_string(),
        row: 1,
        message: format!("bad binary header {:?}", header.trim()),
    })?;
    let mut store = EmbeddingStore::new(dim);
    let mut raw = vec![0u8; dim * 4];
    let mut vec = vec![0f32; dim];
    let mut word = Vec::new();
    for entry in 0..count {
        word.clear();
        reader.read_until(b' ', &mut word).map_err(|e| Error::io(source, e))?;
        if word.last() == Some(&b' ') {
            word.pop();
        }
        while word.first().is_some_and(|b| b.is_ascii_whitespace()) {
            word.remove(0);
        }
        reader.read_exact(&mut raw).map_err(|_| Error::MalformedRow {
            path: source.to_string(),
            row: entry as u64 + 2,
            message: "truncated vector".into(),
        })?;
        for (v, chunk) in vec.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        }
        let w = String::from_utf8_lossy(&word);
        if keep.is_none_or(|k| k.contains(&w.to_lowercase())) {
            store.insert(&w, &vec)?;
        }
    }
    Ok(store)
}

/// Mean of the vectors of in-vocabulary tokens, optionally skipping
/// stopwords. `None` if no token qualifies.
pub fn average_embedding<S: AsRef<str>>(
    tokens: &[S],
    store: &EmbeddingStore,
    skip_stopwords: bool,
) -> Option<Vec<f64>> {
    let mut sum = vec![0f64; store.dim()];
    let mut n = 0usize;
    for t in tokens {
        let t = t.as_ref();
        if skip_stopwords && is_stopword(t) {
            continue;
        }
        if let Some(v) = store.get(t) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += x as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    let inv = 1.0 / n as f64;
    sum.iter_mut().for_each(|s| *s *= inv);
    Some(sum)
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TEXT: &str = "cat 1 0 0 0\nDog 0 1 0 0\nfish 0.5 0.5 0 1\n";

    fn store() -> EmbeddingStore {
        read_text(TEXT.as_bytes(), "t", None).unwrap()
    }

    #[test]
    fn text_with_and_without_header() {
        let a = store();
        assert_eq!(a.len(), 3);
        assert_eq!(a.dim(), 4);
        let b = read_text(format!("3 4\n{TEXT}").as_bytes(), "t", None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get("DOG"), Some(&[0.0f32, 1.0, 0.0, 0.0][..]));
        assert!(a.get("bird").is_none());
    }

    #[test]
    fn text_errors_and_duplicates() {
        assert!(matches!(
            read_text("a 1 2\nb 1 2 3\n".as_bytes(), "t", None),
            Err(Error::MalformedRow { row: 2, .. })
        ));
        assert!(read_text("a 1 x\n".as_bytes(), "t", None).is_err());
        let s = read_text("a 1 2\nA 3 4\n".as_bytes(), "t", None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get("a"), Some(&[1.0f32, 2.0][..]));
    }

    #[test]
    fn binary_matches_text() {
        let mut bin = b"3 4\n".to_vec();
        for (w, v) in [
            ("cat", [1f32, 0., 0., 0.]),
            ("Dog", [0., 1., 0., 0.]),
            ("fish", [0.5, 0.5, 0., 1.]),
        ] {
            bin.extend_from_slice(w.as_bytes());
            bin.push(b' ');
            for x in v {
                bin.extend_from_slice(&x.to_le_bytes());
            }
            bin.push(b'\n');
        }
        let b = read_binary(&bin[..], "b", None).unwrap();
        assert_eq!(b, store());
        assert!(read_binary(&bin[..bin.len() - 3], "b", None).is_err());
    }

    #[test]
    fn keep_filter() {
        let keep: HashSet<String> = ["cat".to_string(), "dog".to_string()].into();
        let s = read_text(TEXT.as_bytes(), "t", Some(&keep)).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains("dog"));
    }

    #[test]
    fn averaging() {
        let s = store();
        assert_eq!(
            average_embedding(&["cat"], &s, false).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            average_embedding(&["cat", "dog"], &s, false).unwrap(),
            vec![0.5, 0.5, 0.0, 0.0]
        );
        assert!(average_embedding(&["bird", "zebra"], &s, false).is_none());
        assert!(average_embedding::<&str>(&[], &s, false).is_none());
    }

    #[test]
    fn stopwords_skipped_on_request() {
        let s = read_text("the 1 1\ncat 1 0\n".as_bytes(), "t", None).unwrap();
        assert_eq!(average_embedding(&["the", "cat"], &s, true).unwrap(), vec![1.0, 0.0]);
        assert_eq!(average_embedding(&["the", "cat"], &s, false).unwrap(), vec![1.0, 0.5]);
        assert!(average_embedding(&["the"], &s, true).is_none());
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn subset_and_codec() {
        let s = store();
        let keep: HashSet<String> = ["fish".to_string()].into();
        let sub = s.subset(&keep);
        assert_eq!(sub.len(), 1);
        assert_eq!(EmbeddingStore::decode(&s.encode()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in prop::collection::vec(-10.0f64..10.0, 5),
            v in prop::collection::vec(-10.0f64..10.0, 5),
            alpha in 0.01f64..100.0,
        ) {
            let c = cosine(&u, &v).unwrap();
            prop_assert_eq!(c, cosine(&v, &u).unwrap());
            prop_assert!((-1.0..=1.0).contains(&c));
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() < 1e-12);
        }

        #[test]
        fn average_is_permutation_invariant(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let s = store();
            let mut toks = vec!["cat", "dog", "fish", "cat", "bird"];
            let a = average_embedding(&toks, &s, false).unwrap();
            toks.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = average_embedding(&toks, &s, false).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
