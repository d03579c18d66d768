//! Tagged corpora and the tag statistics estimated from them.
//!
//! The on-disk format is one token per line, `word<TAB>tag`, with a blank
//! line between sentences. Everything downstream (class inventory, the
//! contextual scores, the HMM baseline) reads its probabilities from a
//! [`CorpusStats`] built here.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default floor substituted for zero probability estimates.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub word: String,
    pub tag: String,
    /// Ambiguity-class symbol, filled in during annotation.
    pub class_sym: Option<String>,
    /// Reduced-class symbol, filled in by running the first transducer.
    pub reduced_sym: Option<String>,
}

impl TaggedToken {
    pub fn new(word: impl Into<String>, tag: impl Into<String>) -> Self {
        TaggedToken {
            word: word.into(),
            tag: tag.into(),
            class_sym: None,
            reduced_sym: None,
        }
    }
}

/// Ordered set of tag symbols with an index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl Tagset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `tag` if absent and returns its id.
    pub fn insert(&mut self, tag: &str) -> usize {
        if let Some(&id) = self.index.get(tag) {
            return id;
        }
        let id = self.tags.len();
        self.tags.push(tag.to_string());
        self.index.insert(tag.to_string(), id);
        id
    }

    pub fn id(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.index.contains_key(tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }
}

impl<S: AsRef<str>> FromIterator<S> for Tagset {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut set = Tagset::new();
        for tag in iter {
            set.insert(tag.as_ref());
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedCorpus {
    pub sentences: Vec<Vec<TaggedToken>>,
    /// Observed tags in first-seen order.
    pub tagset: Tagset,
}

impl TaggedCorpus {
    /// Builds a corpus from `(word, tag)` sentences. Empty sentences are dropped.
    pub fn from_sentences<W, T>(sentences: impl IntoIterator<Item = Vec<(W, T)>>) -> Result<Self>
    where
        W: Into<String>,
        T: Into<String>,
    {
        let mut tagset = Tagset::new();
        let mut out = Vec::new();
        for sentence in sentences {
            let tokens: Vec<TaggedToken> = sentence
                .into_iter()
                .map(|(w, t)| TaggedToken::new(w, t))
                .collect();
            if tokens.is_empty() {
                continue;
            }
            for tok in &tokens {
                if tok.word.is_empty() {
                    return Err(Error::InvalidParameter("empty word".into()));
                }
                if tok.tag.is_empty() || tok.tag.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidParameter(format!(
                        "invalid tag {:?}",
                        tok.tag
                    )));
                }
                tagset.insert(&tok.tag);
            }
            out.push(tokens);
        }
        if out.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(TaggedCorpus {
            sentences: out,
            tagset,
        })
    }

    /// Parses the two-column format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tagset = Tagset::new();
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::format(
                    line_no,
                    format!("expected 2 tab-separated columns, found {}", cols.len()),
                ));
            }
            let (word, tag) = (cols[0], cols[1].trim());
            if word.is_empty() {
                return Err(Error::format(line_no, "empty word"));
            }
            if tag.is_empty() || tag.chars().any(char::is_whitespace) {
                return Err(Error::format(line_no, format!("invalid tag {tag:?}")));
            }
            tagset.insert(tag);
            current.push(TaggedToken::new(word, tag));
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(TaggedCorpus { sentences, tagset })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TaggedToken> {
        self.sentences.iter().flatten()
    }

    /// Serializes back to the two-column format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            for tok in sentence {
                let _ = writeln!(out, "{}\t{}", tok.word, tok.tag);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the canonical text form, hex encoded.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<TaggedCorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TaggedCorpus::parse(&text)
}

/// Tag probabilities estimated by relative frequency.
///
/// Tag ids follow the corpus tagset order. Conditional tables are stored
/// row-major with the conditioning tag as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub tagset: Tagset,
    /// p(t)
    pub p_tag: Vec<f64>,
    /// `p_tag_given_prev[prev][t]` = p(t | previous tag)
    pub p_tag_given_prev: Vec<Vec<f64>>,
    /// `p_tag_given_next[next][t]` = p(t | following tag)
    pub p_tag_given_next: Vec<Vec<f64>>,
    /// p(t | sentence start)
    pub p_tag_given_bos: Vec<f64>,
    /// p(t | sentence end)
    pub p_tag_given_eos: Vec<f64>,
    pub smoothing_floor: f64,
}

impl CorpusStats {
    pub fn tag_id(&self, tag: &str) -> Result<usize> {
        self.tagset
            .id(tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn p_tag(&self, tag: &str) -> Result<f64> {
        Ok(self.p_tag[self.tag_id(tag)?])
    }

    pub fn p_tag_given_prev(&self, tag: &str, prev: &str) -> Result<f64> {
        Ok(self.p_tag_given_prev[self.tag_id(prev)?][self.tag_id(tag)?])
    }

    pub fn p_tag_given_next(&self, tag: &str, next: &str) -> Result<f64> {
        Ok(self.p_tag_given_next[self.tag_id(next)?][self.tag_id(tag)?])
    }

    pub fn p_tag_given_bos(&self, tag: &str) -> Result<f64> {
        Ok(self.p_tag_given_bos[self.tag_id(tag)?])
    }

    pub fn p_tag_given_eos(&self, tag: &str) -> Result<f64> {
        Ok(self.p_tag_given_eos[self.tag_id(tag)?])
    }

    /// Text dump, one probability per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# seqtag stats v1\n");
        let _ = writeln!(out, "floor\t{}", self.smoothing_floor);
        let names: Vec<&str> = self.tagset.iter().collect();
        for (i, t) in names.iter().enumerate() {
            let _ = writeln!(out, "unigram\t{t}\t{}", self.p_tag[i]);
        }
        for (i, t) in names.iter().enumerate() {
            let _ = writeln!(out, "bos\t{t}\t{}", self.p_tag_given_bos[i]);
        }
        for (i, t) in names.iter().enumerate() {
            let _ = writeln!(out, "eos\t{t}\t{}", self.p_tag_given_eos[i]);
        }
        for (c, cond) in names.iter().enumerate() {
            for (i, t) in names.iter().enumerate() {
                let _ = writeln!(out, "prev\t{cond}\t{t}\t{}", self.p_tag_given_prev[c][i]);
            }
        }
        for (c, cond) in names.iter().enumerate() {
            for (i, t) in names.iter().enumerate() {
                let _ = writeln!(out, "next\t{cond}\t{t}\t{}", self.p_tag_given_next[c][i]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut floor = 0.0;
        let mut tagset = Tagset::new();
        let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
        for (line_no, line) in crate::classes::body_lines(text, "# seqtag stats v1")? {
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                ["floor", v] => {
                    floor = v.parse().map_err(|_| Error::format(line_no, "bad floor"))?;
                }
                ["unigram", t, _] => {
                    tagset.insert(t);
                    rows.push((line_no, cols));
                }
                _ => rows.push((line_no, cols)),
            }
        }
        let n = tagset.len();
        let mut s = CorpusStats {
            tagset,
            p_tag: vec![0.0; n],
            p_tag_given_prev: vec![vec![0.0; n]; n],
            p_tag_given_next: vec![vec![0.0; n]; n],
            p_tag_given_bos: vec![0.0; n],
            p_tag_given_eos: vec![0.0; n],
            smoothing_floor: floor,
        };
        for (line_no, cols) in rows {
            let bad = || Error::format(line_no, "bad stats entry");
            let id = |t: &str| s.tagset.id(t).ok_or_else(bad);
            let p = |v: &str| v.parse::<f64>().map_err(|_| bad());
            match cols.as_slice() {
                ["unigram", t, v] => {
                    let i = id(t)?;
                    s.p_tag[i] = p(v)?
                }
                ["bos", t, v] => {
                    let i = id(t)?;
                    s.p_tag_given_bos[i] = p(v)?
                }
                ["eos", t, v] => {
                    let i = id(t)?;
                    s.p_tag_given_eos[i] = p(v)?
                }
                ["prev", c, t, v] => {
                    let (c, i) = (id(c)?, id(t)?);
                    s.p_tag_given_prev[c][i] = p(v)?
                }
                ["next", c, t, v] => {
                    let (c, i) = (id(c)?, id(t)?);
                    s.p_tag_given_next[c][i] = p(v)?
                }
                _ => return Err(bad()),
            }
        }
        Ok(s)
    }
}

/// Normalizes `counts` into a distribution where no entry is below `floor`.
///
/// Entries that would fall below the floor are pinned to it and the rest
/// are rescaled proportionally to absorb the difference. An all-zero row
/// becomes uniform. Requires `floor * counts.len() <= 1`.
pub fn floor_normalize(counts: &[f64], floor: f64) -> Vec<f64> {
    let n = counts.len();
    if n == 0 {
        return Vec::new();
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    let mut pinned = vec![false; n];
    loop {
        let free_mass: f64 = counts
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(c, _)| c)
            .sum();
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        let budget = 1.0 - pinned_count as f64 * floor;
        let mut changed = false;
        if free_mass > 0.0 {
            for i in 0..n {
                if !pinned[i] && counts[i] / free_mass * budget < floor {
                    pinned[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return (0..n)
                .map(|i| {
                    if pinned[i] || free_mass <= 0.0 {
                        floor
                    } else {
                        counts[i] / free_mass * budget
                    }
                })
                .collect();
        }
    }
}

/// Estimates every tag distribution the contextual scores consume.
///
/// `floor` may be zero, which disables smoothing; it must stay below
/// `1 / |tagset|` so that a floored distribution can still sum to one.
pub fn compute_stats(corpus: &TaggedCorpus, floor: f64) -> Result<CorpusStats> {
    let n = corpus.tagset.len();
    if n == 0 || corpus.sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !floor.is_finite() || floor < 0.0 || floor * n as f64 >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "floor {floor} must lie in [0, 1/{n})"
        )));
    }
    let mut unigram = vec![0.0; n];
    let mut bos = vec![0.0; n];
    let mut eos = vec![0.0; n];
    let mut bigram = vec![vec![0.0; n]; n];
    for sentence in &corpus.sentences {
        let ids: Vec<usize> = sentence
            .iter()
            .map(|t| corpus.tagset.id(&t.tag).expect("tag registered at load"))
            .collect();
        for &id in &ids {
            unigram[id] += 1.0;
        }
        if let (Some(&first), Some(&last)) = (ids.first(), ids.last()) {
            bos[first] += 1.0;
            eos[last] += 1.0;
        }
        for pair in ids.windows(2) {
            bigram[pair[0]][pair[1]] += 1.0;
        }
    }
    let p_tag_given_prev = bigram
        .iter()
        .map(|row| floor_normalize(row, floor))
        .collect();
    let p_tag_given_next = (0..n)
        .map(|next| {
            let column: Vec<f64> = (0..n).map(|t| bigram[t][next]).collect();
            floor_normalize(&column, floor)
        })
        .collect();
    Ok(CorpusStats {
        tagset: corpus.tagset.clone(),
        p_tag: floor_normalize(&unigram, floor),
        p_tag_given_prev,
        p_tag_given_next,
        p_tag_given_bos: floor_normalize(&bos, floor),
        p_tag_given_eos: floor_normalize(&eos, floor),
        smoothing_floor: floor,
    })
}

/// Tag distribution over tokens whose word occurs exactly once.
pub fn hapax_tag_distribution(corpus: &TaggedCorpus) -> BTreeMap<String, f64> {
    let mut word_counts: HashMap<&str, usize> = HashMap::new();
    for tok in corpus.tokens() {
        *word_counts.entry(tok.word.as_str()).or_default() += 1;
    }
    let mut tag_counts: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for tok in corpus.tokens() {
        if word_counts[tok.word.as_str()] == 1 {
            *tag_counts.entry(tok.tag.clone()).or_default() += 1.0;
            total += 1.0;
        }
    }
    for v in tag_counts.values_mut() {
        *v /= total;
    }
    tag_counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(sentences: &[&[(&str, &str)]]) -> TaggedCorpus {
        TaggedCorpus::from_sentences(sentences.iter().map(|s| s.to_vec())).unwrap()
    }

    #[test]
    fn parses_single_sentence() {
        let c = TaggedCorpus::parse("the\tDET\ncat\tNOUN\n\n").unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert_eq!(c.token_count(), 2);
        assert_eq!(c.tagset.iter().collect::<Vec<_>>(), ["DET", "NOUN"]);
    }

    #[test]
    fn blank_lines_split_sentences() {
        let c = TaggedCorpus::parse("a\tX\n\n\nb\tY\nc\tX\n").unwrap();
        assert_eq!(c.sentences.len(), 2);
        assert_eq!(c.sentences[1].len(), 2);
    }

    #[test]
    fn wrong_column_count_names_line() {
        match TaggedCorpus::parse("cat NOUN VERB extra\n") {
            Err(Error::Format { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match TaggedCorpus::parse("a\tX\nb\tY\tZ\n") {
            Err(Error::Format { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            TaggedCorpus::parse("\n\n"),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn two_token_corpus_stats() {
        let c = toy(&[&[("the", "DET"), ("cat", "NOUN")]]);
        let eps = 1e-6;
        let s = compute_stats(&c, eps).unwrap();
        assert!((s.p_tag("DET").unwrap() - 0.5).abs() < 1e-12);
        assert!((s.p_tag_given_bos("DET").unwrap() - (1.0 - eps)).abs() < 1e-12);
        assert_eq!(s.p_tag_given_bos("NOUN").unwrap(), eps);
        assert!((s.p_tag_given_prev("NOUN", "DET").unwrap() - (1.0 - eps)).abs() < 1e-12);
        assert!((s.p_tag_given_next("DET", "NOUN").unwrap() - (1.0 - eps)).abs() < 1e-12);
        // NOUN is never followed by anything: its row is uniform
        assert_eq!(s.p_tag_given_prev("DET", "NOUN").unwrap(), 0.5);
    }

    #[test]
    fn never_initial_tag_gets_floor() {
        let c = toy(&[&[("a", "A"), ("b", "B"), ("c", "C")], &[("a", "A")]]);
        let s = compute_stats(&c, 1e-4).unwrap();
        assert_eq!(s.p_tag_given_bos("B").unwrap(), 1e-4);
        assert_eq!(s.p_tag_given_bos("C").unwrap(), 1e-4);
        assert!((s.p_tag_given_bos("A").unwrap() - (1.0 - 2e-4)).abs() < 1e-12);
    }

    #[test]
    fn uniform_corpus_gives_uniform_unigrams() {
        let c = toy(&[
            &[("a", "A"), ("b", "B"), ("c", "C")],
            &[("c", "C"), ("b", "B"), ("a", "A")],
        ]);
        let s = compute_stats(&c, 1e-6).unwrap();
        for p in &s.p_tag {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn floor_must_leave_room() {
        let c = toy(&[&[("a", "A"), ("b", "B")]]);
        assert!(compute_stats(&c, 0.5).is_err());
        assert!(compute_stats(&c, -1.0).is_err());
        assert!(compute_stats(&c, 0.0).is_ok());
    }

    #[test]
    fn floor_normalize_pins_small_entries() {
        let p = floor_normalize(&[1000.0, 1.0, 0.0], 0.01);
        assert_eq!(p[2], 0.01);
        assert_eq!(p[1], 0.01);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hapax_single_word() {
        let c = toy(&[&[("the", "DET"), ("zyzzyva", "NOUN")], &[("the", "DET")]]);
        let h = hapax_tag_distribution(&c);
        assert_eq!(h.len(), 1);
        assert_eq!(h["NOUN"], 1.0);
    }

    #[test]
    fn hapax_empty_when_everything_repeats() {
        let c = toy(&[&[("a", "A"), ("a", "A")]]);
        assert!(hapax_tag_distribution(&c).is_empty());
    }

    #[test]
    fn hapax_mixture() {
        let c = toy(&[
            &[("x", "NOUN"), ("y", "NOUN"), ("z", "VERB")],
            &[("the", "DET"), ("the", "DET")],
        ]);
        let h = hapax_tag_distribution(&c);
        assert!((h["NOUN"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((h["VERB"] - 1.0 / 3.0).abs() < 1e-12);
    }

    fn arb_corpus() -> impl Strategy<Value = TaggedCorpus> {
        let token = (0usize..6, 0usize..5);
        prop::collection::vec(prop::collection::vec(token, 1..8), 1..12).prop_map(|sents| {
            TaggedCorpus::from_sentences(sents.into_iter().map(|s| {
                s.into_iter()
                    .map(|(w, t)| (format!("w{w}"), format!("T{t}")))
                    .collect::<Vec<_>>()
            }))
            .unwrap()
        })
    }

    fn sums_to_one(v: &[f64]) -> bool {
        (v.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }

    proptest! {
        #[test]
        fn stats_are_normalized_and_floored(corpus in arb_corpus(), floor_exp in 3i32..9) {
            let floor = 10f64.powi(-floor_exp);
            let s = compute_stats(&corpus, floor).unwrap();
            prop_assert!(sums_to_one(&s.p_tag));
            prop_assert!(sums_to_one(&s.p_tag_given_bos));
            prop_assert!(sums_to_one(&s.p_tag_given_eos));
            for row in s.p_tag_given_prev.iter().chain(&s.p_tag_given_next) {
                prop_assert!(sums_to_one(row));
                prop_assert!(row.iter().all(|&p| p >= floor));
            }
            prop_assert!(s.p_tag.iter().chain(&s.p_tag_given_bos).chain(&s.p_tag_given_eos).all(|&p| p >= floor));
            prop_assert_eq!(&s, &compute_stats(&corpus, floor).unwrap());
        }

        #[test]
        fn zero_floor_matches_counting_oracle(corpus in arb_corpus()) {
            let s = compute_stats(&corpus, 0.0).unwrap();
            let total = corpus.token_count() as f64;
            for tag in corpus.tagset.iter() {
                let count = corpus.tokens().filter(|t| t.tag == tag).count() as f64;
                prop_assert!((s.p_tag(tag).unwrap() - count / total).abs() < 1e-12);
                let starts = corpus.sentences.iter().filter(|s| s[0].tag == tag).count() as f64;
                let expected = starts / corpus.sentences.len() as f64;
                prop_assert!((s.p_tag_given_bos(tag).unwrap() - expected).abs() < 1e-12);
            }
            for prev in corpus.tagset.iter() {
                let mut follow: BTreeMap<&str, f64> = BTreeMap::new();
                let mut n = 0.0;
                for sent in &corpus.sentences {
                    for w in sent.windows(2) {
                        if w[0].tag == prev {
                            *follow.entry(w[1].tag.as_str()).or_default() += 1.0;
                            n += 1.0;
                        }
                    }
                }
                if n == 0.0 {
                    continue;
                }
                for tag in corpus.tagset.iter() {
                    let expected = follow.get(tag).copied().unwrap_or(0.0) / n;
                    prop_assert!((s.p_tag_given_prev(tag, prev).unwrap() - expected).abs() < 1e-12);
                }
            }
        }
    }
}
