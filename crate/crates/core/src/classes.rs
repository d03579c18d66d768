//! Ambiguity classes, their subclasses, and the reduced classes obtained by
//! clustering subclasses that share a tag list.
//!
//! Also home to the word-level front end: the class lexicon, the suffix
//! guesser and the class assigned to words neither of them knows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::corpus::{floor_normalize, CorpusStats, TaggedCorpus};
use crate::error::{Error, Result};

/// Largest class that may be split into subclasses (4095 subsets).
pub const MAX_SUBCLASS_TAGS: usize = 12;
pub const DEFAULT_THETA: f64 = 0.98;
pub const DEFAULT_UNKNOWN_TAGS: usize = 3;
pub const DEFAULT_SUFFIX_LEN: usize = 4;
pub const DEFAULT_MIN_SUFFIX_COUNT: usize = 3;

/// Suffix marking the symbol of the class given to unknown words.
pub const UNKNOWN_MARKER: &str = "_UNK";

const NORM_TOLERANCE: f64 = 1e-9;
// slack for rounding when comparing a cosine against the merge threshold
const COSINE_SLACK: f64 = 1e-12;

pub fn class_symbol<S: AsRef<str>>(tags: &[S]) -> String {
    let mut s = String::from("[");
    for (i, t) in tags.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_ref());
    }
    s.push(']');
    s
}

fn check_distribution(tags: &[String], probs: &[f64]) -> Result<()> {
    if tags.is_empty() || tags.len() != probs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} tags but {} probabilities",
            tags.len(),
            probs.len()
        )));
    }
    if tags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "tags {tags:?} are not unique and sorted"
        )));
    }
    if probs.iter().any(|&p| !p.is_finite() || p <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "probabilities {probs:?} must be positive"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "probabilities {probs:?} sum to {sum}"
        )));
    }
    Ok(())
}

/// Sorts `(tag, weight)` pairs canonically and normalizes the weights.
fn canonical(pairs: impl IntoIterator<Item = (String, f64)>) -> (Vec<String>, Vec<f64>) {
    let mut pairs: Vec<(String, f64)> = pairs.into_iter().collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(t, p)| (t, p / total)).unzip()
}

/// A set of tags with the probability of each tag given the class.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityClass {
    pub tags: Vec<String>,
    pub probs: Vec<f64>,
    pub symbol: String,
}

impl AmbiguityClass {
    /// `tags` must be sorted and unique, `probs` a positive distribution.
    pub fn new(tags: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        check_distribution(&tags, &probs)?;
        let symbol = class_symbol(&tags);
        Ok(AmbiguityClass {
            tags,
            probs,
            symbol,
        })
    }

    /// Builds a class from unordered `(tag, weight)` pairs.
    pub fn from_weights<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self> {
        let (tags, probs) = canonical(pairs.into_iter().map(|(t, p)| (t.into(), p)));
        Self::new(tags, probs)
    }

    pub fn prob_of(&self, tag: &str) -> Option<f64> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .map(|i| self.probs[i])
    }

    pub fn is_unknown(&self) -> bool {
        self.symbol.ends_with(UNKNOWN_MARKER)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subclass {
    pub tags: Vec<String>,
    /// The parent's entries for these tags, not renormalized.
    pub raw_probs: Vec<f64>,
}

/// A cluster of subclasses sharing one tag list.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAmbiguityClass {
    pub tags: Vec<String>,
    pub probs: Vec<f64>,
    pub variant: u32,
    pub symbol: String,
}

impl ReducedAmbiguityClass {
    pub fn new(tags: Vec<String>, probs: Vec<f64>, variant: u32) -> Result<Self> {
        check_distribution(&tags, &probs)?;
        if variant == 0 {
            return Err(Error::InvalidParameter(
                "variants are numbered from 1".into(),
            ));
        }
        let symbol = reduced_symbol(&tags, variant);
        Ok(ReducedAmbiguityClass {
            tags,
            probs,
            variant,
            symbol,
        })
    }

    pub fn prob_of(&self, tag: &str) -> Option<f64> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .map(|i| self.probs[i])
    }
}

pub fn reduced_symbol<S: AsRef<str>>(tags: &[S], variant: u32) -> String {
    format!("{}_R_{variant}", class_symbol(tags))
}

#[derive(Debug, Clone, Default)]
pub struct ClassInventory {
    classes: Vec<AmbiguityClass>,
    index: HashMap<String, usize>,
}

impl ClassInventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, class: AmbiguityClass) -> Result<usize> {
        if self.index.contains_key(&class.symbol) {
            return Err(Error::InvalidParameter(format!(
                "duplicate class symbol {}",
                class.symbol
            )));
        }
        let id = self.classes.len();
        self.index.insert(class.symbol.clone(), id);
        self.classes.push(class);
        Ok(id)
    }

    pub fn get(&self, symbol: &str) -> Option<&AmbiguityClass> {
        self.index.get(symbol).map(|&i| &self.classes[i])
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn classes(&self) -> &[AmbiguityClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AmbiguityClass> {
        self.classes.iter()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# seqtag classes v1\n");
        for c in &self.classes {
            let _ = writeln!(out, "{}\t{}", c.symbol, format_dist(&c.tags, &c.probs));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut inv = ClassInventory::new();
        for (line_no, line) in body_lines(text, "# seqtag classes v1")? {
            let (symbol, dist) = split_pair(line, line_no)?;
            let (tags, probs) = parse_dist(dist, line_no)?;
            check_distribution(&tags, &probs).map_err(|e| Error::format(line_no, e.to_string()))?;
            let class = AmbiguityClass {
                tags,
                probs,
                symbol: symbol.to_string(),
            };
            if class.symbol != class_symbol(&class.tags) && !class.is_unknown() {
                return Err(Error::format(line_no, "symbol does not match tag list"));
            }
            inv.push(class)
                .map_err(|e| Error::format(line_no, e.to_string()))?;
        }
        Ok(inv)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReducedInventory {
    classes: Vec<ReducedAmbiguityClass>,
    index: HashMap<String, usize>,
    by_tags: HashMap<Vec<String>, Vec<usize>>,
}

impl ReducedInventory {
    /// Builds an inventory; entries are kept in the given order.
    pub fn from_classes(classes: Vec<ReducedAmbiguityClass>) -> Result<Self> {
        let mut inv = ReducedInventory::default();
        for (id, c) in classes.iter().enumerate() {
            if inv.index.insert(c.symbol.clone(), id).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate reduced class {}",
                    c.symbol
                )));
            }
            inv.by_tags.entry(c.tags.clone()).or_default().push(id);
        }
        for ids in inv.by_tags.values_mut() {
            ids.sort_by_key(|&i| classes[i].variant);
        }
        inv.classes = classes;
        Ok(inv)
    }

    pub fn get(&self, symbol: &str) -> Option<&ReducedAmbiguityClass> {
        self.index.get(symbol).map(|&i| &self.classes[i])
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn by_id(&self, id: usize) -> &ReducedAmbiguityClass {
        &self.classes[id]
    }

    /// Ids of all variants with exactly this tag list, by ascending variant.
    pub fn with_tags(&self, tags: &[String]) -> &[usize] {
        self.by_tags.get(tags).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn classes(&self) -> &[ReducedAmbiguityClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReducedAmbiguityClass> {
        self.classes.iter()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# seqtag reduced v1\n");
        for c in &self.classes {
            let _ = writeln!(out, "{}\t{}", c.symbol, format_dist(&c.tags, &c.probs));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for (line_no, line) in body_lines(text, "# seqtag reduced v1")? {
            let (symbol, dist) = split_pair(line, line_no)?;
            let (tags, probs) = parse_dist(dist, line_no)?;
            let variant = symbol
                .rsplit_once("_R_")
                .and_then(|(_, v)| v.parse::<u32>().ok())
                .ok_or_else(|| Error::format(line_no, format!("bad reduced symbol {symbol}")))?;
            let class = ReducedAmbiguityClass::new(tags, probs, variant)
                .map_err(|e| Error::format(line_no, e.to_string()))?;
            if class.symbol != symbol {
                return Err(Error::format(line_no, "symbol does not match tag list"));
            }
            classes.push(class);
        }
        Self::from_classes(classes)
    }
}

fn format_dist(tags: &[String], probs: &[f64]) -> String {
    tags.iter()
        .zip(probs)
        .map(|(t, p)| format!("{t}:{p}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_dist(field: &str, line_no: usize) -> Result<(Vec<String>, Vec<f64>)> {
    let mut tags = Vec::new();
    let mut probs = Vec::new();
    for item in field.split(' ') {
        let (tag, p) = item
            .rsplit_once(':')
            .ok_or_else(|| Error::format(line_no, format!("bad entry {item:?}")))?;
        let p: f64 = p
            .parse()
            .map_err(|_| Error::format(line_no, format!("bad probability {p:?}")))?;
        tags.push(tag.to_string());
        probs.push(p);
    }
    Ok((tags, probs))
}

fn split_pair(line: &str, line_no: usize) -> Result<(&str, &str)> {
    line.split_once('\t')
        .filter(|(_, b)| !b.contains('\t'))
        .ok_or_else(|| Error::format(line_no, "expected 2 tab-separated columns"))
}

/// Checks the header line and yields the remaining non-empty lines.
pub(crate) fn body_lines<'a>(
    text: &'a str,
    header: &'static str,
) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    if first != header {
        return Err(Error::Version {
            expected: header.to_string(),
            found: first.chars().take(40).collect(),
        });
    }
    Ok(lines
        .enumerate()
        .map(|(i, l)| (i + 2, l))
        .filter(|(_, l)| !l.is_empty()))
}

/// Maps words to class symbols; lookups try the exact form, then lowercase.
#[derive(Debug, Clone, Default)]
pub struct ClassLexicon {
    entries: HashMap<String, usize>,
    symbols: Vec<String>,
    symbol_ids: HashMap<String, usize>,
}

impl ClassLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, symbol: &str) {
        let id = match self.symbol_ids.get(symbol) {
            Some(&id) => id,
            None => {
                let id = self.symbols.len();
                self.symbols.push(symbol.to_string());
                self.symbol_ids.insert(symbol.to_string(), id);
                id
            }
        };
        self.entries.insert(word.into(), id);
    }

    pub fn get_exact(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(|&i| self.symbols[i].as_str())
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        if let Some(s) = self.get_exact(word) {
            return Some(s);
        }
        let lower = word.to_lowercase();
        if lower != word {
            return self.get_exact(&lower);
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by word.
    pub fn entries(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<(&str, &str)> = self
            .entries
            .iter()
            .map(|(w, &i)| (w.as_str(), self.symbols[i].as_str()))
            .collect();
        v.sort_unstable();
        v
    }

    /// Distinct symbols the lexicon can return.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# seqtag lexicon v1\n");
        for (w, s) in self.entries() {
            let _ = writeln!(out, "{w}\t{s}");
        }
        out
    }

    pub fn from_text(text: &str, inventory: &ClassInventory) -> Result<Self> {
        let mut lex = ClassLexicon::new();
        for (line_no, line) in body_lines(text, "# seqtag lexicon v1")? {
            let (word, symbol) = split_pair(line, line_no)?;
            if inventory.get(symbol).is_none() {
                return Err(Error::format(line_no, format!("unknown class {symbol}")));
            }
            lex.insert(word, symbol);
        }
        Ok(lex)
    }
}

/// Groups words by the set of tags they occur with.
///
/// Each class's probability vector is the tag distribution over all corpus
/// tokens whose word belongs to the class.
pub fn build_class_inventory(corpus: &TaggedCorpus) -> (ClassInventory, ClassLexicon) {
    let mut word_tags: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for tok in corpus.tokens() {
        word_tags.entry(&tok.word).or_default().insert(&tok.tag);
    }
    let word_class: HashMap<&str, String> = word_tags
        .iter()
        .map(|(w, tags)| (*w, class_symbol(&tags.iter().collect::<Vec<_>>())))
        .collect();
    let mut counts: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for tok in corpus.tokens() {
        *counts
            .entry(word_class[tok.word.as_str()].as_str())
            .or_default()
            .entry(&tok.tag)
            .or_default() += 1.0;
    }
    let mut inventory = ClassInventory::new();
    for tag_counts in counts.values() {
        let class = AmbiguityClass::from_weights(tag_counts.iter().map(|(t, c)| (*t, *c)))
            .expect("counts are positive");
        inventory
            .push(class)
            .expect("symbols are distinct map keys");
    }
    let mut lexicon = ClassLexicon::new();
    let mut words: Vec<(&str, &String)> = word_class.iter().map(|(w, s)| (*w, s)).collect();
    words.sort_unstable();
    for (word, symbol) in words {
        lexicon.insert(word, symbol);
    }
    (inventory, lexicon)
}

/// Writes each token's class symbol into `class_sym`.
pub fn annotate_classes(corpus: &mut TaggedCorpus, lexicon: &ClassLexicon) {
    for tok in corpus.sentences.iter_mut().flatten() {
        tok.class_sym = lexicon.get_exact(&tok.word).map(str::to_string);
    }
}

/// All non-empty subsets of the class's tags, largest first.
pub fn enumerate_subclasses(class: &AmbiguityClass) -> Result<Vec<Subclass>> {
    let n = class.tags.len();
    if n > MAX_SUBCLASS_TAGS {
        return Err(Error::TooManyTags {
            symbol: class.symbol.clone(),
            count: n,
            max: MAX_SUBCLASS_TAGS,
        });
    }
    let full = (1u32 << n) - 1;
    let mut masks: Vec<u32> = (1..=full).collect();
    masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), std::cmp::Reverse(*m)));
    Ok(masks
        .into_iter()
        .map(|mask| {
            let (tags, raw_probs) = (0..n)
                .filter(|i| mask & (1 << (n - 1 - i)) != 0)
                .map(|i| (class.tags[i].clone(), class.probs[i]))
                .unzip();
            Subclass { tags, raw_probs }
        })
        .collect())
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).min(1.0))
}

struct Cluster {
    sum: Vec<f64>,
    members: usize,
}

impl Cluster {
    fn centroid(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.members as f64).collect()
    }
}

/// Agglomerative centroid clustering of one tag-list group.
fn cluster_group(vectors: &[&[f64]], theta: f64) -> Result<Vec<Vec<f64>>> {
    // identical vectors start in one cluster
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut seen: Vec<&[f64]> = Vec::new();
    for v in vectors {
        match seen.iter().position(|s| s == v) {
            Some(i) => {
                for (a, b) in clusters[i].sum.iter_mut().zip(v.iter()) {
                    *a += b;
                }
                clusters[i].members += 1;
            }
            None => {
                seen.push(v);
                clusters.push(Cluster {
                    sum: v.to_vec(),
                    members: 1,
                });
            }
        }
    }
    let mut centroids: Vec<Vec<f64>> = clusters.iter().map(Cluster::centroid).collect();
    let n = clusters.len();
    let mut sim = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            sim[i][j] = cosine(&centroids[i], &centroids[j])?;
        }
    }
    let mut alive: Vec<bool> = vec![true; n];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for j in (i + 1..n).filter(|&j| alive[j]) {
                let s = sim[i][j];
                if s + COSINE_SLACK >= theta && best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let absorbed = std::mem::replace(
            &mut clusters[j],
            Cluster {
                sum: Vec::new(),
                members: 0,
            },
        );
        for (a, b) in clusters[i].sum.iter_mut().zip(&absorbed.sum) {
            *a += b;
        }
        clusters[i].members += absorbed.members;
        alive[j] = false;
        centroids[i] = clusters[i].centroid();
        for k in (0..n).filter(|&k| alive[k] && k != i) {
            let s = cosine(&centroids[i], &centroids[k])?;
            if k < i {
                sim[k][i] = s;
            } else {
                sim[i][k] = s;
            }
        }
    }
    Ok((0..n)
        .filter(|&i| alive[i])
        .map(|i| centroids[i].clone())
        .collect())
}

/// Clusters subclasses with equal tag lists into reduced classes.
///
/// Within each group the two clusters whose centroids are most similar
/// (by cosine) are merged until no pair reaches `theta`. Variants are
/// numbered by descending probability of the first tag.
pub fn cluster_subclasses(subclasses: &[Subclass], theta: f64) -> Result<ReducedInventory> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "similarity threshold {theta} must be positive"
        )));
    }
    let mut groups: BTreeMap<&[String], Vec<&[f64]>> = BTreeMap::new();
    for s in subclasses {
        if s.tags.len() != s.raw_probs.len() || s.tags.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "malformed subclass {:?}",
                s.tags
            )));
        }
        groups.entry(&s.tags).or_default().push(&s.raw_probs);
    }
    let mut reduced = Vec::new();
    for (tags, vectors) in groups {
        let mut vectors_out: Vec<Vec<f64>> = cluster_group(&vectors, theta)?
            .into_iter()
            .map(|c| {
                let total: f64 = c.iter().sum();
                c.into_iter().map(|x| x / total).collect()
            })
            .collect();
        vectors_out.sort_by(|a, b| {
            b.iter()
                .zip(a.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for (k, probs) in vectors_out.into_iter().enumerate() {
            reduced.push(ReducedAmbiguityClass::new(
                tags.to_vec(),
                probs,
                k as u32 + 1,
            )?);
        }
    }
    ReducedInventory::from_classes(reduced)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnknownClass {
    pub class: AmbiguityClass,
    /// True when the corpus had no hapaxes and global tag frequencies were used.
    pub fallback: bool,
}

/// The class for words that neither the lexicon nor the guesser know: the
/// `m` most frequent tags among hapax tokens, renormalized.
pub fn unknown_word_class(
    hapax: &BTreeMap<String, f64>,
    stats: &CorpusStats,
    m: usize,
) -> Result<UnknownClass> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "unknown class needs at least one tag".into(),
        ));
    }
    let fallback = hapax.is_empty();
    let mut ranked: Vec<(String, f64)> = if fallback {
        stats
            .tagset
            .iter()
            .zip(&stats.p_tag)
            .map(|(t, &p)| (t.to_string(), p))
            .collect()
    } else {
        hapax.iter().map(|(t, &p)| (t.clone(), p)).collect()
    };
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(m);
    let (tags, probs) = canonical(ranked);
    let mut class = AmbiguityClass::new(tags, probs)?;
    class.symbol.push_str(UNKNOWN_MARKER);
    Ok(UnknownClass { class, fallback })
}

/// Coarse spelling shape; each shape gets its own suffix table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WordShape {
    /// Table over all word types, consulted last.
    Any,
    Lower,
    Capitalized,
    /// Contains an ASCII digit.
    Numeric,
}

impl WordShape {
    pub fn of(word: &str) -> Self {
        if word.bytes().any(|b| b.is_ascii_digit()) {
            WordShape::Numeric
        } else if word.chars().next().is_some_and(char::is_uppercase) {
            WordShape::Capitalized
        } else {
            WordShape::Lower
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WordShape::Any => "any",
            WordShape::Lower => "lower",
            WordShape::Capitalized => "cap",
            WordShape::Numeric => "num",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        [
            WordShape::Any,
            WordShape::Lower,
            WordShape::Capitalized,
            WordShape::Numeric,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

/// Longest-suffix tables from word endings to class symbols.
///
/// A word is looked up in the table for its own shape first and in the
/// shape-independent table second.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuffixGuesser {
    max_suffix_len: usize,
    table: HashMap<(WordShape, String), String>,
}

impl SuffixGuesser {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn max_suffix_len(&self) -> usize {
        self.max_suffix_len
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn guess(&self, word: &str) -> Option<&str> {
        if self.max_suffix_len == 0 || self.table.is_empty() {
            return None;
        }
        let starts: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
        let longest = self.max_suffix_len.min(starts.len());
        let mut key = (WordShape::Any, String::new());
        [WordShape::of(word), WordShape::Any]
            .into_iter()
            .find_map(|shape| {
                (1..=longest).rev().find_map(|len| {
                    key.0 = shape;
                    key.1.clear();
                    key.1.push_str(&word[starts[starts.len() - len]..]);
                    self.table.get(&key).map(String::as_str)
                })
            })
    }

    /// `(shape, suffix, class symbol)` triples, sorted.
    pub fn entries(&self) -> Vec<(WordShape, &str, &str)> {
        let mut entries: Vec<_> = self
            .table
            .iter()
            .map(|((shape, suffix), v)| (*shape, suffix.as_str(), v.as_str()))
            .collect();
        entries.sort_unstable();
        entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# seqtag guesser v1\n");
        let _ = writeln!(out, "max_suffix_len\t{}", self.max_suffix_len);
        for (shape, suffix, symbol) in self.entries() {
            let _ = writeln!(out, "suffix\t{}\t{suffix}\t{symbol}", shape.name());
        }
        out
    }

    pub fn from_text(text: &str, inventory: &ClassInventory) -> Result<Self> {
        let mut guesser = SuffixGuesser::default();
        for (line_no, line) in body_lines(text, "# seqtag guesser v1")? {
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                ["max_suffix_len", k] => {
                    guesser.max_suffix_len = k
                        .parse()
                        .map_err(|_| Error::format(line_no, "bad suffix length"))?;
                }
                ["suffix", shape, suffix, symbol] => {
                    let shape = WordShape::parse(shape)
                        .ok_or_else(|| Error::format(line_no, format!("unknown shape {shape}")))?;
                    if inventory.get(symbol).is_none() {
                        return Err(Error::format(line_no, format!("unknown class {symbol}")));
                    }
                    guesser
                        .table
                        .insert((shape, suffix.to_string()), symbol.to_string());
                }
                _ => return Err(Error::format(line_no, "unrecognized guesser entry")),
            }
        }
        Ok(guesser)
    }
}

/// Builds the suffix tables from the corpus word types.
///
/// A suffix is kept when at least `min_count` word types (of the given
/// shape) end in it; it then maps to the class most of those types belong
/// to.
pub fn build_guesser(
    corpus: &TaggedCorpus,
    lexicon: &ClassLexicon,
    max_suffix_len: usize,
    min_count: usize,
) -> SuffixGuesser {
    let types: BTreeSet<&str> = corpus.tokens().map(|t| t.word.as_str()).collect();
    let mut votes: HashMap<(WordShape, &str), BTreeMap<&str, usize>> = HashMap::new();
    for word in types {
        let Some(symbol) = lexicon.get_exact(word) else {
            continue;
        };
        let shape = WordShape::of(word);
        let starts: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
        for len in 1..=max_suffix_len.min(starts.len()) {
            let suffix = &word[starts[starts.len() - len]..];
            for key in [(shape, suffix), (WordShape::Any, suffix)] {
                *votes.entry(key).or_default().entry(symbol).or_default() += 1;
            }
        }
    }
    let mut table = HashMap::new();
    for ((shape, suffix), by_class) in votes {
        let total: usize = by_class.values().sum();
        if total < min_count.max(1) {
            continue;
        }
        // BTreeMap order makes the lexicographically first symbol win ties
        let (best, _) = by_class
            .iter()
            .fold(None::<(&str, usize)>, |acc, (&s, &c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((s, c)),
            })
            .expect("non-empty vote");
        table.insert((shape, suffix.to_string()), best.to_string());
    }
    SuffixGuesser {
        max_suffix_len,
        table,
    }
}

/// Lexicon, then lowercase lexicon, then guesser, then the unknown class.
pub fn lookup_class<'a>(
    word: &str,
    lexicon: &'a ClassLexicon,
    guesser: &'a SuffixGuesser,
    unknown: &'a AmbiguityClass,
) -> &'a str {
    lexicon
        .get(word)
        .or_else(|| guesser.guess(word))
        .unwrap_or(&unknown.symbol)
}

#[derive(Debug, Clone)]
pub struct Reestimated {
    pub inventory: ReducedInventory,
    /// Reduced classes no token was annotated with; their vectors are unchanged.
    pub unobserved: Vec<String>,
}

/// Replaces each reduced class's vector with the gold tag distribution of
/// the tokens annotated with it.
///
/// Gold tags outside the class's tag list are ignored.
pub fn reestimate_reduced_vectors(
    corpus: &TaggedCorpus,
    inventory: &ReducedInventory,
    floor: f64,
) -> Result<Reestimated> {
    let mut counts: Vec<Vec<f64>> = inventory.iter().map(|r| vec![0.0; r.tags.len()]).collect();
    let mut seen = vec![false; inventory.len()];
    for tok in corpus.tokens() {
        let symbol = tok.reduced_sym.as_deref().ok_or_else(|| {
            Error::Inconsistent(format!("token {:?} has no reduced class", tok.word))
        })?;
        let id = inventory
            .id(symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))?;
        seen[id] = true;
        if let Some(k) = inventory.by_id(id).tags.iter().position(|t| *t == tok.tag) {
            counts[id][k] += 1.0;
        }
    }
    let mut classes = Vec::with_capacity(inventory.len());
    let mut unobserved = Vec::new();
    for (id, r) in inventory.iter().enumerate() {
        let total: f64 = counts[id].iter().sum();
        if !seen[id] || total == 0.0 {
            unobserved.push(r.symbol.clone());
            classes.push(r.clone());
            continue;
        }
        let row_floor = floor.min(1.0 / (2.0 * r.tags.len() as f64));
        let mut probs = floor_normalize(&counts[id], row_floor);
        if row_floor == 0.0 {
            // a zero floor would leave unseen tags at zero probability
            let smallest = f64::MIN_POSITIVE;
            probs.iter_mut().for_each(|p| *p = p.max(smallest));
        }
        classes.push(ReducedAmbiguityClass::new(
            r.tags.clone(),
            probs,
            r.variant,
        )?);
    }
    Ok(Reestimated {
        inventory: ReducedInventory::from_classes(classes)?,
        unobserved,
    })
}
