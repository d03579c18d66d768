//! Training, the tagging cascade, evaluation and benchmarking.
//!
//! Training runs the stages in a fixed order: statistics, the class
//! inventory and lexicon, subclass clustering, the first transducer,
//! annotation of the training corpus with its output, re-estimation of the
//! reduced-class vectors, the second transducer, and minimization. The
//! result is a [`ModelBundle`], stored on disk as a directory of text and
//! binary files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::classes::{
    annotate_classes, build_class_inventory, build_guesser, cluster_subclasses,
    enumerate_subclasses, reestimate_reduced_vectors, unknown_word_class, AmbiguityClass,
    ClassInventory, ClassLexicon, ReducedInventory, SuffixGuesser, DEFAULT_MIN_SUFFIX_COUNT,
    DEFAULT_SUFFIX_LEN, DEFAULT_THETA, DEFAULT_UNKNOWN_TAGS,
};
use crate::context::DEFAULT_TAU;
use crate::corpus::{
    compute_stats, hapax_tag_distribution, CorpusStats, TaggedCorpus, DEFAULT_FLOOR,
};
use crate::error::{Error, Result, StageExt};
use crate::hmm::{train_hmm, HmmModel};
use crate::transducer::{build_t1, build_t2, LabeledTransducer, SequentialTransducer};

const MANIFEST_VERSION: &str = "seqtag-bundle-1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Ratio threshold for dropping unlikely tags.
    pub tau: f64,
    /// Cosine threshold for merging subclass clusters.
    pub theta: f64,
    /// Number of tags in the unknown-word class.
    pub unknown_tags: usize,
    pub suffix_len: usize,
    pub min_suffix_count: usize,
    pub floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            unknown_tags: DEFAULT_UNKNOWN_TAGS,
            suffix_len: DEFAULT_SUFFIX_LEN,
            min_suffix_count: DEFAULT_MIN_SUFFIX_COUNT,
            floor: DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMetadata {
    pub config: TrainConfig,
    pub corpus_checksum: String,
    pub sentences: usize,
    pub tokens: usize,
    pub tags: usize,
    pub unknown_symbol: String,
    /// The corpus had no hapaxes; the unknown class uses global frequencies.
    pub unknown_fallback: bool,
    pub unobserved_reduced: usize,
}

/// Everything the tagger needs at run time.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub t1: SequentialTransducer,
    pub t2: SequentialTransducer,
    pub lexicon: ClassLexicon,
    pub guesser: SuffixGuesser,
    pub classes: ClassInventory,
    pub reduced: ReducedInventory,
    pub stats: CorpusStats,
    pub metadata: BundleMetadata,
}

/// Output of [`train`], including intermediate artifacts for inspection.
#[derive(Debug, Clone)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub hmm: HmmModel,
    /// First transducer before minimization, with state labels.
    pub t1_labeled: LabeledTransducer,
    /// Second transducer before minimization, with state labels.
    pub t2_labeled: LabeledTransducer,
    /// Reduced classes as clustered, before re-estimation.
    pub clustered: ReducedInventory,
    /// Training corpus with class and reduced-class annotations.
    pub annotated: TaggedCorpus,
}

impl Trained {
    /// The same model with the unminimized transducers.
    pub fn unminimized_bundle(&self) -> ModelBundle {
        let mut b = self.bundle.clone();
        b.t1 = self.t1_labeled.fst.clone();
        b.t2 = self.t2_labeled.fst.clone();
        b
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !self.theta.is_finite() || self.theta <= 0.0 {
            return bad("theta must be positive");
        }
        if self.unknown_tags == 0 {
            return bad("the unknown class needs at least one tag");
        }
        if !(0.0..1.0).contains(&self.floor) {
            return bad("floor must lie in [0, 1)");
        }
        Ok(())
    }
}

pub fn train(corpus: &TaggedCorpus, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    let stats = compute_stats(corpus, config.floor).stage("statistics")?;

    let (mut classes, lexicon) = build_class_inventory(corpus);
    let hapax = hapax_tag_distribution(corpus);
    let unknown = unknown_word_class(&hapax, &stats, config.unknown_tags).stage("unknown class")?;
    let unknown_symbol = unknown.class.symbol.clone();
    classes.push(unknown.class.clone()).stage("unknown class")?;
    let mut annotated = corpus.clone();
    annotate_classes(&mut annotated, &lexicon);

    let mut subclasses = Vec::new();
    for class in classes.iter() {
        subclasses.extend(enumerate_subclasses(class).stage("subclasses")?);
    }
    let clustered = cluster_subclasses(&subclasses, config.theta).stage("clustering")?;

    let t1_labeled =
        build_t1(&classes, &clustered, &stats, config.tau).stage("first transducer")?;
    annotate_reduced(&mut annotated, &t1_labeled.fst).stage("annotation")?;
    let reestimated =
        reestimate_reduced_vectors(&annotated, &clustered, config.floor).stage("re-estimation")?;

    // the tag-context distributions depend only on gold tags, so the
    // statistics computed above are already the re-estimated ones
    let t2_labeled = build_t2(
        &reestimated.inventory,
        t1_labeled.fst.output_alphabet(),
        &stats,
    )
    .stage("second transducer")?;

    let t1 = t1_labeled.fst.minimize();
    let t2 = t2_labeled.fst.minimize();
    let guesser = build_guesser(corpus, &lexicon, config.suffix_len, config.min_suffix_count);

    let extra: Vec<(String, String)> = hapax_tokens(corpus)
        .filter(|tag| unknown.class.tags.iter().any(|t| t == tag))
        .map(|tag| (unknown_symbol.clone(), tag.to_string()))
        .collect();
    let hmm = train_hmm(&annotated, config.floor, &extra).stage("hmm baseline")?;

    let metadata = BundleMetadata {
        config: config.clone(),
        corpus_checksum: corpus.checksum(),
        sentences: corpus.sentences.len(),
        tokens: corpus.token_count(),
        tags: corpus.tagset.len(),
        unknown_symbol,
        unknown_fallback: unknown.fallback,
        unobserved_reduced: reestimated.unobserved.len(),
    };
    let bundle = ModelBundle {
        t1,
        t2,
        lexicon,
        guesser,
        classes,
        reduced: reestimated.inventory,
        stats,
        metadata,
    };
    bundle.check_consistency()?;
    Ok(Trained {
        bundle,
        hmm,
        t1_labeled,
        t2_labeled,
        clustered,
        annotated,
    })
}

/// Gold tags of tokens whose word occurs once in the corpus.
fn hapax_tokens(corpus: &TaggedCorpus) -> impl Iterator<Item = &str> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in corpus.tokens() {
        *counts.entry(tok.word.as_str()).or_default() += 1;
    }
    corpus
        .tokens()
        .filter(move |t| counts[t.word.as_str()] == 1)
        .map(|t| t.tag.as_str())
}

/// Runs `t1` over each sentence's class symbols and records the output.
pub fn annotate_reduced(corpus: &mut TaggedCorpus, t1: &SequentialTransducer) -> Result<()> {
    for sentence in &mut corpus.sentences {
        let classes: Vec<&str> = sentence
            .iter()
            .map(|t| {
                t.class_sym
                    .as_deref()
                    .ok_or_else(|| Error::Inconsistent(format!("token {:?} has no class", t.word)))
            })
            .collect::<Result<_>>()?;
        let reduced = t1.apply_ltr(&classes)?;
        for (tok, r) in sentence.iter_mut().zip(reduced) {
            tok.reduced_sym = Some(r);
        }
    }
    Ok(())
}

impl ModelBundle {
    pub fn unknown_class(&self) -> &AmbiguityClass {
        self.classes
            .get(&self.metadata.unknown_symbol)
            .expect("checked at construction")
    }

    /// Checks the alphabets line up across lexicon, guesser and both machines.
    pub fn check_consistency(&self) -> Result<()> {
        let t1_in = |s: &str| self.t1.input_id(s).is_some();
        if self.classes.get(&self.metadata.unknown_symbol).is_none()
            || !t1_in(&self.metadata.unknown_symbol)
        {
            return Err(Error::Inconsistent(format!(
                "unknown class {} missing",
                self.metadata.unknown_symbol
            )));
        }
        if let Some(s) = self.lexicon.symbols().iter().find(|s| !t1_in(s)) {
            return Err(Error::Inconsistent(format!(
                "lexicon class {s} is not a T1 input"
            )));
        }
        for (_, _, s) in self.guesser.entries() {
            if !t1_in(s) {
                return Err(Error::Inconsistent(format!(
                    "guesser class {s} is not a T1 input"
                )));
            }
        }
        if self.t2.input_alphabet() != self.t1.output_alphabet() {
            return Err(Error::Inconsistent(
                "T2 input alphabet differs from T1 output alphabet".into(),
            ));
        }
        Ok(())
    }

    pub fn tagger(&self) -> Result<Tagger<'_>> {
        Tagger::new(self)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(dir, "manifest.txt", self.manifest().as_bytes())?;
        write_file(dir, "stats.txt", self.stats.to_text().as_bytes())?;
        write_file(dir, "classes.txt", self.classes.to_text().as_bytes())?;
        write_file(dir, "reduced.txt", self.reduced.to_text().as_bytes())?;
        write_file(dir, "lexicon.txt", self.lexicon.to_text().as_bytes())?;
        write_file(dir, "guesser.txt", self.guesser.to_text().as_bytes())?;
        write_file(dir, "t1.fst", &self.t1.to_bytes())?;
        write_file(dir, "t2.fst", &self.t2.to_bytes())?;
        write_file(dir, "t1.txt", self.t1.to_text().as_bytes())?;
        write_file(dir, "t2.txt", self.t2.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let metadata = parse_manifest(&read_text(dir, "manifest.txt")?)?;
        let classes =
            ClassInventory::from_text(&read_text(dir, "classes.txt")?).stage("classes.txt")?;
        let reduced =
            ReducedInventory::from_text(&read_text(dir, "reduced.txt")?).stage("reduced.txt")?;
        let lexicon = ClassLexicon::from_text(&read_text(dir, "lexicon.txt")?, &classes)
            .stage("lexicon.txt")?;
        let guesser = SuffixGuesser::from_text(&read_text(dir, "guesser.txt")?, &classes)
            .stage("guesser.txt")?;
        let t1 = SequentialTransducer::from_bytes(&read_bytes(dir, "t1.fst")?).stage("t1.fst")?;
        let t2 = SequentialTransducer::from_bytes(&read_bytes(dir, "t2.fst")?).stage("t2.fst")?;
        let stats = CorpusStats::from_text(&read_text(dir, "stats.txt")?).stage("stats.txt")?;
        let bundle = ModelBundle {
            t1,
            t2,
            lexicon,
            guesser,
            classes,
            reduced,
            stats,
            metadata,
        };
        bundle.check_consistency()?;
        Ok(bundle)
    }

    fn manifest(&self) -> String {
        let m = &self.metadata;
        let c = &m.config;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("format", &MANIFEST_VERSION);
        kv("tau", &c.tau);
        kv("theta", &c.theta);
        kv("unknown_tags", &c.unknown_tags);
        kv("suffix_len", &c.suffix_len);
        kv("min_suffix_count", &c.min_suffix_count);
        kv("floor", &c.floor);
        kv("corpus_checksum", &m.corpus_checksum);
        kv("sentences", &m.sentences);
        kv("tokens", &m.tokens);
        kv("tags", &m.tags);
        kv("unknown_symbol", &m.unknown_symbol);
        kv("unknown_fallback", &m.unknown_fallback);
        kv("unobserved_reduced", &m.unobserved_reduced);
        kv("ambiguity_classes", &self.classes.len());
        kv("reduced_classes", &self.reduced.len());
        kv("t1_states", &self.t1.num_states());
        kv("t1_arcs", &self.t1.num_arcs());
        kv("t2_states", &self.t2.num_states());
        kv("t2_arcs", &self.t2.num_arcs());
        out
    }
}

pub fn save_hmm(hmm: &HmmModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(dir, "hmm.txt", hmm.to_text().as_bytes())
}

pub fn load_hmm(dir: impl AsRef<Path>) -> Result<HmmModel> {
    HmmModel::from_text(&read_text(dir.as_ref(), "hmm.txt")?).stage("hmm.txt")
}

fn write_file(dir: &Path, name: &str, data: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, data).map_err(|e| Error::io(path, e))
}

fn read_bytes(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let path = dir.join(name);
    std::fs::read(&path).map_err(|e| Error::io(path, e))
}

fn read_text(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

/// Parses `key=value` lines.
pub fn parse_key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn parse_manifest(text: &str) -> Result<BundleMetadata> {
    let kv = parse_key_values(text);
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| Error::Inconsistent(format!("manifest lacks {k}")))
    };
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::Inconsistent(format!("manifest: bad value for {key}: {v}")))
    }
    let format = get("format")?;
    if format != MANIFEST_VERSION {
        return Err(Error::Version {
            expected: MANIFEST_VERSION.into(),
            found: format.clone(),
        });
    }
    let config = TrainConfig {
        tau: num("tau", get("tau")?)?,
        theta: num("theta", get("theta")?)?,
        unknown_tags: num("unknown_tags", get("unknown_tags")?)?,
        suffix_len: num("suffix_len", get("suffix_len")?)?,
        min_suffix_count: num("min_suffix_count", get("min_suffix_count")?)?,
        floor: num("floor", get("floor")?)?,
    };
    Ok(BundleMetadata {
        config,
        corpus_checksum: get("corpus_checksum")?.clone(),
        sentences: num("sentences", get("sentences")?)?,
        tokens: num("tokens", get("tokens")?)?,
        tags: num("tags", get("tags")?)?,
        unknown_symbol: get("unknown_symbol")?.clone(),
        unknown_fallback: num("unknown_fallback", get("unknown_fallback")?)?,
        unobserved_reduced: num("unobserved_reduced", get("unobserved_reduced")?)?,
    })
}

/// Run-time view of a bundle with symbol lookups resolved to ids.
pub struct Tagger<'a> {
    bundle: &'a ModelBundle,
    word_ids: HashMap<&'a str, u32>,
    unknown_id: u32,
    /// T1 output id to T2 input id.
    bridge: Vec<u32>,
    tag_names: &'a [String],
}

impl<'a> Tagger<'a> {
    fn new(bundle: &'a ModelBundle) -> Result<Self> {
        bundle.check_consistency()?;
        let t1_id = |s: &str| {
            bundle
                .t1
                .input_id(s)
                .ok_or_else(|| Error::Inconsistent(format!("{s} is not a T1 input")))
        };
        let mut word_ids = HashMap::with_capacity(bundle.lexicon.len());
        for (word, symbol) in bundle.lexicon.entries() {
            word_ids.insert(word, t1_id(symbol)?);
        }
        let bridge = bundle
            .t1
            .output_alphabet()
            .iter()
            .map(|s| {
                bundle
                    .t2
                    .input_id(s)
                    .ok_or_else(|| Error::Inconsistent(format!("{s} is not a T2 input")))
            })
            .collect::<Result<_>>()?;
        Ok(Tagger {
            bundle,
            word_ids,
            unknown_id: t1_id(&bundle.metadata.unknown_symbol)?,
            bridge,
            tag_names: bundle.t2.output_alphabet(),
        })
    }

    pub fn bundle(&self) -> &ModelBundle {
        self.bundle
    }

    /// T1 input id of a word's ambiguity class.
    pub fn class_id(&self, word: &str) -> u32 {
        if let Some(&id) = self.word_ids.get(word) {
            return id;
        }
        let lower = word.to_lowercase();
        if lower != word {
            if let Some(&id) = self.word_ids.get(lower.as_str()) {
                return id;
            }
        }
        self.bundle
            .guesser
            .guess(word)
            .and_then(|s| self.bundle.t1.input_id(s))
            .unwrap_or(self.unknown_id)
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.bundle.lexicon.get(word).is_some()
    }

    pub fn class_symbol(&self, word: &str) -> &'a str {
        &self.bundle.t1.input_alphabet()[self.class_id(word) as usize]
    }

    /// Runs both transducers over class ids into `out`; `reduced` is scratch space.
    pub fn tag_ids_into(
        &self,
        classes: &[u32],
        reduced: &mut Vec<u32>,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        reduced.clear();
        out.clear();
        self.bundle.t1.apply_ids_into(classes, reduced)?;
        for r in reduced.iter_mut() {
            *r = self.bridge[*r as usize];
        }
        self.bundle.t2.apply_ids_into(reduced, out)
    }

    pub fn tag_class_ids(&self, classes: &[u32]) -> Result<Vec<u32>> {
        let mut reduced = Vec::with_capacity(classes.len());
        let mut out = Vec::with_capacity(classes.len());
        self.tag_ids_into(classes, &mut reduced, &mut out)?;
        Ok(out)
    }

    pub fn tag_name(&self, id: u32) -> &'a str {
        &self.tag_names[id as usize]
    }

    /// Intermediate reduced-class symbols for a sentence.
    pub fn reduced_symbols<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<&'a str>> {
        let classes: Vec<u32> = words.iter().map(|w| self.class_id(w.as_ref())).collect();
        Ok(self
            .bundle
            .t1
            .apply_ids(&classes)?
            .into_iter()
            .map(|r| self.bundle.t1.output_alphabet()[r as usize].as_str())
            .collect())
    }

    pub fn tag_sentence<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<&'a str>> {
        let classes: Vec<u32> = words.iter().map(|w| self.class_id(w.as_ref())).collect();
        Ok(self
            .tag_class_ids(&classes)?
            .into_iter()
            .map(|t| self.tag_name(t))
            .collect())
    }

    /// Tags sentences on up to `workers` threads; output order follows input order.
    pub fn tag_sentences<S: AsRef<str> + Sync>(
        &self,
        sentences: &[Vec<S>],
        workers: usize,
    ) -> Result<Vec<Vec<&'a str>>> {
        if workers <= 1 {
            return sentences.iter().map(|s| self.tag_sentence(s)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| sentences.par_iter().map(|s| self.tag_sentence(s)).collect())
    }
}

/// Tags with the bundle; one tag per word.
pub fn tag<S: AsRef<str> + Sync>(
    bundle: &ModelBundle,
    sentences: &[Vec<S>],
    workers: usize,
) -> Result<Vec<Vec<String>>> {
    let tagger = bundle.tagger()?;
    Ok(tagger
        .tag_sentences(sentences, workers)?
        .into_iter()
        .map(|s| s.into_iter().map(str::to_string).collect())
        .collect())
}

/// Reads pre-tokenized text: one sentence per line, whitespace-separated.
pub fn parse_plain_text(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn rate(tokens: usize, elapsed: Duration) -> f64 {
    tokens as f64 / elapsed.as_secs_f64().max(1e-9)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accuracy {
    pub tokens: usize,
    pub correct: usize,
    /// Tokens whose word is absent from the lexicon.
    pub unknown_tokens: usize,
    pub unknown_correct: usize,
    /// `(gold, predicted)` counts.
    pub confusion: BTreeMap<(String, String), usize>,
}

impl Accuracy {
    pub fn percent(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.tokens as f64
        }
    }

    pub fn unknown_percent(&self) -> f64 {
        if self.unknown_tokens == 0 {
            0.0
        } else {
            100.0 * self.unknown_correct as f64 / self.unknown_tokens as f64
        }
    }
}

/// Compares predicted tags against the gold corpus, sentence by sentence.
pub fn score<S: AsRef<str>>(
    predicted: &[Vec<S>],
    gold: &TaggedCorpus,
    known: impl Fn(&str) -> bool,
) -> Result<Accuracy> {
    if predicted.len() != gold.sentences.len() {
        return Err(Error::LengthMismatch {
            predicted: predicted.len(),
            gold: gold.sentences.len(),
        });
    }
    let mut acc = Accuracy::default();
    for (pred, sent) in predicted.iter().zip(&gold.sentences) {
        if pred.len() != sent.len() {
            return Err(Error::LengthMismatch {
                predicted: pred.len(),
                gold: sent.len(),
            });
        }
        for (p, tok) in pred.iter().zip(sent) {
            let p = p.as_ref();
            let hit = p == tok.tag;
            acc.tokens += 1;
            acc.correct += hit as usize;
            if !known(&tok.word) {
                acc.unknown_tokens += 1;
                acc.unknown_correct += hit as usize;
            }
            *acc.confusion
                .entry((tok.tag.clone(), p.to_string()))
                .or_default() += 1;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: Accuracy,
    /// Median over the timed runs.
    pub words_per_sec: f64,
    pub runs: usize,
    pub wall_time: Duration,
    /// The gold corpus is the training corpus.
    pub gold_is_training: bool,
}

impl EvalReport {
    pub fn to_key_values(&self) -> String {
        let a = &self.accuracy;
        let mut out = String::new();
        let _ = writeln!(out, "tokens={}", a.tokens);
        let _ = writeln!(out, "correct={}", a.correct);
        let _ = writeln!(out, "accuracy={:.4}", a.percent());
        let _ = writeln!(out, "unknown_tokens={}", a.unknown_tokens);
        let _ = writeln!(out, "unknown_accuracy={:.4}", a.unknown_percent());
        let _ = writeln!(out, "words_per_sec={:.0}", self.words_per_sec);
        let _ = writeln!(out, "runs={}", self.runs);
        let _ = writeln!(out, "wall_time_sec={:.6}", self.wall_time.as_secs_f64());
        let _ = writeln!(out, "gold_is_training={}", self.gold_is_training);
        out
    }

    pub fn to_table(&self, max_confusions: usize) -> String {
        let a = &self.accuracy;
        let mut out = String::new();
        let _ = writeln!(out, "{:<22}{:>14}", "tokens", a.tokens);
        let _ = writeln!(out, "{:<22}{:>14}", "correct", a.correct);
        let _ = writeln!(out, "{:<22}{:>13.2}%", "accuracy", a.percent());
        let _ = writeln!(out, "{:<22}{:>14}", "unknown tokens", a.unknown_tokens);
        let _ = writeln!(
            out,
            "{:<22}{:>13.2}%",
            "unknown accuracy",
            a.unknown_percent()
        );
        let _ = writeln!(
            out,
            "{:<22}{:>14.0}",
            "words/sec (median)", self.words_per_sec
        );
        let _ = writeln!(
            out,
            "{:<22}{:>14.3}",
            "wall time (s)",
            self.wall_time.as_secs_f64()
        );
        let mut errors: Vec<_> = a.confusion.iter().filter(|((g, p), _)| g != p).collect();
        errors.sort_by(|x, y| y.1.cmp(x.1).then_with(|| x.0.cmp(y.0)));
        if !errors.is_empty() {
            let _ = writeln!(out, "\n{:<12}{:<12}{:>8}", "gold", "predicted", "count");
            for ((g, p), n) in errors.into_iter().take(max_confusions) {
                let _ = writeln!(out, "{g:<12}{p:<12}{n:>8}");
            }
        }
        if self.gold_is_training {
            let _ = writeln!(
                out,
                "\nwarning: gold corpus is identical to the training corpus"
            );
        }
        out
    }
}

/// Tags the gold corpus `runs` times (at least 3) and reports accuracy
/// and the median throughput of the whole pipeline, lookup included.
pub fn evaluate(bundle: &ModelBundle, gold: &TaggedCorpus, runs: usize) -> Result<EvalReport> {
    let tagger = bundle.tagger()?;
    let runs = runs.max(3);
    let words: Vec<Vec<&str>> = gold
        .sentences
        .iter()
        .map(|s| s.iter().map(|t| t.word.as_str()).collect())
        .collect();
    let tokens = gold.token_count();
    let started = Instant::now();
    let mut rates = Vec::with_capacity(runs);
    let mut predicted = Vec::new();
    for _ in 0..runs {
        let t0 = Instant::now();
        predicted = words
            .iter()
            .map(|s| tagger.tag_sentence(s))
            .collect::<Result<Vec<_>>>()?;
        rates.push(rate(tokens, t0.elapsed()));
    }
    let wall_time = started.elapsed();
    let accuracy = score(&predicted, gold, |w| tagger.is_known(w))?;
    Ok(EvalReport {
        accuracy,
        words_per_sec: median(rates),
        runs,
        wall_time,
        gold_is_training: gold.checksum() == bundle.metadata.corpus_checksum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// Tokens decoded per run (the corpus repeated as needed).
    pub tokens: usize,
    pub runs: usize,
    pub lookup_words_per_sec: f64,
    pub fst_words_per_sec: f64,
    pub hmm_words_per_sec: f64,
    pub fst_accuracy: Accuracy,
    pub hmm_accuracy: Accuracy,
}

impl BenchReport {
    pub fn speed_ratio(&self) -> f64 {
        self.fst_words_per_sec / self.hmm_words_per_sec
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tokens={}", self.tokens);
        let _ = writeln!(out, "runs={}", self.runs);
        let _ = writeln!(out, "lookup_words_per_sec={:.0}", self.lookup_words_per_sec);
        let _ = writeln!(out, "fst_words_per_sec={:.0}", self.fst_words_per_sec);
        let _ = writeln!(out, "hmm_words_per_sec={:.0}", self.hmm_words_per_sec);
        let _ = writeln!(out, "speed_ratio={:.2}", self.speed_ratio());
        let _ = writeln!(out, "fst_accuracy={:.4}", self.fst_accuracy.percent());
        let _ = writeln!(out, "hmm_accuracy={:.4}", self.hmm_accuracy.percent());
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>16}{:>14}", "", "words/sec", "accuracy");
        let _ = writeln!(
            out,
            "{:<16}{:>16.0}{:>13.2}%",
            "T1+T2",
            self.fst_words_per_sec,
            self.fst_accuracy.percent()
        );
        let _ = writeln!(
            out,
            "{:<16}{:>16.0}{:>13.2}%",
            "HMM",
            self.hmm_words_per_sec,
            self.hmm_accuracy.percent()
        );
        let _ = writeln!(out, "{:<16}{:>16.0}", "lookup", self.lookup_words_per_sec);
        let _ = writeln!(
            out,
            "\nspeed ratio {:.2}x over {} tokens, median of {} runs",
            self.speed_ratio(),
            self.tokens,
            self.runs
        );
        out
    }
}

/// Decode-only throughput of the cascade and the HMM over the same class
/// sequences, plus lookup throughput and both accuracies.
///
/// The corpus is repeated until at least `min_tokens` tokens are decoded
/// per run; the median of `runs` (at least 3) runs is reported.
pub fn bench(
    bundle: &ModelBundle,
    hmm: &HmmModel,
    corpus: &TaggedCorpus,
    min_tokens: usize,
    runs: usize,
) -> Result<BenchReport> {
    let tagger = bundle.tagger()?;
    let runs = runs.max(3);
    let repeats = min_tokens.div_ceil(corpus.token_count().max(1)).max(1);
    let sentences: Vec<Vec<&str>> = corpus
        .sentences
        .iter()
        .map(|s| s.iter().map(|t| t.word.as_str()).collect())
        .collect();
    let tokens = corpus.token_count() * repeats;

    let hmm_class: Vec<u32> = bundle
        .t1
        .input_alphabet()
        .iter()
        .map(|s| {
            hmm.class_id(s)
                .ok_or_else(|| Error::Inconsistent(format!("HMM lacks class {s}")))
        })
        .collect::<Result<_>>()?;

    let mut lookup_rates = Vec::new();
    let mut fst_classes: Vec<Vec<u32>> = Vec::new();
    for _ in 0..runs {
        let t0 = Instant::now();
        let mut all = Vec::with_capacity(sentences.len() * repeats);
        for _ in 0..repeats {
            for s in &sentences {
                all.push(s.iter().map(|w| tagger.class_id(w)).collect::<Vec<u32>>());
            }
        }
        lookup_rates.push(rate(tokens, t0.elapsed()));
        fst_classes = std::hint::black_box(all);
    }
    let hmm_classes: Vec<Vec<u32>> = fst_classes
        .iter()
        .map(|s| s.iter().map(|&c| hmm_class[c as usize]).collect())
        .collect();

    let mut fst_rates = Vec::new();
    let mut fst_out: Vec<Vec<u32>> = Vec::new();
    let mut reduced = Vec::new();
    for _ in 0..runs {
        let t0 = Instant::now();
        let mut outputs = Vec::with_capacity(fst_classes.len());
        for s in &fst_classes {
            let mut out = Vec::with_capacity(s.len());
            tagger.tag_ids_into(s, &mut reduced, &mut out)?;
            outputs.push(out);
        }
        fst_rates.push(rate(tokens, t0.elapsed()));
        fst_out = std::hint::black_box(outputs);
    }

    let mut hmm_rates = Vec::new();
    let mut hmm_out: Vec<Vec<u32>> = Vec::new();
    for _ in 0..runs {
        let t0 = Instant::now();
        let outputs = hmm_classes
            .iter()
            .map(|s| hmm.viterbi_ids(s))
            .collect::<Result<Vec<_>>>()?;
        hmm_rates.push(rate(tokens, t0.elapsed()));
        hmm_out = std::hint::black_box(outputs);
    }

    let n = sentences.len();
    let fst_pred: Vec<Vec<&str>> = fst_out[..n]
        .iter()
        .map(|s| s.iter().map(|&t| tagger.tag_name(t)).collect())
        .collect();
    let hmm_pred: Vec<Vec<&str>> = hmm_out[..n]
        .iter()
        .map(|s| s.iter().map(|&t| hmm.tags()[t as usize].as_str()).collect())
        .collect();
    Ok(BenchReport {
        tokens,
        runs,
        lookup_words_per_sec: median(lookup_rates),
        fst_words_per_sec: median(fst_rates),
        hmm_words_per_sec: median(hmm_rates),
        fst_accuracy: score(&fst_pred, corpus, |w| tagger.is_known(w))?,
        hmm_accuracy: score(&hmm_pred, corpus, |w| tagger.is_known(w))?,
    })
}

/// Tags a corpus with the HMM through the bundle's lexicon front end.
pub fn hmm_tag<S: AsRef<str>>(
    bundle: &ModelBundle,
    hmm: &HmmModel,
    sentences: &[Vec<S>],
) -> Result<Vec<Vec<String>>> {
    let tagger = bundle.tagger()?;
    sentences
        .iter()
        .map(|s| {
            let classes: Vec<&str> = s.iter().map(|w| tagger.class_symbol(w.as_ref())).collect();
            hmm.viterbi(&classes)
        })
        .collect()
}
