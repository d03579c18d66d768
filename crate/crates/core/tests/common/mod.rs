//! Shared fixtures: a seeded synthetic corpus and an arc oracle that
//! recomputes every transducer decision from the raw statistics.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use seqtag::classes::{AmbiguityClass, ClassInventory, ReducedAmbiguityClass, ReducedInventory};
use seqtag::transducer::{LabeledTransducer, StateLabel};
use seqtag::{CorpusStats, TaggedCorpus};

const TAG_NAMES: [&str; 8] = ["ADJ", "ADV", "CONJ", "DET", "NOUN", "PREP", "PRON", "VERB"];

/// A corpus drawn from a random tag bigram chain. Each word type can carry
/// one to three tags, so ambiguity classes of several sizes appear.
pub fn synthetic_corpus(seed: u64, sentences: usize, tags: usize, vocab: usize) -> TaggedCorpus {
    assert!(tags >= 2 && tags <= TAG_NAMES.len());
    let mut rng = StdRng::seed_from_u64(seed);
    let names = &TAG_NAMES[..tags];
    let trans: Vec<Vec<f64>> = (0..=tags)
        .map(|_| (0..tags).map(|_| rng.gen::<f64>().powi(3) + 0.01).collect())
        .collect();
    let mut lexicon: Vec<Vec<usize>> = vec![Vec::new(); tags];
    for w in 0..vocab {
        let k = 1 + (rng.gen::<f64>().powi(2) * 3.0) as usize;
        let mut allowed: Vec<usize> = (0..tags).collect();
        for _ in 0..(tags - k.min(tags)) {
            let i = rng.gen_range(0..allowed.len());
            allowed.remove(i);
        }
        for t in allowed {
            lexicon[t].push(w);
        }
    }
    for (t, words) in lexicon.iter_mut().enumerate() {
        if words.is_empty() {
            words.push(vocab + t);
        }
    }
    let pick = |rng: &mut StdRng, weights: &[f64]| {
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                return i;
            }
            x -= w;
        }
        weights.len() - 1
    };
    let out: Vec<Vec<(String, String)>> = (0..sentences)
        .map(|_| {
            let len = rng.gen_range(2..=12);
            let mut prev = tags;
            (0..len)
                .map(|_| {
                    let t = pick(&mut rng, &trans[prev]);
                    prev = t;
                    let words = &lexicon[t];
                    // skewed toward the front of the list
                    let i = ((rng.gen::<f64>().powi(2)) * words.len() as f64) as usize;
                    (
                        format!("w{}", words[i.min(words.len() - 1)]),
                        names[t].to_string(),
                    )
                })
                .collect()
        })
        .collect();
    TaggedCorpus::from_sentences(out).unwrap()
}

fn tid(stats: &CorpusStats, tag: &str) -> usize {
    stats.tagset.id(tag).expect("tag in tagset")
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nu * nv)).min(1.0)
}

/// Expected first-transducer output for class `c` after `left`
/// (None = sentence start).
pub fn expected_t1(
    c: &AmbiguityClass,
    left: Option<&ReducedAmbiguityClass>,
    stats: &CorpusStats,
    reduced: &ReducedInventory,
    tau: f64,
) -> String {
    let scores: Vec<f64> = c
        .tags
        .iter()
        .zip(&c.probs)
        .map(|(t, pc)| {
            let i = tid(stats, t);
            let context = match left {
                None => stats.p_tag_given_bos[i],
                Some(r) => r
                    .tags
                    .iter()
                    .zip(&r.probs)
                    .map(|(pt, w)| stats.p_tag_given_prev[tid(stats, pt)][i] * w)
                    .sum(),
            };
            context * pc / stats.p_tag[i]
        })
        .collect();
    let best = scores.iter().cloned().fold(f64::MIN, f64::max);
    let kept: Vec<usize> = (0..scores.len())
        .filter(|&j| scores[j] == best || scores[j] / best >= tau)
        .collect();
    let kept_tags: Vec<String> = kept.iter().map(|&j| c.tags[j].clone()).collect();
    let kept_scores: Vec<f64> = kept.iter().map(|&j| scores[j]).collect();
    let mut candidates: Vec<&ReducedAmbiguityClass> =
        reduced.iter().filter(|r| r.tags == kept_tags).collect();
    candidates.sort_by_key(|r| r.variant);
    let mut choice: Option<(&ReducedAmbiguityClass, f64)> = None;
    for r in candidates {
        let sim = cos(&kept_scores, &r.probs);
        if choice.is_none_or(|(_, s)| sim > s) {
            choice = Some((r, sim));
        }
    }
    choice
        .expect("some reduced class has the kept tags")
        .0
        .symbol
        .clone()
}

/// Expected second-transducer output for reduced class `r` before `right`
/// (None = sentence end).
pub fn expected_t2(r: &ReducedAmbiguityClass, right: Option<&str>, stats: &CorpusStats) -> String {
    let mut choice: Option<(&str, f64)> = None;
    for (t, pr) in r.tags.iter().zip(&r.probs) {
        let i = tid(stats, t);
        let context = match right {
            None => stats.p_tag_given_eos[i],
            Some(n) => stats.p_tag_given_next[tid(stats, n)][i],
        };
        let score = context * pr / stats.p_tag[i];
        if choice.is_none_or(|(_, s)| score > s) {
            choice = Some((t, score));
        }
    }
    choice.unwrap().0.to_string()
}

/// Compares every arc of a labeled first transducer with the oracle;
/// returns (arcs checked, mismatches).
pub fn check_t1(
    t1: &LabeledTransducer,
    classes: &ClassInventory,
    reduced: &ReducedInventory,
    stats: &CorpusStats,
    tau: f64,
) -> (usize, Vec<String>) {
    let fst = &t1.fst;
    let mut checked = 0;
    let mut bad = Vec::new();
    for (state, label) in t1.labels.iter().enumerate() {
        let left = match label {
            StateLabel::Initial => None,
            StateLabel::Reduced(sym) => {
                Some(reduced.get(sym).expect("label names a reduced class"))
            }
            StateLabel::Tag(_) => panic!("tag label in T1"),
        };
        for c in classes.iter() {
            let input = fst.input_id(&c.symbol).expect("every class is an input");
            let want = expected_t1(c, left, stats, reduced, tau);
            checked += 1;
            match fst.arc(state as u32, input) {
                Some((out, dst))
                    if fst.output_alphabet()[out as usize] == want
                        && t1.labels[dst as usize] == StateLabel::Reduced(want.clone()) => {}
                got => bad.push(format!(
                    "T1 state {label:?} on {}: want {want}, got {got:?}",
                    c.symbol
                )),
            }
        }
    }
    (checked, bad)
}

pub fn check_t2(
    t2: &LabeledTransducer,
    reduced: &ReducedInventory,
    stats: &CorpusStats,
) -> (usize, Vec<String>) {
    let fst = &t2.fst;
    let mut checked = 0;
    let mut bad = Vec::new();
    for (state, label) in t2.labels.iter().enumerate() {
        let right = match label {
            StateLabel::Initial => None,
            StateLabel::Tag(t) => Some(t.as_str()),
            StateLabel::Reduced(_) => panic!("reduced-class label in T2"),
        };
        for (input, sym) in fst.input_alphabet().iter().enumerate() {
            let r = reduced.get(sym).expect("T2 input is a reduced class");
            let want = expected_t2(r, right, stats);
            checked += 1;
            match fst.arc(state as u32, input as u32) {
                Some((out, dst))
                    if fst.output_alphabet()[out as usize] == want
                        && t2.labels[dst as usize] == StateLabel::Tag(want.clone()) => {}
                got => bad.push(format!(
                    "T2 state {label:?} on {sym}: want {want}, got {got:?}"
                )),
            }
        }
    }
    (checked, bad)
}

/// Directory holding the converted public corpus splits.
pub fn corpus_dir() -> PathBuf {
    std::env::var_os("SEQTAG_CORPUS_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Every file of a bundle directory, sorted by name.
pub fn read_dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
