//! Class-based bigram HMM with Viterbi decoding, used as the comparison
//! baseline for the transducer cascade.
//!
//! Observations are ambiguity-class symbols, so the baseline sees exactly
//! what the cascade sees.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::classes::body_lines;
use crate::corpus::{floor_normalize, TaggedCorpus};
use crate::error::{Error, Result};

const HEADER: &str = "# seqtag hmm v1";

#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    /// Canonical (sorted) tag order; ties in decoding favor earlier tags.
    tags: Vec<String>,
    classes: Vec<String>,
    class_index: HashMap<String, u32>,
    /// p(t | sentence start)
    initial: Vec<f64>,
    /// `transition[prev][next]`, where `next == tags.len()` is sentence end.
    transition: Vec<Vec<f64>>,
    /// `emission[tag][class]` = p(class | tag)
    emission: Vec<Vec<f64>>,
    floor: f64,
    log_initial: Vec<f64>,
    log_transition: Vec<f64>,
    log_emission: Vec<f64>,
}

impl HmmModel {
    fn new(
        tags: Vec<String>,
        classes: Vec<String>,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
        floor: f64,
    ) -> Result<Self> {
        let n = tags.len();
        let class_index: HashMap<String, u32> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();
        if class_index.len() != classes.len() {
            return Err(Error::Inconsistent("duplicate class in HMM".into()));
        }
        let log_initial = initial.iter().map(|p| p.ln()).collect();
        let stride = n + 1;
        let mut log_transition = vec![f64::NEG_INFINITY; n * stride];
        for (p, row) in transition.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                log_transition[p * stride + t] = v.ln();
            }
        }
        // stored by class so one observation reads a contiguous row
        let mut log_emission = vec![f64::NEG_INFINITY; classes.len() * n];
        for (t, row) in emission.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                log_emission[c * n + t] = v.ln();
            }
        }
        Ok(HmmModel {
            tags,
            classes,
            class_index,
            initial,
            transition,
            emission,
            floor,
            log_initial,
            log_transition,
            log_emission,
        })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_id(&self, symbol: &str) -> Option<u32> {
        self.class_index.get(symbol).copied()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn tag_index(&self, tag: &str) -> Result<usize> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn p_initial(&self, tag: &str) -> Result<f64> {
        Ok(self.initial[self.tag_index(tag)?])
    }

    /// p(next | prev); `next = None` is the sentence end.
    pub fn p_transition(&self, prev: &str, next: Option<&str>) -> Result<f64> {
        let p = self.tag_index(prev)?;
        let n = match next {
            Some(t) => self.tag_index(t)?,
            None => self.tags.len(),
        };
        Ok(self.transition[p][n])
    }

    /// p(class | tag)
    pub fn p_emission(&self, class: &str, tag: &str) -> Result<f64> {
        let c = self
            .class_id(class)
            .ok_or_else(|| Error::UnknownSymbol(class.to_string()))?;
        Ok(self.emission[self.tag_index(tag)?][c as usize])
    }

    /// Log score of a complete tag path; used by tests to check decoding.
    /// Terms are added in the same order the decoder adds them.
    pub fn path_log_score(&self, classes: &[u32], path: &[u32]) -> f64 {
        let n = self.tags.len();
        let stride = n + 1;
        if path.is_empty() {
            return 0.0;
        }
        let mut s = self.log_initial[path[0] as usize]
            + self.log_emission[classes[0] as usize * n + path[0] as usize];
        for i in 1..path.len() {
            s = s
                + self.log_transition[path[i - 1] as usize * stride + path[i] as usize]
                + self.log_emission[classes[i] as usize * n + path[i] as usize];
        }
        s + self.log_transition[*path.last().unwrap() as usize * stride + n]
    }

    /// Most probable tag path for class ids, in log space.
    ///
    /// On ties the backtrace keeps the earliest tag in canonical order,
    /// starting from the last position.
    pub fn viterbi_ids(&self, classes: &[u32]) -> Result<Vec<u32>> {
        let n = self.tags.len();
        let stride = n + 1;
        let len = classes.len();
        if len == 0 {
            return Ok(Vec::new());
        }
        for &c in classes {
            if c as usize >= self.classes.len() {
                return Err(Error::DanglingSymbol {
                    index: c,
                    count: self.classes.len() as u32,
                });
            }
        }
        let emit = |c: u32| &self.log_emission[c as usize * n..(c as usize + 1) * n];
        let mut delta: Vec<f64> = self
            .log_initial
            .iter()
            .zip(emit(classes[0]))
            .map(|(a, b)| a + b)
            .collect();
        let mut next = vec![0.0; n];
        let mut back = vec![0u32; len * n];
        for (i, &c) in classes.iter().enumerate().skip(1) {
            let e = emit(c);
            for t in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0u32;
                for (p, d) in delta.iter().enumerate() {
                    let s = d + self.log_transition[p * stride + t];
                    if s > best {
                        best = s;
                        arg = p as u32;
                    }
                }
                next[t] = best + e[t];
                back[i * n + t] = arg;
            }
            std::mem::swap(&mut delta, &mut next);
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0u32;
        for (t, d) in delta.iter().enumerate() {
            let s = d + self.log_transition[t * stride + n];
            if s > best {
                best = s;
                last = t as u32;
            }
        }
        let mut path = vec![0u32; len];
        path[len - 1] = last;
        for i in (1..len).rev() {
            path[i - 1] = back[i * n + path[i] as usize];
        }
        Ok(path)
    }

    pub fn viterbi<S: AsRef<str>>(&self, classes: &[S]) -> Result<Vec<String>> {
        let ids = classes
            .iter()
            .map(|c| {
                self.class_id(c.as_ref())
                    .ok_or_else(|| Error::UnknownSymbol(c.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .viterbi_ids(&ids)?
            .into_iter()
            .map(|t| self.tags[t as usize].clone())
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        let _ = writeln!(out, "floor\t{}", self.floor);
        for t in &self.tags {
            let _ = writeln!(out, "tag\t{t}");
        }
        for c in &self.classes {
            let _ = writeln!(out, "class\t{c}");
        }
        for (t, p) in self.tags.iter().zip(&self.initial) {
            let _ = writeln!(out, "initial\t{t}\t{p}");
        }
        for (prev, row) in self.tags.iter().zip(&self.transition) {
            for (next, p) in self.tags.iter().zip(row) {
                let _ = writeln!(out, "trans\t{prev}\t{next}\t{p}");
            }
            let _ = writeln!(out, "final\t{prev}\t{}", row[self.tags.len()]);
        }
        for (tag, row) in self.tags.iter().zip(&self.emission) {
            for (class, p) in self.classes.iter().zip(row) {
                let _ = writeln!(out, "emit\t{tag}\t{class}\t{p}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut floor = 0.0;
        let mut tags = Vec::new();
        let mut classes = Vec::new();
        let mut entries = Vec::new();
        for (line_no, line) in body_lines(text, HEADER)? {
            let cols: Vec<&str> = line.split('\t').collect();
            let prob = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(line_no, format!("bad probability {s:?}")))
            };
            match cols.as_slice() {
                ["floor", p] => floor = prob(p)?,
                ["tag", t] => tags.push(t.to_string()),
                ["class", c] => classes.push(c.to_string()),
                ["initial", t, p] => entries.push((line_no, 0u8, *t, "", prob(p)?)),
                ["final", t, p] => entries.push((line_no, 1, *t, "", prob(p)?)),
                ["trans", a, b, p] => entries.push((line_no, 2, *a, *b, prob(p)?)),
                ["emit", a, b, p] => entries.push((line_no, 3, *a, *b, prob(p)?)),
                _ => return Err(Error::format(line_no, "unrecognized HMM entry")),
            }
        }
        let n = tags.len();
        let tag_ix: HashMap<&str, usize> = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let class_ix: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut initial = vec![0.0; n];
        let mut transition = vec![vec![0.0; n + 1]; n];
        let mut emission = vec![vec![0.0; classes.len()]; n];
        for (line_no, kind, a, b, p) in entries {
            let tag = |s: &str| {
                tag_ix
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::format(line_no, format!("unknown tag {s}")))
            };
            match kind {
                0 => initial[tag(a)?] = p,
                1 => transition[tag(a)?][n] = p,
                2 => transition[tag(a)?][tag(b)?] = p,
                _ => {
                    let c = class_ix
                        .get(b)
                        .copied()
                        .ok_or_else(|| Error::format(line_no, format!("unknown class {b}")))?;
                    emission[tag(a)?][c] = p;
                }
            }
        }
        HmmModel::new(tags, classes, initial, transition, emission, floor)
    }
}

/// Estimates an HMM from a class-annotated corpus.
///
/// `extra` adds `(class, tag)` pseudo-observations to the emission counts;
/// the pipeline uses it to give the unknown-word class an emission profile.
pub fn train_hmm(
    corpus: &TaggedCorpus,
    floor: f64,
    extra: &[(String, String)],
) -> Result<HmmModel> {
    let tags: Vec<String> = corpus
        .tagset
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let n = tags.len();
    let tag_ix: HashMap<&str, usize> = tags
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut emission_counts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut initial = vec![0.0; n];
    let mut transition = vec![vec![0.0; n + 1]; n];
    for sentence in &corpus.sentences {
        let ids: Vec<usize> = sentence.iter().map(|t| tag_ix[t.tag.as_str()]).collect();
        initial[ids[0]] += 1.0;
        for w in ids.windows(2) {
            transition[w[0]][w[1]] += 1.0;
        }
        transition[*ids.last().expect("non-empty sentence")][n] += 1.0;
        for (tok, &t) in sentence.iter().zip(&ids) {
            let class = tok.class_sym.as_deref().ok_or_else(|| {
                Error::Inconsistent(format!("token {:?} has no class annotation", tok.word))
            })?;
            emission_counts.entry(class).or_insert_with(|| vec![0.0; n])[t] += 1.0;
        }
    }
    for (class, tag) in extra {
        let t = *tag_ix
            .get(tag.as_str())
            .ok_or_else(|| Error::UnknownTag(tag.clone()))?;
        emission_counts.entry(class).or_insert_with(|| vec![0.0; n])[t] += 1.0;
    }
    let classes: Vec<String> = emission_counts.keys().map(|c| c.to_string()).collect();
    let widest = (n + 1).max(classes.len());
    if !floor.is_finite() || floor < 0.0 || floor * widest as f64 >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "floor {floor} must lie in [0, 1/{widest})"
        )));
    }
    let emission = (0..n)
        .map(|t| {
            let row: Vec<f64> = emission_counts.values().map(|counts| counts[t]).collect();
            floor_normalize(&row, floor)
        })
        .collect();
    HmmModel::new(
        tags,
        classes,
        floor_normalize(&initial, floor),
        transition
            .iter()
            .map(|r| floor_normalize(r, floor))
            .collect(),
        emission,
        floor,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn annotated(sentences: &[&[(&str, &str, &str)]]) -> TaggedCorpus {
        let mut c = TaggedCorpus::from_sentences(
            sentences
                .iter()
                .map(|s| s.iter().map(|(w, t, _)| (*w, *t)).collect::<Vec<_>>()),
        )
        .unwrap();
        for (sent, src) in c.sentences.iter_mut().zip(sentences) {
            for (tok, (_, _, class)) in sent.iter_mut().zip(src.iter()) {
                tok.class_sym = Some(class.to_string());
            }
        }
        c
    }

    fn toy() -> TaggedCorpus {
        annotated(&[
            &[
                ("the", "D", "[D]"),
                ("dog", "N", "[N V]"),
                ("runs", "V", "[N V]"),
            ],
            &[("dogs", "N", "[N V]"), ("run", "V", "[N V]")],
            &[("the", "D", "[D]"), ("run", "N", "[N V]")],
        ])
    }

    #[test]
    fn transitions_match_hand_counts() {
        let m = train_hmm(&toy(), 0.0, &[]).unwrap();
        assert_eq!(m.tags(), ["D", "N", "V"]);
        // starts: D, N, D
        assert!((m.p_initial("D").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // N is followed by V twice and by the end once
        assert!((m.p_transition("N", Some("V")).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.p_transition("N", None).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.p_transition("D", Some("N")).unwrap(), 1.0);
        assert_eq!(m.p_emission("[N V]", "V").unwrap(), 1.0);
    }

    #[test]
    fn rows_are_normalized_and_training_is_deterministic() {
        let m = train_hmm(&toy(), 1e-4, &[]).unwrap();
        for t in m.tags() {
            let total: f64 = m
                .classes()
                .iter()
                .map(|c| m.p_emission(c, t).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-9);
            let mut trans: f64 = m
                .tags()
                .iter()
                .map(|n| m.p_transition(t, Some(n)).unwrap())
                .sum();
            trans += m.p_transition(t, None).unwrap();
            assert!((trans - 1.0).abs() < 1e-9);
        }
        assert_eq!(m, train_hmm(&toy(), 1e-4, &[]).unwrap());
    }

    #[test]
    fn singleton_classes_force_the_path() {
        let m = train_hmm(&toy(), 1e-4, &[]).unwrap();
        assert_eq!(m.viterbi(&["[D]"]).unwrap(), ["D"]);
        assert!(m.viterbi::<&str>(&[]).unwrap().is_empty());
        assert_eq!(
            m.viterbi(&["[D]", "[N V]", "[N V]"]).unwrap(),
            ["D", "N", "V"]
        );
        assert!(matches!(m.viterbi(&["[X]"]), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn extra_observations_add_a_class() {
        let extra = vec![("[N]_UNK".to_string(), "N".to_string())];
        let m = train_hmm(&toy(), 1e-4, &extra).unwrap();
        assert!(m.class_id("[N]_UNK").is_some());
        assert_eq!(m.viterbi(&["[D]", "[N]_UNK"]).unwrap(), ["D", "N"]);
    }

    #[test]
    fn text_round_trip() {
        let m = train_hmm(&toy(), 1e-4, &[]).unwrap();
        let back = HmmModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn log_scores_are_finite(seq in prop::collection::vec(0u32..2, 1..10)) {
            let m = train_hmm(&toy(), 1e-6, &[]).unwrap();
            let path = m.viterbi_ids(&seq).unwrap();
            prop_assert_eq!(path.len(), seq.len());
            prop_assert!(m.path_log_score(&seq, &path).is_finite());
        }
    }
}
