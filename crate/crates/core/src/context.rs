//! Contextual tag scores and the two decisions built on them: which reduced
//! class the first transducer emits for an ambiguity class after a given
//! left context, and which tag the second transducer emits for a reduced
//! class before a given right context.
//!
//! Every score has the form `p(t | context) * p(t | class) / p(t)`, which
//! treats the context and the class as independent given the tag. Scores
//! are never normalized; only their ratios and argmaxes are used.

use crate::classes::{cosine, AmbiguityClass, ReducedAmbiguityClass, ReducedInventory};
use crate::corpus::CorpusStats;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub enum LeftContext<'a> {
    /// Sentence start.
    Boundary,
    Reduced(&'a ReducedAmbiguityClass),
}

#[derive(Debug, Clone, Copy)]
pub enum RightContext<'a> {
    /// Sentence end.
    Boundary,
    Tag(&'a str),
}

/// Candidate tags for one position with their contextual scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    pub entries: Vec<(String, f64)>,
}

impl PairList {
    pub fn tags(&self) -> Vec<String> {
        self.entries.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn class_prob(tag: &str, tags: &[String], probs: &[f64], symbol: &str) -> Result<f64> {
    tags.iter()
        .position(|t| t == tag)
        .map(|i| probs[i])
        .ok_or_else(|| Error::TagNotInClass {
            tag: tag.to_string(),
            class: symbol.to_string(),
        })
}

/// Score of `tag` for class `c` at sentence start.
pub fn tag_prob_t1_initial(tag: &str, c: &AmbiguityClass, stats: &CorpusStats) -> Result<f64> {
    let p_class = class_prob(tag, &c.tags, &c.probs, &c.symbol)?;
    Ok(stats.p_tag_given_bos(tag)? * p_class / stats.p_tag(tag)?)
}

/// p(t | previous reduced class): the bigram probability averaged over the
/// previous class's tags, weighted by its probability vector.
pub fn tag_prob_given_reduced(
    tag: &str,
    prev: &ReducedAmbiguityClass,
    stats: &CorpusStats,
) -> Result<f64> {
    prev.tags
        .iter()
        .zip(&prev.probs)
        .map(|(prev_tag, weight)| Ok(stats.p_tag_given_prev(tag, prev_tag)? * weight))
        .sum()
}

/// Score of `tag` for class `c` after the reduced class `prev`.
pub fn tag_prob_t1_inner(
    tag: &str,
    prev: &ReducedAmbiguityClass,
    c: &AmbiguityClass,
    stats: &CorpusStats,
) -> Result<f64> {
    let p_class = class_prob(tag, &c.tags, &c.probs, &c.symbol)?;
    Ok(tag_prob_given_reduced(tag, prev, stats)? * p_class / stats.p_tag(tag)?)
}

pub fn build_pair_list(
    c: &AmbiguityClass,
    left: LeftContext<'_>,
    stats: &CorpusStats,
) -> Result<PairList> {
    let entries = c
        .tags
        .iter()
        .map(|tag| {
            let score = match left {
                LeftContext::Boundary => tag_prob_t1_initial(tag, c, stats)?,
                LeftContext::Reduced(prev) => tag_prob_t1_inner(tag, prev, c, stats)?,
            };
            Ok((tag.clone(), score))
        })
        .collect::<Result<_>>()?;
    Ok(PairList { entries })
}

/// Drops every entry whose score is below `tau` times the best score.
pub fn reduce_pair_list(pl: &PairList, tau: f64) -> Result<PairList> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio threshold {tau} must lie in (0, 1]"
        )));
    }
    let best = pl
        .entries
        .iter()
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    let entries = pl
        .entries
        .iter()
        .filter(|(_, p)| *p == best || *p / best >= tau)
        .cloned()
        .collect();
    Ok(PairList { entries })
}

/// The reduced class with the pair list's tags whose vector is closest
/// (by cosine) to the pair list's scores. Ties go to the lower variant.
pub fn select_reduced_class<'a>(
    pl: &PairList,
    inventory: &'a ReducedInventory,
) -> Result<&'a ReducedAmbiguityClass> {
    let tags = pl.tags();
    let scores = pl.scores();
    let mut best: Option<(&ReducedAmbiguityClass, f64)> = None;
    for &id in inventory.with_tags(&tags) {
        let candidate = inventory.by_id(id);
        let sim = cosine(&scores, &candidate.probs)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((candidate, sim));
        }
    }
    best.map(|(c, _)| c)
        .ok_or_else(|| Error::NoReducedClass(tags.join(" ")))
}

/// The complete first-transducer decision for one arc.
pub fn t1_decision<'a>(
    c: &AmbiguityClass,
    left: LeftContext<'_>,
    stats: &CorpusStats,
    inventory: &'a ReducedInventory,
    tau: f64,
) -> Result<&'a ReducedAmbiguityClass> {
    let pl = build_pair_list(c, left, stats)?;
    select_reduced_class(&reduce_pair_list(&pl, tau)?, inventory)
}

/// Score of `tag` for reduced class `r` at sentence end.
pub fn tag_prob_t2_final(tag: &str, r: &ReducedAmbiguityClass, stats: &CorpusStats) -> Result<f64> {
    let p_class = class_prob(tag, &r.tags, &r.probs, &r.symbol)?;
    Ok(stats.p_tag_given_eos(tag)? * p_class / stats.p_tag(tag)?)
}

/// Score of `tag` for reduced class `r` before the tag `next`.
pub fn tag_prob_t2_inner(
    tag: &str,
    r: &ReducedAmbiguityClass,
    next: &str,
    stats: &CorpusStats,
) -> Result<f64> {
    let p_class = class_prob(tag, &r.tags, &r.probs, &r.symbol)?;
    Ok(stats.p_tag_given_next(tag, next)? * p_class / stats.p_tag(tag)?)
}

/// The best tag of `r` given the right context; ties go to the first tag
/// in canonical order.
pub fn select_tag<'a>(
    r: &'a ReducedAmbiguityClass,
    right: RightContext<'_>,
    stats: &CorpusStats,
) -> Result<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for tag in &r.tags {
        let score = match right {
            RightContext::Boundary => tag_prob_t2_final(tag, r, stats)?,
            RightContext::Tag(next) => tag_prob_t2_inner(tag, r, next, stats)?,
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((tag, score));
        }
    }
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::Inconsistent(format!("reduced class {} has no tags", r.symbol)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tagset;
    use proptest::prelude::*;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Stats with every conditional equal to the unigram distribution.
    fn independent_stats(names: &[&str], unigram: &[f64]) -> CorpusStats {
        let n = names.len();
        CorpusStats {
            tagset: names.iter().collect::<Tagset>(),
            p_tag: unigram.to_vec(),
            p_tag_given_prev: vec![unigram.to_vec(); n],
            p_tag_given_next: vec![unigram.to_vec(); n],
            p_tag_given_bos: unigram.to_vec(),
            p_tag_given_eos: unigram.to_vec(),
            smoothing_floor: 0.0,
        }
    }

    fn uniform_stats(names: &[&str]) -> CorpusStats {
        let n = names.len();
        independent_stats(names, &vec![1.0 / n as f64; n])
    }

    fn reduced(t: &[&str], p: &[f64], v: u32) -> ReducedAmbiguityClass {
        ReducedAmbiguityClass::new(tags(t), p.to_vec(), v).unwrap()
    }

    fn eq4_inventory() -> ReducedInventory {
        ReducedInventory::from_classes(vec![
            reduced(&["NOUN", "VERB"], &[0.89, 0.11], 1),
            reduced(&["NOUN", "VERB"], &[0.57, 0.43], 2),
            reduced(&["NOUN", "VERB"], &[0.09, 0.91], 3),
            reduced(&["DET"], &[1.0], 1),
        ])
        .unwrap()
    }

    #[test]
    fn initial_score_cancels_under_independence() {
        let stats = independent_stats(&["NOUN", "VERB"], &[0.3, 0.7]);
        let c = AmbiguityClass::new(tags(&["NOUN", "VERB"]), vec![0.6, 0.4]).unwrap();
        assert!((tag_prob_t1_initial("NOUN", &c, &stats).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn initial_score_arithmetic() {
        let mut stats = independent_stats(&["NOUN", "VERB"], &[0.4, 0.6]);
        stats.p_tag_given_bos = vec![0.2, 0.8];
        let c = AmbiguityClass::new(tags(&["NOUN", "VERB"]), vec![0.6, 0.4]).unwrap();
        assert!((tag_prob_t1_initial("NOUN", &c, &stats).unwrap() - 0.3).abs() < 1e-12);
        let det = AmbiguityClass::new(tags(&["VERB"]), vec![1.0]).unwrap();
        assert!(tag_prob_t1_initial("VERB", &det, &stats).unwrap() > 0.0);
        assert!(matches!(
            tag_prob_t1_initial("DET", &c, &stats),
            Err(Error::TagNotInClass { .. })
        ));
    }

    fn mixture_stats() -> CorpusStats {
        // rows: previous tag; columns NOUN, VERB, T
        let mut stats = independent_stats(&["NOUN", "VERB", "T"], &[0.4, 0.3, 0.3]);
        stats.p_tag_given_prev = vec![
            vec![0.5, 0.4, 0.1],
            vec![0.2, 0.3, 0.5],
            vec![0.3, 0.3, 0.4],
        ];
        stats
    }

    #[test]
    fn reduced_context_mixture() {
        let stats = mixture_stats();
        let prev = reduced(&["NOUN", "VERB"], &[0.75, 0.25], 1);
        // 0.75 * 0.1 + 0.25 * 0.5
        assert!((tag_prob_given_reduced("T", &prev, &stats).unwrap() - 0.2).abs() < 1e-12);
        let single = reduced(&["VERB"], &[1.0], 1);
        assert_eq!(tag_prob_given_reduced("T", &single, &stats).unwrap(), 0.5);
    }

    #[test]
    fn inner_score_composes() {
        let mut stats = mixture_stats();
        stats.p_tag = vec![0.3, 0.3, 0.4];
        let prev = reduced(&["NOUN", "VERB"], &[0.75, 0.25], 1);
        let c = AmbiguityClass::new(tags(&["NOUN", "T"]), vec![0.4, 0.6]).unwrap();
        // 0.2 * 0.6 / 0.4
        assert!((tag_prob_t1_inner("T", &prev, &c, &stats).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pair_list_at_start_tracks_class_vector() {
        let stats = uniform_stats(&["ADJ", "NOUN", "VERB"]);
        let c =
            AmbiguityClass::new(tags(&["ADJ", "NOUN", "VERB"]), vec![0.29, 0.60, 0.11]).unwrap();
        let pl = build_pair_list(&c, LeftContext::Boundary, &stats).unwrap();
        assert_eq!(pl.tags(), c.tags);
        for (s, p) in pl.scores().iter().zip(&c.probs) {
            assert!((s - p).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_threshold_filters() {
        let pl = PairList {
            entries: vec![("A".into(), 0.5), ("B".into(), 0.04), ("C".into(), 0.46)],
        };
        assert_eq!(
            reduce_pair_list(&pl, 0.1).unwrap().tags(),
            tags(&["A", "C"])
        );
        assert_eq!(reduce_pair_list(&pl, 1.0).unwrap().tags(), tags(&["A"]));
        assert_eq!(reduce_pair_list(&pl, 1e-9).unwrap(), pl);
        let tie = PairList {
            entries: vec![("A".into(), 0.5), ("B".into(), 0.5)],
        };
        assert_eq!(reduce_pair_list(&tie, 1.0).unwrap().len(), 2);
        assert!(reduce_pair_list(&pl, 0.0).is_err());
    }

    #[test]
    fn selects_most_similar_variant() {
        let inv = eq4_inventory();
        let pl = |a: f64, b: f64| PairList {
            entries: vec![("NOUN".into(), a), ("VERB".into(), b)],
        };
        assert_eq!(
            select_reduced_class(&pl(0.9, 0.1), &inv).unwrap().symbol,
            "[NOUN VERB]_R_1"
        );
        assert_eq!(
            select_reduced_class(&pl(0.09, 0.91), &inv).unwrap().symbol,
            "[NOUN VERB]_R_3"
        );
        let det = PairList {
            entries: vec![("DET".into(), 42.0)],
        };
        assert_eq!(
            select_reduced_class(&det, &inv).unwrap().symbol,
            "[DET]_R_1"
        );
        let missing = PairList {
            entries: vec![("ADJ".into(), 1.0)],
        };
        assert!(matches!(
            select_reduced_class(&missing, &inv),
            Err(Error::NoReducedClass(_))
        ));
    }

    #[test]
    fn final_and_inner_t2_scores() {
        let mut stats = independent_stats(&["NOUN", "VERB"], &[0.8, 0.2]);
        let r = reduced(&["NOUN", "VERB"], &[0.57, 0.43], 2);
        assert!((tag_prob_t2_final("VERB", &r, &stats).unwrap() - 0.43).abs() < 1e-12);
        stats.p_tag_given_eos = vec![0.7, 0.3];
        assert!((tag_prob_t2_final("VERB", &r, &stats).unwrap() - 0.645).abs() < 1e-12);

        let mut stats = independent_stats(&["NOUN", "VERB"], &[0.2, 0.8]);
        // 40% of the tokens preceding a VERB are NOUN
        stats.p_tag_given_next[1] = vec![0.4, 0.6];
        assert!((tag_prob_t2_inner("NOUN", &r, "VERB", &stats).unwrap() - 1.14).abs() < 1e-12);
        assert!(tag_prob_t2_inner("DET", &r, "VERB", &stats).is_err());
    }

    #[test]
    fn tag_selection() {
        let stats = uniform_stats(&["NOUN", "VERB"]);
        let r3 = reduced(&["NOUN", "VERB"], &[0.09, 0.91], 3);
        assert_eq!(
            select_tag(&r3, RightContext::Boundary, &stats).unwrap(),
            "VERB"
        );
        assert_eq!(
            select_tag(&r3, RightContext::Tag("NOUN"), &stats).unwrap(),
            "VERB"
        );
        let single = reduced(&["NOUN"], &[1.0], 1);
        assert_eq!(
            select_tag(&single, RightContext::Tag("VERB"), &stats).unwrap(),
            "NOUN"
        );
        let tie = reduced(&["NOUN", "VERB"], &[0.5, 0.5], 1);
        assert_eq!(
            select_tag(&tie, RightContext::Boundary, &stats).unwrap(),
            "NOUN"
        );
    }

    proptest! {
        #[test]
        fn reduction_is_scale_invariant_and_non_empty(
            scores in prop::collection::vec(0.001f64..10.0, 1..6),
            alpha in 0.01f64..100.0,
            tau in 0.01f64..=1.0,
        ) {
            let names = ["A", "B", "C", "D", "E", "F"];
            let pl = PairList { entries: names.iter().zip(&scores).map(|(t, s)| (t.to_string(), *s)).collect() };
            let scaled = PairList { entries: pl.entries.iter().map(|(t, s)| (t.clone(), s * alpha)).collect() };
            let a = reduce_pair_list(&pl, tau).unwrap();
            let b = reduce_pair_list(&scaled, tau).unwrap();
            prop_assert!(!a.is_empty());
            // the ratio test is scale-free up to rounding at the boundary
            let margin = scores.iter().all(|s| {
                let m = scores.iter().cloned().fold(f64::MIN, f64::max);
                ((s / m) - tau).abs() > 1e-9
            });
            if margin {
                prop_assert_eq!(a.tags(), b.tags());
            }
        }

        #[test]
        fn selection_is_scale_invariant(a in 0.01f64..1.0, b in 0.01f64..1.0, alpha in 0.01f64..100.0) {
            let inv = eq4_inventory();
            let pl = PairList { entries: vec![("NOUN".into(), a), ("VERB".into(), b)] };
            let scaled = PairList { entries: vec![("NOUN".into(), a * alpha), ("VERB".into(), b * alpha)] };
            let x = select_reduced_class(&pl, &inv).unwrap();
            let y = select_reduced_class(&scaled, &inv).unwrap();
            prop_assert_eq!(&x.tags, &pl.tags());
            prop_assert_eq!(&x.symbol, &y.symbol);
        }

        #[test]
        fn selected_tag_belongs_to_class(p in 0.01f64..0.99, next in 0usize..3) {
            let stats = mixture_stats();
            let r = reduced(&["NOUN", "T"], &[p, 1.0 - p], 1);
            let right = [RightContext::Boundary, RightContext::Tag("NOUN"), RightContext::Tag("T")][next];
            let t = select_tag(&r, right, &stats).unwrap();
            prop_assert!(r.tags.iter().any(|x| x == t));
        }
    }
}
