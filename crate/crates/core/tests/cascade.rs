mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use common::{check_t1, check_t2, synthetic_corpus};
use seqtag::pipeline::Trained;
use seqtag::{train, TrainConfig};

fn trained(seed: u64, tags: usize) -> Trained {
    let corpus = synthetic_corpus(seed, 60, tags, 40);
    train(&corpus, &TrainConfig::default()).unwrap()
}

#[test]
fn t1_arcs_match_oracle() {
    for seed in 0..6 {
        let t = trained(seed, 6);
        let b = &t.bundle;
        let (n, bad) = check_t1(
            &t.t1_labeled,
            &b.classes,
            &t.clustered,
            &b.stats,
            b.metadata.config.tau,
        );
        assert!(n > 0);
        assert!(
            bad.is_empty(),
            "seed {seed}: {:#?}",
            &bad[..bad.len().min(5)]
        );
    }
}

#[test]
fn t2_arcs_match_oracle() {
    for seed in 0..6 {
        let t = trained(seed, 6);
        let (n, bad) = check_t2(&t.t2_labeled, &t.bundle.reduced, &t.bundle.stats);
        assert!(n > 0);
        assert!(
            bad.is_empty(),
            "seed {seed}: {:#?}",
            &bad[..bad.len().min(5)]
        );
    }
}

#[test]
fn t1_oracle_holds_across_thresholds() {
    let corpus = synthetic_corpus(11, 80, 5, 30);
    for tau in [0.01, 0.1, 0.5, 1.0] {
        let config = TrainConfig {
            tau,
            ..TrainConfig::default()
        };
        let t = train(&corpus, &config).unwrap();
        let (_, bad) = check_t1(
            &t.t1_labeled,
            &t.bundle.classes,
            &t.clustered,
            &t.bundle.stats,
            tau,
        );
        assert!(bad.is_empty(), "tau {tau}: {:#?}", &bad[..bad.len().min(5)]);
    }
}

#[test]
fn t2_inputs_are_exactly_t1_outputs() {
    let t = trained(3, 6);
    assert_eq!(t.bundle.t1.output_alphabet(), t.bundle.t2.input_alphabet());
    let used: std::collections::BTreeSet<u32> = t.bundle.t1.arcs().map(|(_, _, o, _)| o).collect();
    assert_eq!(used.len(), t.bundle.t1.output_alphabet().len());
}

#[test]
fn minimization_never_grows_and_is_idempotent() {
    for seed in 0..4 {
        let t = trained(seed, 6);
        assert!(t.bundle.t1.num_states() <= t.t1_labeled.fst.num_states());
        assert!(t.bundle.t2.num_states() <= t.t2_labeled.fst.num_states());
        assert_eq!(t.bundle.t1.minimize().to_bytes(), t.bundle.t1.to_bytes());
        assert_eq!(t.bundle.t2.minimize().to_bytes(), t.bundle.t2.to_bytes());
    }
}

#[test]
fn minimized_and_unminimized_bundles_agree() {
    let t = trained(5, 6);
    let min = t.bundle.tagger().unwrap();
    let raw_bundle = t.unminimized_bundle();
    let raw = raw_bundle.tagger().unwrap();
    let n_in = t.bundle.t1.input_alphabet().len() as u32;
    let mut rng = rand::rngs::StdRng::seed_from_u64(99);
    for _ in 0..500 {
        let len = rng.gen_range(0..=30);
        let seq: Vec<u32> = (0..len).map(|_| rng.gen_range(0..n_in)).collect();
        assert_eq!(
            min.tag_class_ids(&seq).unwrap(),
            raw.tag_class_ids(&seq).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tags_lie_in_the_word_class(seed in 0u64..1000, words in prop::collection::vec(0usize..60, 1..25)) {
        let t = trained(seed % 7, 5);
        let tagger = t.bundle.tagger().unwrap();
        let sentence: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
        let tags = tagger.tag_sentence(&sentence).unwrap();
        let reduced = tagger.reduced_symbols(&sentence).unwrap();
        prop_assert_eq!(tags.len(), sentence.len());
        prop_assert_eq!(reduced.len(), sentence.len());
        for ((w, tag), r) in sentence.iter().zip(&tags).zip(&reduced) {
            let class = t.bundle.classes.get(tagger.class_symbol(w)).unwrap();
            let r = t.bundle.reduced.get(r).unwrap();
            // class ⊇ reduced class ∋ tag
            prop_assert!(r.tags.iter().all(|x| class.tags.contains(x)));
            prop_assert!(r.tags.iter().any(|x| x == tag));
        }
    }

    #[test]
    fn cascade_is_deterministic_and_length_preserving(seed in 0u64..50, len in 0usize..40) {
        let t = trained(seed % 5, 4);
        let tagger = t.bundle.tagger().unwrap();
        let n = t.bundle.t1.input_alphabet().len() as u32;
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let seq: Vec<u32> = (0..len).map(|_| rng.gen_range(0..n)).collect();
        let a = tagger.tag_class_ids(&seq).unwrap();
        prop_assert_eq!(a.len(), len);
        prop_assert_eq!(a, tagger.tag_class_ids(&seq).unwrap());
    }
}
