use std::collections::BTreeSet;
use std::sync::OnceLock;

use morphbpe::align::{boundary_f1, phi};
use morphbpe::bpe::io::{merges_to_string, model_from_strings, vocab_to_string};
use morphbpe::gold::{GoldFormat, GoldLexicon};
use morphbpe::normalize::normalize;
use morphbpe::sampling::{sample_distribution_partitioned, sample_distribution_with};
use morphbpe::{BoundarySet, DropoutConfig, Exec, TokenizerModel, TrainerConfig};
use proptest::prelude::*;

const TRAIN: &str = "the cat sat on the mat with another cat
cats and hats and mats are not the same as bats
unhappy rebates raise the stakes of those that hate rats
éclair café naïve straße grüße the cathedral sat on a hill";

fn model() -> &'static TokenizerModel {
    static M: OnceLock<TokenizerModel> = OnceLock::new();
    M.get_or_init(|| TrainerConfig::new(120).train(TRAIN.lines()).unwrap())
}

/// Text over the model's alphabet with mixed case and irregular whitespace.
fn text() -> impl Strategy<Value = String> {
    let alphabet: Vec<char> = model().alphabet().collect();
    let ch = prop_oneof![
        6 => proptest::sample::select(alphabet.clone()),
        1 => proptest::sample::select(alphabet).prop_map(|c| c.to_uppercase().next().unwrap()),
        1 => proptest::sample::select(vec![' ', ' ', '\t', '\n']),
    ];
    proptest::collection::vec(ch, 0..60).prop_map(|v| v.into_iter().collect())
}

fn boundary_set(len: usize) -> impl Strategy<Value = BoundarySet> {
    proptest::collection::btree_set(1..len.max(2), 0..len)
        .prop_map(move |s| BoundarySet::new(s.into_iter().filter(|&p| p < len), len).unwrap())
}

fn word_len_and_sets(n: usize) -> impl Strategy<Value = (BoundarySet, Vec<BoundarySet>)> {
    (1usize..=12).prop_flat_map(move |len| (boundary_set(len), proptest::collection::vec(boundary_set(len), 1..=n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_inverts_encode(text in text(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let m = model();
        let cfg = DropoutConfig::new(p, seed).unwrap();
        let seg = m.encode_dropout(&text, &cfg).unwrap();
        prop_assert_eq!(m.decode(&seg).unwrap(), normalize(&text));
        let det = m.encode_deterministic(&text);
        prop_assert_eq!(m.decode(&det).unwrap(), normalize(&text));
    }

    #[test]
    fn degenerate_probabilities(text in text(), seed in any::<u64>()) {
        let m = model();
        let zero = m.encode_dropout(&text, &DropoutConfig::new(0.0, seed).unwrap()).unwrap();
        prop_assert_eq!(&zero, &m.encode_deterministic(&text));
        let one = m.encode_dropout(&text, &DropoutConfig::new(1.0, seed).unwrap()).unwrap();
        for span in &one.spans {
            prop_assert_eq!(span.len(), 1);
        }
    }

    #[test]
    fn encoded_units_are_vocabulary_tokens(text in text(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let m = model();
        let seg = m.encode_dropout(&text, &DropoutConfig::new(p, seed).unwrap()).unwrap();
        for u in &seg.units {
            prop_assert!(m.contains_token(u), "{u:?} not in vocabulary");
        }
        let ids = seg.ids(m).unwrap();
        prop_assert_eq!(m.decode_ids(&ids).unwrap(), normalize(&text));
    }

    #[test]
    fn f1_is_symmetric_and_bounded((pred, gold) in word_len_and_sets(1)) {
        let a = boundary_f1(&pred, &gold[0]);
        prop_assert_eq!(a, boundary_f1(&gold[0], &pred));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(boundary_f1(&pred, &pred), 1.0);
    }

    #[test]
    fn phi_ignores_gold_order((pred, gold) in word_len_and_sets(6), rot in 0usize..6) {
        let mut rotated = gold.clone();
        rotated.rotate_left(rot % gold.len());
        rotated.reverse();
        prop_assert_eq!(phi(&pred, &gold).unwrap(), phi(&pred, &rotated).unwrap());
    }

    #[test]
    fn phi_grows_with_more_gold_sets((pred, gold) in word_len_and_sets(6)) {
        let fewer = phi(&pred, &gold[..1]).unwrap();
        let more = phi(&pred, &gold).unwrap();
        prop_assert!(more >= fewer);
    }

    #[test]
    fn canonical_gold_roundtrips(
        rows in proptest::collection::vec(
            proptest::collection::vec("[a-zäöü]{1,4}", 1..5),
            1..20,
        )
    ) {
        let text: String = rows
            .iter()
            .map(|m| format!("{}\t{}\n", m.concat(), m.join("|")))
            .collect();
        let (lex, report) = GoldLexicon::parse(&text, GoldFormat::Canonical, "xx", "p").unwrap();
        prop_assert_eq!(report.total_rejected(), 0);
        let (again, _) = GoldLexicon::parse(&lex.to_canonical(), GoldFormat::Canonical, "xx", "p").unwrap();
        prop_assert_eq!(&again.entries, &lex.entries);
        prop_assert_eq!(again.to_canonical(), lex.to_canonical());
    }

    #[test]
    fn trained_models_serialize_exactly(
        corpus in proptest::collection::vec("[abcé]{1,6}( [abcé]{1,6}){0,5}", 1..15),
        extra in 1usize..30,
    ) {
        let alphabet: BTreeSet<char> = corpus.iter().flat_map(|l| l.chars()).filter(|c| *c != ' ').collect();
        let trainer = TrainerConfig::new(5 + alphabet.len() + extra);
        let m = trainer.train(&corpus).unwrap();
        let again = trainer.train(&corpus).unwrap();
        prop_assert_eq!(merges_to_string(&again), merges_to_string(&m));
        let back = model_from_strings(&vocab_to_string(&m), &merges_to_string(&m)).unwrap();
        prop_assert_eq!(vocab_to_string(&back), vocab_to_string(&m));
        prop_assert_eq!(merges_to_string(&back), merges_to_string(&m));
        prop_assert!(m.unit_inventory_size() <= trainer.vocab_size);
    }

    #[test]
    fn sampling_ignores_partitioning(
        word in "[a-z]{1,10}",
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
        workers in 1usize..9,
    ) {
        let m = model();
        prop_assume!(m.initial_units(&word).is_some());
        let seq = sample_distribution_with(Exec::Sequential, m, &word, p, 300, seed).unwrap();
        prop_assert_eq!(seq.counts.values().sum::<u64>(), 300);
        seq.validate(m.continuation_prefix()).unwrap();
        prop_assert_eq!(&seq, &sample_distribution_with(Exec::Parallel, m, &word, p, 300, seed).unwrap());
        prop_assert_eq!(&seq, &sample_distribution_partitioned(m, &word, p, 300, seed, workers).unwrap());
    }
}
