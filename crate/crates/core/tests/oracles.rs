mod common;

use proptest::prelude::*;

use threatlstm::model::{
    init_model, lstm_step, LstmClassifier, LstmParams, LstmState, ModelConfig,
};
use threatlstm::numerics::{rng_uniform, SeededRng};
use threatlstm::textprep::EncodedSequence;

fn params(rng: &mut SeededRng, hidden: usize, embed: usize, scale: f64) -> LstmParams<f64> {
    let mut m = |cols| rng_uniform::<f64>(rng, -scale, scale, hidden, cols).unwrap();
    LstmParams {
        w_i: m(hidden + embed),
        w_f: m(hidden + embed),
        w_o: m(hidden + embed),
        w_c: m(hidden + embed),
        b_i: m(1),
        b_f: m(1),
        b_o: m(1),
        b_c: m(1),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_matches_scalar_oracle(seed in any::<u64>(), hidden in 1usize..7, embed in 1usize..7, steps in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let p = params(&mut rng, hidden, embed, 1.5);
        let mut state = LstmState::zeros(hidden);
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        for _ in 0..steps {
            let x = rng_uniform::<f64>(&mut rng, -2.0, 2.0, embed, 1).unwrap();
            state = lstm_step(&p, &x, &state).unwrap().0;
            let s = common::scalar_step(&p, x.values(), &h, &c);
            h = s.h;
            c = s.c;
            prop_assert!(common::max_abs_diff(state.h.values(), &h) <= 1e-12);
            prop_assert!(common::max_abs_diff(state.c.values(), &c) <= 1e-12);
        }
    }

    #[test]
    fn classifier_matches_scalar_oracle(seed in any::<u64>(), len in 1usize..9, classes in 2usize..5) {
        let config = ModelConfig { vocab_size: 15, embed_dim: 3, hidden_dim: 4, num_classes: classes, max_len: 8, seed };
        let model: LstmClassifier<f64> = init_model(&config).unwrap();
        let mut rng = SeededRng::new(seed ^ 0xA5A5);
        let ids: Vec<u32> = (0..len.min(8)).map(|_| rng.next_below(15) as u32).collect();
        let seq = EncodedSequence { valid_len: ids.len(), ids };
        let lib = model.probabilities(&seq).unwrap();
        prop_assert!(common::max_abs_diff(&lib, &common::scalar_probs(&model, &seq)) <= 1e-12);
    }

    #[test]
    fn gradients_match_independent_differences(seed in any::<u64>(), len in 1usize..6, label in 0usize..3) {
        let config = ModelConfig { vocab_size: 8, embed_dim: 2, hidden_dim: 3, num_classes: 3, max_len: 5, seed };
        let model: LstmClassifier<f64> = init_model(&config).unwrap();
        let mut rng = SeededRng::new(seed.wrapping_add(1));
        let ids: Vec<u32> = (0..len).map(|_| 1 + rng.next_below(7) as u32).collect();
        let seq = EncodedSequence { valid_len: len, ids };
        let err = common::independent_gradient_error(&model, &seq, label, 1e-5);
        prop_assert!(err <= 1e-4, "relative error {err:e}");
    }
}
