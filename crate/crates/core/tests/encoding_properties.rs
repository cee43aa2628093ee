use fofe::encoding::{decode, encode, encode_batch, encode_embedded, encode_prefixes, encode_via_matrix};
use fofe::{ForgettingFactor, TokenSequence};
use ndarray::Array2;
use proptest::prelude::*;

fn seq_strategy(max_k: usize, max_len: usize) -> impl Strategy<Value = TokenSequence> {
    (1..=max_k).prop_flat_map(move |k| {
        proptest::collection::vec(0..k, 0..=max_len).prop_map(move |ids| TokenSequence::new(ids, k).unwrap())
    })
}

fn alpha_strategy() -> impl Strategy<Value = ForgettingFactor> {
    (1e-6f64..0.999).prop_map(|a| ForgettingFactor::new(a).unwrap())
}

fn closed_form(seq: &TokenSequence, alpha: f64) -> Vec<f64> {
    let t_len = seq.len() as i32;
    let mut z = vec![0.0; seq.vocab_size()];
    for (t, &w) in seq.ids().iter().enumerate() {
        z[w] += alpha.powi(t_len - 1 - t as i32);
    }
    z
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn final_code_matches_closed_form(seq in seq_strategy(50, 100), alpha in alpha_strategy()) {
        let code = encode(&seq, alpha);
        prop_assert!(max_diff(code.entries(), &closed_form(&seq, alpha.value())) <= 1e-12);
    }

    #[test]
    fn evaluation_orders_agree(seq in seq_strategy(50, 100), alpha in alpha_strategy()) {
        prop_assume!(!seq.is_empty());
        let recursive = encode_prefixes(&seq, alpha);
        let matrix = encode_via_matrix(&seq, alpha).unwrap();
        prop_assert!(recursive.max_abs_diff(&matrix) <= 1e-12);
        let other = TokenSequence::new(vec![0; 3], seq.vocab_size()).unwrap();
        let batch = encode_batch(&[other, seq.clone()], alpha).unwrap();
        prop_assert!(batch[1].max_abs_diff(&recursive) <= 1e-12);
    }

    #[test]
    fn embedded_encoding_is_linear(
        seq in seq_strategy(12, 40),
        alpha in alpha_strategy(),
        d in 1usize..6,
        salt in 0u32..1000,
    ) {
        let k = seq.vocab_size();
        let u = Array2::from_shape_fn((k, d), |(i, j)| ((i * 31 + j * 17 + salt as usize) % 23) as f64 / 7.0 - 1.5);
        let embedded = encode_embedded(&seq, alpha, u.view()).unwrap();
        let dense = encode_prefixes(&seq, alpha).to_dense();
        for (t, row) in dense.iter().enumerate() {
            for j in 0..d {
                let expected: f64 = row.iter().enumerate().map(|(i, z)| z * u[[i, j]]).sum();
                prop_assert!((embedded[[t, j]] - expected).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn entries_are_bounded(seq in seq_strategy(20, 100), alpha in alpha_strategy()) {
        // Rounding can land on the bound itself when a long run repeats one token.
        let bound = 1.0 / (1.0 - alpha.value()) * (1.0 + 1e-12);
        for row in encode_prefixes(&seq, alpha).to_dense() {
            prop_assert!(row.iter().all(|&v| (0.0..bound).contains(&v)));
        }
    }

    #[test]
    fn decode_roundtrips_in_unique_regime(seq in seq_strategy(5, 10), pick in 0usize..2) {
        let alpha = ForgettingFactor::new([0.25, 0.5][pick]).unwrap();
        let code = encode(&seq, alpha);
        let back = decode(code.entries(), alpha, 10, 1e-9).unwrap();
        prop_assert_eq!(back.ids(), seq.ids());
    }

    #[test]
    fn tiny_alpha_keeps_only_last_token(seq in seq_strategy(20, 50)) {
        prop_assume!(!seq.is_empty());
        let code = encode(&seq, ForgettingFactor::new(1e-9).unwrap());
        let mut one_hot = vec![0.0; seq.vocab_size()];
        one_hot[*seq.ids().last().unwrap()] = 1.0;
        prop_assert!(max_diff(code.entries(), &one_hot) <= 1e-8);
    }
}
