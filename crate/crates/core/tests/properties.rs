use proptest::prelude::*;
use tensql::kernels::{BackendKind, KernelBackend};
use tensql::ml::{predict, tensorize, ModelSpec};
use tensql::Tensor;

fn backends() -> Vec<std::sync::Arc<dyn KernelBackend>> {
    BackendKind::all().iter().map(|b| b.create()).collect()
}

fn keys() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-5i64..5, 0..300)
}

proptest! {
    #[test]
    fn compact_is_gather_of_true_positions(v in prop::collection::vec(any::<i64>(), 0..300), seed in any::<u64>()) {
        let mask: Vec<bool> = (0..v.len()).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) & 1 == 1).collect();
        let idx: Vec<i64> = (0..v.len() as i64).filter(|&i| mask[i as usize]).collect();
        for k in backends() {
            let values = Tensor::from_i64(v.clone());
            let a = k.compact(&values, &Tensor::from_bool(mask.clone())).unwrap();
            let b = k.gather(&values, &Tensor::from_i64(idx.clone())).unwrap();
            prop_assert!(a.bit_eq(&b));
        }
    }

    #[test]
    fn argsort_orders_keys_and_keeps_ties_in_input_order(k in keys()) {
        for b in backends() {
            let order = b.argsort_stable(&Tensor::from_i64(k.clone())).unwrap();
            let order = order.as_i64().unwrap();
            for w in order.windows(2) {
                let (i, j) = (w[0] as usize, w[1] as usize);
                prop_assert!(k[i] < k[j] || (k[i] == k[j] && i < j));
            }
        }
    }

    #[test]
    fn repeated_stable_argsort_is_lexicographic(pairs in prop::collection::vec((-3i64..3, -3i64..3), 0..300)) {
        let (k1, k2): (Vec<i64>, Vec<i64>) = pairs.iter().copied().unzip();
        let mut expect: Vec<usize> = (0..pairs.len()).collect();
        expect.sort_by_key(|&i| pairs[i]);
        for b in backends() {
            let by_minor = b.argsort_stable(&Tensor::from_i64(k2.clone())).unwrap();
            let major = b.gather(&Tensor::from_i64(k1.clone()), &by_minor).unwrap();
            let by_major = b.argsort_stable(&major).unwrap();
            let order = b.gather(&by_minor, &by_major).unwrap();
            let got: Vec<usize> = order.as_i64().unwrap().iter().map(|&i| i as usize).collect();
            prop_assert_eq!(&got, &expect);
        }
    }

    #[test]
    fn expand_segments_length_is_total_count(counts in prop::collection::vec(0i64..20, 0..100), base in -1000i64..1000) {
        let starts: Vec<i64> = (0..counts.len() as i64).map(|i| base + 7 * i).collect();
        let expect: Vec<i64> = starts.iter().zip(&counts).flat_map(|(&s, &c)| s..s + c).collect();
        for b in backends() {
            let got = b.expand_segments(&Tensor::from_i64(starts.clone()), &Tensor::from_i64(counts.clone())).unwrap();
            prop_assert_eq!(got.rows(), counts.iter().sum::<i64>() as usize);
            prop_assert_eq!(got.as_i64().unwrap(), expect.as_slice());
        }
    }

    #[test]
    fn linear_prediction_is_a_dot_product(
        weights in prop::collection::vec(-10.0f64..10.0, 1..5),
        bias in -10.0f64..10.0,
        flat in prop::collection::vec(-100.0f64..100.0, 0..200),
    ) {
        let f = weights.len();
        let n = flat.len() / f;
        let x = Tensor::new(flat[..n * f].to_vec(), n, f).unwrap();
        let model = tensorize(&ModelSpec::Linear { weights: weights.clone(), bias });
        for b in backends() {
            let got = predict(b, &model, &x).unwrap();
            for (r, &g) in got.as_f64().unwrap().iter().enumerate() {
                let row = &flat[r * f..(r + 1) * f];
                let e = row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() + bias;
                let scale = e.abs().max(row.iter().zip(&weights).map(|(a, w)| (a * w).abs()).sum::<f64>()).max(1.0);
                prop_assert!((g - e).abs() <= 1e-9 * scale, "row {}: {} vs {}", r, g, e);
            }
        }
    }
}
