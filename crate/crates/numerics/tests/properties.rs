use auginf_numerics::rng::stream;
use auginf_numerics::tape::masked_softmax;
use auginf_numerics::{AdagradConfig, AdagradState, Checkpoint, Tape, Tensor2};
use proptest::prelude::*;
use rand::Rng;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Tensor2> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| Tensor2::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn masked_softmax_rows_sum_to_one(x in matrix(6, 6), bits in prop::collection::vec(any::<bool>(), 36)) {
        let (r, c) = x.shape();
        let mask = Tensor2::from_fn(r, c, |i, j| if bits[i * c + j] || j == i % c { 1.0 } else { 0.0 });
        let y = masked_softmax(&x, &mask).unwrap();
        for i in 0..r {
            let mut total = 0.0;
            for j in 0..c {
                if mask.get(i, j) == 0.0 {
                    prop_assert_eq!(y.get(i, j), 0.0);
                } else {
                    total += y.get(i, j);
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adagrad_accumulators_never_decrease(
        grads in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..8),
        lr in 0.0f64..0.5,
        wd in 0.0f64..0.01,
    ) {
        let cfg = AdagradConfig { learning_rate: lr, weight_decay: wd, epsilon: 1e-10 };
        let mut st = AdagradState::new(cfg, [(2, 2)]).unwrap();
        let mut p = Tensor2::filled(2, 2, 0.3);
        let mut prev = st.accumulators()[0].clone();
        for g in grads {
            let g = Tensor2::from_vec(2, 2, g).unwrap();
            st.step(&mut [&mut p], &[g]).unwrap();
            let now = st.accumulators()[0].clone();
            for (a, b) in now.as_slice().iter().zip(prev.as_slice()) {
                prop_assert!(a >= b && *a >= 0.0);
            }
            prev = now;
        }
    }

    #[test]
    fn checkpoint_round_trips(tensors in prop::collection::vec(matrix(4, 4), 0..4), key in "[a-z]{1,8}", value in ".{0,12}") {
        let ck = Checkpoint {
            meta: [(key, value)].into_iter().collect(),
            tensors: tensors.into_iter().enumerate().map(|(i, t)| (format!("t{i}"), t)).collect(),
        };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        prop_assert_eq!(Checkpoint::read_from(&mut bytes.as_slice()).unwrap(), ck);
    }
}

#[test]
fn dropout_preserves_expectation() {
    let draws = 10_000;
    let x = Tensor2::from_rows(&[[1.0, -2.0, 0.5]]);
    let mut total = Tensor2::zeros(1, 3);
    let mut rng = stream(42, &[]);
    for _ in 0..draws {
        let tape = Tape::new();
        let v = tape.constant(x.clone()).dropout(0.2, &mut rng, true).unwrap();
        total.add_assign(&v.value()).unwrap();
    }
    let mean = total.scale(1.0 / draws as f64);
    for j in 0..3 {
        let rel = (mean.get(0, j) - x.get(0, j)).abs() / x.get(0, j).abs();
        assert!(rel < 0.02, "column {j}: mean {} vs {}", mean.get(0, j), x.get(0, j));
    }
}

#[test]
fn dropout_zeroes_roughly_p_of_entries() {
    let tape = Tape::new();
    let mut rng = stream(3, &[]);
    let v = tape.constant(Tensor2::filled(100, 100, 1.0)).dropout(0.2, &mut rng, true).unwrap();
    let zeros = v.value().as_slice().iter().filter(|&&z| z == 0.0).count();
    assert!((1800..2200).contains(&zeros), "{zeros}");
    assert!(v.value().as_slice().iter().all(|&z| z == 0.0 || (z - 1.25).abs() < 1e-15));
}

#[test]
fn streams_are_reproducible_for_normals() {
    let a: Vec<f64> =
        (0..5).map(|_| 0.0).scan(stream(1, &[2, 3]), |r, _| Some(r.sample(rand_distr::StandardNormal))).collect();
    let b: Vec<f64> =
        (0..5).map(|_| 0.0).scan(stream(1, &[2, 3]), |r, _| Some(r.sample(rand_distr::StandardNormal))).collect();
    assert_eq!(a, b);
}
