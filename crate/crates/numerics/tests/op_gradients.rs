use std::rc::Rc;

use auginf_numerics::gradcheck::relative_error;
use auginf_numerics::rng::stream;
use auginf_numerics::{grad_check, Result, Tape, Tensor2, Var};
use rand::Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 100;

fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-1.5..1.5))
}

/// Reduces an arbitrary-shape output to a scalar through fixed random
/// weights, so every output coordinate contributes a distinct gradient.
fn weighted_sum<'t>(tape: &'t Tape, out: Var<'t>, seed: u64) -> Result<Var<'t>> {
    let (r, c) = out.shape();
    let mut rng = stream(seed, &[999]);
    let w = tape.constant(random(r, c, &mut rng));
    Ok(out.hadamard(&w)?.sum())
}

fn check_unary(name: &str, op: impl for<'t> Fn(Var<'t>) -> Result<Var<'t>>) {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[1]);
        let (r, c) = (rng.random_range(1..5), rng.random_range(1..5));
        let x = random(r, c, &mut rng);
        let report = grad_check(|t, v| weighted_sum(t, op(v[0])?, seed), &[x], STEP, TOL).unwrap();
        assert!(report.passed, "{name} seed {seed}: {report:?}");
    }
}

fn check_binary(
    name: &str,
    shapes: impl Fn(&mut dyn rand::RngCore) -> ((usize, usize), (usize, usize)),
    op: impl for<'t> Fn(Var<'t>, Var<'t>) -> Result<Var<'t>>,
) {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[2]);
        let (sa, sb) = shapes(&mut rng);
        let a = random(sa.0, sa.1, &mut rng);
        let b = random(sb.0, sb.1, &mut rng);
        let report = grad_check(|t, v| weighted_sum(t, op(v[0], v[1])?, seed), &[a, b], STEP, TOL).unwrap();
        assert!(report.passed, "{name} seed {seed}: {report:?}");
    }
}

fn same_shape(rng: &mut dyn rand::RngCore) -> ((usize, usize), (usize, usize)) {
    let r = rng.random_range(1..5);
    let c = rng.random_range(1..5);
    ((r, c), (r, c))
}

#[test]
fn matmul_gradient() {
    check_binary(
        "matmul",
        |rng| {
            let (n, k, m) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
            ((n, k), (k, m))
        },
        |a, b| a.matmul(&b),
    );
}

#[test]
fn add_sub_hadamard_gradients() {
    check_binary("add", same_shape, |a, b| a.add(&b));
    check_binary("sub", same_shape, |a, b| a.sub(&b));
    check_binary("hadamard", same_shape, |a, b| a.hadamard(&b));
}

#[test]
fn outer_sum_gradient() {
    check_binary("outer_sum", |rng| ((rng.random_range(1..5), 1), (1, rng.random_range(1..5))), |a, b| a.outer_sum(&b));
}

#[test]
fn concat_cols_gradient() {
    check_binary(
        "concat_cols",
        |rng| {
            let r = rng.random_range(1..5);
            ((r, rng.random_range(1..4)), (r, rng.random_range(1..4)))
        },
        |a, b| Var::concat_cols(&[a, b, a]),
    );
}

#[test]
fn elementwise_gradients() {
    check_unary("transpose", |x| Ok(x.transpose()));
    check_unary("scale", |x| Ok(x.scale(-2.5)));
    check_unary("offset", |x| Ok(x.offset(0.3)));
    check_unary("sigmoid", |x| Ok(x.sigmoid()));
    check_unary("relu", |x| Ok(x.relu()));
    check_unary("elu", |x| Ok(x.elu(1.0)));
    check_unary("leaky_relu", |x| Ok(x.leaky_relu(0.2)));
    check_unary("exp", |x| Ok(x.exp()));
    check_unary("clamp", |x| Ok(x.clamp(-1.0, 1.0)));
    check_unary("sum", |x| Ok(x.sum()));
    check_unary("mean", |x| Ok(x.mean()));
    check_unary("log_softmax", |x| Ok(x.log_softmax_rows()));
}

#[test]
fn slicing_gradients() {
    check_unary("slice_rows", |x| {
        let r = x.shape().0;
        x.slice_rows(r / 2, r)
    });
    check_unary("slice_cols", |x| {
        let c = x.shape().1;
        x.slice_cols(0, c.div_ceil(2))
    });
}

#[test]
fn masked_softmax_gradient() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[3]);
        let (r, c) = (rng.random_range(1..6), rng.random_range(1..6));
        let x = random(r, c, &mut rng);
        let mut mask = Tensor2::from_fn(r, c, |_, _| if rng.random_bool(0.6) { 1.0 } else { 0.0 });
        for i in 0..r {
            mask.set(i, i % c, 1.0);
        }
        let report =
            grad_check(|t, v| weighted_sum(t, v[0].row_softmax_masked(&mask)?, seed), &[x], STEP, TOL).unwrap();
        assert!(report.passed, "masked softmax seed {seed}: {report:?}");
    }
}

#[test]
fn dropout_gradient_with_fixed_mask() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[4]);
        let x = random(3, 4, &mut rng);
        let report = grad_check(
            |t, v| {
                let mut drop_rng = stream(seed, &[5]);
                weighted_sum(t, v[0].dropout(0.3, &mut drop_rng, true)?, seed)
            },
            &[x],
            STEP,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "dropout seed {seed}: {report:?}");
    }
}

#[test]
fn weighted_bce_gradient() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[6]);
        let n = rng.random_range(2..6);
        let x = random(n, n, &mut rng);
        let target = Rc::new(Tensor2::from_fn(n, n, |_, _| if rng.random_bool(0.4) { 1.0 } else { 0.0 }));
        let weights = Rc::new(Tensor2::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 + target.get(i, j) }));
        let report = grad_check(
            |_, v| v[0].weighted_bce_with_logits(Rc::clone(&target), Rc::clone(&weights), (n * n - n) as f64),
            &[x],
            STEP,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "bce seed {seed}: {report:?}");
    }
}

#[test]
fn composite_expression_gradient() {
    for seed in 0..SEEDS {
        let mut rng = stream(seed, &[7]);
        let a = random(4, 3, &mut rng);
        let w = random(3, 2, &mut rng);
        let report = grad_check(
            |t, v| {
                let h = v[0].matmul(&v[1])?.elu(1.0);
                let s = h.matmul(&h.transpose())?.sigmoid();
                weighted_sum(t, s.log_softmax_rows(), seed)
            },
            &[a, w],
            STEP,
            TOL,
        )
        .unwrap();
        assert!(report.passed, "composite seed {seed}: {report:?}");
    }
}

#[test]
fn sum_of_sigmoid_passes() {
    let mut rng = stream(11, &[]);
    let x = random(3, 3, &mut rng);
    let report = grad_check(|_, v| Ok(v[0].sigmoid().sum()), &[x], STEP, TOL).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn linear_function_matches_to_machine_precision() {
    let mut rng = stream(12, &[]);
    let x = random(3, 3, &mut rng);
    let report = grad_check(|_, v| Ok(v[0].scale(3.0).sum()), &[x], STEP, TOL).unwrap();
    assert!(report.max_rel_error < 1e-9, "{report:?}");
}

#[test]
fn corrupted_backward_rule_fails() {
    let mut rng = stream(13, &[]);
    let x = random(3, 3, &mut rng);
    let report = grad_check(
        |t, v| {
            let value = v[0].value().map(|z| z * z);
            // true derivative is 2z; this rule reports 3z
            let sq = t.custom(
                &[v[0]],
                value,
                Box::new(|g, inputs, _| vec![g.zip_map(&inputs[0], |gi, z| 3.0 * gi * z).unwrap()]),
            );
            Ok(sq.sum())
        },
        &[x],
        STEP,
        TOL,
    )
    .unwrap();
    assert!(!report.passed);
}

#[test]
fn relative_error_uses_floor_near_zero() {
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    assert!(relative_error(1e-9, 0.0) < 1e-2);
    assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-12);
}
