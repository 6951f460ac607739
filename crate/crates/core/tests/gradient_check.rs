mod support;

use rand::Rng;
use support::{numeric_gradient, random_matrix, random_small_model, relative_error, rng};

#[test]
fn bptt_matches_central_differences() {
    let mut rng = rng(31);
    for case in 0..20 {
        let hidden = rng.gen_range(1..=4);
        let stages = rng.gen_range(1..=2);
        let steps = rng.gen_range(1..=4);
        let model = random_small_model(&mut rng, hidden, stages, steps);
        let x = random_matrix(&mut rng, steps, stages + 3);
        let output = model.forward_raw(&x).unwrap();
        let offset = rng.gen_range(0.5..2.0) * if rng.gen() { 1.0 } else { -1.0 };
        let target = output + offset;
        let analytic = model.backward(&x, target).unwrap();
        let numeric = numeric_gradient(&model, &x, target, 1e-5);
        for (i, (a, n)) in analytic.as_slice().iter().zip(&numeric).enumerate() {
            let err = relative_error(*a, *n);
            assert!(err < 1e-4, "case {case} param {i}: {a} vs {n} ({err})");
        }
    }
}

#[test]
fn gradient_sign_follows_error() {
    let mut rng = rng(32);
    let model = random_small_model(&mut rng, 3, 1, 2);
    let x = random_matrix(&mut rng, 2, 4);
    let out = model.forward_raw(&x).unwrap();
    let above = model.backward(&x, out - 1.0).unwrap();
    let below = model.backward(&x, out + 1.0).unwrap();
    for (a, b) in above.as_slice().iter().zip(below.as_slice()) {
        assert_eq!(*a, -*b);
    }
    assert_eq!(*above.as_slice().last().unwrap(), 1.0);
}
