mod common;

use common::{finite_difference_check, gradient_instance};

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..3 {
        let (mut model, ids, cands, triples) = gradient_instance(seed);
        let (worst, at) = finite_difference_check(&mut model, &ids, &cands, &triples, 1e-5);
        assert!(worst < 1e-4, "seed {seed}: relative error {worst:e} at {at}");
    }
}
