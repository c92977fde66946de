mod support;

use support::cases::{fused_gaps, lasso_gaps, qp_gaps};

fn worst(gaps: &[f64]) -> (usize, f64) {
    gaps.iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |b, (i, g)| if g > b.1 { (i, g) } else { b })
}

#[test]
fn lasso_matches_sign_pattern_oracle() {
    let (case, gap) = worst(&lasso_gaps(100, 101));
    assert!(gap <= 1e-6, "case {case}: gap {gap}");
}

#[test]
fn fused_matches_sign_pattern_oracle() {
    let (case, gap) = worst(&fused_gaps(100, 202));
    assert!(gap <= 1e-6, "case {case}: gap {gap}");
}

#[test]
fn qp_matches_active_set_oracle() {
    let cmp = qp_gaps(100, 303);
    let (case, gap) = worst(&cmp.gaps);
    assert!(gap <= 1e-5, "case {case}: gap {gap}");
    assert!(
        cmp.binding >= 30,
        "only {} instances had a binding constraint",
        cmp.binding
    );
}
