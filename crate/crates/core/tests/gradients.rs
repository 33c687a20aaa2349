use gazeconv_core::gradcheck::{conv_case, relative_error, run_suite, GradReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn finite_difference_suite() {
    let report = run_suite(&mut ChaCha8Rng::seed_from_u64(1));
    assert!(report.cases >= 100, "only {} cases", report.cases);
    assert!(
        report.passed(),
        "{:#?}",
        &report.failures[..report.failures.len().min(10)]
    );
}

#[test]
fn suite_holds_for_other_seeds() {
    for seed in 2..5 {
        let report = run_suite(&mut ChaCha8Rng::seed_from_u64(seed));
        assert!(
            report.passed(),
            "seed {seed}: {:?}",
            report.failures.first()
        );
    }
}

#[test]
fn checker_catches_a_wrong_gradient() {
    let mut report = GradReport::default();
    report.check("square", &[1.5], &[2.0], |p| p[0] * p[0]);
    assert!(!report.passed());
    let mut report = GradReport::default();
    report.check("square", &[1.5], &[3.0], |p| p[0] * p[0]);
    assert!(report.passed());
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    let mut report = GradReport::default();
    conv_case(&mut ChaCha8Rng::seed_from_u64(0), &mut report);
    assert_eq!(report.cases, 1);
}
