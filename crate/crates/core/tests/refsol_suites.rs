use flowbox_core::refsol::{ArgConvention, REFERENCE_IDS};
use flowbox_core::verify::run_all;

#[test]
fn every_reference_suite_passes() {
    let results = run_all("", ArgConvention::Standard, 100, 0).unwrap();
    for r in &results {
        println!("{:<24} {:<14} {:.3e} (tol {:.0e}, n={})", r.suite, r.system, r.metric, r.tolerance, r.samples);
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for id in REFERENCE_IDS {
        assert!(results.iter().any(|r| r.system == *id && r.suite == "kpde-residual"));
    }
}

#[test]
fn swapped_angle_convention_is_caught() {
    let results = run_all("rotation-c", ArgConvention::Swapped, 20, 0).unwrap();
    assert!(results.iter().any(|r| r.suite == "kpde-residual" && !r.passed));
}

#[test]
fn empty_selection_is_a_pass() {
    assert!(run_all("no-such-system", ArgConvention::Standard, 10, 0).unwrap().is_empty());
}
