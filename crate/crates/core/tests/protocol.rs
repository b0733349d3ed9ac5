mod common;

use common::wire::CASES;

#[test]
fn golden_suite_against_the_echo_double() {
    let failures = common::wire::run_all();
    assert!(failures.is_empty(), "{} of {} cases failed:\n{}", failures.len(), CASES.len(), failures.join("\n"));
}
