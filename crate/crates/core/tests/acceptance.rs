//! Full verification suite as an integration gate: every criterion must
//! pass at its pinned tolerance. One line is printed per criterion; run
//! with `--nocapture` to see them.

use hylo_core::acceptance::{run_default, Suite};

#[test]
fn acceptance_suite() {
    let outcomes = run_default(Suite::All);
    assert_eq!(outcomes.len(), 13);
    let mut failed = Vec::new();
    for o in &outcomes {
        println!(
            "[{}] {:2} {:<26} ({:6.2} s)  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.seconds,
            o.detail
        );
        if !o.passed {
            failed.push(format!("#{} {}: {}", o.id, o.name, o.detail));
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
