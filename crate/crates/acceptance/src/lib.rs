//! Reporting for the acceptance suite in `tests/acceptance.rs`.

use std::io::Write;

/// Writes one PASS/FAIL line straight to stdout, bypassing the test
/// harness capture, and panics on FAIL.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "\n{line}");
    let _ = out.flush();
    assert!(pass, "{line}");
}
