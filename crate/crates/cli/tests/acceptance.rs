//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use helfrich_cli::verify::{run_criterion, CRITERIA};

fn main() {
    let mut failed = Vec::new();
    for &(id, _, _) in &CRITERIA {
        let (outcome, elapsed) = run_criterion(id);
        println!("{}", outcome.ledger_line(elapsed));
        for c in &outcome.checks {
            println!("    {} {} = {:.6e} ({})", if c.passed { "ok " } else { "BAD" }, c.name, c.value, c.bound);
        }
        for n in &outcome.notes {
            println!("    note: {n}");
        }
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
