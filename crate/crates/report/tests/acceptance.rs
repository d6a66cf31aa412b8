//! Full acceptance matrix: one line per criterion, nonzero exit on any failure.

use qwrg_report::{run_criterion, Hooks, CRITERIA};

fn main() {
    let hooks = Hooks::default();
    let mut failed = vec![];
    println!("\nrunning {} acceptance criteria", CRITERIA.len());
    for &(id, _) in CRITERIA.iter() {
        let row = run_criterion(id, &hooks);
        println!("{}", row.line());
        for d in &row.details {
            println!("       {d}");
        }
        if !row.passed {
            failed.push(id);
        }
    }
    let passed = CRITERIA.len() - failed.len();
    println!("\nacceptance: {passed} passed; {} failed\n", failed.len());
    if !failed.is_empty() {
        let ids: Vec<String> = failed.iter().map(|i| i.to_string()).collect();
        eprintln!("failing criteria: {}", ids.join(", "));
        std::process::exit(1);
    }
}
