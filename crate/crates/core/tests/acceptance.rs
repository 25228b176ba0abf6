//! One line per acceptance criterion; exits non-zero if any criterion fails.
//! The seed defaults to 42 and can be overridden with `MEHLER_ACCEPTANCE_SEED`.

use std::process::ExitCode;
use std::time::Instant;

use mehler_core::verify::{run_suite, SuiteName, VerificationReport};

const DEFAULT_SEED: u64 = 42;

struct Criterion {
    number: u32,
    suite: SuiteName,
    title: &'static str,
    budget_seconds: Option<f64>,
}

const CRITERIA: [Criterion; 9] = [
    Criterion { number: 1, suite: SuiteName::Riccati, title: "Riccati closed form and RK4 propagation", budget_seconds: Some(5.0) },
    Criterion { number: 2, suite: SuiteName::Heat, title: "heat equation residual of the full kernel", budget_seconds: Some(10.0) },
    Criterion { number: 3, suite: SuiteName::Geodesic, title: "geodesics, energy, action and shooting oracle", budget_seconds: Some(10.0) },
    Criterion { number: 4, suite: SuiteName::Lemma, title: "gradient, Laplacian and transport identities", budget_seconds: Some(5.0) },
    Criterion { number: 5, suite: SuiteName::Fourier, title: "Fourier transform and normalization", budget_seconds: Some(10.0) },
    Criterion { number: 6, suite: SuiteName::Delta, title: "delta limit", budget_seconds: Some(10.0) },
    Criterion { number: 7, suite: SuiteName::Specialization, title: "Gaussian, diagonal, Mehler and OU specializations", budget_seconds: Some(10.0) },
    Criterion { number: 8, suite: SuiteName::TwoPath, title: "ansatz assembly equals direct kernel", budget_seconds: Some(2.0) },
    Criterion { number: 9, suite: SuiteName::Singular, title: "singular times and shooting conditioning", budget_seconds: None },
];

fn describe(report: &VerificationReport) -> String {
    let s = &report.summary;
    let mut text = format!("{} samples, {} failing, max rel {:.3e}", s.count, s.failures, s.max);
    let labels = report.failing_labels();
    if !labels.is_empty() {
        text.push_str(&format!(", failing: {}", labels.join("; ")));
    }
    text
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let seed = match std::env::var("MEHLER_ACCEPTANCE_SEED") {
        Ok(v) => match v.parse() {
            Ok(s) => s,
            Err(_) => {
                eprintln!("MEHLER_ACCEPTANCE_SEED must be an unsigned integer, got '{v}'");
                return ExitCode::FAILURE;
            }
        },
        Err(_) => DEFAULT_SEED,
    };
    println!("acceptance run with seed {seed}");
    let mut failed = 0;
    for c in &CRITERIA {
        let start = Instant::now();
        let result = run_suite(c.suite, seed);
        let elapsed = start.elapsed().as_secs_f64();
        let within_budget = c.budget_seconds.is_none_or(|b| elapsed <= b);
        let budget = c.budget_seconds.map_or("no budget".to_string(), |b| format!("budget {b} s"));
        let (ok, detail) = match &result {
            Ok(r) => (r.pass && within_budget, describe(r)),
            Err(e) => (false, format!("suite error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {} ({}): {}; {:.2} s, {}{}",
            if ok { "PASS" } else { "FAIL" },
            c.number,
            c.title,
            detail,
            elapsed,
            budget,
            if within_budget { "" } else { " exceeded" },
        );
        if let Ok(r) = &result {
            for s in r.failing().take(5) {
                println!("    {} at t = {}: residual {:.3e}, scale {:.3e}, tol {:.1e}", s.label, s.t, s.residual, s.scale, s.tol);
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
