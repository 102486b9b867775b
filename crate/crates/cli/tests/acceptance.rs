//! Acceptance criteria 1–9 at their stated tolerances, one PASS/FAIL line each.
//!
//! Criterion 4 asks for first-Bianchi and pair-interchange witnesses on `hopf(2)`. The
//! metric `δ/|z|²` is Bismut-flat (its Strominger-Bismut curvature vanishes identically),
//! so no input can produce a witness there. The criterion is reported as FAIL and listed in
//! `KNOWN_UNATTAINABLE`; the same witnesses are shown on `fs_perturbed(2,0.1)` alongside.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hsb_cli::config::{ExperimentConfig, ExperimentId};
use hsb_cli::experiments::run_many;
use hsb_cli::{Case, Report};

const KNOWN_UNATTAINABLE: &[usize] = &[4];

const IDENTITY_MODELS: [&str; 6] =
    ["flat(2)", "fubini_study(1,1.0)", "fubini_study(2,1.0)", "hopf(2)", "fs_perturbed(1,0.1)", "fs_perturbed(2,0.1)"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn config(model: &str, experiment: ExperimentId) -> ExperimentConfig {
    ExperimentConfig::new(model.parse().unwrap(), experiment)
}

fn run(cfg: &ExperimentConfig) -> Report {
    hsb_cli::run(cfg).unwrap_or_else(|e| panic!("{} on {}: {e}", cfg.experiment, cfg.model))
}

fn matching(report: &Report, pred: impl Fn(&str) -> bool) -> Vec<&Case> {
    report.cases.iter().filter(|c| pred(&c.id)).collect()
}

/// All enforced cases selected by `pred` pass; at least `min` of them exist.
fn check(label: &str, report: &Report, min: usize, pred: impl Fn(&str) -> bool) -> Verdict {
    let cases: Vec<_> = matching(report, pred).into_iter().filter(|c| c.pass.is_some()).collect();
    let failed: Vec<String> = cases.iter().filter(|c| !c.passed()).map(|c| describe(c)).collect();
    let pass = cases.len() >= min && failed.is_empty();
    let detail = if cases.len() < min {
        format!("{label}: {} cases, expected at least {min}", cases.len())
    } else if failed.is_empty() {
        format!("{label}: {} cases", cases.len())
    } else {
        format!("{label}: {}", failed.join("; "))
    };
    Verdict { pass, detail }
}

fn describe(c: &Case) -> String {
    match &c.error {
        Some(e) => format!("{} error {e}", c.id),
        None => format!("{} lhs {:?} rhs {:?} tol {:?}", c.id, c.lhs, c.rhs, c.tolerance),
    }
}

fn within(label: &str, elapsed: Duration, limit: Duration) -> Verdict {
    Verdict { pass: elapsed <= limit, detail: format!("{label} {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()) }
}

fn all(verdicts: Vec<Verdict>) -> Verdict {
    Verdict {
        pass: verdicts.iter().all(|v| v.pass),
        detail: verdicts.into_iter().map(|v| v.detail).collect::<Vec<_>>().join(" | "),
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    for model in ["hopf(2)", "fs_perturbed(1,0.1)"] {
        let report = run(&config(model, ExperimentId::Thm11));
        parts.push(check(model, &report, 20, |id| id.starts_with("thm11.") && id.ends_with(".proper")));
    }
    parts.push(within("runtime", start.elapsed(), Duration::from_secs(60)));
    all(parts)
}

fn criterion_2() -> Verdict {
    let report = run(&config("hopf(2)", ExperimentId::Thm12));
    all(vec![
        check("reconciliation", &report, 20, |id| id.ends_with(".reconciliation")),
        check("boundary V=W", &report, 20, |id| id.ends_with(".boundary_vv")),
    ])
}

fn criterion_3(identities: &[(&str, Report)]) -> Verdict {
    const FAMILIES: [&str; 5] =
        ["skew_symmetry", "type_vanishing", "defining_relation", "torsion_d_omega", "connection_difference"];
    let mut parts = Vec::new();
    for (model, report) in identities {
        parts.push(check(model, report, 6, |id| FAMILIES.iter().any(|f| id.starts_with(&format!("identities.{f}")))));
        if model.starts_with("fubini_study") {
            parts.push(check(&format!("{model} Kähler"), report, 4, |id| id.starts_with("identities.kahler.")));
        }
    }
    all(parts)
}

fn witnesses(model: &str, report: &Report) -> Verdict {
    check(model, report, 2, |id| id.starts_with("identities.witness."))
}

fn criterion_4(identities: &[(&str, Report)]) -> (Verdict, Verdict) {
    let find = |m: &str| &identities.iter().find(|(model, _)| *model == m).unwrap().1;
    let mut hopf = witnesses("hopf(2)", find("hopf(2)"));
    hopf.detail.push_str(" (Bismut-flat metric, no witness exists)");
    (hopf, witnesses("fs_perturbed(2,0.1)", find("fs_perturbed(2,0.1)")))
}

fn criterion_5(identities: &[(&str, Report)]) -> Verdict {
    let mut parts = Vec::new();
    for (model, report) in identities {
        // Flat geodesics are integrated exactly, so the order there is a diagnostic.
        let min = if model.starts_with("flat") { 5 } else { 6 };
        parts.push(check(model, report, min, |id| id.starts_with("identities.geodesy.")));
    }
    all(parts)
}

fn criterion_6(identities: &[(&str, Report)]) -> Verdict {
    let find = |m: &str| &identities.iter().find(|(model, _)| *model == m).unwrap().1;
    all(vec![
        check("fubini_study(2,1.0)", find("fubini_study(2,1.0)"), 3, |id| {
            ["trace_torsion", "holomorphic_trace", "hermitian_ricci"].iter().any(|f| id == format!("identities.balanced.{f}"))
        }),
        check("hopf(2) trace torsion at (1,0)", find("hopf(2)"), 1, |id| {
            id == "identities.balanced.hopf_trace_torsion_reference"
        }),
    ])
}

fn criterion_7_and_8() -> (Verdict, Verdict) {
    let start = Instant::now();
    let comparison = [ExperimentId::Laplacian, ExperimentId::Volume];
    let flat = run_many(&config("flat(2)", ExperimentId::Laplacian), &comparison, "compare").unwrap();
    let fs = run_many(&config("fubini_study(1,1.0)", ExperimentId::Laplacian), &comparison, "compare").unwrap();
    let myers = run(&config("fubini_study(1,1.0)", ExperimentId::Myers));
    let elapsed = start.elapsed();
    let synge = run(&config("fubini_study(1,1.0)", ExperimentId::Synge));
    let c7 = all(vec![
        check("flat(2)", &flat, 2, |id| id == "laplacian.saturation" || id == "volume.identity"),
        check("fubini_study(1)", &fs, 3, |id| {
            ["laplacian.saturation", "volume.identity", "laplacian.negative_control"].contains(&id)
        }),
        check("diameter", &myers, 1, |id| id == "myers.diameter"),
        within("runtime", elapsed, Duration::from_secs(120)),
    ]);
    let c8 = all(vec![
        check("synge negative", &synge, 1, |id| id.ends_with(".negative")),
        check("myers sum", &myers, 1, |id| id.ends_with(".sum_vs_ricci")),
    ]);
    (c7, c8)
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let reports: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("suite{i}.json"));
            let status = Command::new(env!("CARGO_BIN_EXE_hsb"))
                .args(["run", "full-suite", "--model", "fubini_study(1,1.0)", "--report", path.to_str().unwrap()])
                .status()
                .expect("hsb runs");
            assert!(status.code().is_some(), "hsb terminated by a signal");
            std::fs::read(&path).unwrap()
        })
        .collect();
    Verdict {
        pass: reports[0] == reports[1],
        detail: format!("full-suite reports of {} and {} bytes", reports[0].len(), reports[1].len()),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut line = |n: usize, v: Verdict| {
        println!("criterion {n}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };
    line(1, criterion_1());
    line(2, criterion_2());
    let identities: Vec<(&str, Report)> =
        IDENTITY_MODELS.iter().map(|&m| (m, run(&config(m, ExperimentId::Identities)))).collect();
    line(3, criterion_3(&identities));
    let (hopf, substitute) = criterion_4(&identities);
    line(4, hopf);
    println!("  witnesses on a non-flat model: {} ({})", if substitute.pass { "PASS" } else { "FAIL" }, substitute.detail);
    line(5, criterion_5(&identities));
    line(6, criterion_6(&identities));
    let (c7, c8) = criterion_7_and_8();
    line(7, c7);
    line(8, c8);
    line(9, criterion_9());

    let unexpected: Vec<usize> =
        results.iter().filter(|(n, v)| !v.pass && !KNOWN_UNATTAINABLE.contains(n)).map(|(n, _)| *n).collect();
    if !substitute.pass || !unexpected.is_empty() {
        println!("acceptance: unexpected failures {unexpected:?}");
        return ExitCode::FAILURE;
    }
    println!("acceptance: all attainable criteria pass; known unattainable {KNOWN_UNATTAINABLE:?}");
    ExitCode::SUCCESS
}
