//! Acceptance gate: one line per criterion, A1 through A10.
//!
//! Runs without the libtest harness so the lines are never captured.

use rs_hierarchy::harness::{run_checks, CheckResult, CheckSpec, Profile};

struct Criterion {
    name: &'static str,
    what: &'static str,
    ids: &'static [&'static str],
    ns: &'static [usize],
    seeds: u64,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        name: "A1",
        what: "bracket axioms (FD 1e-6, analytic 1e-10)",
        ids: &[
            "a1.full.analytic",
            "a1.full.fd",
            "a1.red.analytic",
            "a1.red.fd",
            "a1.suth",
        ],
        ns: &[2, 3, 4, 5],
        seeds: 20,
    },
    Criterion {
        name: "A2",
        what: "Jacobi and pencil compatibility (1e-4)",
        ids: &["a2.jacobi.full", "a2.jacobi.red"],
        ns: &[2, 3],
        seeds: 5,
    },
    Criterion {
        name: "A3",
        what: "bi-Hamiltonian ladder (1e-8)",
        ids: &["a3.ladder.full", "a3.ladder.red"],
        ns: &[2, 3, 4, 5],
        seeds: 20,
    },
    Criterion {
        name: "A4",
        what: "involutivity of H_k (1e-10)",
        ids: &["a4.involution"],
        ns: &[2, 3, 4, 5],
        seeds: 20,
    },
    Criterion {
        name: "A5",
        what: "reduced brackets equal full brackets (1e-6)",
        ids: &["a5.reduction"],
        ns: &[2, 3, 4, 5],
        seeds: 20,
    },
    Criterion {
        name: "A6",
        what: "lambda-chart bracket equals second reduced bracket (1e-5)",
        ids: &["a6.rs_bracket"],
        ns: &[2, 3, 4],
        seeds: 10,
    },
    Criterion {
        name: "A7",
        what: "Sutherland bracket equals first reduced bracket (1e-6)",
        ids: &["a7.suth_bracket"],
        ns: &[2, 3, 4, 5],
        seeds: 20,
    },
    Criterion {
        name: "A8",
        what: "chart round trips and b_+ residual (1e-12)",
        ids: &["a8.rs", "a8.suth"],
        ns: &[2, 3, 4, 5],
        seeds: 100,
    },
    Criterion {
        name: "A9",
        what: "model Hamiltonian identities (1e-12)",
        ids: &["a9.rs", "a9.suth"],
        ns: &[2, 3, 4, 5],
        seeds: 100,
    },
    Criterion {
        name: "A10",
        what: "flows: RK4 1e-8, drift 1e-10, group 1e-12",
        ids: &["a10.rk4", "a10.drift", "a10.group"],
        ns: &[2, 3, 4, 5],
        seeds: 10,
    },
];

fn main() {
    let mut specs = Vec::new();
    let mut owner = Vec::new();
    for (ci, c) in CRITERIA.iter().enumerate() {
        for id in c.ids {
            for &n in c.ns {
                specs.push(CheckSpec::new(id, n, c.seeds, Profile::Default).unwrap());
                owner.push(ci);
            }
        }
    }
    let report = run_checks(&specs).unwrap();

    let mut failed = Vec::new();
    for (ci, c) in CRITERIA.iter().enumerate() {
        let results: Vec<&CheckResult> = report
            .checks
            .iter()
            .zip(&owner)
            .filter(|(_, &o)| o == ci)
            .map(|(r, _)| r)
            .collect();
        let pass = results.iter().all(|r| r.pass);
        let worst = results
            .iter()
            .map(|r| r.max_rel_defect / r.tolerance)
            .fold(0.0, f64::max);
        println!(
            "{} {:<4} {} | worst defect/tolerance = {:.3e}",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            c.what,
            worst
        );
        for r in &results {
            println!("       {r}");
        }
        if !pass {
            failed.push(c.name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
