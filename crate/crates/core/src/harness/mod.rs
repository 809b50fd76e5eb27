//! Check registry, sampling orchestration, JSON report and CSV export.

mod checks;
mod export;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::brackets::{
    Bracket, FirstFull, FirstRed, RsBracket, SecondFull, SecondRed, SuthBracket,
};
use crate::error::{Error, Result};
use crate::phase::{
    sample_point, Chart, FullPoint, InvariantObservable, RedPoint, RsPoint, SuthPoint,
};

pub use checks::Defects;
pub use export::{export_trajectory, trajectory_csv, uniform_grid, write_trajectory_csv};
pub use report::{format_float, CheckReport, CheckResult};

/// Environment variable that overrides the tolerance profile.
pub const PROFILE_ENV: &str = "RS_HIERARCHY_PROFILE";

/// Tolerance profile.
///
/// `Default` runs every check at its own declared tolerance. `Strict` and
/// `Nested` force their tolerance onto every check of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Strict,
    #[default]
    Default,
    Nested,
}

impl Profile {
    pub fn tolerance(self) -> f64 {
        match self {
            Profile::Strict => 1e-10,
            Profile::Default => 1e-6,
            Profile::Nested => 1e-4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Strict => "strict",
            Profile::Default => "default",
            Profile::Nested => "nested",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(Profile::Strict),
            "default" => Ok(Profile::Default),
            "nested" => Ok(Profile::Nested),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// The profile in [`PROFILE_ENV`] if set, otherwise `requested`.
pub fn resolve_profile(requested: Profile) -> Result<Profile> {
    match std::env::var(PROFILE_ENV) {
        Ok(v) if !v.trim().is_empty() => v.parse(),
        _ => Ok(requested),
    }
}

type CheckFn = fn(&CheckSpec, u64) -> Result<Defects>;

/// A registered check.
pub struct CheckDef {
    pub id: &'static str,
    pub chart: Chart,
    /// Profile class of the check's computation path.
    pub profile: Profile,
    /// Relative tolerance the check is pinned to.
    pub tolerance: f64,
    pub summary: &'static str,
    run: CheckFn,
}

impl fmt::Debug for CheckDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CheckDef")
            .field("id", &self.id)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

macro_rules! check {
    ($id:literal, $chart:ident, $profile:ident, $tol:expr, $summary:literal, $run:path) => {
        CheckDef {
            id: $id,
            chart: Chart::$chart,
            profile: Profile::$profile,
            tolerance: $tol,
            summary: $summary,
            run: $run,
        }
    };
}

static REGISTRY: &[CheckDef] = &[
    check!(
        "a1.full.analytic",
        Full,
        Strict,
        1e-10,
        "antisymmetry and Leibniz, full brackets, analytic gradients",
        checks::a1_full_analytic
    ),
    check!(
        "a1.full.fd",
        Full,
        Default,
        1e-6,
        "antisymmetry and Leibniz, full brackets, FD gradients",
        checks::a1_full_fd
    ),
    check!(
        "a1.red.analytic",
        Red,
        Strict,
        1e-10,
        "antisymmetry and Leibniz, reduced brackets, analytic gradients",
        checks::a1_red_analytic
    ),
    check!(
        "a1.red.fd",
        Red,
        Default,
        1e-6,
        "antisymmetry and Leibniz, reduced brackets, FD gradients",
        checks::a1_red_fd
    ),
    check!(
        "a1.suth",
        Suth,
        Default,
        1e-6,
        "antisymmetry and Leibniz, Sutherland bracket",
        checks::a1_suth
    ),
    check!(
        "a2.jacobi.full",
        Full,
        Nested,
        1e-4,
        "Jacobi for both full brackets and the pencil",
        checks::a2_jacobi_full
    ),
    check!(
        "a2.jacobi.red",
        Red,
        Nested,
        1e-4,
        "Jacobi for both reduced brackets",
        checks::a2_jacobi_red
    ),
    check!(
        "a3.ladder.full",
        Full,
        Strict,
        1e-8,
        "bi-Hamiltonian ladder, full chart",
        checks::a3_ladder_full
    ),
    check!(
        "a3.ladder.red",
        Red,
        Strict,
        1e-8,
        "bi-Hamiltonian ladder, reduced chart",
        checks::a3_ladder_red
    ),
    check!(
        "a4.involution",
        Full,
        Strict,
        1e-10,
        "H_k in involution for both brackets",
        checks::a4_involution
    ),
    check!(
        "a5.reduction",
        Red,
        Default,
        1e-6,
        "reduced brackets equal full brackets on invariants",
        checks::a5_reduction
    ),
    check!(
        "a6.rs_bracket",
        Rs,
        Default,
        1e-5,
        "lambda-chart bracket equals second reduced bracket",
        checks::a6_rs_bracket
    ),
    check!(
        "a7.suth_bracket",
        Suth,
        Default,
        1e-6,
        "Sutherland bracket equals first reduced bracket",
        checks::a7_suth_bracket
    ),
    check!(
        "a8.rs",
        Rs,
        Strict,
        1e-12,
        "lambda-chart round trips and b_+ residual",
        checks::a8_rs
    ),
    check!(
        "a8.suth",
        Suth,
        Strict,
        1e-12,
        "Sutherland chart round trips",
        checks::a8_suth
    ),
    check!(
        "a9.rs",
        Rs,
        Strict,
        1e-12,
        "h_rs equals tr L",
        checks::a9_rs
    ),
    check!(
        "a9.suth",
        Suth,
        Strict,
        1e-12,
        "h_suth2 equals tr(L^2)/2",
        checks::a9_suth
    ),
    check!(
        "a10.rk4",
        Full,
        Default,
        1e-8,
        "exact flow against RK4",
        checks::a10_rk4
    ),
    check!(
        "a10.drift",
        Full,
        Strict,
        1e-10,
        "conserved quantities along trajectories",
        checks::a10_drift
    ),
    check!(
        "a10.group",
        Full,
        Strict,
        1e-12,
        "one-parameter group property of the flow",
        checks::a10_group
    ),
];

pub fn registry() -> &'static [CheckDef] {
    REGISTRY
}

pub fn lookup(id: &str) -> Result<&'static CheckDef> {
    REGISTRY
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| Error::UnknownCheck(id.to_string()))
}

/// One check to run over `seeds` consecutive seeds starting at `first_seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub id: String,
    pub chart: Chart,
    pub n: usize,
    pub seeds: u64,
    pub first_seed: u64,
    pub profile: Profile,
    pub max_m: u32,
    pub max_k: u32,
}

impl CheckSpec {
    pub fn new(id: &str, n: usize, seeds: u64, profile: Profile) -> Result<Self> {
        let def = lookup(id)?;
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        if seeds < 1 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        Ok(CheckSpec {
            id: id.to_string(),
            chart: def.chart,
            n,
            seeds,
            first_seed: 0,
            profile,
            max_m: 3,
            max_k: 3,
        })
    }

    pub fn with_family(mut self, max_m: u32, max_k: u32) -> Self {
        self.max_m = max_m;
        self.max_k = max_k;
        self
    }

    pub fn with_first_seed(mut self, first_seed: u64) -> Self {
        self.first_seed = first_seed;
        self
    }

    pub fn definition(&self) -> Result<&'static CheckDef> {
        lookup(&self.id)
    }

    /// Tolerance in effect under the spec's profile.
    pub fn tolerance(&self) -> Result<f64> {
        let def = self.definition()?;
        Ok(match self.profile {
            Profile::Default => def.tolerance,
            p => p.tolerance(),
        })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }
}

/// Suites exposed on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Theorem1,
    Theorem2,
    Prop3,
    Prop4,
    Flows,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Suite::All),
            "theorem1" => Ok(Suite::Theorem1),
            "theorem2" => Ok(Suite::Theorem2),
            "prop3" => Ok(Suite::Prop3),
            "prop4" => Ok(Suite::Prop4),
            "flows" => Ok(Suite::Flows),
            other => Err(Error::Config(format!("unknown suite `{other}`"))),
        }
    }
}

impl Suite {
    pub fn check_ids(self) -> Vec<&'static str> {
        match self {
            Suite::Theorem1 => {
                vec![
                    "a1.full.analytic",
                    "a1.full.fd",
                    "a2.jacobi.full",
                    "a3.ladder.full",
                    "a4.involution",
                ]
            }
            Suite::Theorem2 => vec![
                "a1.red.analytic",
                "a1.red.fd",
                "a2.jacobi.red",
                "a3.ladder.red",
                "a5.reduction",
            ],
            Suite::Prop3 => vec!["a6.rs_bracket", "a8.rs", "a9.rs"],
            Suite::Prop4 => vec!["a1.suth", "a7.suth_bracket", "a8.suth", "a9.suth"],
            Suite::Flows => vec!["a10.rk4", "a10.drift", "a10.group"],
            Suite::All => REGISTRY.iter().map(|d| d.id).collect(),
        }
    }

    pub fn specs(self, n: usize, seeds: u64, profile: Profile) -> Result<Vec<CheckSpec>> {
        self.check_ids()
            .into_iter()
            .map(|id| CheckSpec::new(id, n, seeds, profile))
            .collect()
    }
}

/// Runs every `(spec, seed)` pair in parallel and aggregates worst-case
/// defects per spec. Failures of individual seeds are recorded and count as
/// an infinite defect; the remaining seeds still run.
pub fn run_checks(specs: &[CheckSpec]) -> Result<CheckReport> {
    for s in specs {
        s.definition()?;
    }
    let tasks: Vec<(usize, u64)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.seed_list().into_iter().map(move |seed| (i, seed)))
        .collect();
    let outcomes: Vec<(Result<Defects>, f64)> = tasks
        .par_iter()
        .map(|&(i, seed)| {
            let start = Instant::now();
            let spec = &specs[i];
            let out = (spec.definition().expect("validated").run)(spec, seed);
            (out, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut results: Vec<CheckResult> = specs
        .iter()
        .map(|s| {
            let def = s.definition().expect("validated");
            CheckResult {
                id: s.id.clone(),
                chart: s.chart,
                n: s.n,
                seeds: s.seed_list(),
                profile: s.profile,
                declared_profile: def.profile,
                tolerance: s.tolerance().expect("validated"),
                max_abs_defect: 0.0,
                max_rel_defect: 0.0,
                pass: false,
                wall_time_s: 0.0,
                errors: Vec::new(),
            }
        })
        .collect();
    for (&(i, seed), (out, secs)) in tasks.iter().zip(outcomes) {
        let r = &mut results[i];
        r.wall_time_s += secs;
        match out {
            Ok(d) => {
                r.max_abs_defect = r.max_abs_defect.max(d.abs);
                r.max_rel_defect = r.max_rel_defect.max(d.rel);
            }
            Err(e) => {
                r.max_abs_defect = f64::INFINITY;
                r.max_rel_defect = f64::INFINITY;
                r.errors.push(format!("seed {seed}: {e}"));
            }
        }
    }
    for r in &mut results {
        r.pass = r.max_rel_defect <= r.tolerance;
    }
    Ok(CheckReport::new(results))
}

/// Value of one bracket of two invariant observables at the point sampled
/// from `(n, seed)` on `chart`.
///
/// The `rs` chart carries only the second bracket and the `suth` chart only
/// the first; other combinations are configuration errors.
pub fn bracket_value(
    chart: Chart,
    which: u8,
    f: &InvariantObservable,
    h: &InvariantObservable,
    n: usize,
    seed: u64,
) -> Result<f64> {
    match (chart, which) {
        (Chart::Full, 1) => {
            FirstFull.eval(&f.full(), &h.full(), &sample_point::<FullPoint>(n, seed)?)
        }
        (Chart::Full, 2) => {
            SecondFull.eval(&f.full(), &h.full(), &sample_point::<FullPoint>(n, seed)?)
        }
        (Chart::Red, 1) => FirstRed.eval(&f.red(), &h.red(), &sample_point::<RedPoint>(n, seed)?),
        (Chart::Red, 2) => SecondRed.eval(&f.red(), &h.red(), &sample_point::<RedPoint>(n, seed)?),
        (Chart::Rs, 2) => {
            RsBracket::default().eval(&f.rs(), &h.rs(), &sample_point::<RsPoint>(n, seed)?)
        }
        (Chart::Suth, 1) => {
            SuthBracket.eval(&f.suth(), &h.suth(), &sample_point::<SuthPoint>(n, seed)?)
        }
        (c, w) if w == 1 || w == 2 => Err(Error::Config(format!(
            "bracket {w} is not available on the {c} chart"
        ))),
        (_, w) => Err(Error::Config(format!("bracket must be 1 or 2, got {w}"))),
    }
}

/// Parses `m,k,part`, e.g. `1,2,re`.
pub fn parse_observable(s: &str) -> Result<InvariantObservable> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [m, k, part] = parts.as_slice() else {
        return Err(Error::Config(format!(
            "observable `{s}` is not of the form m,k,part"
        )));
    };
    let m: u32 = m
        .parse()
        .map_err(|_| Error::Config(format!("bad m in `{s}`")))?;
    let k: u32 = k
        .parse()
        .map_err(|_| Error::Config(format!("bad k in `{s}`")))?;
    crate::phase::invariant_observable(m, k, part.parse()?)
}
