//! Aggregated check results and their JSON form.

use serde_json::{json, Map, Number, Value};
use std::fmt;

use crate::config::{Config, FD_CHECK_TOL, FD_OUTER_REL_STEP, FD_REL_STEP, JACOBI_TOL};
use crate::phase::Chart;

use super::Profile;

/// Outcome of one check over all of its seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: String,
    pub chart: Chart,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub profile: Profile,
    pub declared_profile: Profile,
    pub tolerance: f64,
    pub max_abs_defect: f64,
    pub max_rel_defect: f64,
    pub pass: bool,
    pub wall_time_s: f64,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
    pub config: Config,
}

/// `x` with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(
            format_float(x)
                .parse::<Number>()
                .expect("formatted float is valid JSON"),
        )
    } else {
        Value::Null
    }
}

impl CheckReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        CheckReport {
            checks,
            config: Config::default(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self, profile: Profile) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "chart": c.chart.to_string(),
                    "n": c.n,
                    "seeds": c.seeds,
                    "profile": c.profile.as_str(),
                    "declared_profile": c.declared_profile.as_str(),
                    "tolerance": num(c.tolerance),
                    "max_abs_defect": num(c.max_abs_defect),
                    "max_rel_defect": num(c.max_rel_defect),
                    "pass": c.pass,
                    "wall_time_s": num(c.wall_time_s),
                    "errors": c.errors,
                })
            })
            .collect();
        let mut config = Map::new();
        config.insert("profile".into(), json!(profile.as_str()));
        config.insert("regularity_gap".into(), num(self.config.regularity_gap));
        config.insert("pd_floor".into(), num(self.config.pd_floor));
        config.insert(
            "strict_membership".into(),
            json!(self.config.strict_membership),
        );
        config.insert("fd_rel_step".into(), num(FD_REL_STEP));
        config.insert("fd_outer_rel_step".into(), num(FD_OUTER_REL_STEP));
        config.insert("fd_check_tol".into(), num(FD_CHECK_TOL));
        config.insert("jacobi_tol".into(), num(JACOBI_TOL));
        json!({
            "library": {"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")},
            "config": Value::Object(config),
            "checks": checks,
            "all_pass": self.all_pass(),
        })
    }

    pub fn to_json_string(&self, profile: Profile) -> String {
        serde_json::to_string_pretty(&self.to_json(profile)).expect("report serializes")
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<18} n={} seeds={} rel={:.3e} tol={:.0e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.n,
            self.seeds.len(),
            self.max_rel_defect,
            self.tolerance
        )?;
        for e in &self.errors {
            write!(f, "\n    {e}")?;
        }
        Ok(())
    }
}
