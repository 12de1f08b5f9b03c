//! Runs the requested checks for one configured `Θ` and assembles the report.

use std::collections::BTreeMap;
use std::time::Instant;

use mtto_core::model::LemmaCheck;
use mtto_core::mtto::{mtto_matrix, negative_control, recovery_band, verify_spatial_isomorphism_with, ShiftDomain, SymbolFit};
use mtto_core::sampling::{random_symbol, seeded};
use mtto_core::{make_inner, Error, GridChoice, InnerFunction, ModelPair, OperatorMatrix, SymbolSpec};
use serde::Serialize;

use crate::config::{CampaignConfig, Check, GridSetting, SymbolSource, Tolerances};

/// Random `f ∈ L²(E)` drawn for the projection intertwining.
pub const INTERTWINING_SAMPLES: usize = 50;
/// Seed used for random test data when the config gives none.
pub const DEFAULT_SEED: u64 = 0;

/// Command-line overrides and environment limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    /// Cap on the adaptive grid.
    pub max_grid: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            grid: None,
            seed: None,
            max_grid: mtto_core::inner::DEFAULT_GRID_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckResult {
    fn failed(e: &Error) -> Self {
        Self {
            pass: false,
            residuals: BTreeMap::new(),
            error: Some(e.into()),
            notes: Vec::new(),
        }
    }
}

/// Collects residuals and the threshold tests applied to them.
struct Builder {
    pass: bool,
    residuals: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Self {
            pass: true,
            residuals: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn below(&mut self, name: &str, value: f64, tol: f64) -> &mut Self {
        self.pass &= value < tol;
        self.record(name, value)
    }

    fn above(&mut self, name: &str, value: f64, tol: f64) -> &mut Self {
        self.pass &= value > tol;
        self.record(name, value)
    }

    fn record(&mut self, name: &str, value: f64) -> &mut Self {
        self.pass &= value.is_finite();
        self.residuals.insert(name.to_string(), round_significant(value));
        self
    }

    fn require(&mut self, ok: bool, note: impl Into<String>) -> &mut Self {
        if !ok {
            self.pass = false;
            self.notes.push(note.into());
        }
        self
    }

    fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    fn finish(&mut self) -> CheckResult {
        CheckResult {
            pass: self.pass,
            residuals: std::mem::take(&mut self.residuals),
            error: None,
            notes: std::mem::take(&mut self.notes),
        }
    }
}

/// Rounds to 12 significant digits so that reports compare textually.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub precision: &'static str,
    pub version: &'static str,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            precision: "f64",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub pass: bool,
    /// Grid actually used, absent when `Θ` could not be built.
    pub grid_size: Option<usize>,
    pub seed: u64,
    pub model_dim: Option<usize>,
    /// Keyed by check name, so emission order is sorted.
    pub checks: BTreeMap<String, CheckResult>,
    pub environment: Environment,
    pub wall_time_seconds: f64,
}

impl CampaignReport {
    /// Report JSON without the wall-time field; identical for identical inputs.
    pub fn body_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value.as_object_mut().expect("report is an object").remove("wall_time_seconds");
        value
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Matrices produced along the way, for CSV dumps.
#[derive(Debug, Clone, Default)]
pub struct Matrices {
    pub shift: Option<OperatorMatrix>,
    pub tau: Option<OperatorMatrix>,
    /// `A_Φ` for each configured symbol, `None` where it could not be formed.
    pub mttos: Vec<Option<OperatorMatrix>>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub matrices: Matrices,
}

pub fn grid_choice(config: &CampaignConfig, options: &RunOptions) -> GridChoice {
    match (options.grid, config.grid) {
        (Some(m), _) | (None, GridSetting::Fixed(m)) => GridChoice::Fixed(m),
        (None, GridSetting::Auto) => GridChoice::Auto { cap: options.max_grid },
    }
}

pub fn campaign_seed(config: &CampaignConfig, options: &RunOptions) -> u64 {
    options.seed.or(config.seed).unwrap_or(DEFAULT_SEED)
}

/// Explicit symbols, or seeded random ones. A `--seed` override replaces the
/// sampling seed too.
pub fn materialize_symbols(config: &CampaignConfig, options: &RunOptions) -> Vec<SymbolSpec> {
    match &config.symbols {
        None => Vec::new(),
        Some(SymbolSource::List(list)) => list.clone(),
        Some(SymbolSource::Random { count, band, seed }) => {
            let mut rng = seeded(options.seed.unwrap_or(*seed));
            (0..*count).map(|_| random_symbol(&mut rng, config.d, *band)).collect()
        }
    }
}

struct Context<'a> {
    tol: &'a Tolerances,
    seed: u64,
    theta: &'a InnerFunction,
    pair: &'a ModelPair,
    symbols: &'a [SymbolSpec],
}

fn check_inner(theta: &InnerFunction, tol: &Tolerances) -> CheckResult {
    let mut b = Builder::new();
    b.below("unitarity", theta.unitarity_residual(), tol.unitarity)
        .record("tail_energy", theta.tail_energy())
        .record("theta0_norm", mtto_core::linalg::op_norm(theta.theta0()))
        .note(if theta.is_pure() { "pure" } else { "not pure" });
    b.finish()
}

fn check_basis(cx: &Context) -> Result<CheckResult, Error> {
    let basis = &cx.pair.basis;
    let expected = cx.theta.expected_dim();
    let winding = cx.theta.det_winding_number();
    let mut b = Builder::new();
    b.record("dim", basis.dim() as f64)
        .below("orthonormality", basis.orthonormality_residual(), cx.tol.identity)
        .below("containment", basis.containment_residual()?, cx.tol.identity)
        .require(basis.dim() == expected, format!("basis dimension {} but expected {expected}", basis.dim()))
        .require(basis.dim() as i64 == winding, format!("basis dimension {} but det winding number {winding}", basis.dim()));
    Ok(b.finish())
}

fn check_theorem1(cx: &Context) -> Result<CheckResult, Error> {
    let r = cx.pair.theorem1()?;
    let mut b = Builder::new();
    b.below("unitarity", r.unitarity, cx.tol.identity)
        .below("range", r.range, cx.tol.identity)
        .below("roundtrip", r.roundtrip, cx.tol.identity);
    Ok(b.finish())
}

fn check_theorem2(cx: &Context) -> Result<CheckResult, Error> {
    let r = cx.pair.intertwinings(INTERTWINING_SAMPLES, cx.seed)?;
    let mut b = Builder::new();
    b.below("shift_intertwining", r.matrix, cx.tol.relation)
        .below("projection_intertwining", r.projection, cx.tol.relation);
    Ok(b.finish())
}

fn check_lemma1(cx: &Context) -> Result<CheckResult, Error> {
    let defects = &cx.pair.defects;
    if defects.lemma_dim_check == LemmaCheck::Skipped {
        return Err(Error::UnsupportedDomain);
    }
    let d = cx.theta.dim();
    let mut b = Builder::new();
    b.record("dim_d", defects.d.dim() as f64)
        .record("dim_d_star", defects.d_star.dim() as f64)
        .below("containment", defects.containment_residual, cx.tol.identity)
        .require(defects.d.dim() == d, format!("dim D = {} ≠ d = {d}", defects.d.dim()))
        .require(defects.d_star.dim() == d, format!("dim D* = {} ≠ d = {d}", defects.d_star.dim()));
    Ok(b.finish())
}

fn check_theorem4(cx: &Context) -> Result<CheckResult, Error> {
    let r = cx.pair.theorem4()?;
    let mut b = Builder::new();
    b.below("adjoint_on_d_perp", r.adjoint_on_d_perp, cx.tol.relation)
        .below("adjoint_on_d", r.adjoint_on_d, cx.tol.relation)
        .below("shift_on_d_star_perp", r.shift_on_d_star_perp, cx.tol.relation)
        .below("shift_on_d_star", r.shift_on_d_star, cx.tol.relation);
    Ok(b.finish())
}

fn check_theorem5(cx: &Context, mttos: &[Option<OperatorMatrix>]) -> Result<CheckResult, Error> {
    let basis = &cx.pair.basis;
    let domain = ShiftDomain::with_defects(basis, &cx.pair.defects)?;
    let mut worst: f64 = 0.0;
    for (symbol, a) in cx.symbols.iter().zip(mttos) {
        let a = match a {
            Some(a) => a.clone(),
            None => mtto_matrix(basis, symbol)?,
        };
        worst = worst.max(domain.residual(&a, cx.seed)?);
    }
    let mut b = Builder::new();
    b.below("max_member_residual", worst, cx.tol.relation)
        .record("symbols", cx.symbols.len() as f64);
    let fit = SymbolFit::new(basis, recovery_band(basis))?;
    match negative_control(basis, &domain, &fit, cx.seed)? {
        Some(nc) => {
            b.above("non_member_distance", nc.distance, 1e-3)
                .above("non_member_residual", nc.shift_invariance_residual, cx.tol.negative_control);
        }
        None => {
            b.note("negative control vacuous: symbols span every operator on K_theta");
        }
    }
    Ok(b.finish())
}

fn check_theorem6(cx: &Context) -> Result<CheckResult, Error> {
    let r = verify_spatial_isomorphism_with(cx.pair, cx.symbols, cx.symbols, cx.seed)?;
    let steps = cx.pair.proof_steps()?;
    let mut b = Builder::new();
    b.below("forward_shift_residual", r.forward.max_shift_residual, cx.tol.relation)
        .below("forward_recovery_residual", r.forward.max_recovery_residual, cx.tol.relation)
        .below("backward_shift_residual", r.backward.max_shift_residual, cx.tol.relation)
        .below("backward_recovery_residual", r.backward.max_recovery_residual, cx.tol.relation)
        .below("tau_adjoint_into_d_perp", steps.tau_adjoint_into_d_perp, cx.tol.relation)
        .below("shift_shift_adjoint", steps.shift_shift_adjoint, cx.tol.relation)
        .below("shift_is_multiplication", steps.shift_is_multiplication, cx.tol.relation)
        .below("z_into_d_perp", steps.z_into_d_perp, cx.tol.relation)
        .below("shift_adjoint_shift", steps.shift_adjoint_shift, cx.tol.relation)
        .record("cases", (r.forward.cases + r.backward.cases) as f64);
    Ok(b.finish())
}

fn collect_matrices(pair: &ModelPair, symbols: &[SymbolSpec]) -> Matrices {
    Matrices {
        shift: Some(pair.shift.clone()),
        tau: Some(pair.tau.clone()),
        mttos: symbols.iter().map(|s| mtto_matrix(&pair.basis, s).ok()).collect(),
    }
}

/// Runs every requested check. Library errors become per-check failures.
pub fn run_campaign(config: &CampaignConfig, options: &RunOptions) -> CampaignOutcome {
    let start = Instant::now();
    let seed = campaign_seed(config, options);
    let symbols = materialize_symbols(config, options);
    let mut checks = BTreeMap::new();
    let mut matrices = Matrices::default();
    let mut grid_size = None;
    let mut model_dim = None;

    match make_inner(&config.theta, grid_choice(config, options)) {
        Err(e) => {
            for check in &config.checks {
                checks.insert(check.name().to_string(), CheckResult::failed(&e));
            }
        }
        Ok(theta) => {
            grid_size = Some(theta.grid().size());
            if config.checks.contains(&Check::Inner) {
                checks.insert(Check::Inner.name().to_string(), check_inner(&theta, &config.tol));
            }
            let rest: Vec<Check> = config.checks.iter().copied().filter(|c| *c != Check::Inner).collect();
            if !rest.is_empty() {
                match ModelPair::new(&theta) {
                    Err(e) => {
                        for check in rest {
                            checks.insert(check.name().to_string(), CheckResult::failed(&e));
                        }
                    }
                    Ok(pair) => {
                        model_dim = Some(pair.basis.dim());
                        matrices = collect_matrices(&pair, &symbols);
                        let cx = Context {
                            tol: &config.tol,
                            seed,
                            theta: &theta,
                            pair: &pair,
                            symbols: &symbols,
                        };
                        for check in rest {
                            let result = match check {
                                Check::Inner => unreachable!("handled above"),
                                Check::Basis => check_basis(&cx),
                                Check::Theorem1 => check_theorem1(&cx),
                                Check::Theorem2 => check_theorem2(&cx),
                                Check::Lemma1 => check_lemma1(&cx),
                                Check::Theorem4 => check_theorem4(&cx),
                                Check::Theorem5 => check_theorem5(&cx, &matrices.mttos),
                                Check::Theorem6 => check_theorem6(&cx),
                            };
                            checks.insert(check.name().to_string(), result.unwrap_or_else(|e| CheckResult::failed(&e)));
                        }
                    }
                }
            }
        }
    }

    let pass = checks.values().all(|c| c.pass);
    CampaignOutcome {
        report: CampaignReport {
            pass,
            grid_size,
            seed,
            model_dim,
            checks,
            environment: Environment::default(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
        matrices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const Z_SQUARED: &str = r#"{"d":1,"seed":7,"theta":{"factors":[{"kind":"full_shift","k":2}]},"symbols":{"random":3,"band":2}}"#;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(1.234_567_890_123_456), 1.234_567_890_12);
        assert_eq!(round_significant(-9.876_543_210_987_6e-15), -9.876_543_210_99e-15);
        assert_eq!(round_significant(0.0), 0.0);
    }

    #[test]
    fn z_squared_passes_everything() {
        let cfg = parse_config(Z_SQUARED.as_bytes()).unwrap();
        let out = run_campaign(&cfg, &RunOptions::default());
        let names: Vec<&str> = out.report.checks.keys().map(String::as_str).collect();
        assert_eq!(names, ["basis", "inner", "lemma1", "theorem1", "theorem2", "theorem4", "theorem5", "theorem6"]);
        assert!(out.report.pass, "{}", out.report.to_json_pretty());
        assert_eq!(out.report.model_dim, Some(2));
        assert_eq!(out.matrices.mttos.len(), 3);
    }

    #[test]
    fn non_unitary_u_fails_inner() {
        let text = r#"{"d":1,"checks":["inner"],"theta":{"factors":[{"kind":"full_shift","k":1}],"u":[[[2,0]]]}}"#;
        let out = run_campaign(&parse_config(text.as_bytes()).unwrap(), &RunOptions::default());
        assert!(!out.report.pass);
        assert_eq!(out.report.checks["inner"].error.as_ref().unwrap().kind, "NotInner");
        assert_eq!(out.report.grid_size, None);
    }

    #[test]
    fn alias_violation_is_a_check_failure() {
        let text = r#"{"d":1,"grid":16,"seed":1,"checks":["theorem5"],"theta":{"factors":[{"kind":"full_shift","k":2}]},"symbols":{"random":1,"band":5}}"#;
        let out = run_campaign(&parse_config(text.as_bytes()).unwrap(), &RunOptions::default());
        assert_eq!(out.report.checks["theorem5"].error.as_ref().unwrap().kind, "AliasError");
    }

    #[test]
    fn non_pure_theta_reports_unsupported_domain() {
        let text = r#"{"d":2,"seed":1,"checks":["lemma1","theorem5"],"theta":{"factors":[{"kind":"rank1","a":[0.5,0],"v":[[1,0],[0,0]]}]},"symbols":{"random":1,"band":1}}"#;
        let out = run_campaign(&parse_config(text.as_bytes()).unwrap(), &RunOptions::default());
        for name in ["lemma1", "theorem5"] {
            assert_eq!(out.report.checks[name].error.as_ref().unwrap().kind, "UnsupportedDomain");
        }
    }

    #[test]
    fn grid_override_and_cap() {
        let cfg = parse_config(Z_SQUARED.as_bytes()).unwrap();
        let forced = RunOptions { grid: Some(64), ..RunOptions::default() };
        assert_eq!(grid_choice(&cfg, &forced), GridChoice::Fixed(64));
        let capped = RunOptions { max_grid: 512, ..RunOptions::default() };
        assert_eq!(grid_choice(&cfg, &capped), GridChoice::Auto { cap: 512 });
    }
}
