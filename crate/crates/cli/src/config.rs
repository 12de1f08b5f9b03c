//! Campaign configuration: a hand-validated JSON document so that every
//! schema violation can be reported with a JSON-pointer path.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use mtto_core::inner::PotapovFactor;
use mtto_core::{InnerFunctionSpec, SymbolSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Largest fiber dimension accepted in a config.
pub const MAX_D: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Inner,
    Basis,
    Theorem1,
    Theorem2,
    Lemma1,
    Theorem4,
    Theorem5,
    Theorem6,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::Inner,
        Check::Basis,
        Check::Theorem1,
        Check::Theorem2,
        Check::Lemma1,
        Check::Theorem4,
        Check::Theorem5,
        Check::Theorem6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Inner => "inner",
            Check::Basis => "basis",
            Check::Theorem1 => "theorem1",
            Check::Theorem2 => "theorem2",
            Check::Lemma1 => "lemma1",
            Check::Theorem4 => "theorem4",
            Check::Theorem5 => "theorem5",
            Check::Theorem6 => "theorem6",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }

    fn needs_symbols(self) -> bool {
        matches!(self, Check::Theorem5 | Check::Theorem6)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum GridSetting {
    Auto,
    Fixed(usize),
}

/// Pass thresholds. Defaults match the library's own tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Grid unitarity of `Θ`.
    pub unitarity: f64,
    /// Orthonormality, containment and `T*T = I`.
    pub identity: f64,
    /// Operator identities and shift invariance of members.
    pub relation: f64,
    /// Lower bound on the shift residual of a non-member.
    pub negative_control: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: mtto_core::inner::UNITARITY_TOL,
            identity: mtto_core::tol::IDENTITY,
            relation: mtto_core::tol::RELATION,
            negative_control: mtto_core::tol::NEGATIVE_CONTROL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSource {
    List(Vec<SymbolSpec>),
    Random { count: usize, band: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub d: usize,
    pub grid: GridSetting,
    pub tol: Tolerances,
    pub theta: InnerFunctionSpec,
    pub symbols: Option<SymbolSource>,
    pub checks: BTreeSet<Check>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("ConfigError at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("SpecError: {0}")]
    Spec(mtto_core::Error),
}

impl ParseError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        let pointer = pointer.into();
        ParseError::Config {
            pointer: if pointer.is_empty() { "/".into() } else { pointer },
            message: message.into(),
        }
    }

    /// Stable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Config { .. } => "ConfigError",
            ParseError::Spec(e) => e.kind(),
        }
    }
}

type Parse<T> = Result<T, ParseError>;

/// JSON-pointer child path, with `~` and `/` escaped.
fn child(pointer: &str, key: &str) -> String {
    format!("{pointer}/{}", key.replace('~', "~0").replace('/', "~1"))
}

fn object<'a>(value: &'a Value, pointer: &str) -> Parse<&'a Map<String, Value>> {
    value.as_object().ok_or_else(|| ParseError::at(pointer, "expected an object"))
}

fn reject_unknown(map: &Map<String, Value>, pointer: &str, allowed: &[&str]) -> Parse<()> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ParseError::at(child(pointer, k), format!("unknown field; expected one of {}", allowed.join(", ")))),
        None => Ok(()),
    }
}

fn uint(value: &Value, pointer: &str) -> Parse<u64> {
    value.as_u64().ok_or_else(|| ParseError::at(pointer, "expected a non-negative integer"))
}

fn positive_number(value: &Value, pointer: &str) -> Parse<f64> {
    match value.as_f64() {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(ParseError::at(pointer, "expected a positive finite number")),
    }
}

fn typed<T: DeserializeOwned>(value: &Value, pointer: &str) -> Parse<T> {
    serde_json::from_value(value.clone()).map_err(|e| ParseError::at(pointer, e.to_string()))
}

fn parse_grid(value: Option<&Value>) -> Parse<GridSetting> {
    match value {
        None => Ok(GridSetting::Auto),
        Some(Value::String(s)) if s == "auto" => Ok(GridSetting::Auto),
        Some(v) => match v.as_u64() {
            Some(m) if m >= 8 && m.is_power_of_two() => Ok(GridSetting::Fixed(m as usize)),
            _ => Err(ParseError::at("/grid", "expected \"auto\" or a power of two ≥ 8")),
        },
    }
}

fn parse_tol(value: Option<&Value>) -> Parse<Tolerances> {
    let mut tol = Tolerances::default();
    let Some(value) = value else {
        return Ok(tol);
    };
    let map = object(value, "/tol")?;
    reject_unknown(map, "/tol", &["unitarity", "identity", "relation", "negative_control"])?;
    for (key, v) in map {
        let x = positive_number(v, &child("/tol", key))?;
        match key.as_str() {
            "unitarity" => tol.unitarity = x,
            "identity" => tol.identity = x,
            "relation" => tol.relation = x,
            _ => tol.negative_control = x,
        }
    }
    Ok(tol)
}

fn parse_theta(value: Option<&Value>, d: usize) -> Parse<InnerFunctionSpec> {
    let value = value.ok_or_else(|| ParseError::at("/theta", "missing required field"))?;
    let map = object(value, "/theta")?;
    reject_unknown(map, "/theta", &["factors", "u"])?;
    let factors = map
        .get("factors")
        .ok_or_else(|| ParseError::at("/theta/factors", "missing required field"))?
        .as_array()
        .ok_or_else(|| ParseError::at("/theta/factors", "expected an array"))?;
    let factors = factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let pointer = format!("/theta/factors/{i}");
            let kind = object(f, &pointer)?.get("kind").and_then(Value::as_str);
            if !matches!(kind, Some("rank1" | "full_shift")) {
                return Err(ParseError::at(child(&pointer, "kind"), "expected \"rank1\" or \"full_shift\""));
            }
            typed::<PotapovFactor>(f, &pointer)
        })
        .collect::<Parse<Vec<_>>>()?;
    let mut spec = InnerFunctionSpec::new(d, factors);
    if let Some(u) = map.get("u") {
        #[derive(Deserialize)]
        struct Wrapped(#[serde(with = "mtto_core::serde_complex::matrix")] mtto_core::CMatrix);
        spec = spec.with_unitary(typed::<Wrapped>(u, "/theta/u")?.0);
    }
    spec.validate().map_err(ParseError::Spec)?;
    Ok(spec)
}

fn parse_symbols(value: &Value, d: usize, seed: Option<u64>) -> Parse<SymbolSource> {
    if let Some(list) = value.as_array() {
        let symbols = list
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let pointer = format!("/symbols/{i}");
                let symbol: SymbolSpec = typed(s, &pointer)?;
                if symbol.d() != d {
                    return Err(ParseError::at(child(&pointer, "d"), format!("symbol dimension {} differs from d = {d}", symbol.d())));
                }
                Ok(symbol)
            })
            .collect::<Parse<Vec<_>>>()?;
        return Ok(SymbolSource::List(symbols));
    }
    let map = value
        .as_object()
        .ok_or_else(|| ParseError::at("/symbols", "expected a list of symbols or {random, band, seed}"))?;
    reject_unknown(map, "/symbols", &["random", "band", "seed"])?;
    let count = uint(map.get("random").ok_or_else(|| ParseError::at("/symbols/random", "missing required field"))?, "/symbols/random")?;
    let band = uint(map.get("band").ok_or_else(|| ParseError::at("/symbols/band", "missing required field"))?, "/symbols/band")?;
    let seed = match map.get("seed") {
        Some(v) => uint(v, "/symbols/seed")?,
        None => seed.ok_or_else(|| ParseError::at("/symbols/seed", "random sampling requires a seed (here or at /seed)"))?,
    };
    Ok(SymbolSource::Random {
        count: count as usize,
        band: band as usize,
        seed,
    })
}

/// Without an explicit list, every check runs except those needing symbols
/// when none are configured.
fn parse_checks(value: Option<&Value>, have_symbols: bool) -> Parse<BTreeSet<Check>> {
    let Some(value) = value else {
        return Ok(Check::ALL.into_iter().filter(|c| have_symbols || !c.needs_symbols()).collect());
    };
    let list = value.as_array().ok_or_else(|| ParseError::at("/checks", "expected an array of check names"))?;
    let mut checks = BTreeSet::new();
    for (i, v) in list.iter().enumerate() {
        let pointer = format!("/checks/{i}");
        let check = v.as_str().and_then(Check::from_name).ok_or_else(|| {
            let names: Vec<_> = Check::ALL.iter().map(|c| c.name()).collect();
            ParseError::at(&pointer, format!("expected one of {}", names.join(", ")))
        })?;
        if !checks.insert(check) {
            return Err(ParseError::at(pointer, format!("duplicate check {check}")));
        }
    }
    if checks.is_empty() {
        return Err(ParseError::at("/checks", "at least one check is required"));
    }
    Ok(checks)
}

/// Parses and validates a campaign config.
pub fn parse_config(text: &[u8]) -> Result<CampaignConfig, ParseError> {
    let text = std::str::from_utf8(text).map_err(|e| ParseError::at("", format!("config is not UTF-8: {e}")))?;
    let root: Value = serde_json::from_str(text).map_err(|e| ParseError::at("", format!("invalid JSON: {e}")))?;
    let map = object(&root, "")?;
    reject_unknown(map, "", &["d", "grid", "tol", "theta", "symbols", "checks", "output", "seed"])?;

    let d = uint(map.get("d").ok_or_else(|| ParseError::at("/d", "missing required field"))?, "/d")? as usize;
    if d == 0 || d > MAX_D {
        return Err(ParseError::at("/d", format!("expected 1 ≤ d ≤ {MAX_D}")));
    }
    let seed = map.get("seed").map(|v| uint(v, "/seed")).transpose()?;
    let grid = parse_grid(map.get("grid"))?;
    let tol = parse_tol(map.get("tol"))?;
    let theta = parse_theta(map.get("theta"), d)?;
    let symbols = map.get("symbols").map(|v| parse_symbols(v, d, seed)).transpose()?;
    let checks = parse_checks(map.get("checks"), symbols.is_some())?;
    if let Some(check) = checks.iter().find(|c| c.needs_symbols()) {
        if symbols.is_none() {
            return Err(ParseError::at("/symbols", format!("check {check} requires symbols")));
        }
    }
    let output = match map.get("output") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(ParseError::at("/output", "expected a directory path string")),
    };
    Ok(CampaignConfig {
        d,
        grid,
        tol,
        theta,
        symbols,
        checks,
        output,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"d":1,"theta":{"factors":[{"kind":"full_shift","k":2}]},"checks":["theorem6"],"symbols":{"random":3,"band":2,"seed":7}}"#;

    fn pointer_of(text: &str) -> String {
        match parse_config(text.as_bytes()).unwrap_err() {
            ParseError::Config { pointer, .. } => pointer,
            other => panic!("expected ConfigError, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(cfg.d, 1);
        assert_eq!(cfg.grid, GridSetting::Auto);
        assert_eq!(cfg.tol, Tolerances::default());
        assert_eq!(cfg.checks.iter().copied().collect::<Vec<_>>(), vec![Check::Theorem6]);
        assert_eq!(cfg.symbols, Some(SymbolSource::Random { count: 3, band: 2, seed: 7 }));
        assert_eq!(cfg.theta.factors, vec![PotapovFactor::FullShift { k: 2 }]);
    }

    #[test]
    fn missing_d_is_reported_at_its_pointer() {
        assert_eq!(pointer_of(r#"{"theta":{"factors":[]}}"#), "/d");
    }

    #[test]
    fn schema_errors_carry_pointers() {
        assert_eq!(pointer_of("[1]"), "/");
        assert_eq!(pointer_of(r#"{"d":1,"bogus":0}"#), "/bogus");
        assert_eq!(pointer_of(r#"{"d":1,"grid":100}"#), "/grid");
        assert_eq!(pointer_of(r#"{"d":1,"tol":{"relation":-1}}"#), "/tol/relation");
        assert_eq!(pointer_of(r#"{"d":1,"checks":["theorem3"],"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#), "/checks/0");
        assert_eq!(pointer_of(r#"{"d":1,"checks":["inner","inner"],"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#), "/checks/1");
        assert_eq!(pointer_of(r#"{"d":1,"theta":{"factors":[{"kind":"blaschke"}]}}"#), "/theta/factors/0/kind");
        assert_eq!(pointer_of(r#"{"d":1,"theta":{"factors":[{"kind":"rank1","a":1}]}}"#), "/theta/factors/0");
        assert_eq!(pointer_of(r#"{"d":1,"checks":["theorem5"],"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#), "/symbols");
        assert_eq!(
            pointer_of(r#"{"d":1,"symbols":{"random":2,"band":1},"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#),
            "/symbols/seed"
        );
        assert_eq!(
            pointer_of(r#"{"d":2,"symbols":[{"d":1,"band":0,"coefficients":[]}],"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#),
            "/symbols/0/d"
        );
    }

    #[test]
    fn top_level_seed_serves_random_symbols() {
        let text = r#"{"d":1,"seed":11,"symbols":{"random":2,"band":1},"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#;
        let cfg = parse_config(text.as_bytes()).unwrap();
        assert_eq!(cfg.symbols, Some(SymbolSource::Random { count: 2, band: 1, seed: 11 }));
        assert_eq!(cfg.checks.len(), 8);
        let no_symbols = parse_config(br#"{"d":1,"theta":{"factors":[{"kind":"full_shift","k":1}]}}"#).unwrap();
        assert!(!no_symbols.checks.contains(&Check::Theorem5) && !no_symbols.checks.contains(&Check::Theorem6));
        assert_eq!(no_symbols.checks.len(), 6);
    }

    #[test]
    fn conditioning_guard_is_a_spec_error() {
        let text = r#"{"d":1,"theta":{"factors":[{"kind":"rank1","a":[0.99,0],"v":[[1,0]]}]}}"#;
        let err = parse_config(text.as_bytes()).unwrap_err();
        assert!(matches!(err, ParseError::Spec(mtto_core::Error::Spec(_))), "{err:?}");
        assert_eq!(err.kind(), "SpecError");
    }

    #[test]
    fn explicit_symbols_and_unitary() {
        let text = r#"{
            "d": 1, "grid": 64, "output": "out",
            "theta": {"factors": [{"kind": "rank1", "a": [0.5, 0], "v": [[1, 0]]}], "u": [[[0, 1]]]},
            "symbols": [{"d": 1, "band": 1, "coefficients": [{"k": -1, "matrix": [[[2, 0]]]}]}]
        }"#;
        let cfg = parse_config(text.as_bytes()).unwrap();
        assert_eq!(cfg.grid, GridSetting::Fixed(64));
        assert_eq!(cfg.output, Some(PathBuf::from("out")));
        assert!(cfg.theta.u.is_some());
        let Some(SymbolSource::List(list)) = cfg.symbols else { panic!() };
        assert_eq!(list[0].coefficient(-1)[(0, 0)].re, 2.0);
    }
}
