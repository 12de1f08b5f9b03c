//! Configuration, campaign orchestration and report/matrix emission for the
//! `mtto-lab` command-line tool.

pub mod campaign;
pub mod config;
pub mod csv_out;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use campaign::{run_campaign, CampaignOutcome, CampaignReport, CheckResult, RunOptions};
pub use config::{parse_config, CampaignConfig, Check, ParseError};

/// Environment variable capping the adaptive grid.
pub const MAX_GRID_ENV: &str = "MTTO_LAB_MAX_GRID";

/// Reads [`MAX_GRID_ENV`], falling back to the library default.
pub fn max_grid_from_env() -> anyhow::Result<usize> {
    match std::env::var(MAX_GRID_ENV) {
        Err(_) => Ok(mtto_core::inner::DEFAULT_GRID_CAP),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(m) if m >= 8 => Ok(m),
            _ => anyhow::bail!("{MAX_GRID_ENV} must be an integer ≥ 8, got {v:?}"),
        },
    }
}

/// Which matrix `dump` prints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixSelector {
    Shift,
    Tau,
    Mtto(usize),
}

impl FromStr for MatrixSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shift" => Ok(MatrixSelector::Shift),
            "tau" => Ok(MatrixSelector::Tau),
            _ => s
                .strip_prefix("mtto:")
                .and_then(|i| i.parse().ok())
                .map(MatrixSelector::Mtto)
                .ok_or_else(|| format!("expected shift, tau or mtto:<index>, got {s:?}")),
        }
    }
}

/// The selected matrix, or an explanation of why it is unavailable.
pub fn select_matrix(outcome: &CampaignOutcome, which: MatrixSelector) -> anyhow::Result<&mtto_core::CMatrix> {
    let m = &outcome.matrices;
    let found = match which {
        MatrixSelector::Shift => m.shift.as_ref(),
        MatrixSelector::Tau => m.tau.as_ref(),
        MatrixSelector::Mtto(i) => {
            anyhow::ensure!(i < m.mttos.len(), "symbol index {i} out of range ({} symbols configured)", m.mttos.len());
            m.mttos[i].as_ref()
        }
    };
    found
        .map(|op| &op.entries)
        .ok_or_else(|| anyhow::anyhow!("matrix unavailable; the model space could not be built (see `verify`)"))
}

/// Writes `report.json` and, unless `json_only`, `shift.csv`, `tau.csv` and
/// `mtto_<i>.csv`. Returns the paths written.
pub fn write_outputs(dir: &Path, outcome: &CampaignOutcome, json_only: bool) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report = dir.join("report.json");
    fs::write(&report, outcome.report.to_json_pretty() + "\n")?;
    written.push(report);
    if json_only {
        return Ok(written);
    }
    let m = &outcome.matrices;
    let named = [("shift.csv".to_string(), m.shift.as_ref()), ("tau.csv".to_string(), m.tau.as_ref())]
        .into_iter()
        .chain(m.mttos.iter().enumerate().map(|(i, a)| (format!("mtto_{i}.csv"), a.as_ref())));
    for (name, op) in named {
        if let Some(op) = op {
            let path = dir.join(name);
            csv_out::write_matrix(fs::File::create(&path)?, &op.entries)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One line per check, then the overall verdict.
pub fn summary(report: &CampaignReport) -> String {
    let mut out = String::new();
    for (name, check) in &report.checks {
        let verdict = if check.pass { "PASS" } else { "FAIL" };
        let detail = match &check.error {
            Some(e) => format!("{}: {}", e.kind, e.message),
            None => check
                .residuals
                .iter()
                .map(|(k, v)| format!("{k}={v:e}"))
                .collect::<Vec<_>>()
                .join(" "),
        };
        out.push_str(&format!("{verdict} {name:<9} {detail}\n"));
    }
    out.push_str(&format!(
        "{} grid={} seed={} time={:.3}s\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.grid_size.map_or("-".to_string(), |m| m.to_string()),
        report.seed,
        report.wall_time_seconds
    ));
    out
}
