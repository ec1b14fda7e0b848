//! Config-driven batch runner: one `<task>.csv` per task plus `report.json`.

pub mod config;
mod setup;
mod tasks;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

pub use config::{RunConfig, TaskConfig, TASK_KINDS};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn config(key: &str, msg: impl Into<String>) -> CliError {
        CliError::Config { key: key.to_string(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 1,
        }
    }

    /// Sort a core error by who is to blame; `scope` prefixes parameter names.
    pub(crate) fn from_core(e: fdcurve::Error, scope: &str) -> CliError {
        use fdcurve::Error as E;
        match e {
            E::InvalidParameter { name, reason } => CliError::config(&format!("{scope}.{name}"), reason),
            E::Dimension(m) | E::Unbounded(m) | E::Unsupported(m) => CliError::config(scope, m),
            E::Infeasible(m) | E::Divergent(m) | E::OutOfDepth(m) => CliError::Infeasible(m),
            E::Evaluation(m) => CliError::Internal(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A CSV table; reals are pre-formatted with `real`.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::Internal(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
    }
}

/// 17 significant digits, round-trippable.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub headline: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    /// (suffix, table); the empty suffix is `<task>.csv`.
    pub tables: Vec<(String, Table)>,
}

impl Outcome {
    pub fn headline(&mut self, key: &str, v: impl Serialize) {
        self.headline.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn tolerance(&mut self, key: &str, v: impl Serialize) {
        self.tolerances.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub task: String,
    pub kind: String,
    /// ok, check_failed, infeasible, config_error or error
    pub status: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub headline: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub tasks: Vec<TaskRecord>,
    pub exit_code: u8,
}

pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
}

/// Run every task in order.  Config problems found before any task starts
/// come back as `Err`; task failures are recorded and set the exit code.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Report, CliError> {
    cfg.validate()?;
    let ctx = setup::Context::build(cfg)?;
    fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", opts.out.display())))?;
    let mut records = Vec::new();
    let mut exit_code = 0u8;
    for (i, t) in cfg.tasks.iter().enumerate() {
        let seed = opts.seed.wrapping_add(i as u64);
        let start = Instant::now();
        let result = tasks::run_task(t, &ctx, seed);
        let mut rec = TaskRecord {
            task: t.name().into(),
            kind: t.kind().into(),
            status: "ok".into(),
            seed,
            files: vec![],
            headline: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            checks: vec![],
            error: None,
        };
        let code = match result {
            Ok(outcome) => {
                for (suffix, table) in &outcome.tables {
                    let file =
                        if suffix.is_empty() { format!("{}.csv", t.name()) } else { format!("{}_{suffix}.csv", t.name()) };
                    table.write(&opts.out.join(&file))?;
                    rec.files.push(file);
                }
                let failed: Vec<String> =
                    outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
                if !failed.is_empty() {
                    rec.status = "check_failed".into();
                    rec.error = Some(format!("failed checks: {}", failed.join(", ")));
                }
                rec.headline = outcome.headline;
                rec.tolerances = outcome.tolerances;
                rec.checks = outcome.checks;
                if failed.is_empty() {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                rec.status = match e {
                    CliError::Config { .. } => "config_error",
                    CliError::Infeasible(_) => "infeasible",
                    _ => "error",
                }
                .into();
                rec.error = Some(e.to_string());
                e.exit_code()
            }
        };
        eprintln!("[{}] {} {} in {:.1?}", t.kind(), t.name(), rec.status, start.elapsed());
        if let Some(msg) = &rec.error {
            eprintln!("  {msg}");
        }
        if exit_code == 0 {
            exit_code = code;
        }
        records.push(rec);
    }
    let report = Report {
        tool: "fdcurve".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: opts.seed,
        config: cfg.clone(),
        tasks: records,
        exit_code,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(opts.out.join(REPORT_FILE), text + "\n")
        .map_err(|e| CliError::Internal(format!("writing the report: {e}")))?;
    Ok(report)
}

/// Catalog listing for `--list-catalog`.
pub fn catalog_listing() -> String {
    let mut s = String::from("maps:\n");
    for (id, d) in fdcurve::maps::CATALOG {
        s += &format!("  {id:<16} {d}\n");
    }
    s += "scalar fields:\n";
    for (id, d) in fdcurve::maps::SCALAR_CATALOG {
        s += &format!("  {id:<16} {d}\n");
    }
    s += "named forms:\n";
    for (id, d) in fdcurve::forms::NAMED_FORMS {
        s += &format!("  {id:<16} {d}\n");
    }
    s += "tasks:\n";
    for (id, d) in TASK_KINDS {
        s += &format!("  {id:<20} {d}\n");
    }
    s
}
