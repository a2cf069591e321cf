use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::execute::runs_path;
use super::{ExperimentConfig, Method, TaskKind};
use crate::error::{Error, Result};
use crate::record::{read_records, RunRecord};

pub const AGGREGATE_HEADER: [&str; 10] = [
    "task", "method", "beta", "gamma", "sigma2", "kappa", "mean_final", "std_final", "n_seeds", "n_diverged",
];

/// Default number of trailing steps averaged for the trailing statistics.
pub const TRAILING_WINDOW: usize = 500;

/// Seed statistics of one config. Means and sample standard deviations are
/// taken over the seeds that did not diverge; a config where every seed
/// diverged has infinite means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateCell {
    pub digest: String,
    pub task: TaskKind,
    pub method: Method,
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub kappa: f64,
    pub drift: String,
    pub mean_final: f64,
    pub std_final: f64,
    pub mean_trailing: f64,
    pub std_trailing: f64,
    /// Oracle loss averaged over the trailing window.
    pub mean_loss: f64,
    pub std_loss: f64,
    /// Final accuracy (logreg) or validation MSE (mlp).
    pub mean_metric: Option<f64>,
    pub std_metric: Option<f64>,
    pub n_seeds: usize,
    pub n_diverged: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::INFINITY, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn drift_label(cfg: &ExperimentConfig) -> String {
    serde_json::to_value(&cfg.drift)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
        .unwrap_or_default()
}

fn trailing_loss(r: &RunRecord, window: usize) -> Option<f64> {
    let t_max = r.last()?.t;
    let lo = t_max.saturating_sub(window.saturating_sub(1));
    let xs: Vec<f64> = r.steps.iter().filter(|s| s.t >= lo).map(|s| s.loss).collect();
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Summarises the records of one config.
pub fn aggregate_records(cfg: &ExperimentConfig, records: &[RunRecord], window: usize) -> AggregateCell {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.diverged()).collect();
    let finals: Vec<f64> = ok.iter().filter_map(|r| r.final_error()).collect();
    let trailing: Vec<f64> = ok.iter().filter_map(|r| r.trailing_mean(window)).collect();
    let losses: Vec<f64> = ok.iter().filter_map(|r| trailing_loss(r, window)).collect();
    let metrics: Vec<f64> = ok.iter().filter_map(|r| r.last().and_then(|s| s.metric)).collect();
    let (mean_final, std_final) = mean_std(&finals);
    let (mean_trailing, std_trailing) = mean_std(&trailing);
    let (mean_loss, std_loss) = mean_std(&losses);
    let (mean_metric, std_metric) = if metrics.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&metrics);
        (Some(m), Some(s))
    };
    AggregateCell {
        digest: cfg.digest(),
        task: cfg.task,
        method: cfg.method,
        beta: cfg.beta,
        gamma: cfg.gamma,
        sigma2: cfg.sigma2,
        kappa: cfg.kappa,
        drift: drift_label(cfg),
        mean_final,
        std_final,
        mean_trailing,
        std_trailing,
        mean_loss,
        std_loss,
        mean_metric,
        std_metric,
        n_seeds: records.len(),
        n_diverged: records.len() - ok.len(),
    }
}

/// Reads the `configs.json` listing written by [`super::execute`].
pub fn load_configs(out_dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let path = out_dir.join("configs.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut configs: Vec<ExperimentConfig> = serde_json::from_str(&text)?;
    for c in &mut configs {
        c.out_dir = out_dir.to_path_buf();
    }
    Ok(configs)
}

/// Aggregates every config of `out_dir` that has a run file, in grid order.
pub fn aggregate(out_dir: &Path, window: usize) -> Result<Vec<AggregateCell>> {
    let mut cells = Vec::new();
    for cfg in load_configs(out_dir)? {
        let path = runs_path(out_dir, &cfg.digest());
        if !path.exists() {
            continue;
        }
        cells.push(aggregate_records(&cfg, &read_records(&path)?, window));
    }
    Ok(cells)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `aggregate.csv` and the wider `aggregate_full.csv`.
pub fn write_aggregate(cells: &[AggregateCell], out_dir: &Path) -> Result<()> {
    let csv_err = |p: &Path, e: csv::Error| Error::io(p, std::io::Error::other(e));
    let path = out_dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_err(&path, e))?;
    for c in cells {
        w.write_record([
            task_name(c.task).to_string(),
            method_name(c.method).to_string(),
            c.beta.to_string(),
            c.gamma.to_string(),
            c.sigma2.to_string(),
            c.kappa.to_string(),
            c.mean_final.to_string(),
            c.std_final.to_string(),
            c.n_seeds.to_string(),
            c.n_diverged.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out_dir.join("aggregate_full.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record([
        "digest", "task", "method", "beta", "gamma", "sigma2", "kappa", "drift", "mean_final", "std_final",
        "mean_trailing", "std_trailing", "mean_loss", "std_loss", "mean_metric", "std_metric", "n_seeds",
        "n_diverged",
    ])
    .map_err(|e| csv_err(&path, e))?;
    for c in cells {
        w.write_record([
            c.digest.clone(),
            task_name(c.task).to_string(),
            method_name(c.method).to_string(),
            c.beta.to_string(),
            c.gamma.to_string(),
            c.sigma2.to_string(),
            c.kappa.to_string(),
            c.drift.clone(),
            c.mean_final.to_string(),
            c.std_final.to_string(),
            c.mean_trailing.to_string(),
            c.std_trailing.to_string(),
            c.mean_loss.to_string(),
            c.std_loss.to_string(),
            opt(c.mean_metric),
            opt(c.std_metric),
            c.n_seeds.to_string(),
            c.n_diverged.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn task_name(t: TaskKind) -> &'static str {
    match t {
        TaskKind::Quadratic => "quadratic",
        TaskKind::Linreg => "linreg",
        TaskKind::Logreg => "logreg",
        TaskKind::Mlp => "mlp",
        TaskKind::Bump => "bump",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Sgd => "sgd",
        Method::Hb => "hb",
        Method::Nag => "nag",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableId {
    /// Quadratic grid under Gaussian or directed drift.
    Quad,
    /// Quadratic grid under Student-t drift.
    QuadT,
    /// Regression, classification and MLP summary.
    Tasks,
}

impl std::str::FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad" => Ok(TableId::Quad),
            "quad_t" => Ok(TableId::QuadT),
            "tasks" => Ok(TableId::Tasks),
            other => Err(Error::param(format!("unknown table `{other}` (quad, quad_t, tasks)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::param(format!("unknown format `{other}` (md, csv)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub warnings: Vec<String>,
}

const METHODS: [Method; 3] = [Method::Sgd, Method::Hb, Method::Nag];

/// Total order on f64 keys so table rows sort deterministically.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Row {
    label: Vec<String>,
    values: [Option<f64>; 3],
    higher_better: bool,
}

fn fmt_value(v: Option<f64>, prec: usize) -> String {
    match v {
        None => "—".into(),
        Some(x) if x.is_infinite() => "diverged".into(),
        Some(x) => format!("{x:.prec$}"),
    }
}

fn best(row: &Row) -> Option<f64> {
    let finite = row.values.iter().flatten().copied().filter(|x| x.is_finite());
    if row.higher_better {
        finite.reduce(f64::max)
    } else {
        finite.reduce(f64::min)
    }
}

fn render_rows(header: &[&str], rows: &[Row], format: TableFormat, prec: usize) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let cols: Vec<String> = header.iter().map(|h| h.to_lowercase()).collect();
            writeln!(out, "{}", cols.join(",")).unwrap();
            for r in rows {
                let vals: Vec<String> = r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()).collect();
                writeln!(out, "{},{}", r.label.join(","), vals.join(",")).unwrap();
            }
        }
        TableFormat::Markdown => {
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for r in rows {
                let b = best(r);
                let vals: Vec<String> = r
                    .values
                    .iter()
                    .map(|v| {
                        let s = fmt_value(*v, prec);
                        if v.is_some() && *v == b {
                            format!("**{s}**")
                        } else {
                            s
                        }
                    })
                    .collect();
                writeln!(out, "| {} | {} |", r.label.join(" | "), vals.join(" | ")).unwrap();
            }
        }
    }
    out
}

fn missing_warnings(rows: &[Row], warnings: &mut Vec<String>) {
    for r in rows {
        for (m, v) in METHODS.iter().zip(&r.values) {
            if v.is_none() {
                warnings.push(format!("missing cell {} for row ({})", m.label(), r.label.join(", ")));
            }
        }
    }
}

/// Renders one of the summary tables. Rows are sorted by their keys, columns
/// are SGD, HB and NAG, and the best cell of each row is bold in Markdown.
pub fn render_table(cells: &[AggregateCell], table: TableId, format: TableFormat) -> RenderedTable {
    let mut warnings = Vec::new();
    let (header, rows, prec) = match table {
        TableId::Quad | TableId::QuadT => {
            let want_t = table == TableId::QuadT;
            let mut grid: BTreeMap<(Key, Key, Key), [Option<f64>; 3]> = BTreeMap::new();
            for c in cells {
                if c.task != TaskKind::Quadratic || (c.drift == "student_t_walk") != want_t {
                    continue;
                }
                let slot = grid.entry((Key(c.gamma), Key(c.beta), Key(c.sigma2))).or_default();
                let i = METHODS.iter().position(|m| *m == c.method).unwrap();
                if slot[i].is_some() {
                    warnings.push(format!(
                        "duplicate cell {} at gamma={} beta={} sigma2={}; keeping the first",
                        c.method.label(),
                        c.gamma,
                        c.beta,
                        c.sigma2
                    ));
                    continue;
                }
                slot[i] = Some(c.mean_final);
            }
            let rows: Vec<Row> = grid
                .into_iter()
                .map(|((g, b, s), values)| Row {
                    label: vec![g.0.to_string(), b.0.to_string(), s.0.to_string()],
                    values,
                    higher_better: false,
                })
                .collect();
            (vec!["gamma", "beta", "sigma2", "SGD", "HB", "NAG"], rows, 2)
        }
        TableId::Tasks => {
            let mut grid: BTreeMap<(TaskKind, Key, usize), [Option<f64>; 3]> = BTreeMap::new();
            for c in cells {
                if !matches!(c.task, TaskKind::Linreg | TaskKind::Logreg | TaskKind::Mlp) {
                    continue;
                }
                let i = METHODS.iter().position(|m| *m == c.method).unwrap();
                let mut put = |q: usize, v: Option<f64>| {
                    let slot = grid.entry((c.task, Key(c.kappa), q)).or_default();
                    if slot[i].is_none() {
                        slot[i] = v;
                    }
                };
                put(0, Some(c.mean_loss));
                put(1, Some(c.mean_final));
                if c.task != TaskKind::Linreg {
                    put(2, c.mean_metric);
                }
            }
            let rows: Vec<Row> = grid
                .into_iter()
                .map(|((task, kappa, q), values)| {
                    let quantity = match (q, task) {
                        (0, _) => "Loss",
                        (1, _) => "Track",
                        (_, TaskKind::Logreg) => "Acc",
                        _ => "Val MSE",
                    };
                    Row {
                        label: vec![task_name(task).into(), kappa.0.to_string(), quantity.into()],
                        values,
                        higher_better: quantity == "Acc",
                    }
                })
                .collect();
            (vec!["task", "kappa", "quantity", "SGD", "HB", "NAG"], rows, 3)
        }
    };
    missing_warnings(&rows, &mut warnings);
    RenderedTable {
        text: render_rows(&header, &rows, format, prec),
        warnings,
    }
}

/// Per-step mean and sample std of the tracking error across non-diverged
/// seeds, one series per config, as CSV `method,config_key,t,mean,std`.
pub fn plotdata(out_dir: &Path) -> Result<String> {
    let mut out = String::from("method,config_key,t,mean,std\n");
    for cfg in load_configs(out_dir)? {
        let path = runs_path(out_dir, &cfg.digest());
        if !path.exists() {
            continue;
        }
        let records: Vec<RunRecord> = read_records(&path)?.into_iter().filter(|r| !r.diverged()).collect();
        let key = format!(
            "{}|{}|gamma={}|beta={}|sigma2={}|kappa={}",
            task_name(cfg.task),
            drift_label(&cfg),
            cfg.gamma,
            cfg.beta,
            cfg.sigma2,
            cfg.kappa
        );
        let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &records {
            for s in &r.steps {
                by_t.entry(s.t).or_default().push(s.tracking_error_sq);
            }
        }
        for (t, xs) in by_t {
            let (m, s) = mean_std(&xs);
            writeln!(out, "{},{key},{t},{m},{s}", method_name(cfg.method)).unwrap();
        }
    }
    Ok(out)
}
