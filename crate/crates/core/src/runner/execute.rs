use std::fs::{self, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::record::{write_records, RunRecord};

pub const LEDGER_FILE: &str = "ledger.log";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecuteReport {
    /// Digests whose run files were produced in this call.
    pub written: Vec<String>,
    /// Digests whose run files already existed.
    pub skipped: Vec<String>,
    /// Digests that errored or panicked, with the reason.
    pub failed: Vec<(String, String)>,
}

pub fn runs_path(out_dir: &Path, digest: &str) -> PathBuf {
    out_dir.join("runs").join(format!("{digest}.csv"))
}

fn run_config(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    (0..cfg.seeds).map(|s| cfg.run_seed(s)).collect()
}

fn write_atomic(records: &[RunRecord], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    write_records(records, &tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs every config whose run file is missing under `out_dir`, on a pool of
/// `threads` workers. Results do not depend on the thread count. A config
/// that fails is logged and reported; the others still complete.
pub fn execute(configs: &[ExperimentConfig], out_dir: &Path, threads: usize) -> Result<ExecuteReport> {
    let runs = out_dir.join("runs");
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    let listing = out_dir.join("configs.json");
    let mut entries = Vec::with_capacity(configs.len());
    for c in configs {
        let mut v = serde_json::to_value(c)?;
        v["digest"] = serde_json::Value::String(c.digest());
        entries.push(v);
    }
    fs::write(&listing, serde_json::to_string_pretty(&entries)?).map_err(|e| Error::io(&listing, e))?;

    let ledger_path = out_dir.join(LEDGER_FILE);
    let ledger = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ledger_path)
            .map_err(|e| Error::io(&ledger_path, e))?,
    );
    let log = |line: String| {
        let mut f = ledger.lock().unwrap_or_else(|p| p.into_inner());
        let _ = writeln!(f, "{line}");
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;

    enum Outcome {
        Written(String),
        Skipped(String),
        Failed(String, String),
    }
    let outcomes: Vec<Outcome> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let digest = cfg.digest();
                let path = runs_path(out_dir, &digest);
                if path.exists() {
                    log(format!("skip {digest} index={}", cfg.config_index));
                    return Outcome::Skipped(digest);
                }
                let result = catch_unwind(AssertUnwindSafe(|| {
                    run_config(cfg).and_then(|recs| write_atomic(&recs, &path).map(|_| recs))
                }));
                let reason = match result {
                    Ok(Ok(recs)) => {
                        let diverged = recs.iter().filter(|r| r.diverged()).count();
                        log(format!(
                            "done {digest} index={} seeds={} diverged={diverged}",
                            cfg.config_index, cfg.seeds
                        ));
                        return Outcome::Written(digest);
                    }
                    Ok(Err(e)) => e.to_string(),
                    Err(p) => p
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into()),
                };
                log(format!("fail {digest} index={}: {reason}", cfg.config_index));
                Outcome::Failed(digest, reason)
            })
            .collect()
    });

    let mut report = ExecuteReport::default();
    for o in outcomes {
        match o {
            Outcome::Written(d) => report.written.push(d),
            Outcome::Skipped(d) => report.skipped.push(d),
            Outcome::Failed(d, r) => report.failed.push((d, r)),
        }
    }
    Ok(report)
}
