//! Per-step run records and their CSV persistence.
//!
//! File layout: header `run_id,seed,t,tracking_error_sq,loss,metric`, one row per
//! recorded step, `metric` empty when absent. Reals are written with Rust's
//! shortest round-trip formatting. A run that diverged ends with a row whose
//! tracking error is `inf`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 6] = ["run_id", "seed", "t", "tracking_error_sq", "loss", "metric"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub tracking_error_sq: f64,
    pub loss: f64,
    pub metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    /// `<config_digest>/<seed index>` when produced by the runner.
    pub run_id: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub config_digest: String,
}

impl RunRecord {
    pub fn new(run_id: impl Into<String>, seed: u64, config_digest: impl Into<String>) -> Self {
        RunRecord {
            run_id: run_id.into(),
            seed,
            steps: Vec::new(),
            config_digest: config_digest.into(),
        }
    }

    pub fn diverged(&self) -> bool {
        self.steps
            .last()
            .is_some_and(|s| s.tracking_error_sq == f64::INFINITY)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    /// Tracking error at the last recorded step, `None` for diverged or empty runs.
    pub fn final_error(&self) -> Option<f64> {
        if self.diverged() {
            return None;
        }
        self.last().map(|s| s.tracking_error_sq)
    }

    /// Mean tracking error over recorded steps with `t > t_max - window`.
    pub fn trailing_mean(&self, window: usize) -> Option<f64> {
        if self.diverged() {
            return None;
        }
        let t_max = self.last()?.t;
        let lo = t_max.saturating_sub(window.saturating_sub(1));
        let (sum, n) = self
            .steps
            .iter()
            .filter(|s| s.t >= lo)
            .fold((0.0, 0usize), |(s, n), r| (s + r.tracking_error_sq, n + 1));
        Some(sum / n as f64)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.run_id.contains(['\n', '\r']) {
            return Err(Error::param("run_id may not contain line breaks"));
        }
        for w in self.steps.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::param(format!(
                    "run {}: steps not strictly increasing at t={}",
                    self.run_id, w[1].t
                )));
            }
        }
        if let Some(s) = self.steps.iter().find(|s| !(s.tracking_error_sq >= 0.0)) {
            return Err(Error::param(format!(
                "run {}: negative tracking error at t={}",
                self.run_id, s.t
            )));
        }
        Ok(())
    }
}

fn digest_of(run_id: &str) -> String {
    run_id
        .rsplit_once('/')
        .map(|(d, _)| d.to_string())
        .unwrap_or_default()
}

fn write_rows<W: Write>(records: &[RunRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for rec in records {
        let seed = rec.seed.to_string();
        for s in &rec.steps {
            let metric = s.metric.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([
                rec.run_id.as_str(),
                &seed,
                &s.t.to_string(),
                &s.tracking_error_sq.to_string(),
                &s.loss.to_string(),
                &metric,
            ])?;
        }
    }
    w.flush()
}

/// Writes records to any sink; used for stdout output.
pub fn write_records_to<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    records.iter().try_for_each(RunRecord::validate)?;
    write_rows(records, out).map_err(|e| Error::io("<output>", e))
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    records.iter().try_for_each(RunRecord::validate)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    write_rows(records, &mut buf).map_err(|e| Error::io(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(parse_err(1, format!("unexpected header {:?}", headers)));
    }
    let mut out: Vec<RunRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{}: {e}", RECORD_HEADER[i])))
        };
        let run_id = field(0);
        let seed: u64 = field(1)
            .parse()
            .map_err(|e| parse_err(line, format!("seed: {e}")))?;
        let t: usize = field(2)
            .parse()
            .map_err(|e| parse_err(line, format!("t: {e}")))?;
        let step = StepRecord {
            t,
            tracking_error_sq: num(3)?,
            loss: num(4)?,
            metric: if field(5).is_empty() {
                None
            } else {
                Some(num(5)?)
            },
        };
        match out.last_mut() {
            Some(rec) if rec.run_id == run_id => {
                if rec.seed != seed {
                    return Err(parse_err(line, "seed changes within a run".into()));
                }
                if rec.steps.last().is_some_and(|s| s.t >= t) {
                    return Err(parse_err(line, "steps not strictly increasing".into()));
                }
                rec.steps.push(step);
            }
            _ => {
                let mut rec = RunRecord::new(run_id, seed, digest_of(run_id));
                rec.steps.push(step);
                out.push(rec);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(run: &str, seed: u64, n: usize) -> RunRecord {
        let mut r = RunRecord::new(run, seed, digest_of(run));
        for t in 0..n {
            let x = (t as f64 + 0.1) / 3.0;
            r.steps.push(StepRecord {
                t,
                tracking_error_sq: x * x,
                loss: 1.0 / (x + 1.0),
                metric: if t % 2 == 0 { Some(x.sin()) } else { None },
            });
        }
        r
    }

    #[test]
    fn empty_roundtrip_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_records(&[], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim_end(), RECORD_HEADER.join(","));
        assert!(read_records(&p).unwrap().is_empty());
    }

    #[test]
    fn single_record_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rec = sample("abc/0", 5, 10);
        write_records(std::slice::from_ref(&rec), &p).unwrap();
        let back = read_records(&p).unwrap();
        assert_eq!(back, vec![rec]);
        assert_eq!(back[0].config_digest, "abc");
    }

    #[test]
    fn many_records_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let recs: Vec<_> = (0..20).map(|i| sample(&format!("cfg/{i}"), i, 5000)).collect();
        write_records(&recs, &p).unwrap();
        assert_eq!(read_records(&p).unwrap(), recs);
    }

    #[test]
    fn divergence_marker_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut rec = sample("x/1", 1, 3);
        rec.steps.push(StepRecord {
            t: 3,
            tracking_error_sq: f64::INFINITY,
            loss: f64::INFINITY,
            metric: None,
        });
        write_records(std::slice::from_ref(&rec), &p).unwrap();
        let back = read_records(&p).unwrap();
        assert!(back[0].diverged());
        assert_eq!(back[0].final_error(), None);
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "run_id,seed,t,tracking_error_sq,loss,metric\na,1,0,0.5,1,\na,1,1,oops,1,\n").unwrap();
        match read_records(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_records(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn trailing_mean_uses_window() {
        let mut r = RunRecord::new("a/0", 0, "a");
        for t in 0..10 {
            r.steps.push(StepRecord {
                t,
                tracking_error_sq: t as f64,
                loss: 0.0,
                metric: None,
            });
        }
        assert_eq!(r.trailing_mean(4), Some(7.5));
        assert_eq!(r.final_error(), Some(9.0));
    }
}
