use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gridgame::StrategyGrid;
use serde::Serialize;

use crate::ConfigError;

/// One seeded run; the column order is the CSV header order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub config_hash: String,
    pub point: String,
    pub rows: usize,
    pub cols: usize,
    pub rule: String,
    pub seed: u64,
    pub max_steps: usize,
    pub converged: bool,
    pub steps: Option<usize>,
    pub terminal: String,
    pub n_c_final: usize,
    pub initial_digest: String,
}

/// Aggregate over one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub point: String,
    pub param: String,
    pub replications: usize,
    pub max_steps: usize,
    pub converged: usize,
    pub fraction: f64,
    pub median_steps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlRow {
    pub config_hash: String,
    pub point: String,
    pub seed: u64,
    pub step: usize,
    pub phase: String,
    pub n_c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSummaryRow {
    pub config_hash: String,
    pub point: String,
    pub seed: u64,
    pub controller: String,
    pub ok: bool,
    pub steps: usize,
    pub bound: usize,
    pub terminal: String,
    pub stop_times: String,
    pub error: String,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ConfigError::Io(dir.display().to_string(), e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
    Ok(())
}

/// Median of the converged step counts, averaging the middle pair.
pub fn median(values: &[usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 })
}

/// Writes `seed-<s>.txt` (ASCII frames, each headed `t=K`, separated by blank
/// lines) and `seed-<s>/t-<K>.pgm` under `dir`.
pub struct SnapshotSink {
    dir: PathBuf,
    seed: u64,
    ascii: Vec<u8>,
    last_t: Option<usize>,
}

impl SnapshotSink {
    pub fn new(dir: &Path, seed: u64) -> Self {
        Self { dir: dir.to_path_buf(), seed, ascii: Vec::new(), last_t: None }
    }

    pub fn frame_dir(&self) -> PathBuf {
        self.dir.join(format!("seed-{}", self.seed))
    }

    pub fn record(&mut self, t: usize, state: &StrategyGrid) -> Result<(), ConfigError> {
        if self.last_t == Some(t) {
            return Ok(());
        }
        if self.last_t.is_some() {
            self.ascii.push(b'\n');
        }
        writeln!(self.ascii, "t={t}").expect("vec write");
        self.ascii.extend_from_slice(state.to_ascii().as_bytes());
        let fd = self.frame_dir();
        fs::create_dir_all(&fd).map_err(|e| ConfigError::Io(fd.display().to_string(), e))?;
        let p = fd.join(format!("t-{t:08}.pgm"));
        fs::write(&p, state.to_pgm()).map_err(|e| ConfigError::Io(p.display().to_string(), e))?;
        self.last_t = Some(t);
        Ok(())
    }

    pub fn finish(self) -> Result<(), ConfigError> {
        let p = self.dir.join(format!("seed-{}.txt", self.seed));
        fs::write(&p, &self.ascii).map_err(|e| ConfigError::Io(p.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridgame::TorusDims;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[5, 1, 3]), Some(3.0));
        assert_eq!(median(&[4, 1, 3, 10]), Some(3.5));
    }

    #[test]
    fn csv_header_and_empty_option() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/runs.csv");
        let row = RunRow {
            config_hash: "ab".into(),
            point: "pd".into(),
            rows: 3,
            cols: 3,
            rule: "deterministic".into(),
            seed: 1,
            max_steps: 10,
            converged: false,
            steps: None,
            terminal: "timeout".into(),
            n_c_final: 4,
            initial_digest: "ff".into(),
        };
        write_csv(&p, &[row]).unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(
            text,
            "config_hash,point,rows,cols,rule,seed,max_steps,converged,steps,terminal,n_c_final,initial_digest\n\
             ab,pd,3,3,deterministic,1,10,false,,timeout,4,ff\n"
        );
    }

    #[test]
    fn snapshot_layout() {
        let dir = tempfile::tempdir().unwrap();
        let d = TorusDims::new(3, 3).unwrap();
        let mut sink = SnapshotSink::new(dir.path(), 7);
        sink.record(0, &StrategyGrid::all_c(d)).unwrap();
        sink.record(5, &StrategyGrid::all_d(d)).unwrap();
        sink.record(5, &StrategyGrid::all_d(d)).unwrap();
        sink.finish().unwrap();
        let text = fs::read_to_string(dir.path().join("seed-7.txt")).unwrap();
        assert_eq!(text, "t=0\n...\n...\n...\n\nt=5\n###\n###\n###\n");
        let pgm = fs::read(dir.path().join("seed-7/t-00000005.pgm")).unwrap();
        assert_eq!(pgm, StrategyGrid::all_d(d).to_pgm());
    }
}
