//! CSV rows, summaries and report files.
//!
//! Floats are written with 9 significant digits. Summaries are computed from
//! the rounded values, so a reader of the CSV recomputes them exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const EPOCH_HEADER: &str = "run,epoch,arm,strategy,desired_strategy,cum_regret,clicks,eliminated,elimination_round";
pub const SUMMARY_HEADER: &str =
    "epoch,arm,runs,mean_strategy,std_strategy,mean_cum_regret,std_cum_regret,mean_clicks,elimination_rate";
pub const TRACE_HEADER: &str = "run,t,arm,clicked,reward,active_count,cum_regret";
pub const SWEEP_HEADER: &str = "horizon,offset,runs,mean_regret,std_regret,std_error,elimination_rate";
pub const CERTIFICATE_HEADER: &str = "arm,strategy,desired_strategy,value,best_strategy,best_value,gain,std_error";

/// Rounds to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Shortest decimal text of `x` rounded to 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else if r.abs() < 1e-6 || r.abs() >= 1e16 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

/// One arm in one epoch of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub run: usize,
    pub epoch: usize,
    pub arm: usize,
    pub strategy: f64,
    pub desired_strategy: f64,
    pub cum_regret: f64,
    pub clicks: u64,
    pub elimination_round: Option<usize>,
}

impl EpochRow {
    /// Values are stored already rounded to their serialized precision.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run: usize,
        epoch: usize,
        arm: usize,
        strategy: f64,
        desired_strategy: f64,
        cum_regret: f64,
        clicks: u64,
        elimination_round: Option<usize>,
    ) -> Self {
        Self {
            run,
            epoch,
            arm,
            strategy: round_sig(strategy),
            desired_strategy: round_sig(desired_strategy),
            cum_regret: round_sig(cum_regret),
            clicks,
            elimination_round,
        }
    }

    pub fn eliminated(&self) -> bool {
        self.elimination_round.is_some()
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.run,
            self.epoch,
            self.arm,
            fmt_float(self.strategy),
            fmt_float(self.desired_strategy),
            fmt_float(self.cum_regret),
            self.clicks,
            u8::from(self.eliminated()),
            self.elimination_round.map_or(-1, |r| r as i64),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub epoch: usize,
    pub arm: usize,
    pub runs: usize,
    pub mean_strategy: f64,
    pub std_strategy: f64,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    pub mean_clicks: f64,
    pub elimination_rate: f64,
}

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.arm,
            self.runs,
            fmt_float(self.mean_strategy),
            fmt_float(self.std_strategy),
            fmt_float(self.mean_cum_regret),
            fmt_float(self.std_cum_regret),
            fmt_float(self.mean_clicks),
            fmt_float(self.elimination_rate),
        )
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 && values.iter().any(|&v| v != values[0]) {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-(epoch, arm) statistics across runs. Rows must be ordered by
/// (run, epoch, arm) with the same epochs and arms in every run.
pub fn summarize(rows: &[EpochRow]) -> Vec<SummaryRow> {
    let epochs = rows.iter().map(|r| r.epoch + 1).max().unwrap_or(0);
    let arms = rows.iter().map(|r| r.arm + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(epochs * arms);
    for epoch in 0..epochs {
        for arm in 0..arms {
            let cell: Vec<&EpochRow> = rows.iter().filter(|r| r.epoch == epoch && r.arm == arm).collect();
            if cell.is_empty() {
                continue;
            }
            let strategies: Vec<f64> = cell.iter().map(|r| r.strategy).collect();
            let regrets: Vec<f64> = cell.iter().map(|r| r.cum_regret).collect();
            let clicks: Vec<f64> = cell.iter().map(|r| r.clicks as f64).collect();
            let eliminated: Vec<f64> = cell.iter().map(|r| f64::from(u8::from(r.eliminated()))).collect();
            let (mean_strategy, std_strategy) = mean_std(&strategies);
            let (mean_cum_regret, std_cum_regret) = mean_std(&regrets);
            out.push(SummaryRow {
                epoch,
                arm,
                runs: cell.len(),
                mean_strategy,
                std_strategy,
                mean_cum_regret,
                std_cum_regret,
                mean_clicks: mean_std(&clicks).0,
                elimination_rate: mean_std(&eliminated).0,
            });
        }
    }
    out
}

pub fn csv_text(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut text = String::with_capacity(1024);
    text.push_str(header);
    text.push('\n');
    for line in lines {
        text.push_str(&line);
        text.push('\n');
    }
    text
}

/// `key=value` lines.
pub fn report_text(entries: &[(String, String)]) -> String {
    let mut text = String::new();
    for (k, v) in entries {
        let _ = writeln!(text, "{k}={v}");
    }
    text
}

/// A named output file and its full contents.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: &'static str,
    pub contents: String,
}

/// Writes every file into `dir`, creating it if needed. Returns the paths.
pub fn write_files(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(f.name);
            fs::write(&path, &f.contents).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
