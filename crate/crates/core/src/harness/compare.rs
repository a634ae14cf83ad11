use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::io::{write_csv, write_series, CompareCsvRow};
use super::train::{train, TrainConfig};
use super::{seed_fingerprint, HarnessError, Metrics};
use crate::env::{BumpEnv, RewardVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub variant: String,
    /// `None` on the aggregate row of a variant.
    pub seed: Option<u64>,
    pub seed_fingerprint: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// One row per (variant, seed), variants in fixed order.
    pub runs: Vec<CompareRow>,
    /// One row per variant, aggregated over seeds.
    pub aggregates: Vec<CompareRow>,
    /// Every seed produced the same episode-seed sequence under every variant.
    pub seed_audit_ok: bool,
    /// Whether the function-weighted variant had the lowest mean peak.
    pub function_weighted_lowest_peak: bool,
}

pub const COMPARE_CSV_FILE: &str = "compare_report.csv";
pub const COMPARE_TEXT_FILE: &str = "compare_report.txt";
pub const COMPARE_SERIES_FILE: &str = "compare_peak_series.csv";

pub fn variants() -> [RewardVariant; 3] {
    [RewardVariant::Static, RewardVariant::conditional(), RewardVariant::function_weighted()]
}

impl CompareReport {
    pub fn rows(&self) -> impl Iterator<Item = &CompareRow> {
        self.runs.iter().chain(&self.aggregates)
    }

    pub fn text_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<18} {:>6} {:>16} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "variant", "seed", "seed_audit", "peak", "rmse_acc", "rmse_vel", "mean_v", "return"
        );
        for r in self.rows() {
            let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
            let m = &r.metrics;
            let _ = writeln!(
                s,
                "{:<18} {:>6} {:>16x} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>12.2}",
                r.variant, seed, r.seed_fingerprint, m.peak_abs_acc_dev, m.rmse_acc_dev, m.rmse_vel_tracking,
                m.mean_velocity, m.episode_return
            );
        }
        let _ = writeln!(s, "seed audit consistent: {}", self.seed_audit_ok);
        let _ = writeln!(s, "function_weighted lowest mean peak: {}", self.function_weighted_lowest_peak);
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let rows: Vec<CompareCsvRow> = self
            .rows()
            .map(|r| CompareCsvRow {
                variant: r.variant.clone(),
                seed: r.seed,
                seed_fingerprint: format!("{:016x}", r.seed_fingerprint),
                peak_abs_acc_dev: r.metrics.peak_abs_acc_dev,
                rmse_acc_dev: r.metrics.rmse_acc_dev,
                rmse_vel_tracking: r.metrics.rmse_vel_tracking,
                mean_velocity: r.metrics.mean_velocity,
                episode_return: r.metrics.episode_return,
            })
            .collect();
        write_csv(&dir.join(COMPARE_CSV_FILE), &rows)?;
        std::fs::write(dir.join(COMPARE_TEXT_FILE), self.text_table())?;
        let series: Vec<_> =
            self.aggregates.iter().enumerate().map(|(i, r)| (i as f64, r.metrics.peak_abs_acc_dev)).collect();
        write_series(&dir.join(COMPARE_SERIES_FILE), ("variant_index", "mean_peak_abs_acc_dev"), &series)?;
        Ok(())
    }
}

/// Trains one agent per reward variant per seed from `base`, then evaluates
/// each greedily on the held-out track of `base`. Runs are independent and may
/// execute in parallel; each is single-threaded, so results do not depend on
/// scheduling. Aggregate peaks are means over seeds.
pub fn compare_rewards(base: &TrainConfig, seeds: &[u64]) -> Result<CompareReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("compare needs at least one seed".into()));
    }
    base.validate()?;
    let jobs: Vec<(RewardVariant, u64)> =
        variants().into_iter().flat_map(|v| seeds.iter().map(move |&s| (v.clone(), s))).collect();
    let runs = jobs
        .into_par_iter()
        .map(|(variant, seed)| -> Result<CompareRow, HarnessError> {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.env.reward.variant = variant.clone();
            let mut env = BumpEnv::new(cfg.env.clone())?;
            let report = train(&cfg, &mut env, None)?;
            let mut held_out = cfg.held_out_env()?;
            let eval = evaluate(&report.agent, &mut held_out, 1, cfg.env.reward.x_dot_d, cfg.eval_track_seed)?;
            Ok(CompareRow {
                variant: variant.name().to_string(),
                seed: Some(seed),
                seed_fingerprint: seed_fingerprint(&report.seeds()),
                metrics: eval.metrics,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = seeds.len();
    let seed_audit_ok = (0..n).all(|j| {
        let fp = runs[j].seed_fingerprint;
        (0..3).all(|v| runs[v * n + j].seed_fingerprint == fp)
    });
    let all_seeds_fp = seed_fingerprint(&runs[..n].iter().map(|r| r.seed_fingerprint).collect::<Vec<_>>());
    let aggregates: Vec<CompareRow> = runs
        .chunks(n)
        .map(|chunk| {
            let ms: Vec<Metrics> = chunk.iter().map(|r| r.metrics).collect();
            let mut m = Metrics::aggregate(&ms);
            m.peak_abs_acc_dev = ms.iter().map(|m| m.peak_abs_acc_dev).sum::<f64>() / n as f64;
            CompareRow { variant: chunk[0].variant.clone(), seed: None, seed_fingerprint: all_seeds_fp, metrics: m }
        })
        .collect();
    let fw = aggregates[2].metrics.peak_abs_acc_dev;
    let function_weighted_lowest_peak = aggregates[..2].iter().all(|a| fw < a.metrics.peak_abs_acc_dev);
    Ok(CompareReport { runs, aggregates, seed_audit_ok, function_weighted_lowest_peak })
}
