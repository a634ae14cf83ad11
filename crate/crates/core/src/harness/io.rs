//! CSV schemas for every emitted artifact. Headers are fixed by the field
//! order of the row structs; floats are written in shortest round-trip form.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Metrics};

/// One control step of an evaluation or training rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub x_dot: f64,
    pub u_x: f64,
    pub z: f64,
    pub theta: f64,
    pub z_ddot_meas: f64,
    pub p: f64,
    pub reward: f64,
}

pub const TRACE_HEADER: [&str; 9] = ["t", "x", "x_dot", "u_x", "z", "theta", "z_ddot_meas", "p", "reward"];

/// Aggregated metrics of one evaluation, tagged by what was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub episodes: usize,
    pub peak_abs_acc_dev: f64,
    pub rmse_acc_dev: f64,
    pub rmse_vel_tracking: f64,
    pub mean_velocity: f64,
    pub episode_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub velocity: f64,
    pub peak_abs_acc_dev: f64,
    pub rmse_acc_dev: f64,
    pub rmse_vel_tracking: f64,
    pub mean_velocity: f64,
    pub episode_return: f64,
}

/// `seed` is empty on aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareCsvRow {
    pub variant: String,
    pub seed: Option<u64>,
    pub seed_fingerprint: String,
    pub peak_abs_acc_dev: f64,
    pub rmse_acc_dev: f64,
    pub rmse_vel_tracking: f64,
    pub mean_velocity: f64,
    pub episode_return: f64,
}

macro_rules! metrics_accessors {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn metrics(&self) -> Metrics {
                Metrics {
                    peak_abs_acc_dev: self.peak_abs_acc_dev,
                    rmse_acc_dev: self.rmse_acc_dev,
                    rmse_vel_tracking: self.rmse_vel_tracking,
                    mean_velocity: self.mean_velocity,
                    episode_return: self.episode_return,
                }
            }
        }
    )*};
}

metrics_accessors!(MetricsRow, SweepCsvRow, CompareCsvRow);

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Two-column plot series.
pub fn write_series(path: &Path, columns: (&str, &str), points: &[(f64, f64)]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([columns.0, columns.1])?;
    for (a, b) in points {
        w.serialize((a, b))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trace_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let row = TraceRow { t: 0.0, x: 0.0, x_dot: 0.0, u_x: 0.0, z: 0.0, theta: 0.0, z_ddot_meas: 9.8, p: 0.0, reward: 0.0 };
        write_csv(&path, &[row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    }

    #[test]
    fn compare_rows_round_trip_with_empty_seed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let rows = vec![
            CompareCsvRow { variant: "static".into(), seed: Some(3), seed_fingerprint: "ab".into(),
                peak_abs_acc_dev: 1.5, rmse_acc_dev: 0.25, rmse_vel_tracking: 0.1, mean_velocity: 0.9, episode_return: -3.0 },
            CompareCsvRow { variant: "static".into(), seed: None, seed_fingerprint: "ab".into(),
                peak_abs_acc_dev: 1.5, rmse_acc_dev: 0.25, rmse_vel_tracking: 0.1, mean_velocity: 0.9, episode_return: -3.0 },
        ];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "variant,seed,seed_fingerprint,peak_abs_acc_dev,rmse_acc_dev,rmse_vel_tracking,mean_velocity,episode_return"
        );
        assert!(text.lines().nth(2).unwrap().starts_with("static,,ab,"));
        assert_eq!(read_csv::<CompareCsvRow>(&path).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn trace_round_trips_exactly(vals in proptest::array::uniform9(-1e6f64..1e6)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            let row = TraceRow { t: vals[0], x: vals[1], x_dot: vals[2], u_x: vals[3], z: vals[4] * 1e-9,
                theta: vals[5] * 1e-12, z_ddot_meas: vals[6], p: vals[7], reward: vals[8] };
            write_csv(&path, &[row]).unwrap();
            let back: Vec<TraceRow> = read_csv(&path).unwrap();
            prop_assert_eq!(back, vec![row]);
        }
    }
}
