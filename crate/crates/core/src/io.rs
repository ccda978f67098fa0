//! CSV files for trajectories and estimated curves.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a file
//! read back reproduces the values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DriftEstimate;
use crate::interval::Interval;
use crate::sde::{EstimatorKind, Trajectory};
use crate::spline::SplineSpace;

/// Relative tolerance on the spacing of imported time stamps.
const GRID_TOL: f64 = 1e-9;

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes lines of pre-formatted CSV.
pub(crate) fn write_lines<I, S>(path: &Path, header: &str, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for line in lines {
        writeln!(w, "{}", line.as_ref()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `t,x` with one row per observation.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let delta = traj.delta();
    write_lines(
        path,
        "t,x",
        traj.observations()
            .iter()
            .enumerate()
            .map(|(k, x)| format!("{},{}", k as f64 * delta, x)),
    )
}

/// Reads a `t,x` file. The sampling interval is inferred from the time
/// column, which must be uniformly spaced.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "x" {
        return Err(Error::InvalidData(format!(
            "{}: expected header `t,x`, got `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.deserialize::<(f64, f64)>().enumerate() {
        let (t, x) = record.map_err(|e| Error::csv(path, e))?;
        if !t.is_finite() || !x.is_finite() {
            return Err(Error::InvalidData(format!("{}: row {} is not finite", path.display(), row + 1)));
        }
        times.push(t);
        values.push(x);
    }
    if times.len() < 2 {
        return Err(Error::InvalidData(format!(
            "{}: need at least 2 observations, got {}",
            path.display(),
            times.len()
        )));
    }
    let n = times.len() - 1;
    let delta = (times[n] - times[0]) / n as f64;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidData(format!("{}: time column must increase", path.display())));
    }
    for (k, &t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * delta;
        if (t - expected).abs() > GRID_TOL * delta.max(expected.abs()) {
            return Err(Error::InvalidData(format!(
                "{}: time {t} at row {} is off the uniform grid",
                path.display(),
                k + 1
            )));
        }
    }
    Trajectory::new(values, delta, 1, None)
}

/// `x,<column>...` rows on the given grid.
pub fn write_curve_csv(path: &Path, grid: &[f64], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut header = String::from("x");
    for (name, values) in columns {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("curve column {name} has the wrong length")));
        }
        header.push(',');
        header.push_str(name);
    }
    write_lines(
        path,
        &header,
        grid.iter().enumerate().map(|(i, x)| {
            let mut line = x.to_string();
            for (_, values) in columns {
                line.push(',');
                line.push_str(&values[i].to_string());
            }
            line
        }),
    )
}

/// A fitted spline written to disk as JSON, enough to evaluate it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedEstimate {
    pub level: u32,
    pub degree: usize,
    pub interval: Interval,
    pub kind: EstimatorKind,
    pub coefficients: Vec<f64>,
}

impl SavedEstimate {
    pub fn from_estimate(estimate: &DriftEstimate) -> Self {
        Self {
            level: estimate.space.level(),
            degree: estimate.space.degree(),
            interval: estimate.space.interval(),
            kind: estimate.kind,
            coefficients: estimate.coefficients.clone(),
        }
    }

    pub fn space(&self) -> Result<SplineSpace> {
        let space = SplineSpace::new(self.level, self.degree, self.interval)?;
        if space.dimension() != self.coefficients.len() {
            return Err(Error::InvalidData(format!(
                "S({}, {}) has dimension {}, file has {} coefficients",
                self.level,
                self.degree,
                space.dimension(),
                self.coefficients.len()
            )));
        }
        Ok(space)
    }

    /// Values on `points` equispaced grid points of the interval.
    pub fn curve(&self, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let space = self.space()?;
        let grid = self.interval.grid(points);
        let values = grid
            .iter()
            .map(|&x| space.eval_estimate(&self.coefficients, x))
            .collect::<Result<Vec<_>>>()?;
        Ok((grid, values))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::io(path, e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_header_and_uneven_grid() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "time,value\n0,1\n1,2\n").unwrap();
        assert!(matches!(read_trajectory_csv(&bad), Err(Error::InvalidData(_))));
        let uneven = dir.path().join("uneven.csv");
        std::fs::write(&uneven, "t,x\n0,1\n0.1,2\n0.3,2\n").unwrap();
        assert!(matches!(read_trajectory_csv(&uneven), Err(Error::InvalidData(_))));
        let missing = dir.path().join("missing.csv");
        assert!(matches!(read_trajectory_csv(&missing), Err(Error::Csv { .. })));
    }

    #[test]
    fn saved_estimate_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.json");
        let saved = SavedEstimate {
            level: 1,
            degree: 2,
            interval: Interval::unit(),
            kind: EstimatorKind::Truncated,
            coefficients: vec![0.1, -0.2, 0.3, 1.0 / 3.0],
        };
        saved.save(&path).unwrap();
        assert_eq!(SavedEstimate::load(&path).unwrap(), saved);
        let mut short = saved.clone();
        short.coefficients.pop();
        assert!(short.curve(10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn trajectory_csv_round_trips(
            xs in proptest::collection::vec(-1e6f64..1e6, 2..60),
            delta in prop_oneof![Just(0.1f64), Just(0.01), 1e-3f64..2.0],
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("traj.csv");
            let traj = Trajectory::new(xs.clone(), delta, 1, None).unwrap();
            write_trajectory_csv(&traj, &path).unwrap();
            let back = read_trajectory_csv(&path).unwrap();
            prop_assert_eq!(back.observations(), &xs[..]);
            prop_assert!((back.delta() - delta).abs() <= 1e-12 * delta);
        }
    }
}
