//! CSV dump of the regression blocks, one file per matrix.

use std::path::{Path as FsPath, PathBuf};

use super::regression::RegressionData;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Real;

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn kron_header(a: &str, da: usize, b: &str, db: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(da * db);
    for i in 1..=da {
        for j in 1..=db {
            h.push(format!("{a}{i}*{b}{j}"));
        }
    }
    h
}

fn upper_header(a: &str, b: &str, n: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(n * (n + 1) / 2);
    for i in 1..=n {
        for j in i..=n {
            h.push(format!("{a}{i}*{b}{j}"));
        }
    }
    h
}

fn write_block<T: Real>(
    path: &FsPath,
    times: &[T],
    header: Vec<String>,
    m: &Matrix<T>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut head = vec!["t".to_string()];
    head.extend(header);
    w.write_record(&head).map_err(io)?;
    for (k, t) in times.iter().enumerate() {
        let mut rec = vec![t.as_f64().to_string()];
        rec.extend(m.row(k).iter().map(|v| v.as_f64().to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes every block of `data` into `dir` and returns the file paths.
pub fn write_regression_csv<T: Real>(
    data: &RegressionData<T>,
    dir: &FsPath,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let (n, m) = (data.n, data.m);
    let e = &data.error;
    let a = &data.average;
    let mut blocks: Vec<(&str, Vec<String>, &Matrix<T>)> = vec![
        ("delta_xt_xt", kron_header("xt", n, "xt", n), &e.d_xx),
        ("delta_colv_xt", upper_header("xt", "xt", n), &e.d_colv),
        ("int_xt_xt", kron_header("xt", n, "xt", n), &e.i_xx),
        ("int_xt_ut", kron_header("xt", n, "ut", m), &e.i_xu),
        ("delta_xb_xb", kron_header("xb", n, "xb", n), &a.d_xx),
        ("int_xb_xb", kron_header("xb", n, "xb", n), &a.i_xx),
        ("int_xb_ub", kron_header("xb", n, "ub", m), &a.i_xu),
    ];
    if let Some(c) = &data.cross {
        blocks.extend([
            ("delta_hat", upper_header("xt", "xb", n), &c.d_hat),
            ("int_xt_xb", kron_header("xt", n, "xb", n), &c.i_tb),
            ("int_xb_xt", kron_header("xb", n, "xt", n), &c.i_bt),
            ("int_xt_ub", kron_header("xt", n, "ub", m), &c.i_t_ub),
            ("int_xb_ut", kron_header("xb", n, "ut", m), &c.i_b_ut),
        ]);
    }
    let mut files = Vec::with_capacity(blocks.len());
    for (name, header, mat) in blocks {
        let p = dir.join(format!("{name}.csv"));
        write_block(&p, &data.times, header, mat)?;
        files.push(p);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{build_regression_data, SamplingPlan};
    use crate::population::{ExpectationPaths, Path, TimeGrid};

    #[test]
    fn writes_one_file_per_block() {
        let g = TimeGrid::<f64>::covering(1.0, 0.1).unwrap();
        let x = Path::from_fn(g, 2, |t: f64| vec![t, 1.0]).unwrap();
        let u = Path::from_fn(g, 1, |t: f64| vec![-t]).unwrap();
        let paths = ExpectationPaths::new(x.clone(), u.clone(), x, u).unwrap();
        let d =
            build_regression_data(&paths, &SamplingPlan::new(0.0, 3, 0.1, 0.2), 0.1, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_regression_csv(&d, dir.path()).unwrap();
        assert_eq!(files.len(), 12);
        let text = std::fs::read_to_string(dir.path().join("delta_colv_xt.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,xt1*xt1,xt1*xt2,xt2*xt2");
        assert_eq!(lines.count(), 3);
    }
}
