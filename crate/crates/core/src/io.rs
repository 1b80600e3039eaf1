//! File formats: CSV for data matrices and trajectories, JSON for models.
//!
//! Data matrices are headerless comma-separated doubles, one sample per
//! line. Trajectory files carry a header row (`t,phi_1,...` in latent space,
//! `t,x_1,...` in ambient space). Floats are written with Rust's shortest
//! round-trip formatting, so a write/read cycle is lossless. Models are JSON
//! with matrices as nested arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::latent_harmonics::{LHModel, MinMaxScaler};
use crate::ode::{Space, Trajectory};

fn parse_line(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|e| Error::Csv {
                line: line_no,
                message: format!("{e}: {tok:?}"),
            })
        })
        .collect()
}

/// Read a headerless CSV of doubles into a matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_line(&line, i + 1)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Csv {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            line: 0,
            message: "empty file".into(),
        });
    }
    let (n, m) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, m), flat).expect("consistent row lengths"))
}

/// Write a matrix as headerless CSV (LF line endings).
pub fn write_matrix_csv(path: &Path, matrix: &ArrayView2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in matrix.axis_iter(Axis(0)) {
        let mut first = true;
        for v in row.iter() {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a trajectory with its header row.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let prefix = match traj.space {
        Space::Latent => "phi",
        Space::Ambient => "x",
    };
    write!(w, "t")?;
    for c in 1..=traj.dim() {
        write!(w, ",{prefix}_{c}")?;
    }
    w.write_all(b"\n")?;
    for (i, &t) in traj.times.iter().enumerate() {
        write!(w, "{t}")?;
        for v in traj.states.row(i).iter() {
            write!(w, ",{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory CSV (header required, first column `t`).
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::Csv {
                line: 0,
                message: "empty trajectory file".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            message: "trajectory header must start with `t` and one state column".into(),
        });
    }
    let space = if cols[1].starts_with("phi") {
        Space::Latent
    } else {
        Space::Ambient
    };

    let mut times = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_line(&line, i + 1)?;
        if row.len() != cols.len() {
            return Err(Error::Csv {
                line: i + 1,
                message: format!("expected {} columns, found {}", cols.len(), row.len()),
            });
        }
        times.push(row[0]);
        rows.push(row[1..].to_vec());
    }
    let dim = cols.len() - 1;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let states = Array2::from_shape_vec((times.len(), dim), flat).expect("consistent rows");
    Ok(Trajectory {
        times,
        states,
        space,
    })
}

fn matrix_to_nested(m: &ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

fn nested_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("{what}: empty matrix")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidData(format!("{what}: ragged matrix rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("checked shape"))
}

/// On-disk schema of a diffusion-map model.
#[derive(Serialize, Deserialize)]
struct DMapModelFile {
    kernel: KernelConfig,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    selected: Vec<usize>,
    residuals: Vec<f64>,
    training_data: Vec<Vec<f64>>,
}

pub fn save_dmap_model(path: &Path, model: &DMapModel) -> Result<()> {
    let file = DMapModelFile {
        kernel: model.kernel,
        eigenvalues: model.eigenvalues.to_vec(),
        eigenvectors: matrix_to_nested(&model.eigenvectors.view()),
        selected: model.selected.clone(),
        residuals: model.residuals.clone(),
        training_data: matrix_to_nested(&model.training_data.view()),
    };
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn load_dmap_model(path: &Path) -> Result<DMapModel> {
    let r = BufReader::new(File::open(path)?);
    let file: DMapModelFile = serde_json::from_reader(r)?;
    file.kernel.validate()?;
    let eigenvectors = nested_to_matrix(&file.eigenvectors, "eigenvectors")?;
    let training_data = nested_to_matrix(&file.training_data, "training_data")?;
    if eigenvectors.nrows() != training_data.nrows() {
        return Err(Error::InvalidData(
            "eigenvector rows do not match training samples".into(),
        ));
    }
    if file.eigenvalues.len() != eigenvectors.ncols() {
        return Err(Error::InvalidData(
            "eigenvalue count does not match eigenvector columns".into(),
        ));
    }
    if file
        .selected
        .iter()
        .any(|&j| j == 0 || j > file.eigenvalues.len())
    {
        return Err(Error::InvalidData("selected index out of range".into()));
    }
    Ok(DMapModel {
        training_data,
        kernel: file.kernel,
        eigenvalues: Array1::from(file.eigenvalues),
        eigenvectors,
        selected: file.selected,
        residuals: file.residuals,
    })
}

/// On-disk schema of a latent-harmonics model.
#[derive(Serialize, Deserialize)]
struct LHModelFile {
    epsilon2: f64,
    latent_train: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    psi: Vec<Vec<f64>>,
    coeffs: Vec<Vec<f64>>,
    scaler_min: Vec<f64>,
    scaler_span: Vec<f64>,
}

pub fn save_lh_model(path: &Path, model: &LHModel) -> Result<()> {
    let file = LHModelFile {
        epsilon2: model.epsilon2,
        latent_train: matrix_to_nested(&model.latent_train.view()),
        sigma: model.sigma.to_vec(),
        psi: matrix_to_nested(&model.psi.view()),
        coeffs: matrix_to_nested(&model.coeffs.view()),
        scaler_min: model.scaler.min.clone(),
        scaler_span: model.scaler.span.clone(),
    };
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn load_lh_model(path: &Path) -> Result<LHModel> {
    let r = BufReader::new(File::open(path)?);
    let file: LHModelFile = serde_json::from_reader(r)?;
    let latent_train = nested_to_matrix(&file.latent_train, "latent_train")?;
    let psi = nested_to_matrix(&file.psi, "psi")?;
    let coeffs = nested_to_matrix(&file.coeffs, "coeffs")?;
    if psi.nrows() != latent_train.nrows() {
        return Err(Error::InvalidData(
            "psi rows do not match latent training points".into(),
        ));
    }
    if file.sigma.len() != psi.ncols() || coeffs.nrows() != psi.ncols() {
        return Err(Error::InvalidData(
            "sigma/coefficient shapes do not match psi".into(),
        ));
    }
    if file.scaler_min.len() != coeffs.ncols() || file.scaler_span.len() != coeffs.ncols() {
        return Err(Error::InvalidData("scaler length mismatch".into()));
    }
    if !(file.epsilon2.is_finite() && file.epsilon2 > 0.0) {
        return Err(Error::InvalidData("epsilon2 must be positive".into()));
    }
    Ok(LHModel {
        latent_train,
        epsilon2: file.epsilon2,
        sigma: Array1::from(file.sigma),
        psi,
        coeffs,
        scaler: MinMaxScaler {
            min: file.scaler_min,
            span: file.scaler_span,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn matrix_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = array![[1.5, -2.25e-7], [0.0, 3.0], [f64::MIN_POSITIVE, 1e300]];
        write_matrix_csv(&path, &m.view()).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn trajectory_round_trip_preserves_space() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = Trajectory {
            times: vec![0.0, 0.1, 0.25],
            states: array![[0.0, 1.0], [0.5, 0.9], [0.9, 0.7]],
            space: Space::Latent,
        };
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!(back.space, Space::Latent);
        assert_eq!(back.times, traj.times);
        assert_eq!(back.states, traj.states);

        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("t,phi_1,phi_2\n"));
    }

    #[test]
    fn malformed_csv_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CSV error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip_is_lossless(
            values in proptest::collection::vec(-1e12f64..1e12, 6..24)
        ) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            let n = values.len() / 3;
            let m = Array2::from_shape_vec((n, 3), values[..n * 3].to_vec()).unwrap();
            write_matrix_csv(&path, &m.view()).unwrap();
            let back = read_matrix_csv(&path).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
