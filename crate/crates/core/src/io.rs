//! Reading and writing datasets, observed-entry files and model files.
//!
//! Dense data is comma-separated with the label in the last column. Sparse
//! matrices use one `row col value` triplet per line, 0-based, whitespace
//! separated. Numbers are written in Rust's shortest round-trip form, so
//! write-then-read reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::attack::{LabeledSample, LinearModel};
use crate::error::{Error, Result};
use crate::mc::PartialMatrix;
use crate::nn::TwoLayerNet;
use crate::trainer::{Family, Params};

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<Vec<f64>> {
    record
        .iter()
        .map(|field| {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {field:?}"),
                })
            }
        })
        .collect()
}

/// Rows of a numeric CSV file, all of the same width.
pub fn read_rows(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = parse_row(&record, line)?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

/// Labeled samples: features first, label in the last column.
pub fn load_dense(path: &Path, has_header: bool) -> Result<Vec<LabeledSample>> {
    let rows = read_rows(path, has_header)?;
    if rows[0].len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "need at least one feature and a label".into(),
        });
    }
    Ok(rows
        .into_iter()
        .map(|mut r| {
            let y = r.pop().expect("checked width");
            LabeledSample::new(DVector::from_vec(r), y)
        })
        .collect())
}

/// Unlabeled points: every column is a coordinate.
pub fn load_points(path: &Path, has_header: bool) -> Result<Vec<DVector<f64>>> {
    Ok(read_rows(path, has_header)?.into_iter().map(DVector::from_vec).collect())
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_dense(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    write_lines(path, samples.iter().map(|s| join(s.x.iter().copied().chain([s.y]))))
}

pub fn write_points(path: &Path, points: &[DVector<f64>]) -> Result<()> {
    write_lines(path, points.iter().map(|p| join(p.iter().copied())))
}

/// Observed entries. Without `shape`, the matrix is as small as the indices allow.
pub fn load_sparse(path: &Path, shape: Option<(usize, usize)>) -> Result<PartialMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut raw = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: k + 1, msg };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected `row col value`, got {text:?}")));
        }
        let i: i64 = fields[0].parse().map_err(|_| bad(format!("bad row index {:?}", fields[0])))?;
        let j: i64 = fields[1].parse().map_err(|_| bad(format!("bad column index {:?}", fields[1])))?;
        let v: f64 = fields[2].parse().map_err(|_| bad(format!("bad value {:?}", fields[2])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {:?}", fields[2])));
        }
        raw.push((i, j, v));
    }
    let (rows, cols) = shape.unwrap_or_else(|| {
        raw.iter().fold((0, 0), |(r, c), &(i, j, _)| {
            (r.max(i.max(0) as usize + 1), c.max(j.max(0) as usize + 1))
        })
    });
    let mut entries = Vec::with_capacity(raw.len());
    for (i, j, v) in raw {
        if i < 0 || j < 0 || i as usize >= rows || j as usize >= cols {
            return Err(Error::IndexOutOfRange { row: i, col: j, rows, cols });
        }
        entries.push((i as usize, j as usize, v));
    }
    PartialMatrix::new(rows, cols, entries)
}

/// Triplets in row-major order.
pub fn write_sparse(path: &Path, m: &PartialMatrix) -> Result<()> {
    write_lines(path, m.entries().iter().map(|&(i, j, v)| format!("{i} {j} {v}")))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_lines(path, m.row_iter().map(|r| join(r.iter().copied())))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_rows(path, false)?;
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Model files: linear weights as one row; a network as one row per hidden
/// unit, `W_i` followed by `v_i`; GGM and completion models as dense matrices.
pub fn save_params(path: &Path, params: &Params) -> Result<()> {
    match params {
        Params::Linear(m) => write_lines(path, [join(m.w.iter().copied())]),
        Params::Net(n) => write_lines(
            path,
            (0..n.hidden()).map(|i| join(n.w.row(i).iter().copied().chain([n.v[i]]))),
        ),
        Params::Precision(m) | Params::Completion(m) => write_matrix(path, m),
    }
}

pub fn load_params(path: &Path, family: Family) -> Result<Params> {
    let m = load_matrix(path)?;
    match family {
        Family::SquaredRegression | Family::Logistic | Family::Hinge => {
            if m.nrows() != 1 {
                return Err(Error::Parse {
                    line: 2,
                    msg: "a linear model is a single row of weights".into(),
                });
            }
            Ok(Params::Linear(LinearModel::new(m.row(0).transpose())))
        }
        Family::TwoLayerNN { activation, .. } => {
            if m.ncols() < 2 {
                return Err(Error::Parse {
                    line: 1,
                    msg: "a network row holds W_i and v_i".into(),
                });
            }
            let d = m.ncols() - 1;
            let w = m.columns(0, d).into_owned();
            let v = m.column(d).into_owned();
            Ok(Params::Net(TwoLayerNet::new(w, v, activation)?))
        }
        Family::Ggm => Ok(Params::Precision(m)),
        Family::MatrixCompletion | Family::MaxMarginMC => Ok(Params::Completion(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn temp_with(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn dense_examples() {
        let f = temp_with("1,2,0.5\n3,4,1.5\n");
        let s = load_dense(f.path(), false).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].x.as_slice(), &[3.0, 4.0]);
        assert_eq!(s[1].y, 1.5);

        let f = temp_with("");
        assert!(matches!(load_dense(f.path(), false), Err(Error::EmptyDataset)));

        let f = temp_with("1,2,0.5\n3,inf,1.5\n");
        assert!(matches!(load_dense(f.path(), false), Err(Error::Parse { line: 2, .. })));

        let f = temp_with("a,b,y\n1,2,0.5\n");
        assert_eq!(load_dense(f.path(), true).unwrap().len(), 1);

        let f = temp_with("1,2,0.5\n3,1.5\n");
        assert!(matches!(load_dense(f.path(), false), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn sparse_examples() {
        let f = temp_with("0 0 1\n1 2 -1\n");
        let m = load_sparse(f.path(), None).unwrap();
        assert_eq!((m.rows(), m.cols(), m.len()), (2, 3, 2));

        let f = temp_with("0 0 1\n0 0 2\n");
        assert!(matches!(load_sparse(f.path(), None), Err(Error::DuplicateEntry(0, 0))));

        let f = temp_with("0 0 1\n-1 2 1\n");
        assert!(matches!(load_sparse(f.path(), None), Err(Error::IndexOutOfRange { row: -1, .. })));

        let f = temp_with("0 5 1\n");
        assert!(matches!(load_sparse(f.path(), Some((2, 2))), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let samples = vec![
            LabeledSample::new(DVector::from_column_slice(&[0.1 + 0.2, -1e-300, 123456.789]), 1.0 / 3.0),
            LabeledSample::new(DVector::from_column_slice(&[f64::MAX, f64::MIN_POSITIVE, -0.0]), -7.0),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dense(f.path(), &samples).unwrap();
        let back = load_dense(f.path(), false).unwrap();
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }

        let m = PartialMatrix::new(3, 4, vec![(2, 1, 0.1 + 0.7), (0, 3, -2.5e-17), (1, 0, 1.0)]).unwrap();
        write_sparse(f.path(), &m).unwrap();
        assert_eq!(fs::read_to_string(f.path()).unwrap().lines().next().unwrap(), "0 3 -0.000000000000000025");
        assert_eq!(load_sparse(f.path(), Some((3, 4))).unwrap(), m);
    }

    #[test]
    fn model_files() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let net = TwoLayerNet::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DVector::from_column_slice(&[0.5, -0.5]),
            crate::nn::ActivationKind::Tanh,
        )
        .unwrap();
        save_params(f.path(), &Params::Net(net.clone())).unwrap();
        let fam = Family::TwoLayerNN {
            activation: crate::nn::ActivationKind::Tanh,
            hidden: 2,
        };
        assert_eq!(load_params(f.path(), fam).unwrap(), Params::Net(net));

        let lin = Params::Linear(LinearModel::new(DVector::from_column_slice(&[0.25, -1.0])));
        save_params(f.path(), &lin).unwrap();
        assert_eq!(load_params(f.path(), Family::Logistic).unwrap(), lin);
    }
}
