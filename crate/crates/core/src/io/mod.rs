//! File formats: MatrixMarket matrices, CSV vectors and tables, problem bundles.
//!
//! A bundle is a directory holding `A.mtx`, `b.csv`, optional `b0.csv` and
//! `x_true.csv`, and `metadata.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{DenseMatrix, LinearOperator, NoiseModel, SparseMatrix};
use crate::problems::{Problem, ProblemMetadata};
use crate::regularizer::LKind;
use crate::scalar::Scalar;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn parse_num<T: Scalar>(s: &str, what: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: cannot read `{s}` as a number")))?;
    T::from_f64(v).ok_or_else(|| Error::Parse(format!("{what}: `{s}` out of range")))
}

/// Writes the nonzeros of `a` in MatrixMarket coordinate format. Entries are
/// found column by column through forward applications.
pub fn write_matrix_market<T: Scalar, O: LinearOperator<T> + ?Sized>(path: &Path, a: &O) -> Result<()> {
    let (m, n) = (a.rows(), a.cols());
    let mut entries = Vec::new();
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); m];
    for j in 0..n {
        e[j] = T::one();
        a.forward_into(&e, &mut col);
        e[j] = T::zero();
        for (i, &v) in col.iter().enumerate() {
            if v != T::zero() {
                entries.push((i, j, v));
            }
        }
    }
    write_triplets(path, m, n, &entries)
}

pub fn write_triplets<T: Scalar>(path: &Path, rows: usize, cols: usize, entries: &[(usize, usize, T)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{rows} {cols} {}", entries.len())?;
    for &(i, j, v) in entries {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v.as_f64())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a real MatrixMarket file, coordinate (general or symmetric) or array.
pub fn read_matrix_market<T: Scalar>(path: &Path) -> Result<SparseMatrix<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("MatrixMarket: empty file".into()))??
        .to_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse(format!("MatrixMarket: bad header `{header}`")));
    }
    let array = match fields[2] {
        "coordinate" => false,
        "array" => true,
        f => return Err(Error::Parse(format!("MatrixMarket: unsupported format `{f}`"))),
    };
    if !matches!(fields[3], "real" | "integer" | "double") {
        return Err(Error::Parse(format!("MatrixMarket: unsupported field `{}`", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::Parse(format!("MatrixMarket: unsupported symmetry `{s}`"))),
    };
    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(t.to_string());
    }
    let mut it = body.iter();
    let size_line = it.next().ok_or_else(|| Error::Parse("MatrixMarket: missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("MatrixMarket: bad size line `{size_line}`"))))
        .collect::<Result<_>>()?;
    let mut triplets = Vec::new();
    if array {
        if dims.len() != 2 {
            return Err(Error::Parse(format!("MatrixMarket: bad size line `{size_line}`")));
        }
        let (m, n) = (dims[0], dims[1]);
        let values: Vec<T> = it.map(|s| parse_num(s, "MatrixMarket")).collect::<Result<_>>()?;
        if values.len() != m * n {
            return Err(Error::Parse(format!("MatrixMarket: expected {} values, got {}", m * n, values.len())));
        }
        for j in 0..n {
            for i in 0..m {
                let v = values[j * m + i];
                if v != T::zero() {
                    triplets.push((i, j, v));
                }
            }
        }
        return SparseMatrix::from_triplets(m, n, &triplets);
    }
    if dims.len() != 3 {
        return Err(Error::Parse(format!("MatrixMarket: bad size line `{size_line}`")));
    }
    let (m, n, nnz) = (dims[0], dims[1], dims[2]);
    for line in it {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("MatrixMarket: bad entry `{line}`")));
        }
        let idx = |s: &str, bound: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(k) if k >= 1 && k <= bound => Ok(k - 1),
                _ => Err(Error::Parse(format!("MatrixMarket: index `{s}` out of range in `{line}`"))),
            }
        };
        let (i, j) = (idx(f[0], m)?, idx(f[1], n)?);
        let v: T = parse_num(f[2], "MatrixMarket")?;
        triplets.push((i, j, v));
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::Parse(format!("MatrixMarket: header announces {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(m, n, &triplets)
}

/// One value per row under a single header.
pub fn write_vector_csv<T: Scalar>(path: &Path, header: &str, v: &[T]) -> Result<()> {
    write_columns_csv(path, &[header], &[v])
}

/// Reads the first column of a CSV file with a header row.
pub fn read_vector_csv<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = rec.get(0).ok_or_else(|| Error::Parse("empty CSV row".into()))?;
        out.push(parse_num(field, "CSV")?);
    }
    Ok(out)
}

/// Columns of equal length under the given headers.
pub fn write_columns_csv<T: Scalar>(path: &Path, headers: &[&str], columns: &[&[T]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::InvalidParameter {
            name: "headers",
            reason: format!("{} headers for {} columns", headers.len(), columns.len()),
        });
    }
    let len = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidParameter {
            name: "columns",
            reason: "columns differ in length".into(),
        });
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(headers).map_err(csv_err)?;
    for i in 0..len {
        w.write_record(columns.iter().map(|c| format!("{:e}", c[i].as_f64())))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Header-less dense matrix, one row per line.
pub fn write_matrix_csv<T: Scalar>(path: &Path, a: &DenseMatrix<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    for i in 0..a.rows() {
        w.write_record(a.row(i).iter().map(|v| format!("{:e}", v.as_f64())))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<T: Scalar>(path: &Path) -> Result<DenseMatrix<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(rec.iter().map(|s| parse_num(s, "CSV")).collect::<Result<Vec<T>>>()?);
    }
    DenseMatrix::from_rows(&rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct BundleMeta<T: Scalar> {
    schema_version: u32,
    metadata: ProblemMetadata,
    noise: NoiseModel<T>,
    default_l: Option<LKind>,
}

/// Writes `problem` into `dir`, creating it if needed.
pub fn write_bundle<T: Scalar>(dir: &Path, problem: &Problem<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_market(&dir.join("A.mtx"), &*problem.a)?;
    write_vector_csv(&dir.join("b.csv"), "b", &problem.b)?;
    if let Some(b0) = &problem.b0 {
        write_vector_csv(&dir.join("b0.csv"), "b0", b0)?;
    }
    if let Some(x) = &problem.x_true {
        write_vector_csv(&dir.join("x_true.csv"), "x_true", x)?;
    }
    let meta = BundleMeta {
        schema_version: BUNDLE_SCHEMA_VERSION,
        metadata: problem.metadata.clone(),
        noise: problem.noise.clone(),
        default_l: problem.default_l,
    };
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_bundle<T: Scalar>(dir: &Path) -> Result<Problem<T>> {
    let meta: BundleMeta<T> = serde_json::from_str(&fs::read_to_string(dir.join("metadata.json"))?)?;
    if meta.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "bundle schema version {} is not supported (expected {BUNDLE_SCHEMA_VERSION})",
            meta.schema_version
        )));
    }
    let a: SparseMatrix<T> = read_matrix_market(&dir.join("A.mtx"))?;
    let b = read_vector_csv(&dir.join("b.csv"))?;
    let optional = |name: &str| -> Result<Option<Vec<T>>> {
        let p = dir.join(name);
        if p.exists() {
            Ok(Some(read_vector_csv(&p)?))
        } else {
            Ok(None)
        }
    };
    let mut problem = Problem::with_noise(Arc::new(a), b, meta.noise)?;
    problem.b0 = optional("b0.csv")?;
    problem.x_true = optional("x_true.csv")?;
    problem.default_l = meta.default_l;
    problem.metadata = meta.metadata;
    problem.validate()?;
    Ok(problem)
}
