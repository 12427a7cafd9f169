//! MatrixMarket reader/writer.
//!
//! Reads `coordinate` (real, integer or pattern; general or symmetric) and
//! `array` (real or integer, general) files. Sparse matrices are written as
//! `coordinate real general` with 1-based indices; dense matrices as
//! `array real general` in column-major order. Values are written in the
//! shortest form that parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetric: bool,
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let err = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: msg.to_string(),
    };
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err("expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(&format!("unsupported format '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if layout == Layout::Coordinate => Field::Pattern,
        other => return Err(err(&format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" if layout == Layout::Coordinate => true,
        other => return Err(err(&format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header {
        layout,
        field,
        symmetric,
    })
}

/// Parsed entries with the 1-based source line each came from.
pub(crate) struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64, usize)>,
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("invalid {what} '{tok}'"),
    })
}

pub(crate) fn read_raw(path: &Path) -> Result<RawMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = parse_header(path, first)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = body.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "missing size line".into(),
    })?;
    let mut tok = size.split_whitespace();
    let rows: usize = parse_num(path, size_line, tok.next(), "row count")?;
    let cols: usize = parse_num(path, size_line, tok.next(), "column count")?;

    let mut entries = Vec::new();
    match header.layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(path, size_line, tok.next(), "entry count")?;
            entries.reserve(nnz);
            for (ln, l) in body.by_ref() {
                let mut tok = l.split_whitespace();
                let i: usize = parse_num(path, ln, tok.next(), "row index")?;
                let j: usize = parse_num(path, ln, tok.next(), "column index")?;
                let v: f64 = match header.field {
                    Field::Pattern => 1.0,
                    Field::Real => parse_num(path, ln, tok.next(), "value")?,
                };
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: ln,
                        msg: format!("index ({i}, {j}) outside {rows}x{cols}"),
                    });
                }
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: ln,
                        msg: format!("non-finite value {v}"),
                    });
                }
                entries.push((i - 1, j - 1, v, ln));
                if header.symmetric && i != j {
                    entries.push((j - 1, i - 1, v, ln));
                }
            }
            let declared = entries.iter().filter(|e| !header.symmetric || e.0 >= e.1).count();
            if declared != nnz {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: size_line,
                    msg: format!("declared {nnz} entries, found {declared}"),
                });
            }
        }
        Layout::Array => {
            let mut k = 0usize;
            for (ln, l) in body.by_ref() {
                for t in l.split_whitespace() {
                    let v: f64 = parse_num(path, ln, Some(t), "value")?;
                    if k >= rows * cols {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: ln,
                            msg: "more values than rows*cols".into(),
                        });
                    }
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: ln,
                            msg: format!("non-finite value {v}"),
                        });
                    }
                    // column-major
                    entries.push((k % rows, k / rows, v, ln));
                    k += 1;
                }
            }
            if k != rows * cols {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: size_line,
                    msg: format!("expected {} values, found {k}", rows * cols),
                });
            }
        }
    }
    Ok(RawMatrix {
        rows,
        cols,
        entries,
    })
}

fn raw_to_sparse(path: &Path, raw: RawMatrix) -> Result<SparseMatrix> {
    let mut sorted: Vec<_> = raw.entries;
    sorted.sort_by_key(|e| (e.0, e.1));
    if let Some(w) = sorted.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: w[1].3,
            msg: format!("duplicate entry ({}, {})", w[1].0 + 1, w[1].1 + 1),
        });
    }
    SparseMatrix::from_triplets(
        raw.rows,
        raw.cols,
        sorted.into_iter().map(|(i, j, v, _)| (i, j, v)).collect(),
    )
}

/// Reads any supported MatrixMarket file as a sparse matrix.
pub fn read_sparse(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    raw_to_sparse(path, read_raw(path)?)
}

/// Reads a relationship matrix, rejecting negative entries with their
/// source line.
pub fn read_relation(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    if let Some(&(row, col, value, line)) = raw.entries.iter().find(|e| e.2 < 0.0) {
        return Err(Error::NegativeEntry {
            path: path.to_path_buf(),
            line,
            row: row + 1,
            col: col + 1,
            value,
        });
    }
    raw_to_sparse(path, raw)
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    Ok(read_sparse(path)?.to_dense())
}

pub fn sparse_to_string(m: &SparseMatrix) -> String {
    let mut s = String::with_capacity(32 * m.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for (i, j, v) in m.triplets() {
        let _ = writeln!(s, "{} {} {:?}", i + 1, j + 1, v);
    }
    s
}

pub fn dense_to_string(m: &DenseMatrix) -> String {
    let mut s = String::with_capacity(24 * m.rows() * m.cols() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let _ = writeln!(s, "{:?}", m[(i, j)]);
        }
    }
    s
}

pub fn write_sparse(path: impl AsRef<Path>, m: &SparseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, sparse_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn write_dense(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dense_to_string(m)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_coordinate_general() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.mtx",
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 2\n1 1 0.5\n2 3 4\n",
        );
        let m = read_sparse(&p).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.get(0, 0), 0.5);
        assert_eq!(m.get(1, 2), 4.0);
    }

    #[test]
    fn reads_symmetric_and_pattern() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.mtx",
            "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 3\n",
        );
        let m = read_sparse(&p).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 1.0);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "bad.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 x 1.0\n",
        );
        match read_sparse(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(
            dir.path(),
            "dup.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
        );
        assert!(matches!(read_sparse(&p), Err(Error::Parse { line: 4, .. })));
        let p = write(
            dir.path(),
            "count.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n",
        );
        assert!(matches!(read_sparse(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_relation_entry_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "neg.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 1 -1.0\n",
        );
        match read_relation(&p) {
            Err(Error::NegativeEntry {
                line, row, col, value, ..
            }) => {
                assert_eq!((line, row, col, value), (4, 2, 1, -1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, 0.1), (2, 0, 1.0 / 3.0), (1, 1, 1e-300), (2, 1, 12345.678)],
        )
        .unwrap();
        let p = dir.path().join("s.mtx");
        write_sparse(&p, &s).unwrap();
        let back = read_sparse(&p).unwrap();
        assert_eq!(back, s);

        let d = DenseMatrix::from_fn(3, 2, |i, j| (i as f64 + 1.0) / (j as f64 + 7.0));
        let p = dir.path().join("d.mtx");
        write_dense(&p, &d).unwrap();
        assert_eq!(read_dense(&p).unwrap(), d);
    }
}
