//! Matrix Market coordinate format (`real`, `general` or `symmetric`).

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::csr::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Storage {
    General,
    /// Lower triangle only; the matrix must be symmetric.
    Symmetric,
}

pub fn write_matrix_market<T: Scalar, W: Write>(
    a: &SparseMatrix<T>,
    storage: Storage,
    mut out: W,
) -> Result<()> {
    let io = |e: std::io::Error| Error::MatrixMarket(e.to_string());
    let kind = match storage {
        Storage::General => "general",
        Storage::Symmetric => "symmetric",
    };
    let entries: Vec<(usize, usize, T)> = match storage {
        Storage::General => a.triplets().collect(),
        Storage::Symmetric => a.triplets().filter(|&(r, c, _)| c <= r).collect(),
    };
    let mut text = String::new();
    writeln!(text, "%%MatrixMarket matrix coordinate real {kind}").unwrap();
    writeln!(text, "{} {} {}", a.nrows(), a.ncols(), entries.len()).unwrap();
    for (r, c, v) in entries {
        writeln!(text, "{} {} {:.17e}", r + 1, c + 1, v.to_f64_lossy()).unwrap();
    }
    out.write_all(text.as_bytes()).map_err(io)
}

pub fn read_matrix_market<T: Scalar, R: BufRead>(input: R) -> Result<SparseMatrix<T>> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::MatrixMarket(format!("line {}: {msg}", line + 1));

    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))?;
    let header = header.map_err(|e| Error::MatrixMarket(e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(bad(ln, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(bad(ln, "only coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(bad(ln, "only real or integer fields are supported"));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(ln, &format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (ln, line) in lines {
        let line = line.map_err(|e| Error::MatrixMarket(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                let parsed: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse().map_err(|_| bad(ln, "invalid size line")))
                    .collect::<Result<_>>()?;
                if parsed.len() != 3 {
                    return Err(bad(ln, "size line needs rows, cols, entries"));
                }
                size = Some((parsed[0], parsed[1], parsed[2]));
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(bad(ln, "entry needs row, col, value"));
                }
                let r: usize = fields[0].parse().map_err(|_| bad(ln, "invalid row index"))?;
                let c: usize = fields[1].parse().map_err(|_| bad(ln, "invalid column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad(ln, "invalid value"))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(bad(ln, "index out of range"));
                }
                let v = T::lit(v);
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.1 <= t.0).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::MatrixMarket(format!(
            "declared {nnz} entries, found {stored}"
        )));
    }
    SparseMatrix::from_triplets(nr, nc, triplets)
}

pub fn save_matrix_market<T: Scalar>(
    a: &SparseMatrix<T>,
    storage: Storage,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| Error::MatrixMarket(format!("{}: {e}", path.as_ref().display())))?;
    write_matrix_market(a, storage, std::io::BufWriter::new(file))
}

pub fn load_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<SparseMatrix<T>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::MatrixMarket(format!("{}: {e}", path.as_ref().display())))?;
    read_matrix_market(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(
            3,
            3,
            [(0, 0, 2.0), (0, 2, -0.1), (1, 1, 1.0 / 3.0), (2, 0, -0.1), (2, 2, 5e9)],
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_general_and_symmetric() {
        for storage in [Storage::General, Storage::Symmetric] {
            let mut buf = Vec::new();
            write_matrix_market(&sample(), storage, &mut buf).unwrap();
            let back: SparseMatrix<f64> = read_matrix_market(buf.as_slice()).unwrap();
            assert_eq!(back, sample());
        }
    }

    #[test]
    fn symmetric_header_stores_lower_triangle() {
        let mut buf = Vec::new();
        write_matrix_market(&sample(), Storage::Symmetric, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n"));
    }

    #[test]
    fn malformed_inputs_rejected() {
        let cases = [
            "",
            "%%MatrixMarket matrix array real general\n1 1\n1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n",
        ];
        for c in cases {
            assert!(read_matrix_market::<f64, _>(c.as_bytes()).is_err(), "{c:?}");
        }
    }

    #[test]
    fn comments_are_skipped() {
        let text = "%%MatrixMarket matrix coordinate real general\n% note\n1 2 1\n% x\n1 2 4.5\n";
        let a: SparseMatrix<f64> = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.get(0, 1), 4.5);
    }
}
