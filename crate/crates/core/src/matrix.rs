//! Sparse matrix ingestion: Matrix Market coordinate files, COO and CSR.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Coordinate-format matrix. Entries are kept sorted by `(row, col)` with
/// duplicates summed, so two matrices with the same entry set compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    /// Build from arbitrary triplets: bounds are checked, entries sorted and
    /// duplicate coordinates summed. Explicit zeros are kept.
    pub fn new(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(row, col, _)) = entries.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(Error::OutOfBounds { row, col, n_rows, n_cols });
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Ok(CooMatrix { n_rows, n_cols, entries: merged })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CooMatrix { n_rows: n, n_cols: n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Sorted `(row, col, value)` triplets.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.n_rows)
        } else {
            Err(Error::NotSquare { rows: self.n_rows, cols: self.n_cols })
        }
    }
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }
}

pub fn coo_to_csr(m: &CooMatrix) -> CsrMatrix {
    let mut row_ptr = vec![0usize; m.n_rows + 1];
    for &(r, _, _) in &m.entries {
        row_ptr[r + 1] += 1;
    }
    for i in 0..m.n_rows {
        row_ptr[i + 1] += row_ptr[i];
    }
    // entries are already sorted by (row, col)
    CsrMatrix {
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        row_ptr,
        col_idx: m.entries.iter().map(|e| e.1).collect(),
        values: m.entries.iter().map(|e| e.2).collect(),
    }
}

pub fn csr_to_coo(m: &CsrMatrix) -> CooMatrix {
    let entries = (0..m.n_rows)
        .flat_map(|r| m.row(r).map(move |(c, v)| (r, c, v)))
        .collect();
    CooMatrix { n_rows: m.n_rows, n_cols: m.n_cols, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str) -> Result<(Field, Symmetry)> {
    let err = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(err("header must start with %%MatrixMarket"));
    }
    if tokens.len() != 5 {
        return Err(err("header must be '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[1] != "matrix" {
        return Err(Error::Unsupported(format!("object '{}'", tokens[1])));
    }
    match tokens[2].as_str() {
        "coordinate" => {}
        "array" => return Err(Error::Unsupported("dense 'array' matrices".into())),
        other => return Err(err(&format!("unknown format '{other}'"))),
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => return Err(Error::Unsupported("complex field".into())),
        other => return Err(err(&format!("unknown field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" | "hermitian" => {
            return Err(Error::Unsupported(format!("symmetry '{}'", tokens[4])))
        }
        other => return Err(err(&format!("unknown symmetry '{other}'"))),
    };
    Ok((field, symmetry))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?;
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("invalid {what} '{tok}'") })
}

/// Parse a Matrix Market coordinate file. Symmetric storage is expanded to
/// general, pattern entries get value 1.0, indices become 0-based and
/// duplicate coordinates are summed.
pub fn parse_matrix_market<R: BufRead>(source: R) -> Result<CooMatrix> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
    let (field, symmetry) = parse_header(&header?)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    let mut stored = 0usize;
    let mut last_line = 1;
    for (lineno, line) in lines {
        let line = line?;
        last_line = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        let Some((n_rows, n_cols, nnz)) = size else {
            let dims = (
                parse_num(tok.next(), lineno, "row count")?,
                parse_num(tok.next(), lineno, "column count")?,
                parse_num(tok.next(), lineno, "entry count")?,
            );
            if tok.next().is_some() {
                return Err(Error::Parse { line: lineno, msg: "size line must have 3 fields".into() });
            }
            entries.reserve(if symmetry == Symmetry::Symmetric { 2 * dims.2 } else { dims.2 });
            size = Some(dims);
            continue;
        };
        if stored >= nnz {
            return Err(Error::Parse { line: lineno, msg: format!("more than {nnz} entries") });
        }
        let i: usize = parse_num(tok.next(), lineno, "row index")?;
        let j: usize = parse_num(tok.next(), lineno, "column index")?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real => parse_num::<f64>(tok.next(), lineno, "value")?,
            Field::Integer => parse_num::<i64>(tok.next(), lineno, "value")? as f64,
        };
        if tok.next().is_some() {
            return Err(Error::Parse { line: lineno, msg: "trailing fields after entry".into() });
        }
        if i == 0 || j == 0 || i > n_rows || j > n_cols {
            return Err(Error::OutOfBounds {
                row: i.wrapping_sub(1),
                col: j.wrapping_sub(1),
                n_rows,
                n_cols,
            });
        }
        let (r, c) = (i - 1, j - 1);
        stored += 1;
        entries.push((r, c, v));
        if symmetry == Symmetry::Symmetric && r != c {
            entries.push((c, r, v));
        }
    }

    let (n_rows, n_cols, nnz) =
        size.ok_or(Error::Parse { line: last_line, msg: "missing size line".into() })?;
    if stored != nnz {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("expected {nnz} entries, found {stored}"),
        });
    }
    CooMatrix::new(n_rows, n_cols, entries)
}

/// Write `m` as a general real coordinate Matrix Market file. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_matrix_market<W: Write>(m: &CooMatrix, mut sink: W) -> Result<()> {
    writeln!(sink, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(sink, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
    for &(r, c, v) in &m.entries {
        writeln!(sink, "{} {} {}", r + 1, c + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<CooMatrix> {
        parse_matrix_market(s.as_bytes())
    }

    #[test]
    fn general_real() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3.0\n2 2 4.0\n").unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 2));
        assert_eq!(m.entries(), &[(0, 0, 3.0), (1, 1, 4.0)]);
    }

    #[test]
    fn symmetric_is_mirrored() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 1 5.0\n").unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.entries(), &[(0, 0, 1.0), (0, 1, 5.0), (1, 0, 5.0)]);
    }

    #[test]
    fn pattern_gets_unit_values() {
        let m = parse("%%MatrixMarket matrix coordinate pattern general\n% comment\n3 3 1\n3 1\n").unwrap();
        assert_eq!(m.entries(), &[(2, 0, 1.0)]);
    }

    #[test]
    fn integer_field_and_duplicates() {
        let m = parse("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 2 2\n1 2 5\n2 1 -1\n").unwrap();
        assert_eq!(m.entries(), &[(0, 1, 7.0), (1, 0, -1.0)]);
    }

    #[test]
    fn explicit_zero_is_kept() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 0.0\n").unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn malformed_header_names_line() {
        match parse("%%MatrixMarket matrix coordinate\n1 1 0\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n"),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn unsupported_variants() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n1 1\n1.0\n"),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn entry_count_checked() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1.0\n2 1 1.0\n"),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn rectangular_parses() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 3 1.0\n").unwrap();
        assert!(!m.is_square());
        assert!(matches!(m.ensure_square(), Err(Error::NotSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn csr_of_empty_and_identity() {
        assert_eq!(coo_to_csr(&CooMatrix::zeros(3, 3)).row_ptr, vec![0, 0, 0, 0]);
        let id = coo_to_csr(&CooMatrix::identity(3));
        assert_eq!(id.row_ptr, vec![0, 1, 2, 3]);
        assert_eq!(id.col_idx, vec![0, 1, 2]);
    }

    #[test]
    fn write_then_parse() {
        let m = CooMatrix::new(3, 3, vec![(0, 2, 0.1), (2, 0, -1e-300), (1, 1, 1.0 / 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        assert_eq!(parse_matrix_market(buf.as_slice()).unwrap(), m);
    }
}
