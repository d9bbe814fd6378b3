//! Matrix Market coordinate format (`general` and `symmetric`, 1-based).

use super::{Scalar, SparseError, SparseMatrix};
use std::io::{BufRead, Write};

pub fn write_matrix_market<T: Scalar, W: Write>(
    m: &SparseMatrix<T>,
    mut w: W,
) -> Result<(), SparseError> {
    writeln!(w, "%%MatrixMarket matrix coordinate {} general", T::MM_FIELD)?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.iter() {
        writeln!(w, "{} {} {}", i + 1, j + 1, v.format_mm())?;
    }
    Ok(())
}

pub fn read_matrix_market<T: Scalar, R: BufRead>(r: R) -> Result<SparseMatrix<T>, SparseError> {
    let err = |line: usize, msg: String| SparseError::MatrixMarket { line, msg };
    let mut lines = r.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
    let header = header?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err(1, format!("bad header `{header}`")));
    }
    if words[2] != "coordinate" {
        return Err(err(1, format!("unsupported format `{}`", words[2])));
    }
    if words[3] != T::MM_FIELD {
        return Err(err(
            1,
            format!("field `{}` does not match `{}`", words[3], T::MM_FIELD),
        ));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(err(lineno, "expected `rows cols nnz`".into()));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| err(lineno, format!("bad integer `{s}`")))
                };
                size = Some((parse(tok[0])?, parse(tok[1])?, parse(tok[2])?));
            }
            Some((nrows, ncols, _)) => {
                if tok.len() != 2 + T::MM_TOKENS {
                    return Err(err(lineno, format!("expected {} fields", 2 + T::MM_TOKENS)));
                }
                let i: usize = tok[0]
                    .parse()
                    .map_err(|_| err(lineno, format!("bad row `{}`", tok[0])))?;
                let j: usize = tok[1]
                    .parse()
                    .map_err(|_| err(lineno, format!("bad column `{}`", tok[1])))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(err(lineno, format!("index ({i}, {j}) out of range")));
                }
                let v = T::parse_mm(&tok[2..])
                    .ok_or_else(|| err(lineno, format!("bad value `{}`", tok[2..].join(" "))))?;
                entries.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    entries.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, declared) = size.ok_or_else(|| err(2, "missing size line".into()))?;
    let stored = if symmetric {
        entries.iter().filter(|(i, j, _)| i >= j).count()
    } else {
        entries.len()
    };
    if stored != declared {
        return Err(err(
            0,
            format!("declared {declared} entries, found {stored}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn header_and_indices() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(1, 2, 0.5), (0, 0, -2.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
        assert_eq!(lines.next(), Some("2 3 2"));
        assert_eq!(lines.next(), Some("1 1 -2e0"));
        assert_eq!(lines.next(), Some("2 3 5e-1"));
    }

    #[test]
    fn symmetric_input_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 -1\n";
        let m: SparseMatrix<f64> = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn field_mismatch_rejected() {
        let text = "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n";
        assert!(read_matrix_market::<f64, _>(text.as_bytes()).is_err());
        let m: SparseMatrix<Complex64> = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn bad_entries_report_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        let e = read_matrix_market::<f64, _>(text.as_bytes()).unwrap_err();
        assert!(matches!(e, SparseError::MatrixMarket { line: 3, .. }));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market::<f64, _>(short.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn complex_round_trip(entries in proptest::collection::vec((0usize..6, 0usize..4, -1e3f64..1e3, -1e3f64..1e3), 0..20)) {
            let m = SparseMatrix::from_triplets(
                6, 4, entries.into_iter().map(|(i, j, re, im)| (i, j, Complex64::new(re, im)))
            ).unwrap();
            let mut buf = Vec::new();
            write_matrix_market(&m, &mut buf).unwrap();
            let back: SparseMatrix<Complex64> = read_matrix_market(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
