//! Plain-text complex matrices: one row per line, each entry written as a
//! `re im` pair separated by whitespace. `#` starts a comment and blank
//! lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        if nums.len() % 2 != 0 {
            return Err(Error::Parse(format!(
                "line {}: expected `re im` pairs, got {} numbers",
                no + 1,
                nums.len()
            )));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("line {}: non-finite entry", no + 1)));
        }
        rows.push(nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect());
    }
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(Error::Parse("matrix has no rows".into()));
    }
    let n_cols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
        return Err(Error::Parse(format!(
            "row {} has {} entries, expected {n_cols}",
            i + 1,
            r.len()
        )));
    }
    Ok(CMatrix::from_fn(n_rows, n_cols, |r, c| rows[r][c]))
}

/// Full precision round-trips through [`parse_matrix`].
pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("{:e} {:e}", m[(r, c)].re, m[(r, c)].im))
            .collect();
        let _ = writeln!(out, "{}", row.join("  "));
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let u = haar_unitary(4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(parse_matrix(&format_matrix(&u)).unwrap(), u);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.txt");
        write_matrix(&p, &u).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), u);
    }

    #[test]
    fn comments_and_blank_lines() {
        let m = parse_matrix("# header\n\n1 0  0 0 # row one\n0 0  0 1\n").unwrap();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(0.0, 1.0));
    }

    #[test]
    fn malformed_input() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1 0 0").is_err());
        assert!(parse_matrix("1 0 0 0\n1 0").is_err());
        assert!(parse_matrix("1 x").is_err());
        assert!(parse_matrix("nan 0").is_err());
    }
}
