//! Plain-text field files.
//!
//! First line: `dims n_1 .. n_d h_1 .. h_d o_1 .. o_d`. Then one line per
//! grid point in row-major order holding either one value or three vector
//! components separated by spaces.

use std::io::{self, BufRead, Write};

use super::field::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_header<W: Write>(w: &mut W, g: &Grid) -> io::Result<()> {
    let d = g.dims;
    let mut cells = vec![d.to_string()];
    cells.extend(g.shape[..d].iter().map(|n| n.to_string()));
    cells.extend(g.spacing[..d].iter().map(|&h| fmt(h)));
    cells.extend(g.origin[..d].iter().map(|&o| fmt(o)));
    writeln!(w, "{}", cells.join(" "))
}

pub fn write_scalar<W: Write>(mut w: W, f: &ScalarField) -> io::Result<()> {
    write_header(&mut w, &f.grid)?;
    for &v in &f.values {
        writeln!(w, "{}", fmt(v))?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(mut w: W, f: &VectorField) -> io::Result<()> {
    write_header(&mut w, &f.grid)?;
    for v in &f.values {
        writeln!(w, "{} {} {}", fmt(v[0]), fmt(v[1]), fmt(v[2]))?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("line {line}: `{s}` is not a number")))
}

fn read_body<R: BufRead>(r: R, width: usize) -> Result<(Grid, Vec<Vec<f64>>)> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (n, header) = lines.next().ok_or_else(|| Error::Format("empty field file".into()))?;
    let header = header.map_err(|e| Error::Format(e.to_string()))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    let dims: usize = tok
        .first()
        .and_then(|t| t.parse().ok())
        .filter(|d| (1..=3).contains(d))
        .ok_or_else(|| Error::Format(format!("line {n}: header must start with dims 1-3")))?;
    if tok.len() != 1 + 3 * dims {
        return Err(Error::Format(format!("line {n}: header needs {} entries, found {}", 1 + 3 * dims, tok.len())));
    }
    let shape = tok[1..=dims]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Format(format!("line {n}: bad shape `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    let spacing = tok[1 + dims..1 + 2 * dims].iter().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
    let origin = tok[1 + 2 * dims..].iter().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(&shape, &spacing, &origin)?;

    let mut rows = Vec::with_capacity(grid.len());
    for (n, line) in lines {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        let row = line.split_whitespace().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
        if row.len() != width {
            return Err(Error::Format(format!("line {n}: expected {width} values, found {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("line {n}: non-finite value")));
        }
        rows.push(row);
    }
    if rows.len() != grid.len() {
        return Err(Error::Format(format!("expected {} points, found {}", grid.len(), rows.len())));
    }
    Ok((grid, rows))
}

pub fn read_scalar<R: BufRead>(r: R) -> Result<ScalarField> {
    let (grid, rows) = read_body(r, 1)?;
    ScalarField::new(grid, rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_vector<R: BufRead>(r: R) -> Result<VectorField> {
    let (grid, rows) = read_body(r, 3)?;
    VectorField::new(grid, rows.into_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

/// CSV of the 2-D slice at index `k` of the third axis (0 for 2-D grids):
/// `x,y,<names...>` with one column per entry of `columns`.
pub fn write_slice_csv<W: Write>(
    mut w: W,
    grid: &Grid,
    k: usize,
    columns: &[(&str, &dyn Fn(usize) -> f64)],
) -> Result<()> {
    if grid.dims < 2 || k >= grid.shape[2] {
        return Err(Error::Dimension(format!("no 2-D slice {k} in a {}-D grid", grid.dims)));
    }
    let io_err = |e: io::Error| Error::Format(e.to_string());
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "x,y,{}", names.join(",")).map_err(io_err)?;
    for i in 0..grid.shape[0] {
        for j in 0..grid.shape[1] {
            let idx = grid.index([i, j, k]);
            let c = grid.coords(idx);
            let mut cells = vec![fmt(c[0]), fmt(c[1])];
            cells.extend(columns.iter().map(|col| fmt((col.1)(idx))));
            writeln!(w, "{}", cells.join(",")).map_err(io_err)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_round_trip_is_exact() {
        let g = Grid::new(&[5, 6], &[0.1, 0.3], &[-1.0, 2.5]).unwrap();
        let f = ScalarField::from_fn(g, |c| (c[0] * 7.1).sin() + c[1].exp());
        let mut buf = Vec::new();
        write_scalar(&mut buf, &f).unwrap();
        assert_eq!(read_scalar(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn vector_round_trip_is_exact() {
        let g = Grid::new(&[3, 2, 4], &[1.0, 0.5, 0.25], &[0.0; 3]).unwrap();
        let f = VectorField::from_fn(g, |c| [c[0] / 3.0, -c[1], c[2] * 1e-200]);
        let mut buf = Vec::new();
        write_vector(&mut buf, &f).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn malformed_files() {
        assert!(read_scalar("".as_bytes()).is_err());
        assert!(read_scalar("4 1 1 1 1 1 1 1 1 1 1 1 1\n".as_bytes()).is_err());
        assert!(read_scalar("1 2 0.5 0\n1\n".as_bytes()).is_err());
        assert!(read_scalar("1 2 0.5 0\n1\nx\n".as_bytes()).is_err());
        assert!(read_scalar("1 2 0.5 0\n1 2\n3\n".as_bytes()).is_err());
        assert!(read_vector("1 1 0.5 0\n1 2\n".as_bytes()).is_err());
        let f = read_scalar("1 2 0.5 0\n1\n\n2\n".as_bytes()).unwrap();
        assert_eq!(f.values, vec![1.0, 2.0]);
    }

    #[test]
    fn slice_csv_layout() {
        let g = Grid::new(&[2, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let f = ScalarField::from_fn(g, |c| c[0] + 10.0 * c[1]);
        let mut buf = Vec::new();
        write_slice_csv(&mut buf, &g, 0, &[("P", &|i| f.values[i])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,P");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("1.0000000000000000e0,2.0000000000000000e0,2.1"));
        let g1 = Grid::new(&[5], &[1.0], &[0.0]).unwrap();
        assert!(write_slice_csv(Vec::new(), &g1, 0, &[]).is_err());
    }
}
