use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Time-indexed ensemble estimate with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWithError {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SeriesWithError {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of standard errors separating sample `i` from `expected`.
    /// A zero standard error gives 0 for an exact match and infinity otherwise.
    pub fn z_score(&self, i: usize, expected: f64) -> f64 {
        let diff = (self.mean[i] - expected).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr[i]
        }
    }
}

/// Mean and standard error (sample std / sqrt(n)), summed in iteration order.
pub fn mean_stderr<I>(values: I) -> (f64, f64)
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let (n, sum) = it.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = it.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Ordinary least-squares line `y = a + b t`; returns `(a, b)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        stt += (ti - tm) * (ti - tm);
        sty += (ti - tm) * (yi - ym);
    }
    let b = sty / stt;
    (ym - b * tm, b)
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| if i == count - 1 { hi } else { (a + (b - a) * i as f64 / (count - 1) as f64).exp() })
                .collect()
        }
    }
}

/// Write rows of floats with 17 significant digits under a header.
pub fn write_csv_rows<W, R>(mut w: W, header: &str, rows: R) -> io::Result<()>
where
    W: Write,
    R: IntoIterator<Item = Vec<f64>>,
{
    writeln!(w, "{header}")?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
