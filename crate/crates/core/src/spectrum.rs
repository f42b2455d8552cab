//! Frequency selection by the vanishing period integral of `dF / kT0`, loop
//! actions, and the resulting `(n + 1/2) hbar w0` ladder.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stats::write_csv_rows;

/// `|value|` below this counts as vanishing.
pub const ADMISSIBLE_TOLERANCE: f64 = 1e-10;
/// Every inadmissible point of the default scan sits above this.
pub const REJECTION_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationResult {
    /// `(1/tau) integral dF / kT0`.
    pub value: f64,
    pub tau: f64,
    pub omega: f64,
}

impl DissipationResult {
    pub fn vanishes(&self) -> bool {
        self.value.abs() < ADMISSIBLE_TOLERANCE
    }
}

/// Telescoping sum of the sampled increments of `F` over `[0, tau]`.
/// `times` must be uniform and span the window.
pub fn dissipation_integral(times: &[f64], force: &[f64], tau: f64, kt0: f64) -> Result<f64> {
    ensure(tau.is_finite() && tau > 0.0, "tau", || format!("must be > 0, got {tau}"))?;
    ensure(kt0.is_finite() && kt0 > 0.0, "kT0", || format!("must be > 0, got {kt0}"))?;
    if times.len() != force.len() || times.len() < 2 {
        return Err(Error::InsufficientData(format!("{} times for {} force samples", times.len(), force.len())));
    }
    let n = times.len() - 1;
    let h = (times[n] - times[0]) / n as f64;
    let tol = 1e-9 * tau;
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > tol {
            return Err(Error::NonUniformGrid(format!("step {i} is {} but the mean step is {h}", w[1] - w[0])));
        }
    }
    if times[0].abs() > tol || (times[n] - tau).abs() > tol {
        return Err(Error::NonUniformGrid(format!("samples span [{}, {}], expected [0, {tau}]", times[0], times[n])));
    }
    let total: f64 = force.windows(2).map(|w| w[1] - w[0]).sum();
    Ok(total / (kt0 * tau))
}

/// Sample `F0 cos(w t)` on `samples + 1` points over one period `2 pi / w0`
/// and evaluate the dissipation integral.
pub fn dissipation_for_drive(f0: f64, omega: f64, omega0: f64, kt0: f64, samples: usize) -> Result<DissipationResult> {
    ensure(omega0 > 0.0, "omega0", || format!("must be > 0, got {omega0}"))?;
    ensure(samples >= 2, "samples", || "must be >= 2".into())?;
    let tau = TAU / omega0;
    let times: Vec<f64> = (0..=samples).map(|i| tau * i as f64 / samples as f64).collect();
    let force: Vec<f64> = times.iter().map(|t| f0 * (omega * t).cos()).collect();
    Ok(DissipationResult { value: dissipation_integral(&times, &force, tau, kt0)?, tau, omega })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleFrequency {
    pub n: usize,
    pub omega: f64,
    pub dissipation: f64,
}

/// `w_n = n w0` for `n = 1..=n_max`, each with its dissipation value.
pub fn admissible_frequencies(omega0: f64, n_max: usize) -> Result<Vec<AdmissibleFrequency>> {
    (1..=n_max)
        .map(|n| {
            let omega = n as f64 * omega0;
            let d = dissipation_for_drive(1.0, omega, omega0, 1.0, 256)?;
            if !d.vanishes() {
                return Err(Error::InvalidParameter {
                    name: "omega0",
                    reason: format!("n = {n}: dissipation {} does not vanish", d.value),
                });
            }
            Ok(AdmissibleFrequency { n, omega, dissipation: d.value })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    /// Scan in units of `0.05 w0`: ratios `start/20, (start+1)/20, ..., end/20`.
    pub start_twentieths: u32,
    pub end_twentieths: u32,
    pub samples_per_period: usize,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "kT0")]
    pub kt0: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        // 0.5 ..= 5.05 in steps of 0.05
        Self { start_twentieths: 10, end_twentieths: 101, samples_per_period: 1000, f0: 1.0, kt0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub omega_ratio: f64,
    pub integer_ratio: bool,
    pub dissipation_value: f64,
}

/// Evaluate the dissipation integral on a grid of `w / w0`. Points are
/// computed concurrently and returned in grid order.
pub fn admissibility_scan(omega0: f64, s: &ScanSettings) -> Result<Vec<ScanPoint>> {
    ensure(s.end_twentieths >= s.start_twentieths, "end_twentieths", || "must be >= start_twentieths".into())?;
    (s.start_twentieths..=s.end_twentieths)
        .into_par_iter()
        .map(|k| {
            let ratio = k as f64 / 20.0;
            let d = dissipation_for_drive(s.f0, ratio * omega0, omega0, s.kt0, s.samples_per_period)?;
            Ok(ScanPoint { omega_ratio: ratio, integer_ratio: k % 20 == 0, dissipation_value: d.value })
        })
        .collect()
}

/// `omega_ratio,dissipation_value`.
pub fn write_scan_csv<W: Write>(w: W, scan: &[ScanPoint]) -> io::Result<()> {
    write_csv_rows(w, "omega_ratio,dissipation_value", scan.iter().map(|p| vec![p.omega_ratio, p.dissipation_value]))
}

/// Trapezoidal quadrature of the constant integrand `hbar w_n` over one
/// period `2 pi / w0`; equals `2 pi n hbar`.
pub fn action_over_period(n: usize, hbar: f64, omega0: f64, quadrature_steps: usize) -> Result<f64> {
    ensure(n >= 1, "n", || "must be >= 1".into())?;
    ensure(quadrature_steps >= 16, "quadrature_steps", || "must be >= 16".into())?;
    ensure(omega0 > 0.0, "omega0", || format!("must be > 0, got {omega0}"))?;
    let omega_n = n as f64 * omega0;
    let h = TAU / omega0 / quadrature_steps as f64;
    let integrand = |_t: f64| hbar * omega_n;
    let mut sum = 0.5 * (integrand(0.0) + integrand(quadrature_steps as f64 * h));
    for i in 1..quadrature_steps {
        sum += integrand(i as f64 * h);
    }
    Ok(sum * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub s_loop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub hbar: f64,
    pub omega0: f64,
    pub rows: Vec<SpectrumRow>,
}

pub const SPECTRUM_QUADRATURE_STEPS: usize = 64;

/// Rows `n = 0..=n_max` with `E = (n + 1/2) hbar w0`; the loop action is
/// `hbar / 2` at `n = 0` and `2 pi n hbar` above.
pub fn energy_spectrum(n_max: usize, hbar: f64, omega0: f64) -> Result<SpectrumTable> {
    ensure(hbar.is_finite() && hbar > 0.0, "hbar", || format!("must be > 0, got {hbar}"))?;
    ensure(omega0.is_finite() && omega0 > 0.0, "omega0", || format!("must be > 0, got {omega0}"))?;
    let rows = (0..=n_max)
        .map(|n| {
            let s_loop =
                if n == 0 { hbar / 2.0 } else { action_over_period(n, hbar, omega0, SPECTRUM_QUADRATURE_STEPS)? };
            Ok(SpectrumRow { n, energy: (n as f64 + 0.5) * hbar * omega0, s_loop })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable { hbar, omega0, rows })
}

impl SpectrumTable {
    /// `n,E,S_loop`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,E,S_loop")?;
        for r in &self.rows {
            writeln!(w, "{},{:.16e},{:.16e}", r.n, r.energy, r.s_loop)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dissipation_examples() {
        let d = dissipation_for_drive(1.0, 1.0, 1.0, 1.0, 1000).unwrap();
        assert!(d.value.abs() < 1e-12);
        let d = dissipation_for_drive(1.0, 1.5, 1.0, 1.0, 1000).unwrap();
        assert!((d.value - ((3.0 * PI).cos() - 1.0) / TAU).abs() < 1e-12);
        assert!((d.value + std::f64::consts::FRAC_1_PI).abs() < 1e-12);
        let d = dissipation_for_drive(1.0, 3.0, 1.0, 1.0, 1000).unwrap();
        assert!(d.value.abs() < 1e-12);
    }

    #[test]
    fn dissipation_rejects_bad_grids() {
        let t = [0.0, 1.0, 2.5, 3.0];
        assert!(matches!(dissipation_integral(&t, &[0.0; 4], 3.0, 1.0), Err(Error::NonUniformGrid(_))));
        let t = [0.0, 1.0, 2.0];
        assert!(matches!(dissipation_integral(&t, &[0.0; 3], 3.0, 1.0), Err(Error::NonUniformGrid(_))));
        assert!(dissipation_integral(&t, &[0.0; 2], 2.0, 1.0).is_err());
    }

    #[test]
    fn admissible_frequency_examples() {
        let w: Vec<f64> = admissible_frequencies(1.0, 3).unwrap().iter().map(|a| a.omega).collect();
        assert_eq!(w, vec![1.0, 2.0, 3.0]);
        let w: Vec<f64> = admissible_frequencies(2.5, 2).unwrap().iter().map(|a| a.omega).collect();
        assert_eq!(w, vec![2.5, 5.0]);
        assert!(admissible_frequencies(1.0, 0).unwrap().is_empty());
    }

    #[test]
    fn action_examples() {
        assert!((action_over_period(1, 1.0, 1.0, 16).unwrap() - TAU).abs() < 1e-10 * TAU);
        assert!((action_over_period(2, 1.0, 1.0, 64).unwrap() - 4.0 * PI).abs() < 1e-10 * 4.0 * PI);
        assert!((action_over_period(1, 0.5, 7.0, 100).unwrap() - PI).abs() < 1e-10 * PI);
        assert!(action_over_period(0, 1.0, 1.0, 64).is_err());
        assert!(action_over_period(1, 1.0, 1.0, 8).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let t = energy_spectrum(2, 1.0, 1.0).unwrap();
        let e: Vec<f64> = t.rows.iter().map(|r| r.energy).collect();
        assert_eq!(e, vec![0.5, 1.5, 2.5]);
        assert_eq!(t.rows[0].s_loop, 0.5);
        let t = energy_spectrum(3, 2.0, 0.5).unwrap();
        assert_eq!(t.rows[3].energy, 3.5);
    }

    #[test]
    fn spectrum_csv() {
        let mut out = Vec::new();
        energy_spectrum(5, 1.0, 1.0).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("n,E,S_loop\n0,5.0000000000000000e-1,"));
    }

    #[test]
    fn scan_grid_flags_integers() {
        let scan = admissibility_scan(1.0, &ScanSettings::default()).unwrap();
        assert_eq!(scan.len(), 92);
        assert_eq!(scan.iter().filter(|p| p.integer_ratio).count(), 5);
        assert_eq!(scan[0].omega_ratio, 0.5);
        assert_eq!(scan[91].omega_ratio, 5.05);
    }
}
