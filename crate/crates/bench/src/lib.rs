//! Fixed workloads shared by the benchmarks.

use subquantum::spinfield::{gaussian_density, Grid, ScalarField};
use subquantum::walker::{EnsembleConfig, Schedule};
use subquantum::{BathParams, Drive, OscillatorParams};

/// Unit oscillator at `hbar = 1`, driven at resonance along one axis.
pub fn resonant_oscillator(dims: usize) -> (OscillatorParams, Drive) {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 4.0, dims).expect("valid parameters");
    let d = Drive::linear(&p, p.omega0);
    (p, d)
}

pub fn walker_ensemble(paths: usize, steps: usize) -> EnsembleConfig {
    let b = BathParams::new(1.0, 2.0).expect("valid bath");
    EnsembleConfig::new(b, 1.0, 3, paths, Schedule::Uniform { dt: 0.01, steps, record_stride: steps })
}

/// Normalized Gaussian on a centered square grid of `points` per axis.
pub fn gaussian_field(points: usize) -> ScalarField {
    let g = Grid::centered(2, points, 4.0).expect("valid grid");
    let p = gaussian_density(g, 1.0);
    let norm = p.integral();
    p.map(|v| v / norm)
}
