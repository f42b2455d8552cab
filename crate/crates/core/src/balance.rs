//! Coupling of bouncer and walker through their work per period, and the
//! per-cycle heat bookkeeping of the driven oscillator.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, BathParams, OscillatorParams};
use crate::bouncer::{integrate_bouncer, measure_work_per_period, BouncerState, Drive, WorkMeasurement};
use crate::error::{ensure, Error, Result};
use crate::walker::{measure_walker_work, run_ensemble, EnsembleConfig, Schedule, WalkerWork};

/// Default number of periods averaged.
pub const DEFAULT_PERIODS: usize = 50;
/// Below this many periods the stochastic side is poorly averaged.
pub const MIN_RECOMMENDED_PERIODS: usize = 10;

/// A work total together with the time window it was taken over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkSample {
    pub total: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub n: usize,
    /// Bouncer work per period.
    pub w_bouncer_measured: f64,
    /// Walker work over the whole `n tau` window.
    pub w_walker_measured: f64,
    /// `W_walker / (n W_bouncer)`.
    pub ratio: f64,
    pub implied_kt0: f64,
    pub implied_e_tot: f64,
    pub hbar_omega0: f64,
    pub gamma_over_zeta: f64,
    pub warnings: Vec<String>,
}

/// Compare bouncer and walker work over the same `n tau` window, and solve
/// `n 2 pi gamma hbar = n (N 2 pi / w0) zeta kT0` for the bath temperature.
pub fn balance_report(
    bouncer: WorkSample,
    walker: WorkSample,
    n: usize,
    p: &OscillatorParams,
    b: &BathParams,
) -> Result<BalanceReport> {
    ensure(n >= 1, "n", || "must be >= 1".into())?;
    p.validate()?;
    b.validate()?;
    let window = n as f64 * p.period();
    let tol = 1e-9 * window;
    if (bouncer.duration - window).abs() > tol || (walker.duration - window).abs() > tol {
        return Err(Error::DurationMismatch { bouncer: bouncer.duration, walker: walker.duration });
    }
    let mut warnings = Vec::new();
    if n < MIN_RECOMMENDED_PERIODS {
        warnings.push(format!("n = {n} periods is below the recommended minimum of {MIN_RECOMMENDED_PERIODS}"));
    }
    let w_bouncer = bouncer.total / n as f64;
    let implied_kt0 = w_bouncer * p.omega0 / (TAU * p.dims as f64 * b.zeta);
    let ratio = walker.total / bouncer.total;
    ensure(ratio.is_finite() && ratio > 0.0, "work", || format!("work ratio must be positive, got {ratio}"))?;
    Ok(BalanceReport {
        n,
        w_bouncer_measured: w_bouncer,
        w_walker_measured: walker.total,
        ratio,
        implied_kt0,
        implied_e_tot: p.dims as f64 * implied_kt0,
        hbar_omega0: p.hbar()? * p.omega0,
        gamma_over_zeta: p.gamma / b.zeta,
        warnings,
    })
}

/// Closed-form inputs for [`balance_report`].
pub fn analytic_work_samples(n: usize, p: &OscillatorParams, b: &BathParams) -> Result<(WorkSample, WorkSample)> {
    let duration = n as f64 * p.period();
    let bouncer = WorkSample { total: n as f64 * analytic::bouncer_work_per_period(p)?, duration };
    let walker = WorkSample { total: analytic::walker_work(n, p, b)?, duration };
    Ok((bouncer, walker))
}

/// Numerical settings for a simulated balance run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceSettings {
    pub n: usize,
    pub paths: usize,
    pub root_seed: u64,
    /// RK4 steps per period for the bouncer.
    pub bouncer_steps_per_period: usize,
    /// Exact-OU steps (all recorded) per period for the walker.
    pub walker_steps_per_period: usize,
}

impl Default for BalanceSettings {
    fn default() -> Self {
        Self {
            n: DEFAULT_PERIODS,
            paths: 10_000,
            root_seed: 0,
            bouncer_steps_per_period: 1000,
            walker_steps_per_period: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedBalance {
    pub report: BalanceReport,
    pub bouncer: WorkMeasurement,
    pub walker: WalkerWork,
}

/// Measure both works over `n` natural periods: the bouncer driven at
/// resonance along one axis after its transient, the walker in `N`
/// dimensions from the stationary velocity distribution.
pub fn simulate_balance(p: &OscillatorParams, b: &BathParams, s: &BalanceSettings) -> Result<SimulatedBalance> {
    p.validate()?;
    b.validate()?;
    ensure(s.n >= 1, "n", || "must be >= 1".into())?;
    ensure(s.bouncer_steps_per_period >= 16, "bouncer_steps_per_period", || "must be >= 16".into())?;
    ensure(s.walker_steps_per_period >= 1, "walker_steps_per_period", || "must be >= 1".into())?;
    let tau = p.period();

    let p1 = OscillatorParams { dims: 1, ..*p };
    let drive = Drive::linear(&p1, p1.omega0);
    let settle = (p1.transient_time()? / tau).ceil() as usize;
    let spp = s.bouncer_steps_per_period;
    let traj = integrate_bouncer(&p1, &drive, &BouncerState::at_rest(1), tau / spp as f64, (settle + s.n) * spp)?;
    let bouncer = measure_work_per_period(&traj, &p1, &drive, s.n)?;

    let wpp = s.walker_steps_per_period;
    let schedule = Schedule::Uniform { dt: tau / wpp as f64, steps: s.n * wpp, record_stride: 1 };
    let cfg = EnsembleConfig::new(*b, p.m, p.dims, s.paths, schedule).with_seed(s.root_seed);
    let ensemble = run_ensemble(&cfg)?;
    let walker = measure_walker_work(&ensemble, s.n, tau)?;

    let duration = s.n as f64 * tau;
    let report = balance_report(
        WorkSample { total: bouncer.drive * s.n as f64, duration },
        WorkSample { total: walker.value, duration: walker.duration },
        s.n,
        p,
        b,
    )?;
    Ok(SimulatedBalance { report, bouncer, walker })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicCycleReport {
    pub e_kin_min: f64,
    pub e_kin_max: f64,
    pub e_kin_mean: f64,
    /// Heat taken up at kinetic-energy minima over one period.
    pub q_absorbed: f64,
    /// Heat given off at kinetic-energy maxima over one period.
    pub q_emitted: f64,
    pub absorption_events: usize,
    pub emission_events: usize,
    pub e_throughput: f64,
    /// `E_throughput / kT0` with the balanced bath `kT0 = hbar w0`.
    pub entropy_change: f64,
    pub hbar: f64,
}

/// Heat bookkeeping over one sampled period of `E_kin(t)`: at each minimum
/// the deficit `<E_kin> - E_kin` is absorbed, at each maximum the excess
/// `E_kin - <E_kin>` is emitted. Samples must cover exactly one period
/// without repeating the endpoint.
pub fn entropic_cycle_from_waveform(e_kin: &[f64], kt0: f64) -> Result<EntropicCycleReport> {
    let n = e_kin.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("{n} samples per period")));
    }
    let mean = e_kin.iter().sum::<f64>() / n as f64;
    let (mut q_abs, mut q_emit, mut n_abs, mut n_emit) = (0.0, 0.0, 0, 0);
    for i in 0..n {
        let prev = e_kin[(i + n - 1) % n];
        let next = e_kin[(i + 1) % n];
        let e = e_kin[i];
        if e < prev && e <= next {
            q_abs += mean - e;
            n_abs += 1;
        } else if e > prev && e >= next {
            q_emit += e - mean;
            n_emit += 1;
        }
    }
    let e_kin_min = e_kin.iter().copied().fold(f64::INFINITY, f64::min);
    let e_kin_max = e_kin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let throughput = q_abs + q_emit;
    Ok(EntropicCycleReport {
        e_kin_min,
        e_kin_max,
        e_kin_mean: mean,
        q_absorbed: q_abs,
        q_emitted: q_emit,
        absorption_events: n_abs,
        emission_events: n_emit,
        e_throughput: throughput,
        entropy_change: throughput / kt0,
        hbar: f64::NAN,
    })
}

/// Run the one-axis oscillator into its resonant steady state and book the
/// heat exchanged over the last period.
pub fn entropic_cycle(p: &OscillatorParams, samples_per_period: usize) -> Result<EntropicCycleReport> {
    p.validate()?;
    if p.f0 == 0.0 {
        return Err(Error::NotSteadyState("no drive: the oscillator decays freely".into()));
    }
    if p.gamma == 0.0 {
        return Err(Error::NotSteadyState("no friction: the resonant response grows without bound".into()));
    }
    ensure(samples_per_period >= 64, "samples_per_period", || "must be >= 64".into())?;
    let p1 = OscillatorParams { dims: 1, ..*p };
    let drive = Drive::linear(&p1, p1.omega0);
    let tau = p1.period();
    let settle = (2.0 * p1.transient_time()? / tau).ceil() as usize;
    let dt = tau / samples_per_period as f64;
    let traj = integrate_bouncer(&p1, &drive, &BouncerState::at_rest(1), dt, (settle + 1) * samples_per_period)?;
    let start = traj.len() - 1 - samples_per_period;
    let e_kin: Vec<f64> = (start..traj.len() - 1).map(|i| 0.5 * p1.m * traj.velocity(i)[0].powi(2)).collect();
    let hbar = p1.hbar()?;
    let mut report = entropic_cycle_from_waveform(&e_kin, hbar * p1.omega0)?;
    report.hbar = hbar;
    Ok(report)
}

/// `E_tot = 2 |s| w0`.
pub fn spin_throughput(s_magnitude: f64, omega0: f64) -> Result<f64> {
    ensure(s_magnitude.is_finite() && s_magnitude >= 0.0, "s_magnitude", || {
        format!("must be >= 0, got {s_magnitude}")
    })?;
    Ok(2.0 * s_magnitude * omega0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc(g: f64, dims: usize) -> OscillatorParams {
        OscillatorParams::new(1.0, 1.0, g, 1.0, dims).unwrap()
    }

    #[test]
    fn analytic_balance_is_exact_when_couplings_match() {
        let p = osc(0.5, 1);
        let hbar = p.hbar().unwrap();
        let b = BathParams::new(hbar * p.omega0, 0.5).unwrap();
        let (wb, ww) = analytic_work_samples(50, &p, &b).unwrap();
        let r = balance_report(wb, ww, 50, &p, &b).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        assert!((r.implied_e_tot - hbar * p.omega0).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn implied_energy_scales_with_coupling_ratio() {
        let p = osc(1.0, 1);
        let b = BathParams::new(1.0, 0.5).unwrap();
        let (wb, ww) = analytic_work_samples(20, &p, &b).unwrap();
        let r = balance_report(wb, ww, 20, &p, &b).unwrap();
        assert_eq!(r.gamma_over_zeta, 2.0);
        assert!((r.implied_e_tot - 2.0 * r.hbar_omega0).abs() < 1e-12 * r.hbar_omega0);
    }

    #[test]
    fn duration_mismatch_and_small_n() {
        let p = osc(0.5, 1);
        let b = BathParams::new(1.0, 0.5).unwrap();
        let bad = WorkSample { total: 1.0, duration: 3.0 };
        let good = WorkSample { total: 1.0, duration: p.period() * 4.0 };
        assert!(matches!(balance_report(bad, good, 4, &p, &b), Err(Error::DurationMismatch { .. })));
        let r = balance_report(good, good, 4, &p, &b).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn waveform_bookkeeping_of_a_pure_sinusoid() {
        let n = 1000;
        let e: Vec<f64> = (0..n).map(|i| 0.5 * (TAU * i as f64 / n as f64).sin().powi(2)).collect();
        let r = entropic_cycle_from_waveform(&e, 1.0).unwrap();
        assert_eq!((r.absorption_events, r.emission_events), (2, 2));
        assert!((r.q_absorbed - 0.5).abs() < 1e-12);
        assert!((r.q_emitted - 0.5).abs() < 1e-12);
        assert!((r.e_throughput - 1.0).abs() < 1e-12);
        assert!((r.e_throughput - 4.0 * r.e_kin_mean).abs() < 1e-12);
    }

    #[test]
    fn simulated_cycle_examples() {
        // hbar = 1, w0 = 1
        let p = osc(0.5, 1);
        let r = entropic_cycle(&p, 1000).unwrap();
        assert!((r.q_absorbed / 2.0 - 0.25).abs() < 0.005 * 0.25);
        assert!((r.e_throughput - 1.0).abs() < 0.005);
        assert!(r.e_kin_min.abs() < 1e-4);
        assert!((r.e_kin_max - 0.5).abs() < 0.0025);

        // hbar = 2, w0 = 3: r^2 = 2/3, F0 = 2 gamma m w0 r
        let r0 = (2.0f64 / 3.0).sqrt();
        let p = OscillatorParams::new(1.0, 3.0, 0.5, 3.0 * r0, 1).unwrap();
        let r = entropic_cycle(&p, 1000).unwrap();
        assert!((r.e_throughput - 6.0).abs() < 0.005 * 6.0);
    }

    #[test]
    fn free_decay_is_rejected() {
        let p = OscillatorParams::new(1.0, 1.0, 0.5, 0.0, 1).unwrap();
        assert!(matches!(entropic_cycle(&p, 1000), Err(Error::NotSteadyState(_))));
    }

    #[test]
    fn spin_throughput_examples() {
        assert_eq!(spin_throughput(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(spin_throughput(0.0, 4.0).unwrap(), 0.0);
        assert_eq!(spin_throughput(1.5, 1.0).unwrap(), 3.0);
        assert!(spin_throughput(-1.0, 1.0).is_err());
    }
}
