//! Deterministic integration of the driven damped oscillator in `N`
//! independent dimensions, plus the diagnostics used to compare it with the
//! closed forms: steady-state fits, per-period work, angular momentum.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, OscillatorParams};
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BouncerState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl BouncerState {
    pub fn at_rest(dims: usize) -> Self {
        Self { t: 0.0, x: vec![0.0; dims], v: vec![0.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.x.len()
    }
}

/// Sinusoidal drive `F_i cos(w t + phase_i)` on each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub amplitudes: Vec<f64>,
    pub omega: f64,
    pub phases: Vec<f64>,
}

impl Drive {
    /// `F0 cos(w t)` on the first axis only.
    pub fn linear(p: &OscillatorParams, omega: f64) -> Self {
        let mut amplitudes = vec![0.0; p.dims];
        amplitudes[0] = p.f0;
        Self { amplitudes, omega, phases: vec![0.0; p.dims] }
    }

    /// The same in-phase drive `F0 cos(w t)` on every axis.
    pub fn uniform(p: &OscillatorParams, omega: f64) -> Self {
        Self { amplitudes: vec![p.f0; p.dims], omega, phases: vec![0.0; p.dims] }
    }

    /// Resonant drive in the (x1, x2) plane with a quarter-period lag on x2,
    /// which produces a circular steady orbit of radius `r`.
    pub fn circular(p: &OscillatorParams) -> Result<Self> {
        if p.dims < 2 {
            return Err(Error::Dimension("circular drive needs dims >= 2".into()));
        }
        let mut amplitudes = vec![0.0; p.dims];
        let mut phases = vec![0.0; p.dims];
        amplitudes[0] = p.f0;
        amplitudes[1] = p.f0;
        phases[1] = -FRAC_PI_2;
        Ok(Self { amplitudes, omega: p.omega0, phases })
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        ensure(self.omega.is_finite() && self.omega >= 0.0, "omega", || format!("must be >= 0, got {}", self.omega))?;
        if self.amplitudes.len() != dims || self.phases.len() != dims {
            return Err(Error::Dimension(format!(
                "drive has {} amplitudes and {} phases for {dims} dimensions",
                self.amplitudes.len(),
                self.phases.len()
            )));
        }
        Ok(())
    }

    pub fn force(&self, axis: usize, t: f64) -> f64 {
        self.amplitudes[axis] * (self.omega * t + self.phases[axis]).cos()
    }

    /// Period of the drive, falling back to the natural period for a static drive.
    pub fn period(&self, p: &OscillatorParams) -> f64 {
        if self.omega > 0.0 {
            TAU / self.omega
        } else {
            p.period()
        }
    }
}

/// Uniformly sampled path, stored flat: sample `i`, axis `k` lives at `i * dims + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    dims: usize,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl Trajectory {
    pub fn from_samples(t0: f64, dt: f64, dims: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        ensure(dt > 0.0, "dt", || format!("must be > 0, got {dt}"))?;
        ensure(dims >= 1, "dims", || "must be >= 1".into())?;
        if x.len() != v.len() || !x.len().is_multiple_of(dims) || x.len() / dims < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples of {dims} components, got {} positions and {} velocities",
                x.len(),
                v.len()
            )));
        }
        Ok(Self { t0, dt, dims, x, v })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dims..(i + 1) * self.dims]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dims..(i + 1) * self.dims]
    }

    pub fn state(&self, i: usize) -> BouncerState {
        BouncerState { t: self.time(i), x: self.position(i).to_vec(), v: self.velocity(i).to_vec() }
    }

    pub fn last(&self) -> BouncerState {
        self.state(self.len() - 1)
    }

    /// Index of the first sample of a trailing window `length` long, provided
    /// the window spans an integer number of samples.
    fn trailing_window(&self, length: f64) -> Option<usize> {
        let n = length / self.dt;
        let count = n.round();
        if (n - count).abs() > 1e-6 * n.max(1.0) || count < 1.0 || count as usize >= self.len() {
            return None;
        }
        Some(self.len() - 1 - count as usize)
    }

    /// CSV with header `t,x1..xN,v1..vN` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.write_csv_every(w, 1)
    }

    /// As [`Trajectory::write_csv`], keeping every `stride`-th sample.
    pub fn write_csv_every<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dims).map(|k| format!("x{k}")));
        header.extend((1..=self.dims).map(|k| format!("v{k}")));
        writeln!(w, "{}", header.join(","))?;
        for i in (0..self.len()).step_by(stride.max(1)) {
            write!(w, "{:.16e}", self.time(i))?;
            for value in self.position(i).iter().chain(self.velocity(i)) {
                write!(w, ",{value:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Classical fourth-order Runge-Kutta on `(x, v)` for every axis.
pub fn integrate_bouncer(
    p: &OscillatorParams,
    d: &Drive,
    ic: &BouncerState,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    p.validate()?;
    d.validate(p.dims)?;
    ensure(dt.is_finite() && dt > 0.0, "dt", || format!("must be > 0, got {dt}"))?;
    ensure(steps >= 1, "steps", || "must be >= 1".into())?;
    if ic.dims() != p.dims || ic.v.len() != p.dims {
        return Err(Error::Dimension(format!("initial state has {} components, params say {}", ic.dims(), p.dims)));
    }

    let dims = p.dims;
    let w2 = p.omega0 * p.omega0;
    let damp = 2.0 * p.gamma;
    let accel = |axis: usize, t: f64, x: f64, v: f64| -w2 * x - damp * v + d.force(axis, t) / p.m;

    let mut xs = Vec::with_capacity((steps + 1) * dims);
    let mut vs = Vec::with_capacity((steps + 1) * dims);
    xs.extend_from_slice(&ic.x);
    vs.extend_from_slice(&ic.v);
    let mut x = ic.x.clone();
    let mut v = ic.v.clone();

    for step in 0..steps {
        let t = ic.t + step as f64 * dt;
        let half = t + 0.5 * dt;
        let end = t + dt;
        for k in 0..dims {
            let (x0, v0) = (x[k], v[k]);
            let k1x = v0;
            let k1v = accel(k, t, x0, v0);
            let k2x = v0 + 0.5 * dt * k1v;
            let k2v = accel(k, half, x0 + 0.5 * dt * k1x, k2x);
            let k3x = v0 + 0.5 * dt * k2v;
            let k3v = accel(k, half, x0 + 0.5 * dt * k2x, k3x);
            let k4x = v0 + dt * k3v;
            let k4v = accel(k, end, x0 + dt * k3x, k4x);
            x[k] = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v[k] = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !(x[k].is_finite() && v[k].is_finite()) {
                return Err(Error::NonFinite {
                    t: end,
                    what: format!("axis {k} diverged (x = {}, v = {})", x[k], v[k]),
                });
            }
        }
        xs.extend_from_slice(&x);
        vs.extend_from_slice(&v);
    }

    Trajectory::from_samples(ic.t, dt, dims, xs, vs)
}

/// The analytic steady-state solution evaluated at time `t`.
pub fn steady_state(p: &OscillatorParams, d: &Drive, t: f64) -> Result<BouncerState> {
    d.validate(p.dims)?;
    let unit = OscillatorParams { f0: 1.0, ..*p };
    let gain = analytic::amplitude_response(&unit, d.omega)?;
    let lag = analytic::phase_response(p, d.omega)?;
    let mut state = BouncerState { t, x: vec![0.0; p.dims], v: vec![0.0; p.dims] };
    for k in 0..p.dims {
        let amp = gain * d.amplitudes[k];
        let arg = d.omega * t + d.phases[k] + lag;
        state.x[k] = amp * arg.cos();
        state.v[k] = -amp * d.omega * arg.sin();
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    pub amplitude: f64,
    /// `None` when the amplitude vanishes and the phase is undefined.
    pub phase: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateFit {
    pub axes: Vec<AxisFit>,
    /// RMS misfit over all axes.
    pub residual: f64,
    /// Set when some axis misfits by more than 1% of its amplitude.
    pub transient_suspected: bool,
}

/// Least-squares fit of `A cos(w t + phi)` per axis over the trailing
/// `periods_used` drive periods.
pub fn fit_steady_state(traj: &Trajectory, omega: f64, periods_used: usize) -> Result<SteadyStateFit> {
    ensure(omega.is_finite() && omega > 0.0, "omega", || format!("must be > 0, got {omega}"))?;
    ensure(periods_used >= 1, "periods_used", || "must be >= 1".into())?;
    let window = periods_used as f64 * TAU / omega;
    if window > traj.duration() * (1.0 + 1e-12) {
        return Err(Error::InsufficientData(format!(
            "fit window {window} exceeds trajectory duration {}",
            traj.duration()
        )));
    }
    let start = ((traj.duration() - window) / traj.dt).floor().max(0.0) as usize;
    let samples = traj.len() - start;
    if samples < 4 {
        return Err(Error::InsufficientData(format!("only {samples} samples in fit window")));
    }

    let mut axes = Vec::with_capacity(traj.dims());
    let mut total_sq = 0.0;
    for k in 0..traj.dims() {
        let (mut cc, mut cs, mut ss, mut xc, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut scale: f64 = 0.0;
        for i in start..traj.len() {
            let (s, c) = (omega * traj.time(i)).sin_cos();
            let x = traj.position(i)[k];
            cc += c * c;
            cs += c * s;
            ss += s * s;
            xc += x * c;
            xs += x * s;
            scale = scale.max(x.abs());
        }
        let det = cc * ss - cs * cs;
        if det.abs() <= 1e-12 * cc * ss {
            return Err(Error::InsufficientData("fit window does not resolve the drive period".into()));
        }
        let a = (xc * ss - xs * cs) / det;
        let b = (xs * cc - xc * cs) / det;
        let mut sq = 0.0;
        for i in start..traj.len() {
            let (s, c) = (omega * traj.time(i)).sin_cos();
            let e = traj.position(i)[k] - a * c - b * s;
            sq += e * e;
        }
        total_sq += sq;
        let amplitude = a.hypot(b);
        // A cos(wt + phi) = A cos(phi) cos(wt) - A sin(phi) sin(wt)
        let phase = if amplitude > f64::EPSILON * scale && amplitude > 0.0 { Some((-b).atan2(a)) } else { None };
        axes.push(AxisFit { amplitude, phase, residual: (sq / samples as f64).sqrt() });
    }
    let transient_suspected = axes.iter().any(|a| a.amplitude > 0.0 && a.residual > 0.01 * a.amplitude);
    Ok(SteadyStateFit { axes, residual: (total_sq / (samples * traj.dims()) as f64).sqrt(), transient_suspected })
}

/// Oscillation frequency from upward zero crossings on one axis at `t >= t_from`.
pub fn estimate_frequency(traj: &Trajectory, axis: usize, t_from: f64) -> Result<f64> {
    if axis >= traj.dims() {
        return Err(Error::Dimension(format!("axis {axis} out of range for {} dims", traj.dims())));
    }
    let mut crossings = Vec::new();
    for i in 1..traj.len() {
        if traj.time(i - 1) < t_from {
            continue;
        }
        let (a, b) = (traj.position(i - 1)[axis], traj.position(i)[axis]);
        if a < 0.0 && b >= 0.0 {
            let frac = -a / (b - a);
            crossings.push(traj.time(i - 1) + frac * traj.dt);
        }
    }
    if crossings.len() < 2 {
        return Err(Error::InsufficientData("fewer than two upward zero crossings".into()));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(TAU * (crossings.len() - 1) as f64 / span)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkMeasurement {
    /// Work done by the drive per period, summed over axes.
    pub drive: f64,
    /// Energy lost to friction per period, summed over axes.
    pub friction: f64,
    pub drive_per_axis: Vec<f64>,
    pub friction_per_axis: Vec<f64>,
    pub periods: usize,
    pub period: f64,
}

/// Trapezoidal quadrature of `F(t) x'` and `2 gamma m x'^2` over the trailing
/// `periods` drive periods, reported per period.
pub fn measure_work_per_period(
    traj: &Trajectory,
    p: &OscillatorParams,
    d: &Drive,
    periods: usize,
) -> Result<WorkMeasurement> {
    d.validate(traj.dims())?;
    ensure(periods >= 1, "periods", || "must be >= 1".into())?;
    let period = d.period(p);
    let length = periods as f64 * period;
    let start = traj.trailing_window(length).ok_or(Error::WindowNotIntegerPeriod { periods, length, dt: traj.dt })?;

    let dims = traj.dims();
    let mut drive = vec![0.0; dims];
    let mut friction = vec![0.0; dims];
    let last = traj.len() - 1;
    for i in start..=last {
        let weight = if i == start || i == last { 0.5 } else { 1.0 } * traj.dt;
        let t = traj.time(i);
        for k in 0..dims {
            let v = traj.velocity(i)[k];
            drive[k] += weight * d.force(k, t) * v;
            friction[k] += weight * 2.0 * p.gamma * p.m * v * v;
        }
    }
    let per = periods as f64;
    drive.iter_mut().chain(friction.iter_mut()).for_each(|w| *w /= per);
    Ok(WorkMeasurement {
        drive: drive.iter().sum(),
        friction: friction.iter().sum(),
        drive_per_axis: drive,
        friction_per_axis: friction,
        periods,
        period,
    })
}

/// `L(t) = m (x_i v_j - x_j v_i)` in the chosen coordinate plane.
pub fn angular_momentum_in_plane(traj: &Trajectory, m: f64, plane: (usize, usize)) -> Result<Vec<f64>> {
    let (i, j) = plane;
    if traj.dims() < 2 || i >= traj.dims() || j >= traj.dims() || i == j {
        return Err(Error::Dimension(format!(
            "angular momentum needs two distinct axes of a >= 2 dimensional path, got plane {plane:?} in {} dims",
            traj.dims()
        )));
    }
    Ok((0..traj.len())
        .map(|s| {
            let (x, v) = (traj.position(s), traj.velocity(s));
            m * (x[i] * v[j] - x[j] * v[i])
        })
        .collect())
}

/// Angular momentum in the (x1, x2) plane.
pub fn angular_momentum_series(traj: &Trajectory, m: f64) -> Result<Vec<f64>> {
    angular_momentum_in_plane(traj, m, (0, 1))
}

/// `H = m|v|^2/2 + m w0^2 |x|^2 / 2` at every sample.
pub fn hamiltonian_series(traj: &Trajectory, p: &OscillatorParams) -> Vec<f64> {
    let w2 = p.omega0 * p.omega0;
    (0..traj.len())
        .map(|i| {
            let kinetic: f64 = traj.velocity(i).iter().map(|v| v * v).sum();
            let potential: f64 = traj.position(i).iter().map(|x| x * x).sum();
            0.5 * p.m * (kinetic + w2 * potential)
        })
        .collect()
}

/// Numerical settings for measuring the steady response at one drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSettings {
    /// Minimum RK4 steps per period of both the drive and the natural oscillation.
    pub samples_per_period: usize,
    /// Transient discarded, in units of the relaxation time.
    pub settle: f64,
    pub fit_periods: usize,
}

impl Default for ResponseSettings {
    fn default() -> Self {
        Self { samples_per_period: 400, settle: 20.0, fit_periods: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub analytic_amplitude: f64,
    pub analytic_phase: f64,
    pub residual: f64,
}

impl ResponsePoint {
    pub fn amplitude_rel_error(&self) -> f64 {
        (self.amplitude - self.analytic_amplitude).abs() / self.analytic_amplitude
    }

    pub fn phase_error(&self) -> f64 {
        wrap_angle(self.phase - self.analytic_phase).abs()
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Integrate a one-axis oscillator from rest under `F0 cos(w t)`, let the
/// transient decay, and fit the steady amplitude and phase.
pub fn measure_response(p: &OscillatorParams, omega: f64, s: &ResponseSettings) -> Result<ResponsePoint> {
    ensure(omega.is_finite() && omega > 0.0, "omega", || format!("must be > 0, got {omega}"))?;
    ensure(s.samples_per_period >= 16, "samples_per_period", || "must be >= 16".into())?;
    let p1 = OscillatorParams { dims: 1, ..*p };
    let drive = Drive::linear(&p1, omega);
    let drive_period = TAU / omega;
    // dt divides the drive period and resolves the natural period too
    let per_drive = s.samples_per_period * (p.omega0 / omega).ceil().max(1.0) as usize;
    let dt = drive_period / per_drive as f64;
    let settle_periods = (s.settle / p1.relaxation_rate().max(f64::MIN_POSITIVE) / drive_period).ceil() as usize;
    let steps = (settle_periods + s.fit_periods) * per_drive;
    let traj = integrate_bouncer(&p1, &drive, &BouncerState::at_rest(1), dt, steps)?;
    let fit = fit_steady_state(&traj, omega, s.fit_periods)?;
    let axis = fit.axes[0];
    Ok(ResponsePoint {
        omega,
        amplitude: axis.amplitude,
        phase: axis.phase.unwrap_or(f64::NAN),
        analytic_amplitude: analytic::amplitude_response(&p1, omega)?,
        analytic_phase: analytic::phase_response(&p1, omega)?,
        residual: axis.residual,
    })
}

/// Frequency sweep; points are integrated concurrently and returned in input order.
pub fn response_sweep(p: &OscillatorParams, omegas: &[f64], s: &ResponseSettings) -> Result<Vec<ResponsePoint>> {
    omegas.par_iter().map(|&w| measure_response(p, w, s)).collect()
}
