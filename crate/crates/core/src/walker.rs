//! Langevin walker `m u' = -m zeta u + f(t)` with white-noise forcing of
//! strength `lambda`, simulated as an ensemble of independent paths.
//!
//! Paths run in parallel but every reduction over paths is a fold in path
//! index order, so results are bit-identical for any worker count.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::BathParams;
use crate::error::{ensure, Error, Result};
use crate::rng::{PathStream, RNG_FAMILY};
use crate::stats::{linear_fit, mean_stderr, write_csv_rows, SeriesWithError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact Gaussian transition of the joint `(x, u)` process.
    ExactOu,
    EulerMaruyama,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ExactOu => "exact-ou",
            Scheme::EulerMaruyama => "euler-maruyama",
        }
    }

    fn normals_per_axis(self) -> usize {
        match self {
            Scheme::ExactOu => 2,
            Scheme::EulerMaruyama => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub lambda: f64,
    pub scheme: Scheme,
}

impl NoiseModel {
    /// Noise obeying the Einstein relation `lambda = 2 zeta m kT0`.
    pub fn from_bath(b: &BathParams, m: f64, scheme: Scheme) -> Self {
        Self { lambda: b.lambda(m), scheme }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl WalkerState {
    pub fn at_origin(dims: usize, u0: f64) -> Self {
        Self { x: vec![0.0; dims], u: vec![u0; dims] }
    }
}

/// Per-step transition coefficients for a fixed `dt`.
#[derive(Debug, Clone, Copy)]
struct Transition {
    scheme: Scheme,
    dt: f64,
    // exact-ou: mean and Cholesky factor of the (u, x) increment
    u_decay: f64,
    x_from_u: f64,
    l_uu: f64,
    l_xu: f64,
    l_xx: f64,
    // euler-maruyama
    em_decay: f64,
    em_kick: f64,
}

/// `2a - 3 + 4e^-a - e^-2a`, accurate for small `a`.
fn position_variance_kernel(a: f64) -> f64 {
    if a < 0.5 {
        // sum_k>=3 (-1)^k (4 - 2^k) a^k / k!
        let mut sum = 0.0;
        let mut pow = a * a * a / 6.0;
        let mut k = 3;
        while k < 60 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * (4.0 - 2f64.powi(k)) * pow;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            k += 1;
            pow *= a / k as f64;
        }
        sum
    } else {
        2.0 * a - 3.0 + 4.0 * (-a).exp() - (-2.0 * a).exp()
    }
}

impl Transition {
    fn new(zeta: f64, m: f64, noise: &NoiseModel, dt: f64) -> Self {
        let var = noise.lambda / (2.0 * zeta * m * m);
        let a = zeta * dt;
        let one_minus_e1 = -(-a).exp_m1();
        let var_u = var * -(-2.0 * a).exp_m1();
        let cov = var / zeta * one_minus_e1 * one_minus_e1;
        let var_x = var / (zeta * zeta) * position_variance_kernel(a);
        let (l_uu, l_xu, l_xx) = if var_u > 0.0 {
            let l_uu = var_u.sqrt();
            let l_xu = cov / l_uu;
            (l_uu, l_xu, (var_x - l_xu * l_xu).max(0.0).sqrt())
        } else {
            (0.0, 0.0, 0.0)
        };
        Self {
            scheme: noise.scheme,
            dt,
            u_decay: (-a).exp(),
            x_from_u: one_minus_e1 / zeta,
            l_uu,
            l_xu,
            l_xx,
            em_decay: 1.0 - a,
            em_kick: (noise.lambda / (m * m) * dt).sqrt(),
        }
    }

    fn apply(&self, x: &mut [f64], u: &mut [f64], rng: &mut PathStream) {
        match self.scheme {
            Scheme::ExactOu => {
                for (xk, uk) in x.iter_mut().zip(u.iter_mut()) {
                    let z1 = rng.normal();
                    let z2 = rng.normal();
                    let u0 = *uk;
                    *uk = u0 * self.u_decay + self.l_uu * z1;
                    *xk += u0 * self.x_from_u + self.l_xu * z1 + self.l_xx * z2;
                }
            }
            Scheme::EulerMaruyama => {
                for (xk, uk) in x.iter_mut().zip(u.iter_mut()) {
                    let z = rng.normal();
                    let u0 = *uk;
                    *xk += u0 * self.dt;
                    *uk = u0 * self.em_decay + self.em_kick * z;
                }
            }
        }
        rng.align();
    }
}

/// Advance one walker by `dt`.
pub fn step_walker(
    state: &WalkerState,
    b: &BathParams,
    m: f64,
    noise: &NoiseModel,
    dt: f64,
    rng: &mut PathStream,
) -> WalkerState {
    let mut next = state.clone();
    Transition::new(b.zeta, m, noise, dt).apply(&mut next.x, &mut next.u, rng);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialVelocity {
    /// Each axis drawn from the stationary distribution, variance `kT0/m`.
    Stationary,
    /// The same fixed `u0` on every axis.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `steps` steps of `dt`, recording every `record_stride`-th state.
    Uniform { dt: f64, steps: usize, record_stride: usize },
    /// Step straight to each listed time. Only valid for the exact scheme,
    /// whose transition is exact for any step length.
    Times(Vec<f64>),
}

pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub bath: BathParams,
    pub m: f64,
    pub dims: usize,
    pub paths: usize,
    pub scheme: Scheme,
    pub schedule: Schedule,
    pub initial_velocity: InitialVelocity,
    pub root_seed: u64,
    pub memory_budget: u64,
}

impl EnsembleConfig {
    pub fn new(bath: BathParams, m: f64, dims: usize, paths: usize, schedule: Schedule) -> Self {
        Self {
            bath,
            m,
            dims,
            paths,
            scheme: Scheme::ExactOu,
            schedule,
            initial_velocity: InitialVelocity::Stationary,
            root_seed: 0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_initial_velocity(mut self, iv: InitialVelocity) -> Self {
        self.initial_velocity = iv;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.root_seed = seed;
        self
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::from_bath(&self.bath, self.m, self.scheme)
    }

    /// Recorded sample times, starting with `t = 0`.
    pub fn record_times(&self) -> Vec<f64> {
        match &self.schedule {
            Schedule::Uniform { dt, steps, record_stride } => {
                (0..=*steps).step_by(*record_stride).map(|k| k as f64 * dt).collect()
            }
            Schedule::Times(ts) => std::iter::once(0.0).chain(ts.iter().copied()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bath.validate()?;
        ensure(self.m.is_finite() && self.m > 0.0, "m", || format!("must be > 0, got {}", self.m))?;
        ensure(self.dims >= 1, "dims", || "must be >= 1".into())?;
        ensure(self.paths >= 1, "paths", || "must be >= 1".into())?;
        if let InitialVelocity::Fixed(u0) = self.initial_velocity {
            ensure(u0.is_finite(), "initial_velocity", || "must be finite".into())?;
        }
        match &self.schedule {
            Schedule::Uniform { dt, record_stride, .. } => {
                ensure(dt.is_finite() && *dt > 0.0, "dt", || format!("must be > 0, got {dt}"))?;
                ensure(*record_stride >= 1, "record_stride", || "must be >= 1".into())?;
            }
            Schedule::Times(ts) => {
                ensure(self.scheme == Scheme::ExactOu, "schedule", || {
                    "explicit record times need the exact-ou scheme".into()
                })?;
                let mut prev = 0.0;
                for &t in ts {
                    ensure(t.is_finite() && t > prev, "schedule", || {
                        "record times must be finite, positive and strictly increasing".into()
                    })?;
                    prev = t;
                }
            }
        }
        let required = self.required_bytes();
        if required > self.memory_budget {
            return Err(Error::ResourceLimit { required, budget: self.memory_budget });
        }
        Ok(())
    }

    pub fn required_bytes(&self) -> u64 {
        let records = match &self.schedule {
            Schedule::Uniform { steps, record_stride, .. } => (*steps / (*record_stride).max(1) + 1) as u64,
            Schedule::Times(ts) => ts.len() as u64 + 1,
        };
        records
            .saturating_mul(self.paths as u64)
            .saturating_mul(self.dims as u64)
            .saturating_mul(2 * std::mem::size_of::<f64>() as u64)
    }

    pub fn metadata(&self) -> RunMetadata {
        let (dt, steps, record_stride) = match &self.schedule {
            Schedule::Uniform { dt, steps, record_stride } => (Some(*dt), *steps, Some(*record_stride)),
            Schedule::Times(ts) => (None, ts.len(), None),
        };
        RunMetadata {
            root_seed: self.root_seed,
            scheme: self.scheme,
            paths: self.paths,
            dims: self.dims,
            dt,
            steps,
            record_stride,
            rng_family: RNG_FAMILY.to_string(),
        }
    }

    /// First stream word used by step `step` of any path.
    pub fn step_word_offset(&self, step: u64) -> u64 {
        let header = PathStream::words_for_normals(self.dims);
        let per_step = PathStream::words_for_normals(self.dims * self.scheme.normals_per_axis());
        header + step * per_step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub root_seed: u64,
    pub scheme: Scheme,
    pub paths: usize,
    pub dims: usize,
    pub dt: Option<f64>,
    pub steps: usize,
    pub record_stride: Option<usize>,
    pub rng_family: String,
}

/// Recorded samples of every path. Layout: `[path][record][axis]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerEnsemble {
    config: EnsembleConfig,
    times: Vec<f64>,
    x: Vec<f64>,
    u: Vec<f64>,
}

impl WalkerEnsemble {
    /// Wrap externally produced samples laid out as `[path][record][axis]`.
    pub fn from_raw(config: EnsembleConfig, times: Vec<f64>, x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let expected = config.paths * times.len() * config.dims;
        if x.len() != expected || u.len() != expected || times.is_empty() {
            return Err(Error::Dimension(format!(
                "expected {expected} samples per field, got {} and {}",
                x.len(),
                u.len()
            )));
        }
        Ok(Self { config, times, x, u })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn paths(&self) -> usize {
        self.config.paths
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    fn offset(&self, path: usize, record: usize) -> usize {
        (path * self.times.len() + record) * self.config.dims
    }

    pub fn position(&self, path: usize, record: usize) -> &[f64] {
        let o = self.offset(path, record);
        &self.x[o..o + self.config.dims]
    }

    pub fn velocity(&self, path: usize, record: usize) -> &[f64] {
        let o = self.offset(path, record);
        &self.u[o..o + self.config.dims]
    }

    /// Per-path scalar statistic at every record, reduced in path order.
    fn series<F>(&self, f: F) -> SeriesWithError
    where
        F: Fn(usize, usize) -> f64,
    {
        let (mut mean, mut stderr) = (Vec::new(), Vec::new());
        for r in 0..self.times.len() {
            let (m, s) = mean_stderr((0..self.paths()).map(|p| f(p, r)));
            mean.push(m);
            stderr.push(s);
        }
        SeriesWithError { t: self.times.clone(), mean, stderr }
    }
}

fn simulate_path(cfg: &EnsembleConfig, noise: &NoiseModel, path: usize, times: &[f64], xs: &mut [f64], us: &mut [f64]) {
    let dims = cfg.dims;
    let mut rng = PathStream::new(cfg.root_seed, path as u64);
    let sigma = (noise.lambda / (2.0 * cfg.bath.zeta * cfg.m * cfg.m)).sqrt();
    let mut x = vec![0.0; dims];
    let mut u: Vec<f64> = match cfg.initial_velocity {
        InitialVelocity::Stationary => (0..dims).map(|_| sigma * rng.normal()).collect(),
        InitialVelocity::Fixed(u0) => vec![u0; dims],
    };
    rng.seek(cfg.step_word_offset(0));
    xs[..dims].copy_from_slice(&x);
    us[..dims].copy_from_slice(&u);

    match &cfg.schedule {
        Schedule::Uniform { dt, steps, record_stride } => {
            let tr = Transition::new(cfg.bath.zeta, cfg.m, noise, *dt);
            let mut record = 1;
            for step in 1..=*steps {
                tr.apply(&mut x, &mut u, &mut rng);
                if step % record_stride == 0 {
                    xs[record * dims..(record + 1) * dims].copy_from_slice(&x);
                    us[record * dims..(record + 1) * dims].copy_from_slice(&u);
                    record += 1;
                }
            }
        }
        Schedule::Times(_) => {
            for record in 1..times.len() {
                let dt = times[record] - times[record - 1];
                Transition::new(cfg.bath.zeta, cfg.m, noise, dt).apply(&mut x, &mut u, &mut rng);
                xs[record * dims..(record + 1) * dims].copy_from_slice(&x);
                us[record * dims..(record + 1) * dims].copy_from_slice(&u);
            }
        }
    }
}

/// Simulate `paths` independent walkers from `x = 0`.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<WalkerEnsemble> {
    cfg.validate()?;
    let times = cfg.record_times();
    let noise = cfg.noise();
    let chunk = times.len() * cfg.dims;
    let mut x = vec![0.0; chunk * cfg.paths];
    let mut u = vec![0.0; chunk * cfg.paths];
    x.par_chunks_mut(chunk)
        .zip(u.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(path, (xs, us))| simulate_path(cfg, &noise, path, &times, xs, us));
    Ok(WalkerEnsemble { config: cfg.clone(), times, x, u })
}

/// `<|x(t) - x(0)|^2>` summed over axes.
pub fn ensemble_msd(e: &WalkerEnsemble) -> SeriesWithError {
    e.series(|p, r| e.position(p, r).iter().zip(e.position(p, 0)).map(|(x, x0)| (x - x0) * (x - x0)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityVariance {
    pub total: SeriesWithError,
    pub per_axis: Vec<SeriesWithError>,
}

pub fn ensemble_velocity_variance(e: &WalkerEnsemble) -> VelocityVariance {
    let total = e.series(|p, r| e.velocity(p, r).iter().map(|u| u * u).sum());
    let per_axis = (0..e.dims()).map(|k| e.series(|p, r| e.velocity(p, r)[k].powi(2))).collect();
    VelocityVariance { total, per_axis }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerWork {
    pub value: f64,
    pub stderr: f64,
    pub t_start: f64,
    pub duration: f64,
}

/// `m zeta integral <u^2> dt` over `n tau` starting at the first record.
pub fn measure_walker_work(e: &WalkerEnsemble, n: usize, tau: f64) -> Result<WalkerWork> {
    measure_walker_work_from(e, n, tau, e.times[0])
}

/// As [`measure_walker_work`], starting at `t_start` to skip a transient.
pub fn measure_walker_work_from(e: &WalkerEnsemble, n: usize, tau: f64, t_start: f64) -> Result<WalkerWork> {
    ensure(n >= 1, "n", || "must be >= 1".into())?;
    ensure(tau.is_finite() && tau > 0.0, "tau", || format!("must be > 0, got {tau}"))?;
    let duration = n as f64 * tau;
    let t_end = t_start + duration;
    let times = &e.times;
    let span = times[times.len() - 1] - times[0];
    let tol = 1e-9 * t_end.abs().max(1.0);
    if t_end > times[times.len() - 1] + tol || t_start < times[0] - tol {
        return Err(Error::WindowExceedsTrajectory { requested: duration, available: span });
    }
    let find = |t: f64| times.iter().position(|&s| (s - t).abs() <= tol);
    let (first, last) = match (find(t_start), find(t_end)) {
        (Some(a), Some(b)) if b > a => (a, b),
        _ => {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("window [{t_start}, {t_end}] does not start and end on recorded times"),
            })
        }
    };
    let scale = e.config.m * e.config.bath.zeta;
    let per_path = (0..e.paths()).map(|p| {
        let mut acc = 0.0;
        for r in first..last {
            let a: f64 = e.velocity(p, r).iter().map(|u| u * u).sum();
            let b: f64 = e.velocity(p, r + 1).iter().map(|u| u * u).sum();
            acc += 0.5 * (a + b) * (times[r + 1] - times[r]);
        }
        scale * acc
    });
    let (value, stderr) = mean_stderr(per_path);
    Ok(WalkerWork { value, stderr, t_start, duration })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisEnergy {
    pub mean: f64,
    pub stderr: f64,
    /// Distance from the expected `kT0/2` in standard errors.
    pub deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipartitionReport {
    pub expected: f64,
    pub per_axis: Vec<AxisEnergy>,
    pub any_flagged: bool,
}

/// Flag threshold, in standard errors.
pub const EQUIPARTITION_FLAG_SIGMA: f64 = 4.0;

/// Per-axis `m <u_k^2> / 2` from records at `t >= t_from`, each path's time
/// average treated as one independent sample.
pub fn equipartition_check(e: &WalkerEnsemble, t_from: f64) -> Result<EquipartitionReport> {
    let records: Vec<usize> = (0..e.times.len()).filter(|&r| e.times[r] >= t_from).collect();
    if records.is_empty() {
        return Err(Error::InsufficientData(format!("no records at t >= {t_from}")));
    }
    let expected = 0.5 * e.config.bath.kt0;
    let half_m = 0.5 * e.config.m;
    let per_axis: Vec<AxisEnergy> = (0..e.dims())
        .map(|k| {
            let (mean, stderr) = mean_stderr((0..e.paths()).map(|p| {
                records.iter().map(|&r| half_m * e.velocity(p, r)[k].powi(2)).sum::<f64>() / records.len() as f64
            }));
            let diff = (mean - expected).abs();
            let deviation = if diff == 0.0 { 0.0 } else { diff / stderr };
            AxisEnergy { mean, stderr, deviation, flagged: deviation > EQUIPARTITION_FLAG_SIGMA }
        })
        .collect();
    let any_flagged = per_axis.iter().any(|a| a.flagged);
    Ok(EquipartitionReport { expected, per_axis, any_flagged })
}

/// Half the slope of a least-squares line through the MSD at `t >= t_min`,
/// divided by the number of axes.
pub fn fit_diffusion(msd: &SeriesWithError, dims: usize, t_min: f64) -> Result<f64> {
    let (t, y): (Vec<f64>, Vec<f64>) =
        msd.t.iter().zip(&msd.mean).filter(|(t, _)| **t >= t_min).map(|(t, y)| (*t, *y)).unzip();
    if t.len() < 2 {
        return Err(Error::InsufficientData(format!("need two MSD points at t >= {t_min}")));
    }
    let (_, slope) = linear_fit(&t, &y);
    Ok(slope / (2.0 * dims as f64))
}

/// `t,msd_mean,msd_stderr,vvar_mean,vvar_stderr`.
pub fn write_stats_csv<W: Write>(w: W, msd: &SeriesWithError, vvar: &SeriesWithError) -> io::Result<()> {
    let rows = (0..msd.len()).map(|i| vec![msd.t[i], msd.mean[i], msd.stderr[i], vvar.mean[i], vvar.stderr[i]]);
    write_csv_rows(w, "t,msd_mean,msd_stderr,vvar_mean,vvar_stderr", rows)
}
