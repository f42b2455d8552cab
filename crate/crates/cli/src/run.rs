//! Experiment dispatch, artifact writing and the run summary.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use subquantum::analytic::{self, ou_msd};
use subquantum::balance::{
    analytic_work_samples, balance_report, entropic_cycle, simulate_balance, spin_throughput, BalanceSettings,
};
use subquantum::bouncer::{
    angular_momentum_series, fit_steady_state, integrate_bouncer, measure_work_per_period, steady_state,
};
use subquantum::spectrum::{admissibility_scan, admissible_frequencies, energy_spectrum, ScanSettings};
use subquantum::spinfield::{
    self, continuity_residual, convective_velocity, curl, divergence, gaussian_density, io as field_io,
    local_hamiltonian_pair, osmotic_velocity, pauli_current, quantum_potential_average, spin_vector,
    verify_friction_relation, Grid, ScalarField, SpinSign,
};
use subquantum::stats::{log_space, write_csv_rows, SeriesWithError};
use subquantum::walker::{
    ensemble_msd, ensemble_velocity_variance, equipartition_check, fit_diffusion, run_ensemble, EnsembleConfig,
    Schedule, Scheme,
};
use subquantum::{BouncerState, Drive, RNG_FAMILY};

use crate::config::{ConfigError, DriveKind, Experiment, ExperimentConfig, Initial, Threads};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] subquantum::Error),
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

impl RunError {
    /// 2 for configuration problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }

    fn io(context: impl Into<String>, e: impl std::fmt::Display) -> Self {
        RunError::Io { context: context.into(), message: e.to_string() }
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub hbar: Option<f64>,
    pub r: Option<f64>,
    pub tau: f64,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub tool_version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub rng_family: String,
    pub wall_clock_seconds: f64,
}

/// Files written so far; removed again if the run fails.
struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| RunError::io(format!("cannot create {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let ctx = || format!("cannot write {}", path.display());
        let file = File::create(&path).map_err(|e| RunError::io(ctx(), e))?;
        self.files.push(path.clone());
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| RunError::io(ctx(), e))
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
    }

    fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn derived(cfg: &ExperimentConfig) -> Derived {
    let p = &cfg.oscillator;
    let r = p.resonant_amplitude().ok();
    Derived {
        hbar: p.hbar().ok(),
        r,
        tau: p.period(),
        d: cfg.bath.map(|b| b.diffusion(p.m)),
        lambda: cfg.bath.map(|b| b.lambda(p.m)),
    }
}

/// Run the configured experiment, writing artifacts and `summary.json` into
/// `cfg.output_dir`. On failure every file written by this run is removed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Threads::Count(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::io("cannot start worker pool", e))?;

    let mut art = Artifacts::open(&cfg.output_dir)?;
    let outcome = pool.install(|| dispatch(cfg, &mut art)).and_then(|results| {
        let mut artifacts = art.names();
        artifacts.push("summary.json".into());
        let summary = RunSummary {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.experiment,
            config: cfg.clone(),
            derived: derived(cfg),
            results,
            artifacts,
            rng_family: RNG_FAMILY.to_string(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&summary).map_err(|e| RunError::io("cannot encode summary", e))?;
        art.write("summary.json", |w| writeln!(w, "{text}"))?;
        Ok(summary)
    });
    if outcome.is_err() {
        art.discard();
    }
    outcome
}

fn dispatch(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    match cfg.experiment {
        Experiment::Bouncer => bouncer(cfg, art),
        Experiment::Walker => walker(cfg, art),
        Experiment::Balance => balance(cfg),
        Experiment::Spectrum => spectrum(cfg, art),
        Experiment::Spinfield => spin_fields(cfg, art),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn bouncer(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.oscillator;
    let n = &cfg.numerics;
    let omega = n.omega.unwrap_or(p.omega0);
    let drive = match n.drive.unwrap_or(DriveKind::Linear) {
        DriveKind::Linear => Drive::linear(&p, omega),
        DriveKind::Uniform => Drive::uniform(&p, omega),
        DriveKind::Circular => Drive::circular(&p)?,
    };
    let period = drive.period(&p);
    let spp = n.samples_per_period.unwrap_or(1000);
    let dt = n.dt.unwrap_or(period / spp as f64);
    let periods = n.n_periods.unwrap_or(10);
    let (ic, settle) = match n.initial.unwrap_or(Initial::Rest) {
        Initial::Rest => (BouncerState::at_rest(p.dims), (2.0 * p.transient_time()? / period).ceil() as usize),
        Initial::SteadyState => (steady_state(&p, &drive, 0.0)?, 0),
    };
    let steps = n.steps.unwrap_or(((settle + periods) as f64 * period / dt).round() as usize);
    let traj = integrate_bouncer(&p, &drive, &ic, dt, steps)?;
    art.write("trajectory.csv", |w| traj.write_csv_every(w, n.record_stride.unwrap_or(1)))?;

    let fit = fit_steady_state(&traj, drive.omega, periods)?;
    let unit_gain = analytic::amplitude_response(&analytic::OscillatorParams { f0: 1.0, ..p }, drive.omega)?;
    let lag = analytic::phase_response(&p, drive.omega)?;
    let axes: Vec<Value> = fit
        .axes
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let expected_amp = unit_gain * drive.amplitudes[k];
            json!({
                "amplitude": a.amplitude,
                "phase": a.phase,
                "analytic_amplitude": expected_amp,
                "analytic_phase": (expected_amp > 0.0).then(|| subquantum::bouncer::wrap_angle(lag + drive.phases[k])),
                "residual": a.residual,
            })
        })
        .collect();
    let work = measure_work_per_period(&traj, &p, &drive, periods)?;
    let work_expected: f64 =
        drive.amplitudes.iter().map(|f| p.gamma * p.m * (drive.omega * unit_gain * f).powi(2) * period).sum();

    let angular = if p.dims >= 2 {
        let l = angular_momentum_series(&traj, p.m)?;
        let tail = &l[l.len().saturating_sub(periods * (period / dt).round() as usize + 1)..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        Some(json!({
            "mean": mean,
            "relative_spread": if mean != 0.0 { (hi - lo) / mean.abs() } else { hi - lo },
            "m_r2_omega0": p.hbar().ok(),
        }))
    } else {
        None
    };
    Ok(json!({
        "dt": dt,
        "steps": steps,
        "settle_periods": settle,
        "fit_periods": periods,
        "fit": axes,
        "transient_suspected": fit.transient_suspected,
        "work_per_period": to_value(&work),
        "work_per_period_expected": work_expected,
        "angular_momentum": angular,
    }))
}

fn worst_z(s: &SeriesWithError, expected: impl Fn(f64) -> f64) -> Option<f64> {
    (1..s.len()).map(|i| s.z_score(i, expected(s.t[i]))).reduce(f64::max)
}

fn walker(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.oscillator;
    let b = cfg.bath.ok_or_else(|| {
        ConfigError::Schema(vec![crate::config::Issue {
            path: "bath".into(),
            message: "required for the walker experiment".into(),
        }])
    })?;
    let n = &cfg.numerics;
    let schedule = match n.log_times {
        Some(lt) => Schedule::Times(log_space(lt.t_min, lt.t_max, lt.count)),
        None => Schedule::Uniform {
            dt: n.dt.unwrap_or(0.01 / b.zeta),
            steps: n.steps.unwrap_or(10_000),
            record_stride: n.record_stride.unwrap_or(10),
        },
    };
    let ec = EnsembleConfig::new(b, p.m, p.dims, n.paths.unwrap_or(1000), schedule)
        .with_scheme(n.scheme.unwrap_or(Scheme::ExactOu))
        .with_seed(cfg.root_seed);
    let e = run_ensemble(&ec)?;
    let msd = ensemble_msd(&e);
    let vv = ensemble_velocity_variance(&e).total;
    let dims = p.dims as f64;
    let msd_exact = |t: f64| dims * ou_msd(&b, p.m, t);
    let vv_exact = dims * b.velocity_variance(p.m);
    art.write("ensemble_stats.csv", |w| {
        let rows = (0..msd.len()).map(|i| {
            vec![msd.t[i], msd.mean[i], msd.stderr[i], msd_exact(msd.t[i]), vv.mean[i], vv.stderr[i], vv_exact]
        });
        write_csv_rows(w, "t,msd_mean,msd_stderr,msd_analytic,vvar_mean,vvar_stderr,vvar_analytic", rows)
    })?;
    let t_fit = 10.0 / b.zeta;
    Ok(json!({
        "metadata": to_value(&ec.metadata()),
        "records": msd.len(),
        "msd_max_z": worst_z(&msd, msd_exact),
        "vvar_max_z": worst_z(&vv, |_| vv_exact),
        "diffusion_fit_from": t_fit,
        "diffusion_fitted": fit_diffusion(&msd, p.dims, t_fit).ok(),
        "diffusion_expected": b.diffusion(p.m),
        "equipartition": to_value(&equipartition_check(&e, 0.0)?),
    }))
}

fn balance(cfg: &ExperimentConfig) -> Result<Value> {
    let p = cfg.oscillator;
    let b = cfg.bath.ok_or_else(|| {
        ConfigError::Schema(vec![crate::config::Issue {
            path: "bath".into(),
            message: "required for the balance experiment".into(),
        }])
    })?;
    let n = &cfg.numerics;
    let defaults = BalanceSettings::default();
    let settings = BalanceSettings {
        n: n.n_periods.unwrap_or(defaults.n),
        paths: n.paths.unwrap_or(defaults.paths),
        root_seed: cfg.root_seed,
        bouncer_steps_per_period: n.samples_per_period.unwrap_or(defaults.bouncer_steps_per_period),
        walker_steps_per_period: defaults.walker_steps_per_period,
    };
    let sim = simulate_balance(&p, &b, &settings)?;
    let (wb, ww) = analytic_work_samples(settings.n, &p, &b)?;
    let exact = balance_report(wb, ww, settings.n, &p, &b)?;
    let hbar = p.hbar()?;
    Ok(json!({
        "ratio": sim.report.ratio,
        "settings": to_value(&settings),
        "report": to_value(&sim.report),
        "bouncer_work_per_period": to_value(&sim.bouncer),
        "walker_work": to_value(&sim.walker),
        "analytic_ratio": exact.ratio,
        "entropic_cycle": to_value(&entropic_cycle(&p, settings.bouncer_steps_per_period.max(64))?),
        "spin_throughput": spin_throughput(hbar / 2.0, p.omega0)?,
    }))
}

fn spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.oscillator;
    let n = &cfg.numerics;
    let hbar = p.hbar()?;
    let n_max = n.n_max.unwrap_or(10);
    let table = energy_spectrum(n_max, hbar, p.omega0)?;
    art.write("spectrum.csv", |w| table.write_csv(w))?;
    let kt0 = cfg.bath.map(|b| b.kt0).filter(|&k| k > 0.0).unwrap_or(hbar * p.omega0);
    let settings = ScanSettings {
        samples_per_period: n.samples_per_period.unwrap_or(1000),
        f0: p.f0,
        kt0,
        ..ScanSettings::default()
    };
    let scan = admissibility_scan(p.omega0, &settings)?;
    art.write("scan.csv", |w| subquantum::spectrum::write_scan_csv(w, &scan))?;
    let on = scan.iter().filter(|s| s.integer_ratio).map(|s| s.dissipation_value.abs()).fold(0.0, f64::max);
    let off = scan.iter().filter(|s| !s.integer_ratio).map(|s| s.dissipation_value.abs()).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "rows": to_value(&table.rows),
        "admissible": to_value(&admissible_frequencies(p.omega0, n_max.max(1))?),
        "scan_points": scan.len(),
        "scan_max_abs_at_integers": on,
        "scan_min_abs_elsewhere": off,
        "scan_settings": to_value(&settings),
    }))
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    spinfield::scale(v, 1.0 / spinfield::norm(v))
}

fn spin_fields(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.oscillator;
    let n = &cfg.numerics;
    let (m, omega0) = (p.m, p.omega0);
    let hbar = p.hbar()?;
    let spacing_len = n.grid_spacing.as_ref().map(Vec::len);
    let shape = n.grid_shape.clone().unwrap_or_else(|| vec![101; spacing_len.unwrap_or(2)]);
    let spacing = n.grid_spacing.clone().unwrap_or_else(|| vec![0.1; shape.len()]);
    let origin: Vec<f64> = shape.iter().zip(&spacing).map(|(&k, &h)| -0.5 * (k - 1) as f64 * h).collect();
    let grid = Grid::new(&shape, &spacing, &origin)?;

    let sigma = n.sigma.unwrap_or((hbar / (2.0 * m * omega0)).sqrt());
    let raw = gaussian_density(grid, sigma);
    let norm = raw.integral();
    let prob = raw.map(|v| v / norm);
    let alpha = n.alpha.unwrap_or(0.5);
    let action = ScalarField::from_fn(grid, |c| 0.5 * alpha * m * (c[0] * c[0] - c[1] * c[1]));
    let v = convective_velocity(&action, m)?;
    let ov = osmotic_velocity(&prob, m, hbar)?;
    let sign = n.spin_sign.unwrap_or(SpinSign::Up);
    let s = spin_vector(
        unit(n.spin_u_dir.unwrap_or([1.0, 0.0, 0.0])),
        unit(n.spin_v_dir.unwrap_or([0.0, 0.0, 1.0])),
        hbar,
        sign,
    )?;
    let j = pauli_current(&prob, &v, &ov.u_tilde, &s)?;
    let pv = prob.times(&v)?;
    let div_gap = divergence(&j)?.sub(&divergence(&pv)?)?.interior_max_abs();

    // v = alpha (x, -y) is divergence-free, so dP/dt = -v . grad P = alpha P (x^2 - y^2) / sigma^2
    let dpdt = ScalarField::from_fn(grid, |c| alpha * (c[0] * c[0] - c[1] * c[1]) / (sigma * sigma))
        .values
        .iter()
        .zip(&prob.values)
        .map(|(a, b)| a * b)
        .collect::<Vec<_>>();
    let continuity = continuity_residual(&j, &ScalarField::new(grid, dpdt)?)?;

    let ham_gap = grid
        .interior()
        .filter_map(|i| local_hamiltonian_pair(v.values[i], ov.u_tilde.values[i], m, hbar, sign))
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let kt0 = cfg.bath.map(|b| b.kt0).unwrap_or(hbar * omega0);
    let friction = verify_friction_relation(&prob, m, hbar, omega0, kt0)?;
    let u_pot = quantum_potential_average(&ov.u, &prob, m)?;

    art.write("P.field", |w| field_io::write_scalar(w, &prob))?;
    art.write("S.field", |w| field_io::write_scalar(w, &action))?;
    art.write("v.field", |w| field_io::write_vector(w, &v))?;
    art.write("u.field", |w| field_io::write_vector(w, &ov.u))?;
    art.write("J.field", |w| field_io::write_vector(w, &j))?;
    let k_mid = grid.shape[2] / 2;
    let columns: [(&str, &dyn Fn(usize) -> f64); 8] = [
        ("P", &|i| prob.values[i]),
        ("S", &|i| action.values[i]),
        ("vx", &|i| v.values[i][0]),
        ("vy", &|i| v.values[i][1]),
        ("ux", &|i| ov.u.values[i][0]),
        ("uy", &|i| ov.u.values[i][1]),
        ("Jx", &|i| j.values[i][0]),
        ("Jy", &|i| j.values[i][1]),
    ];
    let mut slice_err = None;
    art.write("fields_slice.csv", |w| {
        if let Err(e) = field_io::write_slice_csv(w, &grid, k_mid, &columns) {
            slice_err = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = slice_err {
        return Err(e.into());
    }

    Ok(json!({
        "grid": to_value(&grid),
        "sigma": sigma,
        "normalization_before_rescale": norm,
        "spin": to_value(&s),
        "curl_v_max": curl(&v)?.interior_max_norm(),
        "curl_u_max": curl(&ov.u)?.interior_max_norm(),
        "div_identity_gap": div_gap,
        "continuity": to_value(&continuity),
        "hamiltonian_max_relative_gap": ham_gap,
        "friction_relation": to_value(&friction),
        "quantum_potential_average": u_pot,
        "quantum_potential_gaussian": grid.dims as f64 * hbar * hbar / (8.0 * m * sigma * sigma),
    }))
}

/// One-line highlights for the terminal.
pub fn headline(s: &RunSummary) -> Vec<String> {
    let r = &s.results;
    let f = |v: &Value| v.as_f64().map(|x| format!("{x:.6e}")).unwrap_or_else(|| v.to_string());
    match s.experiment {
        Experiment::Bouncer => vec![
            format!("drive work per period {}", f(&r["work_per_period"]["drive"])),
            format!("expected {}", f(&r["work_per_period_expected"])),
        ],
        Experiment::Walker => vec![
            format!("max MSD z-score {}", f(&r["msd_max_z"])),
            format!("D fitted {} vs {}", f(&r["diffusion_fitted"]), f(&r["diffusion_expected"])),
        ],
        Experiment::Balance => vec![format!("work ratio {}", f(&r["ratio"]))],
        Experiment::Spectrum => vec![format!("{} levels", r["rows"].as_array().map_or(0, Vec::len))],
        Experiment::Spinfield => vec![
            format!("div identity gap {}", f(&r["div_identity_gap"])),
            format!("fitted zeta {}", f(&r["friction_relation"]["zeta_fitted"])),
        ],
    }
}
