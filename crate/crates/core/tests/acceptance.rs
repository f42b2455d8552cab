//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use subquantum::analytic::{self, ou_msd, ou_velocity_variance};
use subquantum::balance::{analytic_work_samples, balance_report, entropic_cycle, simulate_balance, BalanceSettings};
use subquantum::bouncer::{
    angular_momentum_series, integrate_bouncer, measure_work_per_period, response_sweep, steady_state, ResponseSettings,
};
use subquantum::rng::PathStream;
use subquantum::spectrum::{admissibility_scan, energy_spectrum, ScanSettings};
use subquantum::spinfield::{
    self, cross, divergence, dot, gaussian_density, local_hamiltonian_pair, norm, pauli_current, scale, spin_vector,
    Grid, SpinSign, VectorField,
};
use subquantum::stats::{log_space, SeriesWithError};
use subquantum::walker::{
    ensemble_msd, ensemble_velocity_variance, fit_diffusion, run_ensemble, EnsembleConfig, InitialVelocity, Schedule,
};
use subquantum::{BathParams, BouncerState, Drive, OscillatorParams};

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let outcome = Outcome { id, name, pass, detail: format!("{detail} [{:.2?}]", start.elapsed()) };
    println!(
        "{} criterion {:>3} {}: {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.id,
        outcome.name,
        outcome.detail
    );
    outcome
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn osc(m: f64, omega0: f64, gamma: f64, f0: f64, dims: usize) -> OscillatorParams {
    OscillatorParams::new(m, omega0, gamma, f0, dims).unwrap()
}

/// `zeta = gamma = 2 w0`, `hbar = 1`, `kT0 = hbar w0`.
fn balanced_pair() -> (OscillatorParams, BathParams) {
    let p = osc(1.0, 1.0, 2.0, 4.0, 1);
    let b = BathParams::new(p.hbar().unwrap() * p.omega0, 2.0 * p.omega0).unwrap();
    (p, b)
}

fn bouncer_response() -> (bool, String) {
    let p = osc(1.0, 1.0, 0.1, 1.0, 1);
    let omegas = log_space(0.2, 5.0, 10);
    let start = Instant::now();
    let pts = response_sweep(&p, &omegas, &ResponseSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let amp = pts.iter().map(|r| r.amplitude_rel_error()).fold(0.0, f64::max);
    let phase = pts.iter().map(|r| r.phase_error()).fold(0.0, f64::max);
    let pass = amp < 1e-3 && phase < 1e-3 && elapsed < Duration::from_secs(10);
    (
        pass,
        format!(
            "max amplitude rel err {amp:.2e} (< 1e-3), max phase err {phase:.2e} rad (< 1e-3), {elapsed:.2?} (< 10 s)"
        ),
    )
}

fn bouncer_work() -> (bool, String) {
    let p = osc(1.0, 1.0, 0.5, 1.0, 1);
    let d = Drive::linear(&p, p.omega0);
    let spp = 1000;
    let settle = (2.0 * p.transient_time().unwrap() / p.period()).ceil() as usize;
    let traj =
        integrate_bouncer(&p, &d, &BouncerState::at_rest(1), p.period() / spp as f64, (settle + 1) * spp).unwrap();
    let w = measure_work_per_period(&traj, &p, &d, 1).unwrap();
    let expect = TAU * p.gamma * p.hbar().unwrap();
    let (ed, ef) = (rel(w.drive, expect), rel(w.friction, expect));
    (
        ed < 5e-3 && ef < 5e-3,
        format!("drive rel err {ed:.2e}, friction rel err {ef:.2e} vs 2 pi gamma hbar = {expect:.6} (< 5e-3)"),
    )
}

fn angular_momentum() -> (bool, String) {
    let p = osc(1.0, 1.0, 0.2, 0.4, 2);
    let d = Drive::circular(&p).unwrap();
    let ic = steady_state(&p, &d, 0.0).unwrap();
    let traj = integrate_bouncer(&p, &d, &ic, p.period() / 1000.0, 20_000).unwrap();
    let l = angular_momentum_series(&traj, p.m).unwrap();
    let r = p.resonant_amplitude().unwrap();
    let expect = p.m * r * r * p.omega0;
    let (lo, hi) = l.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (hi - lo) / expect;
    let off = l.iter().map(|&v| rel(v, expect)).fold(0.0, f64::max);
    (spread < 1e-8 && off < 1e-8, format!("L spread {spread:.2e}, max |L - m r^2 w0| / (m r^2 w0) {off:.2e} (< 1e-8)"))
}

fn worst_z(s: &SeriesWithError, expected: impl Fn(f64) -> f64) -> (f64, f64) {
    (1..s.len())
        .map(|i| (s.z_score(i, expected(s.t[i])), s.t[i]))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

fn walker_statistics() -> (bool, String) {
    let b = BathParams::new(1.0, 1.0).unwrap();
    let m = 1.0;
    let times: Vec<f64> = log_space(1e-3, 1e3, 20).into_iter().map(|t| t / b.zeta).collect();
    let start = Instant::now();
    let stationary =
        run_ensemble(&EnsembleConfig::new(b, m, 1, 10_000, Schedule::Times(times.clone())).with_seed(4)).unwrap();
    let u0 = 3.0;
    let from_rest = run_ensemble(
        &EnsembleConfig::new(b, m, 1, 10_000, Schedule::Times(times))
            .with_seed(5)
            .with_initial_velocity(InitialVelocity::Fixed(u0)),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let (z_msd, t_msd) = worst_z(&ensemble_msd(&stationary), |t| ou_msd(&b, m, t));
    let vv = ensemble_velocity_variance(&from_rest).total;
    let (z_vv, t_vv) = worst_z(&vv, |t| ou_velocity_variance(&b, m, u0, t));
    let pass = z_msd < 4.0 && z_vv < 4.0 && elapsed < Duration::from_secs(60);
    (pass, format!(
        "20 times in [1e-3, 1e3]/zeta, M = 1e4: worst MSD z = {z_msd:.2} (t = {t_msd:.3e}), worst <u^2> z = {z_vv:.2} (t = {t_vv:.3e}) (< 4), {elapsed:.2?} (< 60 s)"
    ))
}

fn stderr_scaling() -> (bool, String) {
    let b = BathParams::new(1.0, 1.0).unwrap();
    let run = |paths| {
        let e = run_ensemble(&EnsembleConfig::new(b, 1.0, 1, paths, Schedule::Times(vec![1.0, 10.0])).with_seed(11))
            .unwrap();
        ensemble_msd(&e).stderr[2]
    };
    let ratio = run(1000) / run(4000);
    ((ratio - 2.0).abs() < 0.6, format!("stderr(M=1e3) / stderr(M=4e3) = {ratio:.3} (2 within 30%)"))
}

fn fluctuation_dissipation() -> (bool, String) {
    let b = BathParams::new(0.7, 1.3).unwrap();
    let m = 1.5;
    let times: Vec<f64> = (1..=50).map(|k| 20.0 * k as f64 / b.zeta).collect();
    let e = run_ensemble(&EnsembleConfig::new(b, m, 1, 100_000, Schedule::Times(times)).with_seed(6)).unwrap();
    let d_fit = fit_diffusion(&ensemble_msd(&e), 1, 20.0 / b.zeta).unwrap();
    let d = b.kt0 / (b.zeta * m);
    let err = rel(d_fit, d);
    (err < 0.05, format!("fitted D = {d_fit:.5}, kT0/(zeta m) = {d:.5}, rel err {err:.2e} (< 0.05)"))
}

fn energy_balance() -> (bool, String) {
    let (p, b) = balanced_pair();
    let sim = simulate_balance(&p, &b, &BalanceSettings { root_seed: 7, ..BalanceSettings::default() }).unwrap();
    let ratio = sim.report.ratio;
    let (wb, ww) = analytic_work_samples(50, &p, &b).unwrap();
    let exact = balance_report(wb, ww, 50, &p, &b).unwrap().ratio;
    let pass = (0.97..=1.03).contains(&ratio) && (exact - 1.0).abs() < 1e-12;
    (pass, format!("simulated ratio {ratio:.5} (in [0.97, 1.03]), analytic ratio - 1 = {:.1e} (< 1e-12)", exact - 1.0))
}

fn diffusion_identity() -> (bool, String) {
    let mut worst = 0.0f64;
    for (m, omega0, gamma, f0) in [(1.0, 1.0, 2.0, 4.0), (0.3, 2.5, 0.7, 1.1), (7.0, 0.2, 3.0, 0.05)] {
        let p = osc(m, omega0, gamma, f0, 1);
        let hbar = p.hbar().unwrap();
        let b = BathParams::new(hbar * omega0, analytic::friction_from_omega(omega0).unwrap()).unwrap();
        let c = analytic::derived_constants(&p, &b).unwrap();
        worst = worst.max(rel(c.d, hbar / (2.0 * m)));
    }
    (worst <= 4.0 * f64::EPSILON, format!("max |D - hbar/2m| / (hbar/2m) = {worst:.1e} (round-off)"))
}

fn entropic() -> (bool, String) {
    let (p, _) = balanced_pair();
    let r = entropic_cycle(&p, 1000).unwrap();
    let hw = p.hbar().unwrap() * p.omega0;
    let (ea, ee, et) = (rel(r.q_absorbed, hw / 2.0), rel(r.q_emitted, hw / 2.0), rel(r.e_throughput, hw));
    let pass = ea < 5e-3 && ee < 5e-3 && et < 5e-3 && r.absorption_events == 2 && r.emission_events == 2;
    (pass, format!(
        "{} absorptions / {} emissions; Q_abs rel err {ea:.1e}, Q_emit rel err {ee:.1e} vs 2 x hbar w0/4, throughput rel err {et:.1e} (< 5e-3)",
        r.absorption_events, r.emission_events
    ))
}

fn quantization_scan() -> (bool, String) {
    let scan = admissibility_scan(1.0, &ScanSettings::default()).unwrap();
    let worst_int = scan.iter().filter(|s| s.integer_ratio).map(|s| s.dissipation_value.abs()).fold(0.0, f64::max);
    let least_other =
        scan.iter().filter(|s| !s.integer_ratio).map(|s| s.dissipation_value.abs()).fold(f64::INFINITY, f64::min);
    let n_int = scan.iter().filter(|s| s.integer_ratio).count();
    (worst_int < 1e-10 && least_other > 1e-3, format!(
        "{} points, {n_int} integer: max |integer| = {worst_int:.1e} (< 1e-10), min |non-integer| = {least_other:.2e} (> 1e-3)",
        scan.len()
    ))
}

fn spectrum() -> (bool, String) {
    let (hbar, omega0) = (1.054_571_817, 2.3);
    let t = energy_spectrum(10, hbar, omega0).unwrap();
    let e_err = t.rows.iter().map(|r| rel(r.energy, (r.n as f64 + 0.5) * hbar * omega0)).fold(0.0, f64::max);
    let s_err = t.rows[1..].iter().map(|r| rel(r.s_loop, TAU * r.n as f64 * hbar)).fold(0.0, f64::max);
    let pass = t.rows.len() == 11 && e_err <= 4.0 * f64::EPSILON && s_err < 1e-13;
    (
        pass,
        format!(
            "{} rows; max E rel err {e_err:.1e}, max S_loop rel err vs 2 pi n hbar {s_err:.1e} (round-off)",
            t.rows.len()
        ),
    )
}

fn random_vec(rng: &mut PathStream) -> [f64; 3] {
    [rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0]
}

fn spin_identities() -> (bool, String) {
    let mut rng = PathStream::new(12, 0);
    let hbar = 0.9;
    let (mut mag, mut perp, mut ham, mut count) = (0.0f64, 0.0f64, 0.0f64, 0);
    while count < 1000 {
        let (v, ut) = (scale(random_vec(&mut rng), 3.0), scale(random_vec(&mut rng), 5.0));
        if norm(cross(v, ut)) < 1e-6 * norm(v) * norm(ut) {
            continue;
        }
        let (e_u, e_v) = (scale(ut, -1.0 / norm(ut)), scale(v, 1.0 / norm(v)));
        let sign = if count % 2 == 0 { SpinSign::Up } else { SpinSign::Down };
        let s = spin_vector(e_u, e_v, hbar, sign).unwrap();
        mag = mag.max((s.magnitude() - hbar / 2.0).abs());
        perp = perp.max(dot(s.s, e_u).abs());
        let (a, b) = local_hamiltonian_pair(v, ut, 1.3, hbar, sign).unwrap();
        ham = ham.max((a - b).abs() / a.abs().max(b.abs()));
        count += 1;
    }

    // u_tilde is sampled analytically so the spin term's divergence is pure truncation error
    let div_gap = |n: usize| {
        let g = Grid::centered(2, n, 5.0).unwrap();
        let p = gaussian_density(g, 1.0);
        let v = VectorField::from_fn(g, |c| [0.4 * c[1], -0.4 * c[0] + 0.1, 0.0]);
        let ut = VectorField::from_fn(g, |c| [-c[0], -c[1], 0.0]);
        let s = spin_vector([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, SpinSign::Up).unwrap();
        let j = pauli_current(&p, &v, &ut, &s).unwrap();
        let pv = p.times(&v).unwrap();
        divergence(&j).unwrap().sub(&divergence(&pv).unwrap()).unwrap().interior_max_abs()
    };
    let gaps: Vec<f64> = [41, 81, 161].iter().map(|&n| div_gap(n)).collect();
    let ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]];

    let pass = mag <= 1e-14 && perp <= 1e-14 && ham <= 1e-12 && ratios.iter().all(|&r| r >= 3.5);
    (pass, format!(
        "1000 configs: max ||s| - hbar/2| {mag:.1e}, max |s.e_u| {perp:.1e} (<= 1e-14), max H rel gap {ham:.1e} (<= 1e-12); div gap {:.2e} -> {:.2e} -> {:.2e}, ratios {:.2} / {:.2} (>= 3.5)",
        gaps[0], gaps[1], gaps[2], ratios[0], ratios[1]
    ))
}

fn heat_gradient_chain() -> (bool, String) {
    let (m, hbar, omega0) = (1.0, 1.0, 1.0);
    let kt0 = hbar * omega0;
    let g = Grid::centered(2, 801, 4.0).unwrap();
    let exact = VectorField::from_fn(g, |c| [-c[0], -c[1], 0.0]);
    let a = spinfield::friction_relation_from_log_gradient(&exact, m, hbar, omega0, kt0).unwrap();
    let p = gaussian_density(g, 1.0);
    let f = spinfield::verify_friction_relation(&p, m, hbar, omega0, kt0).unwrap();
    let (ea, ef) = (rel(a.zeta_fitted.unwrap(), 2.0 * omega0), rel(f.zeta_fitted.unwrap(), 2.0 * omega0));
    (
        ea < 1e-6 && ef < 1e-3,
        format!(
        "h = {:.3}: analytic-gradient zeta rel err {ea:.1e} (< 1e-6), finite-difference zeta rel err {ef:.1e} (< 1e-3)",
        g.spacing[0]
    ),
    )
}

fn main() {
    let outcomes = [
        check("1", "bouncer response", bouncer_response),
        check("2", "bouncer work per period", bouncer_work),
        check("3", "angular-momentum invariant", angular_momentum),
        check("4", "walker OU statistics", walker_statistics),
        check("4b", "Monte Carlo stderr scaling", stderr_scaling),
        check("5", "fluctuation-dissipation", fluctuation_dissipation),
        check("6", "energy balance", energy_balance),
        check("7", "diffusion identity", diffusion_identity),
        check("8", "entropic cycle", entropic),
        check("9", "quantization scan", quantization_scan),
        check("10", "energy spectrum", spectrum),
        check("11", "spin and current identities", spin_identities),
        check("12", "heat-gradient chain", heat_gradient_chain),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
