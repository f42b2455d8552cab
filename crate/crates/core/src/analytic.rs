//! Closed-form results for the driven oscillator ("bouncer"), the Langevin
//! walker, and their energy balance.
//!
//! Everything here is a pure function of its inputs. The simulation modules
//! are tested against these formulas, so they are kept as direct as possible.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Physical constants of the driven damped oscillator
/// `m x'' = -m w0^2 x - 2 gamma m x' + F0 cos(w t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    pub m: f64,
    pub omega0: f64,
    pub gamma: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(default = "one")]
    pub dims: usize,
}

fn one() -> usize {
    1
}

impl OscillatorParams {
    pub fn new(m: f64, omega0: f64, gamma: f64, f0: f64, dims: usize) -> Result<Self> {
        let p = Self { m, omega0, gamma, f0, dims };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.m.is_finite() && self.m > 0.0, "m", || format!("must be > 0, got {}", self.m))?;
        ensure(self.omega0.is_finite() && self.omega0 > 0.0, "omega0", || format!("must be > 0, got {}", self.omega0))?;
        ensure(self.gamma.is_finite() && self.gamma >= 0.0, "gamma", || format!("must be >= 0, got {}", self.gamma))?;
        ensure(self.f0.is_finite() && self.f0 >= 0.0, "F0", || format!("must be >= 0, got {}", self.f0))?;
        ensure(self.dims >= 1, "dims", || "must be >= 1".into())
    }

    /// Natural period `2 pi / omega0`.
    pub fn period(&self) -> f64 {
        TAU / self.omega0
    }

    /// Steady-state amplitude at resonance, `F0 / (2 gamma m omega0)`.
    pub fn resonant_amplitude(&self) -> Result<f64> {
        if self.gamma == 0.0 {
            return Err(Error::ZeroFriction);
        }
        Ok(self.f0 / (2.0 * self.gamma * self.m * self.omega0))
    }

    /// The per-system action invariant `m r^2 omega0`.
    pub fn hbar(&self) -> Result<f64> {
        let r = self.resonant_amplitude()?;
        Ok(self.m * r * r * self.omega0)
    }

    /// Slowest decay rate of the homogeneous solution. For an underdamped
    /// oscillator this is `gamma`; overdamped it is `gamma - sqrt(gamma^2 - omega0^2)`.
    pub fn relaxation_rate(&self) -> f64 {
        let disc = self.gamma * self.gamma - self.omega0 * self.omega0;
        if disc <= 0.0 {
            self.gamma
        } else {
            // w0^2 / (gamma + sqrt(disc)) avoids cancellation for gamma >> w0
            self.omega0 * self.omega0 / (self.gamma + disc.sqrt())
        }
    }

    /// Time after which the transient has decayed by `e^-10`.
    pub fn transient_time(&self) -> Result<f64> {
        if self.gamma == 0.0 {
            return Err(Error::ZeroFriction);
        }
        Ok(10.0 / self.relaxation_rate())
    }
}

/// Thermal bath seen by the walker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    #[serde(rename = "kT0")]
    pub kt0: f64,
    pub zeta: f64,
}

impl BathParams {
    pub fn new(kt0: f64, zeta: f64) -> Result<Self> {
        let b = Self { kt0, zeta };
        b.validate()?;
        Ok(b)
    }

    /// `kT0 = 0` is accepted so that noiseless ensembles can be built.
    pub fn validate(&self) -> Result<()> {
        ensure(self.kt0.is_finite() && self.kt0 >= 0.0, "kT0", || format!("must be >= 0, got {}", self.kt0))?;
        ensure(self.zeta.is_finite() && self.zeta > 0.0, "zeta", || format!("must be > 0, got {}", self.zeta))
    }

    /// Noise strength `2 zeta m kT0` (Einstein relation).
    pub fn lambda(&self, m: f64) -> f64 {
        2.0 * self.zeta * m * self.kt0
    }

    /// Diffusion constant `kT0 / (zeta m)`.
    pub fn diffusion(&self, m: f64) -> f64 {
        self.kt0 / (self.zeta * m)
    }

    /// Stationary per-axis velocity variance `kT0 / m`.
    pub fn velocity_variance(&self, m: f64) -> f64 {
        self.kt0 / m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub r: f64,
    pub tau: f64,
    pub hbar: f64,
    pub lambda: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// `(F0/m) / sqrt((w0^2 - w^2)^2 + (2 gamma w)^2)`.
pub fn amplitude_response(p: &OscillatorParams, omega: f64) -> Result<f64> {
    ensure(omega.is_finite() && omega >= 0.0, "omega", || format!("must be >= 0, got {omega}"))?;
    let detuning = p.omega0 * p.omega0 - omega * omega;
    let damping = 2.0 * p.gamma * omega;
    let denom = detuning.hypot(damping);
    if denom == 0.0 {
        return Err(Error::UndampedResonance);
    }
    Ok(p.f0 / p.m / denom)
}

/// Phase lag of the steady response `A cos(w t + phi)` behind the drive
/// `cos(w t)`, on the branch `(-pi, 0]`.
pub fn phase_response(p: &OscillatorParams, omega: f64) -> Result<f64> {
    ensure(omega.is_finite() && omega >= 0.0, "omega", || format!("must be >= 0, got {omega}"))?;
    let detuning = p.omega0 * p.omega0 - omega * omega;
    let damping = 2.0 * p.gamma * omega;
    if damping == 0.0 {
        // free oscillator: in phase below resonance, antiphase above,
        // quadrature exactly at resonance by continuity
        return Ok(if detuning > 0.0 {
            0.0
        } else if detuning < 0.0 {
            -PI
        } else {
            -PI / 2.0
        });
    }
    let phi = (-damping).atan2(detuning);
    Ok(if phi == 0.0 { 0.0 } else { phi })
}

pub fn derived_constants(p: &OscillatorParams, b: &BathParams) -> Result<DerivedConstants> {
    p.validate()?;
    b.validate()?;
    let r = p.resonant_amplitude()?;
    Ok(DerivedConstants {
        r,
        tau: p.period(),
        hbar: p.m * r * r * p.omega0,
        lambda: b.lambda(p.m),
        d: b.diffusion(p.m),
    })
}

/// `a - 1 + e^-a`, accurate for small `a`.
fn ballistic_kernel(a: f64) -> f64 {
    if a < 0.1 {
        // a^2/2 - a^3/6 + a^4/24 - ...
        let mut term = a * a / 2.0;
        let mut sum = 0.0f64;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() && k < 40.0 {
            sum += term;
            k += 1.0;
            term *= -a / k;
        }
        sum
    } else {
        a + (-a).exp_m1()
    }
}

/// Ornstein-Uhlenbeck mean squared displacement per axis:
/// `(2 kT0 / (zeta^2 m)) (zeta |t| - 1 + e^(-zeta |t|))`.
pub fn ou_msd(b: &BathParams, m: f64, t: f64) -> f64 {
    let a = b.zeta * t.abs();
    2.0 * b.kt0 / (b.zeta * b.zeta * m) * ballistic_kernel(a)
}

/// Per-axis `<u^2(t)>` for a walker started at velocity `u0`.
pub fn ou_velocity_variance(b: &BathParams, m: f64, u0: f64, t: f64) -> f64 {
    let decay = (-2.0 * b.zeta * t).exp();
    let lambda = b.lambda(m);
    // (1 - e^-2zt) written with exp_m1 to keep the short-time limit exact
    lambda / (2.0 * b.zeta * m * m) * -(-2.0 * b.zeta * t).exp_m1() + u0 * u0 * decay
}

/// Work taken up from the bath per period in steady state, `2 pi gamma hbar`.
pub fn bouncer_work_per_period(p: &OscillatorParams) -> Result<f64> {
    if p.gamma == 0.0 {
        return Err(Error::ZeroFriction);
    }
    Ok(TAU * p.gamma * p.hbar()?)
}

/// The same work written through the amplitude, `gamma m w0^2 A^2 tau`.
/// With `A = r` this equals [`bouncer_work_per_period`].
pub fn bouncer_work_from_amplitude(p: &OscillatorParams, amplitude: f64) -> f64 {
    p.gamma * p.m * p.omega0 * p.omega0 * amplitude * amplitude * p.period()
}

/// Walker work over `n` periods in `N` dimensions: `n N (2 pi / w0) zeta kT0`.
pub fn walker_work(n: usize, p: &OscillatorParams, b: &BathParams) -> Result<f64> {
    ensure(n >= 1, "n", || "must be >= 1".into())?;
    Ok(n as f64 * p.dims as f64 * p.period() * b.zeta * b.kt0)
}

/// `E_tot = (gamma / zeta) hbar w0`.
pub fn stationary_energy(p: &OscillatorParams, b: &BathParams) -> Result<f64> {
    b.validate()?;
    Ok(p.gamma / b.zeta * p.hbar()? * p.omega0)
}

/// Bath temperature that balances bouncer and walker work,
/// `kT0 = (gamma / zeta) hbar w0 / N`.
pub fn balanced_kt0(p: &OscillatorParams, zeta: f64) -> Result<f64> {
    ensure(zeta > 0.0, "zeta", || format!("must be > 0, got {zeta}"))?;
    Ok(p.gamma / zeta * p.hbar()? * p.omega0 / p.dims as f64)
}

/// Common friction `zeta = gamma = 2 w0` fixed by the heat-gradient relation.
pub fn friction_from_omega(omega0: f64) -> Result<f64> {
    ensure(omega0.is_finite() && omega0 > 0.0, "omega0", || format!("must be > 0, got {omega0}"))?;
    Ok(2.0 * omega0)
}

/// `E0 = hbar w0 / 2`.
pub fn zero_point_energy(p: &OscillatorParams) -> Result<f64> {
    Ok(p.hbar()? * p.omega0 / 2.0)
}

/// `S0 = E0 / w0 = hbar / 2`.
pub fn zero_point_action(p: &OscillatorParams) -> Result<f64> {
    Ok(zero_point_energy(p)? / p.omega0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    fn osc(m: f64, w0: f64, g: f64, f0: f64) -> OscillatorParams {
        OscillatorParams::new(m, w0, g, f0, 1).unwrap()
    }

    #[test]
    fn amplitude_examples() {
        let p = osc(1.0, 1.0, 0.1, 1.0);
        assert!(close(amplitude_response(&p, 1.0).unwrap(), 5.0, 1e-14));
        assert!(close(amplitude_response(&p, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(amplitude_response(&p, 10.0).unwrap(), 1.0 / 9805f64.sqrt(), 1e-14));
        assert!((amplitude_response(&p, 10.0).unwrap() - 0.010099).abs() < 1e-6);
    }

    #[test]
    fn amplitude_undamped_resonance_is_an_error() {
        let p = osc(1.0, 1.0, 0.0, 1.0);
        assert_eq!(amplitude_response(&p, 1.0), Err(Error::UndampedResonance));
        assert!(amplitude_response(&p, 0.5).is_ok());
    }

    #[test]
    fn phase_examples() {
        let p = osc(1.0, 1.0, 0.1, 1.0);
        assert!(close(phase_response(&p, 1.0).unwrap(), -PI / 2.0, 1e-15));
        let low = phase_response(&p, 1e-9).unwrap();
        assert!(low <= 0.0 && low > -1e-9);
        assert_eq!(phase_response(&p, 0.0).unwrap(), 0.0);
        let hi = phase_response(&p, 2.0).unwrap();
        assert!((hi - (-0.4f64).atan2(-3.0)).abs() < 1e-15);
        assert!((hi + 3.009041).abs() < 1e-6);
    }

    #[test]
    fn phase_free_oscillator_branches() {
        let p = osc(1.0, 1.0, 0.0, 1.0);
        assert_eq!(phase_response(&p, 0.5).unwrap(), 0.0);
        assert_eq!(phase_response(&p, 2.0).unwrap(), -PI);
        assert_eq!(phase_response(&p, 1.0).unwrap(), -PI / 2.0);
    }

    #[test]
    fn derived_constant_examples() {
        let b = BathParams::new(1.0, 1.0).unwrap();
        let d = derived_constants(&osc(1.0, 1.0, 0.5, 1.0), &b).unwrap();
        assert_eq!((d.r, d.hbar, d.lambda, d.d), (1.0, 1.0, 2.0, 1.0));
        assert!(close(d.tau, TAU, 1e-15));
        assert!(close(d.tau * 1.0, TAU, 1e-15));

        let d = derived_constants(&osc(1.0, 2.0, 1.0, 4.0), &b).unwrap();
        assert_eq!((d.r, d.hbar), (1.0, 2.0));

        // kT0 = hbar w0, zeta = 2 w0  =>  D = hbar / 2m
        let p = osc(1.0, 1.0, 0.5, 1.0);
        let hbar = p.hbar().unwrap();
        let b = BathParams::new(hbar * p.omega0, friction_from_omega(p.omega0).unwrap()).unwrap();
        let d = derived_constants(&p, &b).unwrap();
        assert_eq!(d.d, 0.5);
        // hbar = m u r with u = w0 r
        assert!(close(p.m * (p.omega0 * d.r) * d.r, d.hbar, 1e-15));
    }

    #[test]
    fn zero_friction_rejected_where_formulas_divide_by_gamma() {
        let p = osc(1.0, 1.0, 0.0, 1.0);
        let b = BathParams::new(1.0, 1.0).unwrap();
        assert_eq!(derived_constants(&p, &b), Err(Error::ZeroFriction));
        assert_eq!(bouncer_work_per_period(&p), Err(Error::ZeroFriction));
        assert!(zero_point_energy(&p).is_err());
    }

    #[test]
    fn ou_msd_examples() {
        let b = BathParams::new(1.0, 1.0).unwrap();
        assert_eq!(ou_msd(&b, 1.0, 0.0), 0.0);
        let expect = 2.0 * (0.01 - 1.0 + (-0.01f64).exp());
        assert!(close(ou_msd(&b, 1.0, 0.01), expect, 1e-10));
        assert!((ou_msd(&b, 1.0, 0.01) - 9.9667e-5).abs() < 1e-9);
        assert!(close(ou_msd(&b, 1.0, 100.0), 198.0, 1e-12));
        assert_eq!(ou_msd(&b, 1.0, -3.0), ou_msd(&b, 1.0, 3.0));
    }

    #[test]
    fn ou_msd_limits() {
        let b = BathParams::new(1.3, 0.7).unwrap();
        let m = 2.0;
        let t_short = 1e-3 / b.zeta;
        let ballistic = b.kt0 / m * t_short * t_short;
        assert!(close(ou_msd(&b, m, t_short), ballistic, 1e-3));
        let t_long = 1e4 / b.zeta;
        let diffusive = 2.0 * b.diffusion(m) * t_long;
        assert!(close(ou_msd(&b, m, t_long), diffusive, 1e-3));
    }

    #[test]
    fn ou_msd_kernel_is_continuous_across_series_switch() {
        let below = ballistic_kernel(0.1 - 1e-12);
        let above = ballistic_kernel(0.1);
        assert!(close(below, above, 1e-10));
    }

    #[test]
    fn velocity_variance_examples() {
        let b = BathParams::new(1.0, 1.0).unwrap();
        assert_eq!(ou_velocity_variance(&b, 1.0, 3.0, 0.0), 9.0);
        assert!(close(ou_velocity_variance(&b, 1.0, 0.0, 0.5), 1.0 - (-1f64).exp(), 1e-15));
        assert!((ou_velocity_variance(&b, 1.0, 0.0, 0.5) - 0.632121).abs() < 1e-6);
        assert!(close(ou_velocity_variance(&b, 1.0, 0.0, 1e3), 1.0, 1e-15));
    }

    #[test]
    fn bouncer_work_examples() {
        // gamma = 0.1 with hbar = 1: m = 1, w0 = 1, F0 = 2 gamma => r = 1
        let p = osc(1.0, 1.0, 0.1, 0.2);
        assert!(close(bouncer_work_per_period(&p).unwrap(), 0.628319, 1e-6));
        let g = 1.0 / TAU;
        let p = osc(1.0, 1.0, g, 2.0 * g);
        assert!(close(bouncer_work_per_period(&p).unwrap(), 1.0, 1e-14));
        let p = osc(1.0, 1.0, 0.5, 1.0);
        assert!(close(bouncer_work_per_period(&p).unwrap(), PI, 1e-15));
        assert!(close(bouncer_work_from_amplitude(&p, 1.0), PI, 1e-15));
    }

    #[test]
    fn walker_work_examples() {
        let b = BathParams::new(1.0, 2.0).unwrap();
        let p3 = OscillatorParams::new(1.0, 1.0, 0.5, 1.0, 3).unwrap();
        assert!(close(walker_work(1, &p3, &b).unwrap(), 12.0 * PI, 1e-15));
        let b1 = BathParams::new(1.0, 1.0).unwrap();
        assert!(close(walker_work(1, &osc(1.0, 1.0, 0.5, 1.0), &b1).unwrap(), TAU, 1e-15));
        assert!(walker_work(0, &p3, &b).is_err());
    }

    #[test]
    fn stationary_energy_examples() {
        let p = osc(1.0, 1.0, 0.5, 1.0);
        let e = stationary_energy(&p, &BathParams::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(e, 1.0);
        let e = stationary_energy(&p, &BathParams::new(1.0, 0.25).unwrap()).unwrap();
        assert_eq!(e, 2.0);
        let p2 = OscillatorParams::new(1.0, 1.0, 0.5, 1.0, 2).unwrap();
        assert_eq!(balanced_kt0(&p2, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn friction_from_omega_examples() {
        assert_eq!(friction_from_omega(1.0).unwrap(), 2.0);
        assert_eq!(friction_from_omega(0.5).unwrap(), 1.0);
        assert_eq!(friction_from_omega(PI).unwrap(), TAU);
        assert!(friction_from_omega(0.0).is_err());
    }

    #[test]
    fn zero_point_examples() {
        let p = osc(1.0, 1.0, 0.5, 1.0);
        assert_eq!(zero_point_energy(&p).unwrap(), 0.5);
        assert_eq!(zero_point_action(&p).unwrap(), 0.5);
        // hbar = 2, w0 = 3: m r^2 w0 = 2 with m = 1 => r^2 = 2/3
        let r = (2.0f64 / 3.0).sqrt();
        let p = osc(1.0, 3.0, 0.5, r * 2.0 * 0.5 * 3.0);
        assert!(close(zero_point_energy(&p).unwrap(), 3.0, 1e-14));
        let p = osc(1.0, 1.0, 0.5, 1.0);
        let r = p.resonant_amplitude().unwrap();
        assert_eq!(0.5 * p.m * r * r * p.omega0 * p.omega0, zero_point_energy(&p).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(OscillatorParams::new(0.0, 1.0, 0.1, 1.0, 1).is_err());
        assert!(OscillatorParams::new(1.0, -1.0, 0.1, 1.0, 1).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, -0.1, 1.0, 1).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 0.1, -1.0, 1).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 0.1, 1.0, 0).is_err());
        assert!(BathParams::new(1.0, 0.0).is_err());
        assert!(BathParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn relaxation_rate_regimes() {
        assert_eq!(osc(1.0, 1.0, 0.1, 1.0).relaxation_rate(), 0.1);
        let over = osc(1.0, 1.0, 2.0, 1.0).relaxation_rate();
        assert!(close(over, 2.0 - 3f64.sqrt(), 1e-14));
    }
}
