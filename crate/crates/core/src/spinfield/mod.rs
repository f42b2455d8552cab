//! Grid fields for the probability density `P` and action `S`: velocities,
//! spin vector, spin-extended current, Hamiltonian density and the heat
//! gradient relation.

mod field;
pub mod io;

use serde::{Deserialize, Serialize};

pub use field::{
    add, cross, curl, divergence, dot, gradient, norm, scale, sub, Grid, ScalarField, Vec3, VectorField, MIN_POINTS,
};

use crate::error::{ensure, Error, Result};

/// Probability values below this are rejected instead of regularized.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// Smallest angle between `e_u` and `e_v` for which the spin direction is defined.
pub const PARALLEL_TOLERANCE: f64 = 1e-8;

/// Allowed deviation of an input direction from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Allowed deviation of the trapezoidal integral of `P` from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Continuity residuals above this fraction of the larger term are flagged.
pub const CONTINUITY_FLAG_RELATIVE: f64 = 1e-2;

/// Fitted friction deviating from `2 omega0` by more than this (relative) is flagged.
pub const FRICTION_FLAG_RELATIVE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinSign {
    #[serde(rename = "+")]
    Up,
    #[serde(rename = "-")]
    Down,
}

impl SpinSign {
    pub fn value(self) -> f64 {
        match self {
            SpinSign::Up => 1.0,
            SpinSign::Down => -1.0,
        }
    }
}

/// Spin vector, constant over the evaluation region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinVector {
    pub s: Vec3,
    pub sign: SpinSign,
}

impl SpinVector {
    /// The spinless case `s = 0`.
    pub fn zero() -> Self {
        Self { s: [0.0; 3], sign: SpinSign::Up }
    }

    pub fn magnitude(&self) -> f64 {
        norm(self.s)
    }

    /// Unit direction without the sign.
    pub fn direction(&self) -> Vec3 {
        let n = self.magnitude();
        if n == 0.0 {
            [0.0; 3]
        } else {
            scale(self.s, self.sign.value() / n)
        }
    }
}

fn check_unit(name: &'static str, v: Vec3) -> Result<()> {
    let n = norm(v);
    ensure(n.is_finite() && (n - 1.0).abs() <= UNIT_TOLERANCE, name, || format!("must be a unit vector, |v| = {n}"))
}

/// `s = sign (hbar/2) e_u x (e_v x e_u) / |...|`, re-orthogonalized against
/// `e_u` so that `s . e_u` vanishes to round-off.
pub fn spin_vector(e_u: Vec3, e_v: Vec3, hbar: f64, sign: SpinSign) -> Result<SpinVector> {
    check_unit("u_dir", e_u)?;
    check_unit("v_dir", e_v)?;
    ensure(hbar.is_finite() && hbar > 0.0, "hbar", || format!("must be positive, got {hbar}"))?;
    if norm(cross(e_u, e_v)) <= PARALLEL_TOLERANCE.sin() {
        return Err(Error::ParallelVectors);
    }
    let mut d = cross(e_u, cross(e_v, e_u));
    d = scale(d, 1.0 / norm(d));
    d = sub(d, scale(e_u, dot(d, e_u) / dot(e_u, e_u)));
    d = scale(d, 1.0 / norm(d));
    Ok(SpinVector { s: scale(d, sign.value() * 0.5 * hbar), sign })
}

/// `v = grad S / m`.
pub fn convective_velocity(s: &ScalarField, m: f64) -> Result<VectorField> {
    ensure(m.is_finite() && m > 0.0, "m", || format!("must be positive, got {m}"))?;
    Ok(gradient(s)?.scaled(1.0 / m))
}

pub fn check_positive(p: &ScalarField) -> Result<()> {
    let (index, min) =
        p.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if min < POSITIVITY_FLOOR {
        return Err(Error::NonPositiveProbability { min, index });
    }
    Ok(())
}

/// `grad P / P` by finite differences.
pub fn log_gradient(p: &ScalarField) -> Result<VectorField> {
    check_positive(p)?;
    let mut g = gradient(p)?;
    for (w, &pv) in g.values.iter_mut().zip(&p.values) {
        *w = scale(*w, 1.0 / pv);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmoticVelocity {
    /// `u = -(hbar/2m) grad P / P`
    pub u: VectorField,
    /// `u_tilde = (1/m) grad P / P`
    pub u_tilde: VectorField,
}

pub fn osmotic_velocity(p: &ScalarField, m: f64, hbar: f64) -> Result<OsmoticVelocity> {
    ensure(m.is_finite() && m > 0.0, "m", || format!("must be positive, got {m}"))?;
    ensure(hbar.is_finite() && hbar > 0.0, "hbar", || format!("must be positive, got {hbar}"))?;
    let g = log_gradient(p)?;
    Ok(OsmoticVelocity { u: g.scaled(-0.5 * hbar / m), u_tilde: g.scaled(1.0 / m) })
}

/// `J = P (v + u_tilde x s)`.
pub fn pauli_current(p: &ScalarField, v: &VectorField, u_tilde: &VectorField, s: &SpinVector) -> Result<VectorField> {
    p.grid.ensure_same(&v.grid)?;
    p.grid.ensure_same(&u_tilde.grid)?;
    let values = p
        .values
        .iter()
        .zip(v.values.iter().zip(&u_tilde.values))
        .map(|(&pv, (&vv, &ut))| scale(add(vv, cross(ut, s.s)), pv))
        .collect();
    Ok(VectorField { grid: p.grid, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityResidual {
    /// Max over interior points of `|dP/dt + div J|`.
    pub max_abs: f64,
    /// Grid index where the maximum occurs.
    pub index: usize,
    /// Larger of the interior max-norms of `dP/dt` and `div J`.
    pub scale: f64,
    pub flagged: bool,
}

pub fn continuity_residual(j: &VectorField, dpdt: &ScalarField) -> Result<ContinuityResidual> {
    j.grid.ensure_same(&dpdt.grid)?;
    let div = divergence(j)?;
    let mut out = ContinuityResidual { max_abs: 0.0, index: 0, scale: 0.0, flagged: false };
    for i in j.grid.interior() {
        let r = (dpdt.values[i] + div.values[i]).abs();
        if r > out.max_abs {
            out.max_abs = r;
            out.index = i;
        }
        out.scale = out.scale.max(dpdt.values[i].abs()).max(div.values[i].abs());
    }
    out.flagged = out.max_abs > CONTINUITY_FLAG_RELATIVE * out.scale;
    Ok(out)
}

/// Both forms of the kinetic energy density at one point:
/// `(m/2)|v + u_tilde x s|^2` and `(m/2)(v^2 + u_tilde^2 s^2)`.
pub fn hamiltonian_pair(v: Vec3, u_tilde: Vec3, s: Vec3, m: f64) -> (f64, f64) {
    let w = add(v, cross(u_tilde, s));
    (0.5 * m * dot(w, w), 0.5 * m * (dot(v, v) + dot(u_tilde, u_tilde) * dot(s, s)))
}

/// Spin built from the local directions of `u_tilde` and `v`, then both
/// Hamiltonian forms. `None` when either vector vanishes or they are parallel.
pub fn local_hamiltonian_pair(v: Vec3, u_tilde: Vec3, m: f64, hbar: f64, sign: SpinSign) -> Option<(f64, f64)> {
    let (nv, nu) = (norm(v), norm(u_tilde));
    if nv == 0.0 || nu == 0.0 {
        return None;
    }
    let s = spin_vector(scale(u_tilde, 1.0 / nu), scale(v, 1.0 / nv), hbar, sign).ok()?;
    Some(hamiltonian_pair(v, u_tilde, s.s, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianDensity {
    pub expanded: ScalarField,
    pub reduced: ScalarField,
}

impl HamiltonianDensity {
    /// Largest pointwise `|expanded - reduced| / max(|expanded|, |reduced|)`.
    pub fn max_relative_gap(&self) -> f64 {
        self.expanded
            .values
            .iter()
            .zip(&self.reduced.values)
            .map(|(a, b)| {
                let s = a.abs().max(b.abs());
                if s == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / s
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Kinetic density in both forms, plus `V` when supplied.
pub fn hamiltonian_density(
    v: &VectorField,
    u_tilde: &VectorField,
    s: &SpinVector,
    m: f64,
    potential: Option<&ScalarField>,
) -> Result<HamiltonianDensity> {
    v.grid.ensure_same(&u_tilde.grid)?;
    if let Some(pot) = potential {
        v.grid.ensure_same(&pot.grid)?;
    }
    let n = v.grid.len();
    let (mut expanded, mut reduced) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let (a, b) = hamiltonian_pair(v.values[i], u_tilde.values[i], s.s, m);
        let extra = potential.map_or(0.0, |pot| pot.values[i]);
        expanded.push(a + extra);
        reduced.push(b + extra);
    }
    Ok(HamiltonianDensity {
        expanded: ScalarField { grid: v.grid, values: expanded },
        reduced: ScalarField { grid: v.grid, values: reduced },
    })
}

/// `grad Q` for `P = P0 exp(-Q/kT0)`: the gradient of the heat field
/// `Q = -kT0 ln P`.
pub fn heat_gradient(p: &ScalarField, kt0: f64) -> Result<VectorField> {
    ensure(kt0.is_finite() && kt0 >= 0.0, "kT0", || format!("must be non-negative, got {kt0}"))?;
    check_positive(p)?;
    gradient(&p.map(|v| -kt0 * v.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionRelationReport {
    /// Least-squares `zeta` solving `m zeta u = grad Q` over interior points;
    /// `None` when `u` vanishes.
    pub zeta_fitted: Option<f64>,
    pub zeta_expected: f64,
    /// `zeta_fitted / zeta_expected`; equals `kT0 / (hbar omega0)` for a consistent chain.
    pub inconsistency_factor: Option<f64>,
    /// Max interior `|m u - grad Q / (2 omega0)|` relative to max `|grad Q| / (2 omega0)`.
    pub max_relative_residual: f64,
    pub flagged: bool,
}

/// Fits `m zeta u = grad Q` from given fields.
pub fn friction_relation(u: &VectorField, grad_q: &VectorField, m: f64, omega0: f64) -> Result<FrictionRelationReport> {
    u.grid.ensure_same(&grad_q.grid)?;
    ensure(omega0.is_finite() && omega0 > 0.0, "omega0", || format!("must be positive, got {omega0}"))?;
    let (mut num, mut den, mut res, mut q_scale) = (0.0, 0.0, 0.0f64, 0.0f64);
    for i in u.grid.interior() {
        let mu = scale(u.values[i], m);
        let gq = grad_q.values[i];
        num += dot(gq, mu);
        den += dot(mu, mu);
        res = res.max(norm(sub(mu, scale(gq, 0.5 / omega0))));
        q_scale = q_scale.max(norm(gq) * 0.5 / omega0);
    }
    let zeta_expected = 2.0 * omega0;
    let zeta_fitted = (den > 0.0).then(|| num / den);
    let inconsistency_factor = zeta_fitted.map(|z| z / zeta_expected);
    let max_relative_residual = if q_scale > 0.0 { res / q_scale } else { res };
    let flagged = inconsistency_factor.is_none_or(|f| (f - 1.0).abs() > FRICTION_FLAG_RELATIVE);
    Ok(FrictionRelationReport { zeta_fitted, zeta_expected, inconsistency_factor, max_relative_residual, flagged })
}

/// Same fit from a known `grad P / P`: `u = -(hbar/2m) g`, `grad Q = -kT0 g`.
pub fn friction_relation_from_log_gradient(
    g: &VectorField,
    m: f64,
    hbar: f64,
    omega0: f64,
    kt0: f64,
) -> Result<FrictionRelationReport> {
    friction_relation(&g.scaled(-0.5 * hbar / m), &g.scaled(-kt0), m, omega0)
}

/// Finite-difference chain: `u` from `grad P / P`, `grad Q` from the heat field.
pub fn verify_friction_relation(
    p: &ScalarField,
    m: f64,
    hbar: f64,
    omega0: f64,
    kt0: f64,
) -> Result<FrictionRelationReport> {
    let u = osmotic_velocity(p, m, hbar)?.u;
    let grad_q = heat_gradient(p, kt0)?;
    friction_relation(&u, &grad_q, m, omega0)
}

/// `(m/2) sum P |u|^2` with trapezoidal cell weights.
pub fn quantum_potential_average(u: &VectorField, p: &ScalarField, m: f64) -> Result<f64> {
    u.grid.ensure_same(&p.grid)?;
    let integral = p.integral();
    if (integral - 1.0).abs().is_nan() || (integral - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized { integral });
    }
    let sum: f64 = (0..p.grid.len()).map(|i| p.values[i] * dot(u.values[i], u.values[i]) * p.grid.weight(i)).sum();
    Ok(0.5 * m * sum)
}

/// Normalized isotropic Gaussian `prod_a exp(-x_a^2 / 2 sigma^2) / sqrt(2 pi sigma^2)`.
pub fn gaussian_density(grid: Grid, sigma: f64) -> ScalarField {
    let dims = grid.dims as i32;
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powi(dims).sqrt();
    ScalarField::from_fn(grid, |c| (-dot(c, c) / (2.0 * sigma * sigma)).exp() / norm)
}
