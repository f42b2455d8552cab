use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum points per active axis for the second-order stencils.
pub const MIN_POINTS: usize = 5;

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Regular grid in 1 to 3 dimensions; unused axes have one point.
/// Storage is row-major with the last active axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: usize,
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(shape: &[usize], spacing: &[f64], origin: &[f64]) -> Result<Self> {
        let dims = shape.len();
        if !(1..=3).contains(&dims) || spacing.len() != dims || origin.len() != dims {
            return Err(Error::GridMismatch(format!(
                "grid needs 1-3 axes with matching spacing and origin, got {} / {} / {}",
                shape.len(),
                spacing.len(),
                origin.len()
            )));
        }
        let mut g = Self { dims, shape: [1; 3], spacing: [1.0; 3], origin: [0.0; 3] };
        for a in 0..dims {
            if shape[a] == 0 || !(spacing[a].is_finite() && spacing[a] > 0.0) || !origin[a].is_finite() {
                return Err(Error::GridMismatch(format!("axis {a}: invalid shape or spacing")));
            }
            g.shape[a] = shape[a];
            g.spacing[a] = spacing[a];
            g.origin[a] = origin[a];
        }
        Ok(g)
    }

    /// Grid of `points` per axis centred on the origin with half-width `half_width`.
    pub fn centered(dims: usize, points: usize, half_width: f64) -> Result<Self> {
        let h = 2.0 * half_width / (points.max(2) - 1) as f64;
        Self::new(&vec![points; dims], &vec![h; dims], &vec![-half_width; dims])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.shape[1] + i[1]) * self.shape[2] + i[2]
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.shape[2];
        let rest = idx / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], k]
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.shape[1] * self.shape[2],
            1 => self.shape[2],
            _ => 1,
        }
    }

    /// Coordinates of a point; inactive axes read 0.
    pub fn coords(&self, idx: usize) -> Vec3 {
        let m = self.multi_index(idx);
        let mut c = [0.0; 3];
        for a in 0..self.dims {
            c[a] = self.origin[a] + m[a] as f64 * self.spacing[a];
        }
        c
    }

    /// At least one point away from every boundary of an active axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dims).all(|a| m[a] >= 1 && m[a] + 1 < self.shape[a])
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_interior(i))
    }

    /// Trapezoidal quadrature weight of a point.
    pub fn weight(&self, idx: usize) -> f64 {
        let m = self.multi_index(idx);
        (0..self.dims)
            .map(|a| {
                let h = self.spacing[a];
                if self.shape[a] > 1 && (m[a] == 0 || m[a] + 1 == self.shape[a]) {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }

    pub fn check_stencil(&self) -> Result<()> {
        for a in 0..self.dims {
            if self.shape[a] < MIN_POINTS {
                return Err(Error::GridTooSmall { axis: a, points: self.shape[a], required: MIN_POINTS });
            }
        }
        Ok(())
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} grid points", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| v * self.grid.weight(i)).sum()
    }

    /// Largest `|value|` over interior points.
    pub fn interior_max_abs(&self) -> f64 {
        self.grid.interior().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Pointwise product with a vector field.
    pub fn times(&self, v: &VectorField) -> Result<VectorField> {
        self.grid.ensure_same(&v.grid)?;
        let values = self.values.iter().zip(&v.values).map(|(&p, &w)| scale(w, p)).collect();
        Ok(VectorField { grid: self.grid, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<Vec3>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} vectors for {} grid points", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> Vec3) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![[0.0; 3]; grid.len()] }
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| scale(v, s))
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn interior_max_norm(&self) -> f64 {
        self.grid.interior().map(|i| norm(self.values[i])).fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|&v| norm(v)).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| sub(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }
}

/// Second-order derivative of row-major `data` along `axis`: central in the
/// interior, one-sided three-point at the ends.
fn derivative(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.shape[axis];
    let stride = grid.stride(axis);
    let h = grid.spacing[axis];
    (0..grid.len())
        .map(|idx| {
            let i = grid.multi_index(idx)[axis];
            if i == 0 {
                (-3.0 * data[idx] + 4.0 * data[idx + stride] - data[idx + 2 * stride]) / (2.0 * h)
            } else if i + 1 == n {
                (3.0 * data[idx] - 4.0 * data[idx - stride] + data[idx - 2 * stride]) / (2.0 * h)
            } else {
                (data[idx + stride] - data[idx - stride]) / (2.0 * h)
            }
        })
        .collect()
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let grid = f.grid;
    grid.check_stencil()?;
    let mut out = VectorField::zeros(grid);
    for a in 0..grid.dims {
        for (o, d) in out.values.iter_mut().zip(derivative(&grid, &f.values, a)) {
            o[a] = d;
        }
    }
    Ok(out)
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let grid = v.grid;
    grid.check_stencil()?;
    let mut values = vec![0.0; grid.len()];
    for a in 0..grid.dims {
        for (o, d) in values.iter_mut().zip(derivative(&grid, &v.component(a), a)) {
            *o += d;
        }
    }
    Ok(ScalarField { grid, values })
}

/// Curl of a field that does not vary along inactive axes. In 2-D this
/// yields the in-plane part from `F_z` and the out-of-plane component
/// `dFy/dx - dFx/dy`.
pub fn curl(v: &VectorField) -> Result<VectorField> {
    let grid = v.grid;
    if grid.dims < 2 {
        return Err(Error::Dimension("curl needs a 2-D or 3-D grid".into()));
    }
    grid.check_stencil()?;
    let zero = vec![0.0; grid.len()];
    let d = |component: usize, axis: usize| {
        if axis < grid.dims {
            derivative(&grid, &v.component(component), axis)
        } else {
            zero.clone()
        }
    };
    let (dz_dy, dy_dz) = (d(2, 1), d(1, 2));
    let (dx_dz, dz_dx) = (d(0, 2), d(2, 0));
    let (dy_dx, dx_dy) = (d(1, 0), d(0, 1));
    let values = (0..grid.len()).map(|i| [dz_dy[i] - dy_dz[i], dx_dz[i] - dz_dx[i], dy_dx[i] - dx_dy[i]]).collect();
    Ok(VectorField { grid, values })
}
