//! Sampled functions on a uniform 1-D grid.
//!
//! A [`GridFunction`] is a truncation of a bounded continuous function on the
//! real line. What the function does beyond the sampled window is part of the
//! value itself ([`ExtensionPolicy`]), so limits such as `W(+inf) = r*` travel
//! with the data instead of being passed to every operation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative slack used when deciding whether a shift is a whole number of cells.
const INTEGER_SHIFT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Domain(format!("grid step must be positive, got {dx}")));
        }
        if n < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 points, got {n}")));
        }
        if !x_min.is_finite() || !(x_min + (n - 1) as f64 * dx).is_finite() {
            return Err(Error::Domain("grid extent is not finite".into()));
        }
        Ok(Grid { x_min, dx, n })
    }

    /// Grid covering `[x_min, x_max]` with step `dx`; the point count is
    /// rounded so the last sample lands on `x_max` up to rounding.
    pub fn from_range(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::Domain(format!("empty range [{x_min}, {x_max}]")));
        }
        let cells = ((x_max - x_min) / dx).round();
        if cells < 2.0 {
            return Err(Error::Domain("range shorter than two cells".into()));
        }
        Grid::new(x_min, dx, cells as usize + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.dx;
        x >= self.x_min - tol && x <= self.x_max() + tol
    }

    /// Index of the sample closest to `x`, if `x` lies within the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx).round();
        Some((i.max(0.0) as usize).min(self.n - 1))
    }

    /// Returns `Some(k)` when `y` is within rounding of `k * dx`.
    pub fn cells_in(&self, y: f64) -> Option<i64> {
        let s = y / self.dx;
        let k = s.round();
        if (s - k).abs() <= INTEGER_SHIFT_SLACK * s.abs().max(1.0) {
            Some(k as i64)
        } else {
            None
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x_min - other.x_min).abs() <= 1e-9 * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Repeat the edge sample.
    EdgeConstant,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionPolicy {
    pub left: Extension,
    pub right: Extension,
}

impl ExtensionPolicy {
    pub const EDGE: ExtensionPolicy = ExtensionPolicy {
        left: Extension::EdgeConstant,
        right: Extension::EdgeConstant,
    };
    pub const ZERO: ExtensionPolicy = ExtensionPolicy {
        left: Extension::Zero,
        right: Extension::Zero,
    };
    /// Zero on the left, edge value on the right: the shape of a front
    /// connecting 0 to a positive state.
    pub const FRONT: ExtensionPolicy = ExtensionPolicy {
        left: Extension::Zero,
        right: Extension::EdgeConstant,
    };
}

/// Pointwise order relation between two sampled functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Equal,
    Leq,
    Geq,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    policy: ExtensionPolicy,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, policy: ExtensionPolicy) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(GridFunction { grid, values, policy })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, policy: ExtensionPolicy) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values, policy }
    }

    pub fn from_fn(grid: Grid, policy: ExtensionPolicy, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.xs().map(f).collect();
        GridFunction::new(grid, values, policy)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        GridFunction::from_parts(grid, vec![value; grid.len()], ExtensionPolicy::EDGE)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn policy(&self) -> ExtensionPolicy {
        self.policy
    }

    pub fn with_policy(mut self, policy: ExtensionPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Same grid and policy, new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.grid, values, self.policy)
    }

    pub fn left_extension(&self) -> f64 {
        match self.policy.left {
            Extension::EdgeConstant => self.values[0],
            Extension::Zero => 0.0,
        }
    }

    pub fn right_extension(&self) -> f64 {
        match self.policy.right {
            Extension::EdgeConstant => self.values[self.values.len() - 1],
            Extension::Zero => 0.0,
        }
    }

    /// Sample at integer index `j`, falling back to the extension off-grid.
    #[inline]
    pub fn at(&self, j: i64) -> f64 {
        if j < 0 {
            self.left_extension()
        } else if (j as usize) >= self.values.len() {
            self.right_extension()
        } else {
            self.values[j as usize]
        }
    }

    /// Linear interpolation at fractional index `q`.
    #[inline]
    fn at_fractional(&self, q: f64) -> f64 {
        let j = q.floor();
        let theta = q - j;
        let j = j as i64;
        if theta == 0.0 {
            self.at(j)
        } else {
            (1.0 - theta) * self.at(j) + theta * self.at(j + 1)
        }
    }

    /// Evaluate anywhere on the line.
    pub fn eval(&self, x: f64) -> f64 {
        self.at_fractional((x - self.grid.x_min) / self.grid.dx)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |self - other|` over the samples.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, k: f64) -> GridFunction {
        GridFunction::from_parts(self.grid, self.values.iter().map(|v| k * v).collect(), self.policy)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::Domain("grid mismatch".into()))
        }
    }

    /// Nondecreasing within `slack`.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// The translation `T_y[u](x) = u(x - y)` resampled on the same grid.
///
/// Whole-cell shifts are exact index moves; other shifts interpolate linearly,
/// which keeps the operation order- and positivity-preserving.
pub fn translate(u: &GridFunction, y: f64) -> GridFunction {
    let grid = u.grid;
    let values = match grid.cells_in(y) {
        Some(0) => u.values.clone(),
        Some(k) => (0..grid.n as i64).map(|i| u.at(i - k)).collect(),
        None => {
            let s = y / grid.dx;
            (0..grid.n).map(|i| u.at_fractional(i as f64 - s)).collect()
        }
    };
    GridFunction::from_parts(grid, values, u.policy)
}

/// Truncated weighted sup norm `sum_{n=1}^{N} 2^-n sup_{|x|<=n} |u(x)|` with
/// `N = ceil(max(|x_min|, x_max))`.
pub fn weighted_sup_norm(u: &GridFunction) -> Result<f64> {
    let g = u.grid;
    if !g.contains(0.0) {
        return Err(Error::Domain("weighted norm needs a grid containing 0".into()));
    }
    let n_max = g.x_min.abs().max(g.x_max()).ceil() as usize;
    let tol = 1e-9 * g.dx;
    // sup over |x| <= n grows with n; sweep outward once.
    let mut total = 0.0;
    let mut weight = 1.0;
    for n in 1..=n_max {
        weight *= 0.5;
        let r = n as f64 + tol;
        let sup = g
            .xs()
            .zip(&u.values)
            .filter(|(x, _)| x.abs() <= r)
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
        total += weight * sup;
    }
    Ok(total)
}

/// Exact pointwise order classification (no tolerance).
pub fn compare(u: &GridFunction, v: &GridFunction) -> Result<Order> {
    u.check_same_grid(v)?;
    let mut below = false;
    let mut above = false;
    for (a, b) in u.values.iter().zip(&v.values) {
        if a < b {
            below = true;
        } else if a > b {
            above = true;
        }
    }
    Ok(match (below, above) {
        (false, false) => Order::Equal,
        (true, false) => Order::Leq,
        (false, true) => Order::Geq,
        (true, true) => Order::Incomparable,
    })
}
