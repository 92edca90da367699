//! Forced waves and steady states as limits of monotone iteration, the
//! integral wave map `Q = L o K`, and a shooting oracle for the half-line
//! steady state.

use crate::error::{Error, Result};
use crate::gridfn::{translate, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::nonlinearity::Reaction;
use serde::Serialize;

/// Slack for "nonincreasing" and "nondecreasing" checks.
const ORDER_SLACK: f64 = 1e-12;

/// `L[phi; c](x) = a int_x^inf e^{a (x - y)} phi(y) dy` with `a = (d + mu) / c`
/// for `c > 0`, the mirror image for `c < 0`, identity at `c = 0`.
///
/// `phi` is taken constant on each cell (left endpoint for `c > 0`), which
/// integrates the exponential weight exactly, so constants and steps are
/// reproduced without error. The far tail uses the extension value.
pub fn l_apply(phi: &GridFunction, c: f64, d: f64, mu: f64) -> GridFunction {
    if c == 0.0 {
        return phi.clone();
    }
    let v = phi.values();
    let n = v.len();
    let a = (d + mu) / c.abs();
    let e = (-a * phi.grid().dx()).exp();
    let w = 1.0 - e;
    let mut out = vec![0.0; n];
    if c > 0.0 {
        let mut acc = phi.right_extension();
        for i in (0..n).rev() {
            acc = w * v[i] + e * acc;
            out[i] = acc;
        }
    } else {
        let mut acc = phi.left_extension();
        for i in 0..n {
            acc = w * v[i] + e * acc;
            out[i] = acc;
        }
    }
    phi.with_values(out).expect("convex combination of finite values")
}

/// Parameters of the integral wave map.
#[derive(Debug, Clone)]
pub struct WaveMapParams {
    pub d: f64,
    pub mu: f64,
    pub tau: f64,
    pub kernel: Kernel,
    pub f: Reaction,
}

/// `K[phi](x) = (d (k * phi)(x) + mu f(x, phi(x + c tau))) / (d + mu)`.
pub fn k_apply(phi: &GridFunction, c: f64, p: &WaveMapParams) -> Result<GridFunction> {
    let conv = p.kernel.convolve(phi)?;
    let ahead = if c * p.tau == 0.0 { phi.clone() } else { translate(phi, -c * p.tau) };
    let g = phi.grid();
    let values = (0..g.len())
        .map(|i| (p.d * conv.values()[i] + p.mu * p.f.eval(g.x(i), ahead.values()[i])) / (p.d + p.mu))
        .collect::<Vec<_>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("wave map produced a non-finite value".into()));
    }
    phi.with_values(values)
}

/// `Q[phi; c] = L[K[phi]; c]`.
pub fn nonlocal_wave_map(phi: &GridFunction, c: f64, p: &WaveMapParams) -> Result<GridFunction> {
    Ok(l_apply(&k_apply(phi, c, p)?, c, p.d, p.mu))
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveProfile {
    #[serde(skip)]
    pub profile: GridFunction,
    pub speed: f64,
    /// `sup |map(W) - W|` for the returned `W`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Every iterate was below its predecessor (up to `1e-12`).
    pub monotone_iterates: bool,
    /// Largest pointwise increase seen between successive iterates.
    pub max_increase: f64,
    pub nondecreasing: bool,
    pub left_limit: f64,
    pub right_limit: f64,
}

impl WaveProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,W\n");
        let g = self.profile.grid();
        for (i, w) in self.profile.values().iter().enumerate() {
            s.push_str(&format!("{:?},{:?}\n", g.x(i), w));
        }
        s
    }
}

/// Mean of the outer 5% of samples on each side.
pub fn edge_limits(u: &GridFunction) -> (f64, f64) {
    let v = u.values();
    let k = (v.len() / 20).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&v[..k]), mean(&v[v.len() - k..]))
}

/// Iterates `W_{k+1} = map(W_k)` from `W_0 = r*` until successive iterates
/// differ by less than `tol` in sup norm. The returned profile is the last
/// input to `map`, so `residual` is exactly `sup |map(W) - W|`. Running out of
/// iterations is reported through `converged`, not as an error.
pub fn monotone_wave_iterate(
    map: &mut dyn FnMut(&GridFunction) -> Result<GridFunction>,
    grid: Grid,
    r_star: f64,
    speed: f64,
    tol: f64,
    max_iter: usize,
) -> Result<WaveProfile> {
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be positive".into()));
    }
    let mut w = GridFunction::constant(grid, r_star);
    let mut monotone = true;
    let mut max_increase = f64::NEG_INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = map(&w)?;
        next.check_same_grid(&w)?;
        iterations += 1;
        let (mut inc, mut diff) = (f64::NEG_INFINITY, 0.0f64);
        for (a, b) in next.values().iter().zip(w.values()) {
            inc = inc.max(a - b);
            diff = diff.max((a - b).abs());
        }
        if iterations == 1 {
            if let Some(i) = next.values().iter().position(|&v| v > r_star + ORDER_SLACK) {
                return Err(Error::Precondition(format!(
                    "first iterate exceeds r* = {r_star} at x = {}",
                    grid.x(i)
                )));
            }
        }
        max_increase = max_increase.max(inc);
        if inc > ORDER_SLACK {
            monotone = false;
        }
        residual = diff;
        if diff < tol {
            converged = true;
            break;
        }
        w = next;
    }
    let (left_limit, right_limit) = edge_limits(&w);
    Ok(WaveProfile {
        nondecreasing: w.is_nondecreasing(ORDER_SLACK),
        profile: w,
        speed,
        residual,
        iterations,
        converged,
        monotone_iterates: monotone,
        max_increase,
        left_limit,
        right_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionReport {
    pub left_limit_ok: bool,
    pub right_limit_ok: bool,
    pub monotone_ok: bool,
}

impl ConnectionReport {
    pub fn passed(&self) -> bool {
        self.left_limit_ok && self.right_limit_ok && self.monotone_ok
    }
}

/// Does `W` connect `0` on the left to `r*` on the right?
pub fn verify_connection(w: &WaveProfile, r_star: f64, tol: f64) -> ConnectionReport {
    ConnectionReport {
        left_limit_ok: w.left_limit.abs() <= tol,
        right_limit_ok: (w.right_limit - r_star).abs() <= tol,
        monotone_ok: w.profile.is_nondecreasing(ORDER_SLACK),
    }
}

/// Half-line steady state `d W'' - mu W + mu f(W) = 0`, `W(0) = 0`,
/// `W(+inf) = u*`.
#[derive(Debug, Clone)]
pub struct DirichletOracle {
    /// Samples on the requested grid.
    pub profile: GridFunction,
    /// Samples at a quarter of the grid step.
    pub fine: GridFunction,
    pub slope_at_zero: f64,
    /// Where the integrated trajectory hands over to the linearized tail.
    pub splice_at: f64,
}

impl DirichletOracle {
    /// `sup |d W'' - mu W + mu f(W)|` on `[a, b]`, with `W''` from a fourth
    /// order difference on the fine samples.
    pub fn ode_residual(&self, d: f64, mu: f64, f: &Reaction, a: f64, b: f64) -> f64 {
        let g = self.fine.grid();
        let h = g.dx();
        let v = self.fine.values();
        let mut worst: f64 = 0.0;
        for i in 2..v.len().saturating_sub(2) {
            let x = g.x(i);
            if x < a || x > b {
                continue;
            }
            let w2 = (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / (12.0 * h * h);
            worst = worst.max((d * w2 - mu * v[i] + mu * f.eval(0.0, v[i])).abs());
        }
        worst
    }
}

enum Shot {
    /// crossed `u*`
    High,
    /// turned back below `u*`
    Low,
}

fn rk4_trajectory(
    rhs: &dyn Fn(f64) -> f64,
    u_star: f64,
    p: f64,
    h: f64,
    steps: usize,
) -> (Vec<f64>, Vec<f64>, Option<Shot>) {
    let (mut w, mut v) = (0.0, p);
    let mut ws = vec![w];
    let mut vs = vec![v];
    for _ in 0..steps {
        let (k1w, k1v) = (v, rhs(w));
        let (k2w, k2v) = (v + 0.5 * h * k1v, rhs(w + 0.5 * h * k1w));
        let (k3w, k3v) = (v + 0.5 * h * k2v, rhs(w + 0.5 * h * k2w));
        let (k4w, k4v) = (v + h * k3v, rhs(w + h * k3w));
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        ws.push(w);
        vs.push(v);
        if w > u_star {
            return (ws, vs, Some(Shot::High));
        }
        if v <= 0.0 {
            return (ws, vs, Some(Shot::Low));
        }
    }
    (ws, vs, None)
}

/// Shooting on `W'(0)` with RK4 at step `dx / 4`. Once the best trajectory
/// is within `1e-6 u*` of `u*` it is continued by the linearized tail
/// `u* - A e^{-kappa x}`, `kappa = sqrt(mu (1 - f'(u*)) / d)`.
pub fn dirichlet_steady_oracle(d: f64, mu: f64, f: &Reaction, length: f64, dx: f64) -> Result<DirichletOracle> {
    if !(d > 0.0 && mu > 0.0 && length > 0.0 && dx > 0.0) {
        return Err(Error::Precondition("d, mu, L and dx must be positive".into()));
    }
    if f.eval(-5.0, 0.3 * f.u_star) != f.eval(5.0, 0.3 * f.u_star) {
        return Err(Error::Precondition("the half-line oracle needs a reaction independent of s".into()));
    }
    let u_star = f.u_star;
    let grid = Grid::from_range(0.0, length, dx)?;
    let h = dx / 4.0;
    let fine_n = 4 * (grid.len() - 1) + 1;
    let rhs = |w: f64| mu * (w - f.eval(0.0, w)) / d;

    let mut lo = 0.0;
    let mut hi = 10.0 * u_star * (mu / d).sqrt();
    match rk4_trajectory(&rhs, u_star, hi, h, fine_n - 1).2 {
        Some(Shot::High) => {}
        _ => return Err(Error::Solver(format!("slope {hi} does not overshoot u*"))),
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match rk4_trajectory(&rhs, u_star, mid, h, fine_n - 1).2 {
            Some(Shot::High) => hi = mid,
            Some(Shot::Low) => lo = mid,
            None => {
                lo = mid;
                hi = mid;
            }
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Solver("no bracketing slope in (0, 10 u* sqrt(mu/d))".into()));
    }
    let (ws, vs, _) = rk4_trajectory(&rhs, u_star, lo, h, fine_n - 1);
    let eps = 1e-6 * u_star;
    let k = ws
        .iter()
        .zip(&vs)
        .position(|(&w, &v)| u_star - w <= eps && v > 0.0)
        .ok_or_else(|| Error::Solver("trajectory never approaches u* before leaving it".into()))?;
    let fprime = f.df_du(0.0, u_star);
    let kappa = (mu * (1.0 - fprime) / d).sqrt();
    if !(kappa > 0.0) {
        return Err(Error::Solver(format!("u* is not attracting along the half line (f'(u*) = {fprime})")));
    }
    let amp = u_star - ws[k];
    let xs = k as f64 * h;
    let fine_vals: Vec<f64> = (0..fine_n)
        .map(|i| {
            if i <= k {
                ws[i]
            } else {
                u_star - amp * (-kappa * (i as f64 * h - xs)).exp()
            }
        })
        .collect();
    let fine_grid = Grid::new(0.0, h, fine_n)?;
    let fine = GridFunction::new(fine_grid, fine_vals, crate::gridfn::ExtensionPolicy::FRONT)?;
    let coarse: Vec<f64> = (0..grid.len()).map(|i| fine.values()[4 * i]).collect();
    let profile = GridFunction::new(grid, coarse, crate::gridfn::ExtensionPolicy::FRONT)?;
    Ok(DirichletOracle { profile, fine, slope_at_zero: lo, splice_at: xs })
}
