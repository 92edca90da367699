//! Birth/reaction functions and their minorants.
//!
//! [`Reaction`] carries `f(s, u)` for the shifting-habitat models together with
//! its limits `f_-inf`, `f_+inf` as `s -> -inf, +inf`. [`KppReaction`] is the
//! `h(x, u)` of the inhomogeneous KPP equation. Structural hypotheses are
//! universally quantified, so they are only ever *sample-checked* here.

use crate::error::{Error, Result};
use crate::gridfn::{ExtensionPolicy, Grid, GridFunction};
use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_S_PROBE: f64 = 50.0;

/// Relative step for central finite differences.
const FD_REL_STEP: f64 = 1e-6;
/// Zero test used by the KPP clauses `F(0) = 0` and `F(u*) = 0`.
const ROOT_TOL: f64 = 1e-10;

fn central_diff(f: impl Fn(f64) -> f64, u: f64, h: f64) -> f64 {
    if u >= h {
        (f(u + h) - f(u - h)) / (2.0 * h)
    } else {
        // one-sided second-order stencil; reactions live on u >= 0
        (-3.0 * f(u) + 4.0 * f(u + h) - f(u + 2.0 * h)) / (2.0 * h)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// A habitat quality profile `r(s)` with its limits at `-inf` and `+inf`.
#[derive(Clone)]
pub struct ShiftProfile {
    r: ScalarFn,
    pub r_minus_inf: f64,
    pub r_plus_inf: f64,
}

impl fmt::Debug for ShiftProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftProfile")
            .field("r_minus_inf", &self.r_minus_inf)
            .field("r_plus_inf", &self.r_plus_inf)
            .finish_non_exhaustive()
    }
}

impl ShiftProfile {
    pub fn from_fn(r: impl Fn(f64) -> f64 + Send + Sync + 'static, r_minus_inf: f64, r_plus_inf: f64) -> Self {
        ShiftProfile { r: Arc::new(r), r_minus_inf, r_plus_inf }
    }

    pub fn constant(value: f64) -> Self {
        ShiftProfile::from_fn(move |_| value, value, value)
    }

    /// Cubic smoothstep from `left` to `right` over `[-half_width, half_width]`,
    /// exactly constant outside.
    pub fn ramp(left: f64, right: f64, half_width: f64) -> Self {
        let w = half_width.max(f64::MIN_POSITIVE);
        ShiftProfile::from_fn(
            move |s| {
                let t = ((s + w) / (2.0 * w)).clamp(0.0, 1.0);
                left + (right - left) * t * t * (3.0 - 2.0 * t)
            },
            left,
            right,
        )
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.r)(s)
    }

    /// Sample checks: nondecreasing on `[-s_probe, s_probe]` and limits reached
    /// at `+-s_probe` within `tol`.
    pub fn check(&self, n: usize, s_probe: f64, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let ss = linspace(-s_probe, s_probe, n);
        if let Some(w) = ss.windows(2).find(|w| self.eval(w[1]) < self.eval(w[0])) {
            out.push(format!("r decreases between s = {} and s = {}", w[0], w[1]));
        }
        if (self.eval(-s_probe) - self.r_minus_inf).abs() > tol {
            out.push(format!("r(-{s_probe}) differs from r(-inf) = {}", self.r_minus_inf));
        }
        if (self.eval(s_probe) - self.r_plus_inf).abs() > tol {
            out.push(format!("r({s_probe}) differs from r(+inf) = {}", self.r_plus_inf));
        }
        out
    }
}

/// `f(s, u)` with its `s -> +-inf` limits, the positive fixed point `u*` of
/// `f_+inf` and `f_+inf'(0)`.
#[derive(Clone)]
pub struct Reaction {
    f: FieldFn,
    f_minus: ScalarFn,
    f_plus: ScalarFn,
    pub u_star: f64,
    pub fprime0: f64,
    s_independent: bool,
    label: String,
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reaction")
            .field("label", &self.label)
            .field("u_star", &self.u_star)
            .field("fprime0", &self.fprime0)
            .finish_non_exhaustive()
    }
}

impl Reaction {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_minus: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_plus: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u_star: f64,
        fprime0: f64,
    ) -> Self {
        Reaction {
            f: Arc::new(f),
            f_minus: Arc::new(f_minus),
            f_plus: Arc::new(f_plus),
            u_star,
            fprime0,
            s_independent: false,
            label: "custom".into(),
        }
    }

    /// A reaction with no habitat dependence.
    pub fn homogeneous(f: impl Fn(f64) -> f64 + Send + Sync + 'static, u_star: f64, fprime0: f64) -> Self {
        let f: ScalarFn = Arc::new(f);
        let (a, b, c) = (f.clone(), f.clone(), f);
        Reaction {
            f: Arc::new(move |_, u| a(u)),
            f_minus: b,
            f_plus: c,
            u_star,
            fprime0,
            s_independent: true,
            label: "homogeneous".into(),
        }
    }

    /// `mu f - mu u = u (r(s) - u)` capped past the vertex so `f(s, .)` stays
    /// nondecreasing:
    /// `f(s,u) = u + u(r(s)-u)/mu` for `u <= (mu + r(s))/2`, then
    /// `(mu + r(s))^2 / (4 mu)`.
    pub fn shifted_logistic(profile: ShiftProfile, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        let lo = profile.r_minus_inf.min(profile.r_plus_inf);
        if mu + lo <= 0.0 {
            return Err(Error::Domain(format!("mu + r must stay positive (mu = {mu}, r = {lo})")));
        }
        let capped = move |r: f64, u: f64| {
            let vertex = 0.5 * (mu + r);
            let w = u.min(vertex);
            w + w * (r - w) / mu
        };
        let r_plus = profile.r_plus_inf;
        let r_minus = profile.r_minus_inf;
        let u_star = if r_plus <= mu { r_plus } else { (mu + r_plus).powi(2) / (4.0 * mu) };
        let s_independent = r_plus == r_minus;
        let p = profile.clone();
        Ok(Reaction {
            f: Arc::new(move |s, u| capped(p.eval(s), u)),
            f_minus: Arc::new(move |u| capped(r_minus, u)),
            f_plus: Arc::new(move |u| capped(r_plus, u)),
            u_star,
            fprime0: 1.0 + r_plus / mu,
            s_independent,
            label: format!("shifted-logistic(mu={mu})"),
        })
    }

    /// Piecewise-linear `f(u)` through `(u_i, f_i)` (first point at `u = 0`),
    /// held constant past the last node.
    pub fn tabulated(us: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if us.len() != fs.len() || us.len() < 2 {
            return Err(Error::Domain("tabulated reaction needs >= 2 matching nodes".into()));
        }
        if us[0] != 0.0 {
            return Err(Error::Domain("tabulated reaction must start at u = 0".into()));
        }
        if us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("tabulated nodes must be strictly increasing".into()));
        }
        if us.iter().chain(&fs).any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated reaction has non-finite nodes".into()));
        }
        // first crossing of f(u) = u after the origin
        let mut u_star = None;
        for i in 0..us.len() - 1 {
            let (g0, g1) = (fs[i] - us[i], fs[i + 1] - us[i + 1]);
            if i > 0 && g0 == 0.0 {
                u_star = Some(us[i]);
                break;
            }
            if g0 > 0.0 && g1 <= 0.0 {
                u_star = Some(us[i] + (us[i + 1] - us[i]) * g0 / (g0 - g1));
                break;
            }
        }
        let last = us.len() - 1;
        let u_star = match u_star {
            Some(u) => u,
            None if fs[last] > us[last] => fs[last],
            None => return Err(Error::Domain("tabulated reaction has no positive fixed point".into())),
        };
        let fprime0 = (fs[1] - fs[0]) / us[1];
        let us = Arc::new(us);
        let fs = Arc::new(fs);
        let table = move |u: f64| {
            if u <= us[0] {
                return fs[0];
            }
            let n = us.len();
            if u >= us[n - 1] {
                return fs[n - 1];
            }
            let j = us.partition_point(|&x| x <= u) - 1;
            let t = (u - us[j]) / (us[j + 1] - us[j]);
            fs[j] + t * (fs[j + 1] - fs[j])
        };
        let mut r = Reaction::homogeneous(table, u_star, fprime0);
        r.label = "tabulated".into();
        Ok(r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_s_independent(&self) -> bool {
        self.s_independent
    }

    #[inline]
    pub fn eval(&self, s: f64, u: f64) -> f64 {
        (self.f)(s, u)
    }

    pub fn eval_minus_inf(&self, u: f64) -> f64 {
        (self.f_minus)(u)
    }

    pub fn eval_plus_inf(&self, u: f64) -> f64 {
        (self.f_plus)(u)
    }

    pub fn df_du(&self, s: f64, u: f64) -> f64 {
        let h = FD_REL_STEP * self.u_star.max(u.abs()).max(1e-3);
        central_diff(|v| self.eval(s, v), u, h)
    }

    /// `sup |df/du|` over `[-s_probe, s_probe] x [0, u_max]` and both limits.
    pub fn lipschitz(&self, u_max: f64) -> f64 {
        let h = FD_REL_STEP * self.u_star.max(u_max);
        let us = linspace(0.0, u_max, DEFAULT_SAMPLES);
        let mut lip: f64 = 0.0;
        for &u in &us {
            lip = lip.max(central_diff(|v| self.eval_minus_inf(v), u, h).abs());
            lip = lip.max(central_diff(|v| self.eval_plus_inf(v), u, h).abs());
        }
        for s in linspace(-DEFAULT_S_PROBE, DEFAULT_S_PROBE, 101) {
            for &u in us.iter().step_by(4) {
                lip = lip.max(self.df_du(s, u).abs());
            }
        }
        lip
    }

    /// `f(s + y, u)`: the reaction seen after moving the habitat left by `y`.
    pub fn with_offset(&self, y: f64) -> Reaction {
        if y == 0.0 || self.s_independent {
            return self.clone();
        }
        let f = self.f.clone();
        Reaction { f: Arc::new(move |s, u| f(s + y, u)), ..self.clone() }
    }

    /// Marks an `f` known not to depend on `s`.
    pub fn assume_s_independent(mut self) -> Self {
        self.s_independent = true;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Sample checks of the monotone structure, extinction on the left and
    /// the KPP property of `f_+inf(u) - u`. Empty means nothing was falsified.
    pub fn check_structure(&self, n: usize, s_probe: f64, u_max: f64) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let ss = linspace(-s_probe, s_probe, n);
        let us = linspace(0.0, u_max, n);
        let slack = 1e-12;
        // first witness of each kind
        let mut seen = [false; 4];
        let mut note = |k: usize, msg: String, out: &mut Vec<String>| {
            if !seen[k] {
                seen[k] = true;
                out.push(msg);
            }
        };
        for (i, &s) in ss.iter().enumerate() {
            for (j, &u) in us.iter().enumerate() {
                let v = self.eval(s, u);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("f({s}, {u}) is not finite")));
                }
                if v < -slack {
                    note(0, format!("f({s}, {u}) = {v} is negative"), &mut out);
                }
                if i + 1 < n && self.eval(ss[i + 1], u) < v - slack {
                    note(1, format!("f decreases in s at (s, u) = ({s}, {u})"), &mut out);
                }
                if j + 1 < n && self.eval(s, us[j + 1]) < v - slack {
                    note(2, format!("f decreases in u at (s, u) = ({s}, {u})"), &mut out);
                }
                if self.eval_minus_inf(u) > v + slack || v > self.eval_plus_inf(u) + slack {
                    note(3, format!("f({s}, {u}) is not between its limits"), &mut out);
                }
            }
        }
        if self.eval_minus_inf(0.0).abs() > ROOT_TOL {
            out.push("f_-inf(0) != 0".into());
        }
        if let Some(&u) = us.iter().skip(1).find(|&&u| self.eval_minus_inf(u) >= u) {
            out.push(format!("f_-inf({u}) >= {u}"));
        }
        if !(self.u_star > 0.0) {
            out.push(format!("u* = {} is not positive", self.u_star));
            return Ok(out);
        }
        let violations = kpp_check(&|u| self.eval_plus_inf(u) - u, self.u_star, u_max.max(1.5 * self.u_star), n)?;
        for v in violations {
            out.push(format!("f_+inf(u) - u: {v}"));
        }
        Ok(out)
    }
}

/// Which clause of the KPP property failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KppClause {
    /// `F(0) = 0`, `F(u*) = 0`, `F'(0) > 0`
    Roots,
    /// `F(u)(u - u*) < 0` off the roots
    Sign,
    /// `F(u) < F'(0) u`
    Sublinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KppViolation {
    pub clause: KppClause,
    pub u: f64,
    pub detail: String,
}

impl fmt::Display for KppViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at u = {}: {}", self.clause, self.u, self.detail)
    }
}

/// Sample check of the KPP property of `F` with respect to `u_star` on
/// `n_samples` equally spaced points of `(0, u_max]`. Returns the violated
/// clauses; an empty list is a pass.
pub fn kpp_check(
    f: &dyn Fn(f64) -> f64,
    u_star: f64,
    u_max: f64,
    n_samples: usize,
) -> Result<Vec<KppViolation>> {
    if !(u_star > 0.0) || !(u_max > u_star) || n_samples < 10 {
        return Err(Error::Precondition(format!(
            "kpp_check needs u* > 0, u_max > u*, n >= 10 (got {u_star}, {u_max}, {n_samples})"
        )));
    }
    let eval = |u: f64| {
        let v = f(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("F({u}) is not finite")))
        }
    };
    let mut out = Vec::new();
    let f0 = eval(0.0)?;
    if f0.abs() > ROOT_TOL {
        out.push(KppViolation { clause: KppClause::Roots, u: 0.0, detail: format!("F(0) = {f0}") });
    }
    let fs = eval(u_star)?;
    if fs.abs() > ROOT_TOL {
        out.push(KppViolation { clause: KppClause::Roots, u: u_star, detail: format!("F(u*) = {fs}") });
    }
    let h = FD_REL_STEP * u_star;
    let slope = (eval(h)? - eval(-h)?) / (2.0 * h);
    if !(slope > 0.0) {
        out.push(KppViolation { clause: KppClause::Roots, u: 0.0, detail: format!("F'(0) = {slope}") });
    }
    for k in 1..=n_samples {
        let u = u_max * k as f64 / n_samples as f64;
        if (u - u_star).abs() <= 1e-12 * u_star {
            continue;
        }
        let v = eval(u)?;
        if !(v * (u - u_star) < 0.0) {
            out.push(KppViolation {
                clause: KppClause::Sign,
                u,
                detail: format!("F(u)(u - u*) = {}", v * (u - u_star)),
            });
        }
        if !(v < slope * u) {
            out.push(KppViolation {
                clause: KppClause::Sublinear,
                u,
                detail: format!("F(u) = {v} >= F'(0) u = {}", slope * u),
            });
        }
    }
    Ok(out)
}

/// Nondecreasing piecewise-linear profile through sampled nodes, constant
/// outside them.
fn node_profile(ss: Vec<f64>, rs: Vec<f64>, r_minus_inf: f64, r_plus_inf: f64) -> ShiftProfile {
    let ss = Arc::new(ss);
    let rs = Arc::new(rs);
    ShiftProfile::from_fn(
        move |s| {
            let n = ss.len();
            if s <= ss[0] {
                return rs[0];
            }
            if s >= ss[n - 1] {
                return rs[n - 1];
            }
            let j = ss.partition_point(|&x| x <= s) - 1;
            let t = (s - ss[j]) / (ss[j + 1] - ss[j]);
            rs[j] + t * (rs[j + 1] - rs[j])
        },
        r_minus_inf,
        r_plus_inf,
    )
}

/// Largest nondecreasing sequence below `v`: running minimum from the right.
fn suffix_min(v: &mut [f64]) {
    for i in (0..v.len().saturating_sub(1)).rev() {
        v[i] = v[i].min(v[i + 1]);
    }
}

/// The explicit minorant `f_{gamma,u**}` with its profile `r` and constant `K`.
#[derive(Debug, Clone)]
pub struct LogisticMinorant {
    pub reaction: Reaction,
    pub profile: ShiftProfile,
    pub k: f64,
    pub gamma: f64,
    pub u_double_star: f64,
}

impl LogisticMinorant {
    /// Closed form of the minorant for a given profile value `r` and `K`.
    #[inline]
    pub fn formula(k: f64, r: f64, u: f64) -> f64 {
        let vertex = (1.0 + k * r) / (2.0 * k);
        if u >= vertex {
            (1.0 + k * r).powi(2) / (4.0 * k)
        } else {
            u + k * u * (r - u)
        }
    }

    /// `f(s, u) - f_{gamma,u**}(s, u)`.
    pub fn gap(&self, original: &Reaction, s: f64, u: f64) -> f64 {
        original.eval(s, u) - self.reaction.eval(s, u)
    }
}

/// Largest `r` in `[lo, hi]` with `g(u) >= formula(K, r, u)` on `us`.
fn max_admissible_r(g: &dyn Fn(f64) -> f64, k: f64, lo: f64, hi: f64, us: &[f64]) -> (f64, Option<f64>) {
    let worst = |r: f64| {
        us.iter()
            .map(|&u| (LogisticMinorant::formula(k, r, u) - g(u), u))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (excess, u_bad) = worst(hi);
    if excess <= 0.0 {
        return (hi, None);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if worst(m).0 <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (a, Some(u_bad))
}

/// Builds the explicit KPP minorant `f_{gamma,u**} <= f` on `[0, u**]`.
///
/// `K` is the largest value in `{2^-k Lip(f)}` for which a nondecreasing
/// profile `r` with `r(+inf) = (f_+inf'(0) - 1 - gamma) / K` and
/// `-1/K < r(-inf) <= 0` fits under `f` on the sample set. Between samples the
/// profile lags by one node, so `f(s,.) >= f(s_i,.)` for `s >= s_i` keeps the
/// inequality valid there too.
pub fn kpp_minorant(f: &Reaction, gamma: f64, u_double_star: f64) -> Result<LogisticMinorant> {
    if !(gamma > 0.0 && gamma < f.fprime0 - 1.0) {
        return Err(Error::Precondition(format!(
            "gamma must lie in (0, f'(0) - 1) = (0, {}), got {gamma}",
            f.fprime0 - 1.0
        )));
    }
    if !(u_double_star >= f.u_star) {
        return Err(Error::Precondition(format!("u** = {u_double_star} must be >= u* = {}", f.u_star)));
    }
    let ss = linspace(-DEFAULT_S_PROBE, DEFAULT_S_PROBE, DEFAULT_SAMPLES);
    let us = linspace(0.0, u_double_star, DEFAULT_SAMPLES);
    let lip = f.lipschitz(u_double_star);
    if !(lip > 0.0) || !lip.is_finite() {
        return Err(Error::Construction { s: 0.0, u: 0.0, msg: "reaction has no usable Lipschitz bound".into() });
    }
    let mut last_failure = (DEFAULT_S_PROBE, 0.0, String::new());
    for k_exp in 0..=30 {
        let k = lip * 0.5f64.powi(k_exp);
        let r_inf = (f.fprime0 - 1.0 - gamma) / k;
        let floor = -1.0 / k;

        let plus = |u: f64| f.eval_plus_inf(u);
        if let (_, Some(u)) = max_admissible_r(&plus, k, floor, r_inf, &us) {
            last_failure = (f64::INFINITY, u, format!("f_+inf below the minorant for K = {k}"));
            continue;
        }
        let mut rs = Vec::with_capacity(ss.len());
        for &s in &ss {
            let g = |u: f64| f.eval(s, u);
            rs.push(max_admissible_r(&g, k, floor, r_inf, &us).0);
        }
        if rs[rs.len() - 1] < r_inf {
            last_failure = (ss[ss.len() - 1], 0.0, format!("r(+inf) not reached for K = {k}"));
            continue;
        }
        let minus = |u: f64| f.eval_minus_inf(u);
        let r_left = max_admissible_r(&minus, k, floor, r_inf, &us).0;
        suffix_min(&mut rs);
        let r_minus_inf = rs[0].min(r_left).min(0.0);
        if !(r_minus_inf > floor) {
            last_failure = (ss[0], 0.0, format!("r(-inf) collapses onto -1/K for K = {k}"));
            continue;
        }
        rs[0] = r_minus_inf;
        // lag by one node so the profile never exceeds the admissible value
        // found at the sample to its left
        let step = ss[1] - ss[0];
        let lagged: Vec<f64> = ss.iter().map(|s| s + step).collect();
        let profile = node_profile(lagged, rs, r_minus_inf, r_inf);

        let u_star = if k * r_inf <= 1.0 { r_inf } else { (1.0 + k * r_inf).powi(2) / (4.0 * k) };
        let p = profile.clone();
        let reaction = Reaction::new(
            move |s, u| LogisticMinorant::formula(k, p.eval(s), u),
            move |u| LogisticMinorant::formula(k, r_minus_inf, u),
            move |u| LogisticMinorant::formula(k, r_inf, u),
            u_star,
            1.0 + k * r_inf,
        )
        .with_label(format!("kpp-minorant(gamma={gamma}, K={k})"));
        return Ok(LogisticMinorant { reaction, profile, k, gamma, u_double_star });
    }
    let (s, u, msg) = last_failure;
    Err(Error::Construction { s, u, msg })
}

/// `h(x, u)` for the inhomogeneous KPP equation with KPP limits `h_-inf`,
/// `h_+inf` and an absorbing level `M*` (`h <= 0` above it).
#[derive(Clone)]
pub struct KppReaction {
    h: FieldFn,
    h_minus: ScalarFn,
    h_plus: ScalarFn,
    pub u_minus_star: f64,
    pub u_plus_star: f64,
    pub m_star: f64,
    homogeneous: bool,
}

impl fmt::Debug for KppReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KppReaction")
            .field("u_minus_star", &self.u_minus_star)
            .field("u_plus_star", &self.u_plus_star)
            .field("m_star", &self.m_star)
            .finish_non_exhaustive()
    }
}

impl KppReaction {
    pub fn new(
        h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h_minus: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h_plus: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u_minus_star: f64,
        u_plus_star: f64,
        m_star: f64,
    ) -> Self {
        KppReaction {
            h: Arc::new(h),
            h_minus: Arc::new(h_minus),
            h_plus: Arc::new(h_plus),
            u_minus_star,
            u_plus_star,
            m_star,
            homogeneous: false,
        }
    }

    pub fn homogeneous(h: impl Fn(f64) -> f64 + Send + Sync + 'static, u_star: f64, m_star: f64) -> Self {
        let h: ScalarFn = Arc::new(h);
        let (a, b, c) = (h.clone(), h.clone(), h);
        KppReaction {
            h: Arc::new(move |_, u| a(u)),
            h_minus: b,
            h_plus: c,
            u_minus_star: u_star,
            u_plus_star: u_star,
            m_star,
            homogeneous: true,
        }
    }

    /// `h(x, u) = u (r(x) - u)`.
    pub fn logistic(profile: ShiftProfile) -> Result<Self> {
        let (rm, rp) = (profile.r_minus_inf, profile.r_plus_inf);
        if !(rm > 0.0 && rp > 0.0) {
            return Err(Error::Domain(format!("both limits of r must be positive, got ({rm}, {rp})")));
        }
        let m_star = rm.max(rp);
        let homogeneous = rm == rp;
        let mut h = KppReaction::new(
            move |x, u| u * (profile.eval(x) - u),
            move |u| u * (rm - u),
            move |u| u * (rp - u),
            rm,
            rp,
            m_star,
        );
        h.homogeneous = homogeneous;
        Ok(h)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        (self.h)(x, u)
    }

    pub fn eval_minus_inf(&self, u: f64) -> f64 {
        (self.h_minus)(u)
    }

    pub fn eval_plus_inf(&self, u: f64) -> f64 {
        (self.h_plus)(u)
    }

    pub fn hprime_minus0(&self) -> f64 {
        central_diff(|u| self.eval_minus_inf(u), 0.0, FD_REL_STEP * self.u_minus_star)
    }

    pub fn hprime_plus0(&self) -> f64 {
        central_diff(|u| self.eval_plus_inf(u), 0.0, FD_REL_STEP * self.u_plus_star)
    }

    pub fn dh_du(&self, x: f64, u: f64) -> f64 {
        let h = FD_REL_STEP * self.m_star.max(u.abs()).max(1e-3);
        central_diff(|v| self.eval(x, v), u, h)
    }

    /// `sup |dh/du|` over `[-s_probe, s_probe] x [0, u_max]`.
    pub fn lipschitz(&self, u_max: f64) -> f64 {
        let us = linspace(0.0, u_max, DEFAULT_SAMPLES);
        let mut lip: f64 = 0.0;
        for s in linspace(-DEFAULT_S_PROBE, DEFAULT_S_PROBE, 101) {
            for &u in us.iter().step_by(4) {
                lip = lip.max(self.dh_du(s, u).abs());
            }
        }
        lip
    }

    /// `h(x + y, u)`.
    pub fn with_offset(&self, y: f64) -> KppReaction {
        if y == 0.0 || self.homogeneous {
            return self.clone();
        }
        let h = self.h.clone();
        KppReaction { h: Arc::new(move |x, u| h(x + y, u)), ..self.clone() }
    }

    /// Sample checks of `h(s,0) = 0`, `h <= 0` above `M*` and the KPP
    /// property of both limits.
    pub fn check_structure(&self, n: usize, s_probe: f64) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let ss = linspace(-s_probe, s_probe, n);
        if let Some(&s) = ss.iter().find(|&&s| self.eval(s, 0.0).abs() > ROOT_TOL) {
            out.push(format!("h({s}, 0) != 0"));
        }
        let us = linspace(self.m_star, 3.0 * self.m_star, n);
        'outer: for &s in &ss {
            for &u in &us {
                if self.eval(s, u) > ROOT_TOL {
                    out.push(format!("h({s}, {u}) > 0 above M*"));
                    break 'outer;
                }
            }
        }
        for (name, star, g) in [
            ("h_-inf", self.u_minus_star, &self.h_minus),
            ("h_+inf", self.u_plus_star, &self.h_plus),
        ] {
            for v in kpp_check(&|u| g(u), star, 2.0 * star.max(self.m_star), n)? {
                out.push(format!("{name}: {v}"));
            }
        }
        Ok(out)
    }
}

/// The pair of quadratic minorants `R_+(s,u)` and `R_-(s,u)` with
/// `h(s,u) >= max(R_+(s,u), R_-(-s,u))` on the sample set.
#[derive(Debug, Clone)]
pub struct QuadraticMinorant {
    pub k_plus: f64,
    pub k_minus: f64,
    /// Common `K_+- r^+-(s)` for `s <= 0`.
    pub k_star: f64,
    pub r_plus: ShiftProfile,
    pub r_minus: ShiftProfile,
    pub gamma: f64,
    pub m: f64,
}

impl QuadraticMinorant {
    pub fn eval_plus(&self, s: f64, u: f64) -> f64 {
        self.k_plus * (self.r_plus.eval(s) * u - u * u)
    }

    pub fn eval_minus(&self, s: f64, u: f64) -> f64 {
        self.k_minus * (self.r_minus.eval(s) * u - u * u)
    }

    /// `h(s,u) - max(R_+(s,u), R_-(-s,u))`.
    pub fn gap(&self, h: &KppReaction, s: f64, u: f64) -> f64 {
        h.eval(s, u) - self.eval_plus(s, u).max(self.eval_minus(-s, u))
    }

    /// `R_+` as a reaction term `h(x, u)` of its own.
    pub fn plus_as_kpp(&self) -> KppReaction {
        let q = self.clone();
        let (k, r0, r_inf) = (self.k_plus, self.r_plus.r_minus_inf, self.r_plus.r_plus_inf);
        KppReaction::new(
            move |s, u| q.eval_plus(s, u),
            move |u| k * (r0 * u - u * u),
            move |u| k * (r_inf * u - u * u),
            r0.max(f64::MIN_POSITIVE),
            r_inf,
            r_inf.max(0.0),
        )
    }
}

/// Largest admissible `rho` with `h(u) >= K (rho u - u^2)` on `us`:
/// `min_u h(u) / (K u) + u`.
fn rho_bound(g: &dyn Fn(f64) -> f64, k: f64, us: &[f64]) -> f64 {
    us.iter().map(|&u| g(u) / (k * u) + u).fold(f64::INFINITY, f64::min)
}

/// Builds `R_+-` for fixed `K_+` and `K_-`.
pub fn quadratic_minorant_with(
    h: &KppReaction,
    gamma: f64,
    m: f64,
    k_plus: f64,
    k_minus: f64,
) -> Result<QuadraticMinorant> {
    let (hm, hp) = (h.hprime_minus0(), h.hprime_plus0());
    if !(gamma > 0.0 && gamma < hm.min(hp)) {
        return Err(Error::Precondition(format!(
            "gamma must lie in (0, min(h_-'(0), h_+'(0))) = (0, {}), got {gamma}",
            hm.min(hp)
        )));
    }
    if !(m >= h.m_star) {
        return Err(Error::Precondition(format!("M = {m} must be >= M* = {}", h.m_star)));
    }
    if !(k_plus > 0.0 && k_minus > 0.0) {
        return Err(Error::Precondition("K_+ and K_- must be positive".into()));
    }
    let n = DEFAULT_SAMPLES;
    let ss = linspace(-DEFAULT_S_PROBE, DEFAULT_S_PROBE, 2 * n + 1);
    let us: Vec<f64> = (1..=n).map(|k| m * k as f64 / n as f64).collect();
    let r_inf_plus = (hp - gamma) / k_plus;
    let r_inf_minus = (hm - gamma) / k_minus;

    // R_+ is checked against h(s, .), R_- against h(-s, .)
    let rho_plus: Vec<f64> = ss.iter().map(|&s| rho_bound(&|u| h.eval(s, u), k_plus, &us)).collect();
    let rho_minus: Vec<f64> = ss.iter().map(|&s| rho_bound(&|u| h.eval(-s, u), k_minus, &us)).collect();
    let lim_plus = rho_bound(&|u| h.eval_plus_inf(u), k_plus, &us);
    let lim_minus = rho_bound(&|u| h.eval_minus_inf(u), k_minus, &us);
    if lim_plus < r_inf_plus || rho_plus[ss.len() - 1] < r_inf_plus {
        return Err(Error::Construction {
            s: DEFAULT_S_PROBE,
            u: 0.0,
            msg: format!("R_+ with K_+ = {k_plus} exceeds h at the right end"),
        });
    }
    if lim_minus < r_inf_minus || rho_minus[ss.len() - 1] < r_inf_minus {
        return Err(Error::Construction {
            s: -DEFAULT_S_PROBE,
            u: 0.0,
            msg: format!("R_- with K_- = {k_minus} exceeds h at the left end"),
        });
    }
    let left_lim_plus = rho_bound(&|u| h.eval_minus_inf(u), k_plus, &us);
    let left_lim_minus = rho_bound(&|u| h.eval_plus_inf(u), k_minus, &us);
    let k_star = rho_plus
        .iter()
        .map(|r| k_plus * r)
        .chain(rho_minus.iter().map(|r| k_minus * r))
        .chain([k_plus * left_lim_plus, k_minus * left_lim_minus])
        .fold(0.0_f64, f64::min);

    let build = |rho: &[f64], k: f64, r_inf: f64| -> ShiftProfile {
        let flat = k_star / k;
        let mut rs: Vec<f64> = ss
            .iter()
            .zip(rho)
            .map(|(&s, &r)| if s <= 0.0 { flat } else { r.min(r_inf) })
            .collect();
        suffix_min(&mut rs);
        let last = rs.len() - 1;
        rs[last] = r_inf;
        node_profile(ss.clone(), rs, flat, r_inf)
    };
    let r_plus = build(&rho_plus, k_plus, r_inf_plus);
    let r_minus = build(&rho_minus, k_minus, r_inf_minus);
    Ok(QuadraticMinorant { k_plus, k_minus, k_star, r_plus, r_minus, gamma, m })
}

/// Builds `R_+-` choosing each `K` as the largest feasible value in
/// `{2^-k Lip(h)}`.
pub fn quadratic_minorant(h: &KppReaction, gamma: f64, m: f64) -> Result<QuadraticMinorant> {
    let lip = h.lipschitz(m);
    if !(lip > 0.0) || !lip.is_finite() {
        return Err(Error::Construction { s: 0.0, u: 0.0, msg: "h has no usable Lipschitz bound".into() });
    }
    let candidates: Vec<f64> = (0..=30).map(|k| lip * 0.5f64.powi(k)).collect();
    let mut last_err = None;
    for &kp in &candidates {
        for &km in &candidates {
            match quadratic_minorant_with(h, gamma, m, kp, km) {
                Ok(q) => return Ok(q),
                Err(e @ Error::Precondition(_)) => return Err(e),
                Err(e) => last_err = Some(e),
            }
        }
    }
    Err(last_err.unwrap_or(Error::Construction { s: 0.0, u: 0.0, msg: "no feasible K".into() }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpKind {
    /// Plateau `[-1, 1]`, support `[-2, 2]`.
    H,
    /// Plateau `[-d, d]`, support `[-d-1, d+1]`.
    XiD,
}

pub fn bump_value(kind: BumpKind, d: f64, x: f64) -> f64 {
    let d = match kind {
        BumpKind::H => 1.0,
        BumpKind::XiD => d,
    };
    (d + 1.0 - x.abs()).clamp(0.0, 1.0)
}

/// Trapezoid fixtures sampled with zero extension.
pub fn bump_fixture(kind: BumpKind, d: f64, grid: Grid) -> Result<GridFunction> {
    if kind == BumpKind::XiD && !(d > 0.0) {
        return Err(Error::Domain(format!("xi_d needs d > 0, got {d}")));
    }
    GridFunction::from_fn(grid, ExtensionPolicy::ZERO, |x| bump_value(kind, d, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn habitat() -> ShiftProfile {
        ShiftProfile::ramp(-0.5, 1.0, 10.0)
    }

    #[test]
    fn logistic_is_kpp() {
        let v = kpp_check(&|u| u * (1.0 - u), 1.0, 3.0, 200).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn square_fails_slope_and_sign() {
        let v = kpp_check(&|u| u * u, 1.0, 3.0, 200).unwrap();
        assert!(v.iter().any(|x| x.clause == KppClause::Roots && x.u == 0.0));
        assert!(v.iter().any(|x| x.clause == KppClause::Sign && x.u > 1.0));
    }

    #[test]
    fn sine_fails_sign_on_two_to_three() {
        // dense oracle: sin(pi u)(u - 1) > 0 exactly on (2, 3)
        let f = |u: f64| (std::f64::consts::PI * u).sin();
        let v = kpp_check(&f, 1.0, 3.0, 300).unwrap();
        let sign: Vec<_> = v.iter().filter(|x| x.clause == KppClause::Sign).collect();
        assert!(!sign.is_empty());
        assert!(sign.iter().any(|x| x.u > 2.0 && x.u < 3.0));
        assert!(sign.iter().all(|x| x.u >= 2.0 - 1e-9 && x.u <= 3.0 + 1e-9));
        assert!(v.iter().all(|x| x.clause != KppClause::Roots));
    }

    #[test]
    fn kpp_check_rejects_bad_inputs() {
        assert!(matches!(kpp_check(&|u| u, 0.0, 1.0, 20), Err(Error::Precondition(_))));
        assert!(matches!(kpp_check(&|u| u, 1.0, 0.5, 20), Err(Error::Precondition(_))));
        assert!(matches!(kpp_check(&|u| u, 1.0, 2.0, 5), Err(Error::Precondition(_))));
        assert!(matches!(kpp_check(&|u| if u > 1.5 { f64::NAN } else { u }, 1.0, 2.0, 20), Err(Error::Evaluation(_))));
    }

    #[test]
    fn shifted_logistic_structure() {
        let f = Reaction::shifted_logistic(habitat(), 1.0).unwrap();
        assert_eq!(f.u_star, 1.0);
        assert_eq!(f.fprime0, 2.0);
        let issues = f.check_structure(DEFAULT_SAMPLES, DEFAULT_S_PROBE, 2.0).unwrap();
        assert!(issues.is_empty(), "{issues:?}");
        // continuity at the vertex
        let r = habitat().eval(3.0);
        let v = 0.5 * (1.0 + r);
        assert!((f.eval(3.0, v) - f.eval(3.0, v + 1e-9)).abs() < 1e-8);
    }

    #[test]
    fn decreasing_habitat_is_flagged() {
        let p = ShiftProfile::from_fn(|s| 1.0 - 1.5 * ((s + 10.0) / 20.0).clamp(0.0, 1.0), 1.0, -0.5);
        assert!(!p.check(200, 50.0, 1e-9).is_empty());
        let f = Reaction::shifted_logistic(p, 1.0).unwrap();
        let issues = f.check_structure(100, 50.0, 2.0).unwrap();
        assert!(issues.iter().any(|m| m.contains("decreases in s")), "{issues:?}");
    }

    #[test]
    fn tabulated_reaction_fixed_point() {
        let f = Reaction::tabulated(vec![0.0, 0.5, 1.0, 2.0], vec![0.0, 0.8, 1.0, 1.0]).unwrap();
        assert!((f.u_star - 1.0).abs() < 1e-12);
        assert!((f.fprime0 - 1.6).abs() < 1e-12);
        assert!((f.eval(7.0, 0.25) - 0.4).abs() < 1e-12);
        assert!(Reaction::tabulated(vec![0.1, 1.0], vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn kpp_minorant_sits_below() {
        let f = Reaction::shifted_logistic(habitat(), 1.0).unwrap();
        let m = kpp_minorant(&f, 0.2, 1.5).unwrap();
        // direct evaluation oracle on a 100 x 100 grid
        for s in linspace(-60.0, 60.0, 100) {
            for u in linspace(0.0, 1.5, 100) {
                assert!(m.gap(&f, s, u) >= -1e-12, "gap at ({s}, {u})");
            }
        }
        assert_eq!(m.profile.r_plus_inf, (f.fprime0 - 1.0 - 0.2) / m.k);
        assert!(m.profile.r_minus_inf <= 0.0 && m.profile.r_minus_inf > -1.0 / m.k);
        assert!(m.profile.check(400, 60.0, 1e-12).is_empty());
        let issues = m.reaction.check_structure(100, 60.0, 2.0).unwrap();
        assert!(issues.is_empty(), "{issues:?}");
    }

    #[test]
    fn minorant_branches_meet_at_vertex() {
        let (k, r): (f64, f64) = (1.7, 0.3);
        let v = (1.0 + k * r) / (2.0 * k);
        let upper = (1.0 + k * r).powi(2) / (4.0 * k);
        assert!((LogisticMinorant::formula(k, r, v) - upper).abs() < 1e-15);
        let below = v - 1e-9;
        assert!((below + k * below * (r - below) - upper).abs() < 1e-9);
        // nondecreasing up to the vertex, flat after
        let us = linspace(0.0, 2.0 * v, 200);
        assert!(us.windows(2).all(|w| LogisticMinorant::formula(k, r, w[1]) >= LogisticMinorant::formula(k, r, w[0])));
    }

    #[test]
    fn minorant_preconditions() {
        let f = Reaction::shifted_logistic(habitat(), 1.0).unwrap();
        assert!(matches!(kpp_minorant(&f, 1.5, 1.5), Err(Error::Precondition(_))));
        assert!(matches!(kpp_minorant(&f, 0.1, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn quadratic_minorant_for_logistic_profile() {
        let h = KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0)).unwrap();
        let gamma = 0.1;
        let q = quadratic_minorant_with(&h, gamma, 1.0, 1.0, 1.0).unwrap();
        assert!((q.r_plus.r_plus_inf - (h.hprime_plus0() - gamma)).abs() < 1e-9);
        for s in linspace(-60.0, 60.0, 150) {
            for u in linspace(0.0, 1.0, 100) {
                assert!(q.gap(&h, s, u) >= -1e-12, "gap at ({s}, {u})");
            }
            assert_eq!(q.eval_plus(s, 0.0), 0.0);
            assert_eq!(q.eval_minus(s, 0.0), 0.0);
            if s <= 0.0 {
                assert!(q.r_plus.eval(s) <= 0.0 && q.r_minus.eval(s) <= 0.0);
            }
        }
        // the explicit choice r+ = r - gamma also sits below h
        for s in linspace(-30.0, 30.0, 61) {
            for u in linspace(0.0, 1.0, 50) {
                let r = ShiftProfile::ramp(0.5, 1.0, 10.0).eval(s) - gamma;
                assert!(h.eval(s, u) >= u * (r - u));
            }
        }
    }

    #[test]
    fn quadratic_minorant_auto_k() {
        let h = KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0)).unwrap();
        let q = quadratic_minorant(&h, 0.2, 1.0).unwrap();
        assert!(q.k_plus > 0.0 && q.k_minus > 0.0 && q.k_star <= 0.0);
        assert!(q.r_plus.check(400, 60.0, 1e-12).is_empty());
        assert!(q.r_minus.check(400, 60.0, 1e-12).is_empty());
        for s in linspace(-60.0, 60.0, 120) {
            for u in linspace(0.0, 1.0, 80) {
                assert!(q.gap(&h, s, u) >= -1e-12);
                if s <= 0.0 {
                    assert!(q.eval_plus(s, u) <= 0.0);
                    assert!(q.eval_minus(s, u) <= 0.0);
                }
            }
        }
    }

    #[test]
    fn kpp_reaction_structure() {
        let h = KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0)).unwrap();
        assert!(h.check_structure(200, 50.0).unwrap().is_empty());
        assert!((h.hprime_minus0() - 0.5).abs() < 1e-6);
        assert!((h.hprime_plus0() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bump_values() {
        assert_eq!(bump_value(BumpKind::H, 0.0, 0.0), 1.0);
        assert_eq!(bump_value(BumpKind::H, 0.0, 1.5), 0.5);
        assert_eq!(bump_value(BumpKind::H, 0.0, -1.5), 0.5);
        assert_eq!(bump_value(BumpKind::H, 0.0, 2.5), 0.0);
        for x in linspace(-3.0, 3.0, 61) {
            assert_eq!(bump_value(BumpKind::XiD, 3.0, x), 1.0);
        }
        assert_eq!(bump_value(BumpKind::XiD, 3.0, 4.0), 0.0);
        assert_eq!(bump_value(BumpKind::XiD, 3.0, -4.5), 0.0);
        for x in linspace(-5.0, 5.0, 101) {
            assert_eq!(bump_value(BumpKind::XiD, 1.0, x), bump_value(BumpKind::H, 0.0, x));
        }
        let g = Grid::from_range(-5.0, 5.0, 0.5).unwrap();
        assert!(bump_fixture(BumpKind::XiD, 0.0, g).is_err());
        let b = bump_fixture(BumpKind::H, 0.0, g).unwrap();
        assert_eq!(b.right_extension(), 0.0);
    }
}
