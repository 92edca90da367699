//! Sampled falsification checks of order, translation and limit hypotheses
//! on discretized solution maps.
//!
//! Every check returns a [`CheckReport`]. A positive `max_violation` always
//! comes with at least one [`Witness`] that can be replayed against the same
//! operator.

use crate::error::{Error, Result};
use crate::evolve::{limit_operator_estimate, moving_frame_map, step, step_unchecked, LimitSide, ModelSpec, State};
use crate::gridfn::{translate, ExtensionPolicy, Grid, GridFunction};
use crate::speeds::{kpp_local_speed, kpp_rd_speed, min_wave_speed, DispersionParams};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub const SLACK: f64 = 1e-10;
const MAX_WITNESSES: usize = 10;
pub const PROXY_NOTE: &str = "finite-horizon proxy";

pub type OpFn = Arc<dyn Fn(&GridFunction) -> Result<GridFunction> + Send + Sync>;

/// A map on sampled functions together with its invaded state.
#[derive(Clone)]
pub struct OperatorUnderTest {
    op: OpFn,
    pub r_star: f64,
    pub label: String,
    /// Distance from either edge within which truncation of the domain may
    /// move values by more than the slack.
    pub boundary_layer: f64,
}

impl fmt::Debug for OperatorUnderTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorUnderTest").field("label", &self.label).field("r_star", &self.r_star).finish()
    }
}

impl OperatorUnderTest {
    pub fn new(
        label: impl Into<String>,
        r_star: f64,
        op: impl Fn(&GridFunction) -> Result<GridFunction> + Send + Sync + 'static,
    ) -> Self {
        OperatorUnderTest { op: Arc::new(op), r_star, label: label.into(), boundary_layer: 0.0 }
    }

    pub fn with_boundary_layer(mut self, width: f64) -> Self {
        self.boundary_layer = width;
        self
    }

    pub fn identity(r_star: f64) -> Self {
        OperatorUnderTest::new("identity", r_star, |u| Ok(u.clone()))
    }

    /// Time-`t0` map in the frame moving with the habitat.
    pub fn moving_frame(model: &ModelSpec, t0: f64) -> Result<Self> {
        let map = moving_frame_map(model, model.c_shift(), t0)?;
        let label = format!("model {} frozen frame, t0 = {t0}", model.name());
        let layer = spread_layer(model, t0);
        Ok(OperatorUnderTest::new(label, model.r_star(), move |u| map.apply(u)).with_boundary_layer(layer))
    }

    /// One explicit step from data held constant over the delay interval.
    pub fn single_step(model: &ModelSpec, dt: f64) -> Result<Self> {
        model.validate()?;
        let m = model.clone();
        let label = format!("model {} step, dt = {dt}", model.name());
        let layer = stencil_reach(model);
        Ok(OperatorUnderTest::new(label, model.r_star(), move |u| {
            Ok(step(&m, &State::new(&m, u.clone().into(), dt)?, dt)?.current)
        })
        .with_boundary_layer(layer))
    }

    /// Like [`single_step`](Self::single_step) but accepting any `dt`.
    pub fn single_step_unchecked(model: &ModelSpec, dt: f64) -> Result<Self> {
        model.validate()?;
        let m = model.clone();
        let label = format!("model {} unchecked step, dt = {dt}", model.name());
        let layer = stencil_reach(model);
        Ok(OperatorUnderTest::new(label, model.r_star(), move |u| {
            Ok(step_unchecked(&m, &State::new(&m, u.clone().into(), dt)?, dt)?.current)
        })
        .with_boundary_layer(layer))
    }

    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        (self.op)(phi)
    }

    pub fn iterate(&self, phi: &GridFunction, n: usize) -> Result<GridFunction> {
        let mut u = phi.clone();
        for _ in 0..n {
            u = self.apply(&u)?;
        }
        Ok(u)
    }
}

/// Reach of one explicit step, excluding the one-cell Laplacian stencil.
fn stencil_reach(model: &ModelSpec) -> f64 {
    match model {
        ModelSpec::A { kernel, .. } | ModelSpec::B { kernel, .. } => kernel.cutoff(),
        _ => 0.0,
    }
}

/// Width beyond which edge effects of a run of length `t0` fall below the
/// slack: seven standard deviations of the spread plus the frame drift.
fn spread_layer(model: &ModelSpec, t0: f64) -> f64 {
    let var = match model {
        ModelSpec::A { d, mu, kernel, f, .. } => 2.0 * d * t0 + mu * f.fprime0 * kernel.variance() * t0,
        ModelSpec::B { d, kernel, .. } => d * kernel.variance() * t0,
        ModelSpec::C { d, .. } | ModelSpec::D { d, .. } => 2.0 * d * t0,
    };
    7.0 * var.sqrt() + model.c_shift().abs() * t0 + stencil_reach(model)
}

/// `x <- 6364136223846793005 x + 1442695040888963407 (mod 2^64)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform on `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.next_f64()
    }
}

/// Random nondecreasing function with values in `[0, top]`, flat over the
/// outer 5% at each end and extended by zero on the left. Increments are sparse and heavy tailed so the
/// samples include steps as well as gentle ramps.
pub fn random_monotone(grid: Grid, rng: &mut Lcg, top: f64) -> GridFunction {
    let n = grid.len();
    let margin = (n / 20).max(1);
    let span = n.saturating_sub(2 * margin).max(1);
    let end = (margin + span).min(n);
    let a = (margin + (rng.next_f64() * 0.5 * span as f64) as usize).min(end - 1);
    let b = (a + 1 + (rng.next_f64() * (end - a) as f64) as usize).min(end);
    let density = rng.uniform(0.05, 1.0);
    let mut inc = vec![0.0; n];
    let mut total = 0.0;
    for v in inc.iter_mut().take(b).skip(a) {
        if rng.next_f64() < density {
            let w = rng.next_f64();
            *v = w * w * w;
            total += *v;
        }
    }
    if total == 0.0 {
        inc[a.min(n - 1)] = 1.0;
        total = 1.0;
    }
    let amplitude = top * rng.uniform(0.1, 1.0);
    let mut acc = 0.0;
    let values = inc
        .iter()
        .map(|v| {
            acc += v;
            (amplitude * acc / total).min(amplitude)
        })
        .collect();
    GridFunction::new(grid, values, ExtensionPolicy::FRONT).expect("finite by construction")
}

/// `count` pairs `phi <= psi`, both nondecreasing with values in `[0, top]`.
pub fn random_monotone_pairs(grid: Grid, rng: &mut Lcg, top: f64, count: usize) -> Vec<(GridFunction, GridFunction)> {
    (0..count)
        .map(|_| {
            let a = random_monotone(grid, rng, 0.5 * top);
            let b = random_monotone(grid, rng, 0.5 * top);
            let sum = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
            let psi = a.with_values(sum).expect("finite by construction");
            (a, psi)
        })
        .collect()
}

pub fn random_monotone_samples(grid: Grid, rng: &mut Lcg, top: f64, count: usize) -> Vec<GridFunction> {
    (0..count).map(|_| random_monotone(grid, rng, top)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    TranslationComparison,
    Monotone,
    Subhomogeneous,
    StrongPositivity,
    Dominates,
    LimitHypotheses,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::TranslationComparison => "translation-comparison",
            CheckKind::Monotone => "monotone",
            CheckKind::Subhomogeneous => "subhomogeneous",
            CheckKind::StrongPositivity => "strong-positivity",
            CheckKind::Dominates => "dominates",
            CheckKind::LimitHypotheses => "limit-hypotheses",
        }
    }
}

/// A concrete input on which a check failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub input: Vec<f64>,
    /// Upper member of a pair for the monotonicity check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<Vec<f64>>,
    pub policy: ExtensionPolicy,
    /// Shift `y`, factor `kappa` or iteration count, depending on the check.
    pub param: f64,
    pub x: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: CheckKind,
    pub label: String,
    pub grid: Grid,
    pub samples_tested: usize,
    /// Largest violation after subtracting the slack; positive means failed.
    pub max_violation: f64,
    /// Largest raw difference before the slack.
    pub max_difference: f64,
    pub slack: f64,
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(kind: CheckKind, label: &str, grid: Grid, slack: f64) -> Self {
        CheckReport {
            name: kind.name().into(),
            kind,
            label: label.into(),
            grid,
            samples_tested: 0,
            max_violation: -slack,
            max_difference: f64::NEG_INFINITY,
            slack,
            witnesses: Vec::new(),
            series: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Record one sample whose worst raw difference is `diff` at `x`.
    fn record(&mut self, diff: f64, x: f64, witness: impl FnOnce(f64) -> Witness) {
        self.samples_tested += 1;
        self.max_difference = self.max_difference.max(diff);
        let v = diff - self.slack;
        if v > 0.0 {
            if self.witnesses.len() < MAX_WITNESSES {
                let mut w = witness(v);
                w.x = x;
                self.witnesses.push(w);
            }
        }
    }

    fn finish(mut self) -> Self {
        if self.samples_tested == 0 {
            self.max_difference = 0.0;
        }
        self.max_violation = self.max_difference - self.slack;
        self
    }

    pub fn passed(&self) -> bool {
        self.max_violation <= 0.0
    }

    /// Recomputes the violation of `w` against `o`; positive if it still fails.
    pub fn replay(&self, w: &Witness, o: &OperatorUnderTest) -> Result<f64> {
        let phi = GridFunction::new(self.grid, w.input.clone(), w.policy)?;
        let i = self
            .grid
            .nearest_index(w.x)
            .ok_or_else(|| Error::Domain(format!("witness location {} is off the grid", w.x)))?;
        let raw = match self.kind {
            CheckKind::TranslationComparison => {
                let a = o.apply(&translate(&phi, -w.param))?;
                let b = translate(&o.apply(&phi)?, -w.param);
                a.values()[i] - b.values()[i]
            }
            CheckKind::Monotone => {
                let partner = w.partner.clone().ok_or_else(|| Error::Precondition("monotone witness without partner".into()))?;
                let psi = GridFunction::new(self.grid, partner, w.policy)?;
                o.apply(&phi)?.values()[i] - o.apply(&psi)?.values()[i]
            }
            CheckKind::Subhomogeneous => {
                let k = w.param;
                k * o.apply(&phi)?.values()[i] - o.apply(&phi.scale(k))?.values()[i]
            }
            CheckKind::StrongPositivity => {
                let u = o.iterate(&phi, w.param as usize)?;
                strict(-u.values()[i])
            }
            CheckKind::Dominates => {
                return Err(Error::Precondition("dominance witnesses replay against the pair of operators".into()))
            }
            CheckKind::LimitHypotheses => {
                return Err(Error::Precondition("limit-hypothesis reports carry trend series, not replayable inputs".into()))
            }
        };
        Ok(raw - self.slack)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report holds only finite numbers and strings")
    }
}

/// Nonpositive values count as violations for strict inequalities.
fn strict(diff: f64) -> f64 {
    if diff >= 0.0 {
        diff.max(f64::MIN_POSITIVE)
    } else {
        diff
    }
}

fn worst(diffs: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    diffs.fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
        Some((_, m)) if m >= d => acc,
        _ => Some((i, d)),
    })
}

fn grid_of(samples: &[GridFunction]) -> Result<Grid> {
    let g = *samples.first().ok_or_else(|| Error::Precondition("no samples given".into()))?.grid();
    for s in samples {
        if !s.grid().same_as(&g) {
            return Err(Error::Precondition("all samples must share one grid".into()));
        }
    }
    Ok(g)
}

/// `Q[T_{-y} phi] <= T_{-y} Q[phi]` for `y >= 0`, compared where `x + y`
/// is still on the grid and outside the operator's boundary layer.
pub fn check_translation_comparison(o: &OperatorUnderTest, phis: &[GridFunction], ys: &[f64]) -> Result<CheckReport> {
    let g = grid_of(phis)?;
    for &y in ys {
        if !(y >= 0.0) || g.cells_in(y).is_none() {
            return Err(Error::Precondition(format!("shift {y} must be a nonnegative multiple of dx")));
        }
    }
    let mut rep = CheckReport::new(CheckKind::TranslationComparison, &o.label, g, SLACK);
    for phi in phis {
        let q = o.apply(phi)?;
        for &y in ys {
            let a = o.apply(&translate(phi, -y))?;
            let b = translate(&q, -y);
            let (lo, hi) = (g.x_min() + o.boundary_layer, g.x_max() - y - o.boundary_layer);
            let window = (0..g.len()).filter(|&i| g.x(i) >= lo && g.x(i) <= hi);
            let (i, d) = worst(window.map(|i| (i, a.values()[i] - b.values()[i]))).unwrap_or((0, 0.0));
            rep.record(d, g.x(i), |v| Witness {
                input: phi.values().to_vec(),
                partner: None,
                policy: phi.policy(),
                param: y,
                x: 0.0,
                violation: v,
            });
        }
    }
    Ok(rep.finish())
}

/// `Q[phi] <= Q[psi]` for each pair `phi <= psi`.
pub fn check_monotone(o: &OperatorUnderTest, pairs: &[(GridFunction, GridFunction)]) -> Result<CheckReport> {
    let firsts: Vec<GridFunction> = pairs.iter().map(|p| p.0.clone()).collect();
    let g = grid_of(&firsts)?;
    let mut rep = CheckReport::new(CheckKind::Monotone, &o.label, g, SLACK);
    for (phi, psi) in pairs {
        psi.check_same_grid(phi)?;
        if phi.values().iter().zip(psi.values()).any(|(a, b)| a > b) {
            return Err(Error::Precondition("pair is not ordered".into()));
        }
        let a = o.apply(phi)?;
        let b = o.apply(psi)?;
        let (i, d) = worst(a.values().iter().zip(b.values()).map(|(x, y)| x - y).enumerate()).unwrap_or((0, 0.0));
        rep.record(d, g.x(i), |v| Witness {
            input: phi.values().to_vec(),
            partner: Some(psi.values().to_vec()),
            policy: phi.policy(),
            param: 0.0,
            x: 0.0,
            violation: v,
        });
    }
    Ok(rep.finish())
}

/// `kappa Q[phi] <= Q[kappa phi]` for `kappa` in `[0, 1]`.
pub fn check_subhomogeneous(o: &OperatorUnderTest, phis: &[GridFunction], kappas: &[f64]) -> Result<CheckReport> {
    let g = grid_of(phis)?;
    if kappas.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(Error::Precondition("kappa must lie in [0, 1]".into()));
    }
    let mut rep = CheckReport::new(CheckKind::Subhomogeneous, &o.label, g, SLACK);
    for phi in phis {
        let q = o.apply(phi)?;
        for &k in kappas {
            let a = o.apply(&phi.scale(k))?;
            let (i, d) = worst((0..g.len()).map(|i| (i, k * q.values()[i] - a.values()[i]))).unwrap_or((0, 0.0));
            rep.record(d, g.x(i), |v| Witness {
                input: phi.values().to_vec(),
                partner: None,
                policy: phi.policy(),
                param: k,
                x: 0.0,
                violation: v,
            });
        }
    }
    Ok(rep.finish())
}

/// After `n_star` applications every nonzero `phi` is strictly positive on
/// `(0, x_max - 10]`. No slack: zero counts as a failure.
pub fn check_strong_positivity(o: &OperatorUnderTest, phis: &[GridFunction], n_star: usize) -> Result<CheckReport> {
    let g = grid_of(phis)?;
    let hi = g.x_max() - 10.0;
    if !(hi > 0.0) {
        return Err(Error::Precondition("grid must extend past x = 10".into()));
    }
    let mut rep = CheckReport::new(CheckKind::StrongPositivity, &o.label, g, 0.0);
    for phi in phis {
        if !phi.is_nonnegative() || phi.sup() <= 0.0 {
            return Err(Error::Precondition("strong positivity needs nonzero nonnegative data".into()));
        }
        let u = o.iterate(phi, n_star)?;
        let window = (0..g.len()).filter(|&i| g.x(i) > 0.0 && g.x(i) <= hi);
        let (i, d) = worst(window.map(|i| (i, strict(-u.values()[i])))).unwrap_or((0, 0.0));
        rep.record(d, g.x(i), |v| Witness {
            input: phi.values().to_vec(),
            partner: None,
            policy: phi.policy(),
            param: n_star as f64,
            x: 0.0,
            violation: v,
        });
    }
    Ok(rep.finish())
}

/// `lower[phi] <= o[phi]` on each sample.
pub fn check_dominates(o: &OperatorUnderTest, lower: &OperatorUnderTest, phis: &[GridFunction]) -> Result<CheckReport> {
    let g = grid_of(phis)?;
    let label = format!("{} >= {}", o.label, lower.label);
    let mut rep = CheckReport::new(CheckKind::Dominates, &label, g, SLACK);
    for phi in phis {
        let a = lower.apply(phi)?;
        let b = o.apply(phi)?;
        let (i, d) = worst(a.values().iter().zip(b.values()).map(|(x, y)| x - y).enumerate()).unwrap_or((0, 0.0));
        rep.record(d, g.x(i), |v| Witness {
            input: phi.values().to_vec(),
            partner: None,
            policy: phi.policy(),
            param: 0.0,
            x: 0.0,
            violation: v,
        });
    }
    Ok(rep.finish())
}

/// Spreading speed of the translation-invariant model obtained by freezing
/// the habitat at its right limit, in the stationary frame.
pub fn limit_spread_speed(model: &ModelSpec) -> Result<f64> {
    match model {
        ModelSpec::D { d, h } => kpp_rd_speed(*d, h.hprime_plus0()),
        ModelSpec::B { d, mu, tau, kernel, f, .. } => {
            Ok(min_wave_speed(&DispersionParams::new(*d, *mu, *tau, f.fprime0, kernel.clone())?)?.c_star)
        }
        ModelSpec::A { d, mu, tau, kernel, f, .. } => {
            if *tau == 0.0 && kernel.is_dirac() {
                return Ok(kpp_local_speed(*d, *mu, f.fprime0)?.value);
            }
            nonlocal_delay_speed(*d, *mu, *tau, f.fprime0, kernel)
        }
        ModelSpec::C { .. } => Err(Error::Domain("the half-line model has no spreading cone".into())),
    }
}

/// `inf_rho lambda(rho) / rho` where `lambda` solves
/// `lambda = d rho^2 - mu + mu f'(0) khat(rho) e^{-lambda tau}`.
fn nonlocal_delay_speed(d: f64, mu: f64, tau: f64, fprime0: f64, kernel: &crate::kernels::Kernel) -> Result<f64> {
    if fprime0 <= 1.0 {
        return Ok(0.0);
    }
    let growth = |rho: f64| -> f64 {
        let Ok(kh) = kernel.khat(rho) else { return f64::INFINITY };
        let a = d * rho * rho - mu;
        let b = mu * fprime0 * kh;
        // lambda - a - b e^{-lambda tau} is increasing in lambda
        let g = |l: f64| l - a - b * (-l * tau).exp();
        let (mut lo, mut hi) = (a, a + b);
        if g(lo) > 0.0 {
            lo = a.min(-mu) - 1.0;
            while g(lo) > 0.0 {
                lo = 2.0 * lo - 1.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let speed = |rho: f64| growth(rho) / rho;
    let n = 2000;
    let (lo, hi) = (1e-3f64.ln(), 20f64.ln());
    let rhos: Vec<f64> = (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect();
    let vals: Vec<f64> = rhos.iter().map(|&r| speed(r)).collect();
    let k = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    if !vals[k].is_finite() {
        return Err(Error::Evaluation("no finite spreading speed on the scanned range".into()));
    }
    let (mut a, mut b) = (rhos[k.saturating_sub(1)], rhos[(k + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if speed(c) < speed(e) {
            b = e;
        } else {
            a = c;
        }
    }
    Ok(speed(0.5 * (a + b)).min(vals[k]))
}

/// Horizon and thresholds for [`check_limit_hypotheses`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConfig {
    /// Time per application of the frozen-frame map.
    pub t0: f64,
    /// Increasing habitat offsets standing in for `y -> infinity`.
    pub ys: Vec<f64>,
    pub horizon: usize,
    /// Bounded window on which iterates should approach `r*` (plus side).
    pub window: (f64, f64),
    pub tol: f64,
    /// Widening of the spreading cone (plus side).
    pub eps: f64,
}

/// Finite-horizon proxies for the limit hypotheses of the frozen-frame map.
///
/// * Cauchy differences `sup |Q_{y_{k+1}} phi - Q_{y_k} phi|` over the offsets.
/// * Minus side: `sup Q_-^n[phi]` must strictly decrease for `n = 1..horizon`.
/// * Plus side: `sup_window |Q_+^n[phi] - r*|` must be below `tol` at the
///   horizon, and so must `sup Q_+^n[phi]` outside the cone
///   `[-(c* + c + eps) n t0, (c* - c + eps) n t0]`, with `c*` the speed of
///   the right-limit model and `c` the habitat speed.
pub fn check_limit_hypotheses(
    model: &ModelSpec,
    phi: &GridFunction,
    side: LimitSide,
    cfg: &LimitConfig,
) -> Result<CheckReport> {
    let g = *phi.grid();
    let side_name = match side {
        LimitSide::Plus => "plus",
        LimitSide::Minus => "minus",
    };
    let label = format!("model {} {side_name} limit, t0 = {}", model.name(), cfg.t0);
    let mut rep = CheckReport::new(CheckKind::LimitHypotheses, &label, g, SLACK);
    rep.notes.push(PROXY_NOTE.into());

    let family = limit_operator_estimate(model, cfg.t0, phi, &cfg.ys, side)?;
    let cauchy: Vec<f64> = family
        .windows(2)
        .map(|w| w[1].sup_distance(&w[0]))
        .collect::<Result<_>>()?;
    rep.series.insert("a3_cauchy".into(), cauchy);

    let y = *cfg.ys.last().ok_or_else(|| Error::Precondition("need at least one offset".into()))?;
    let offset = match side {
        LimitSide::Plus => y,
        LimitSide::Minus => -y,
    };
    let limit = model.with_habitat_offset(offset)?;
    let q = OperatorUnderTest::moving_frame(&limit, cfg.t0)?;
    let mut u = phi.clone();
    let mut sups = Vec::with_capacity(cfg.horizon);
    let mut window_err = Vec::new();
    let mut outside = Vec::new();
    let cone = match side {
        LimitSide::Plus => {
            let c_star = limit_spread_speed(model)?;
            let c = model.c_shift();
            rep.notes.push(format!("cone speeds: left {}, right {}", c_star + c, c_star - c));
            Some((c_star + c + cfg.eps, c_star - c + cfg.eps))
        }
        LimitSide::Minus => None,
    };
    for n in 1..=cfg.horizon {
        u = q.apply(&u)?;
        sups.push(u.sup());
        if let Some((left, right)) = cone {
            let t = n as f64 * cfg.t0;
            let mut w = None::<f64>;
            let mut o = None::<f64>;
            for (i, x) in g.xs().enumerate() {
                let v = u.values()[i];
                if x >= cfg.window.0 && x <= cfg.window.1 {
                    let e = (v - model.r_star()).abs();
                    w = Some(w.map_or(e, |m| m.max(e)));
                }
                if x < -left * t || x > right * t {
                    o = Some(o.map_or(v, |m| m.max(v)));
                }
            }
            window_err.push(w.unwrap_or(f64::NAN));
            if let Some(o) = o {
                outside.push(o);
            }
        }
    }
    match side {
        LimitSide::Minus => {
            for n in 1..sups.len() {
                let d = strict(sups[n] - sups[n - 1]);
                rep.record(d + SLACK, g.x(0), |v| Witness {
                    input: phi.values().to_vec(),
                    partner: None,
                    policy: phi.policy(),
                    param: (n + 1) as f64,
                    x: 0.0,
                    violation: v,
                });
            }
        }
        LimitSide::Plus => {
            let last_w = *window_err.last().unwrap_or(&f64::NAN);
            if last_w.is_nan() {
                return Err(Error::Precondition("window holds no grid point".into()));
            }
            rep.record(last_w - cfg.tol + SLACK, cfg.window.0, |v| Witness {
                input: phi.values().to_vec(),
                partner: None,
                policy: phi.policy(),
                param: cfg.horizon as f64,
                x: 0.0,
                violation: v,
            });
            if let Some(&o) = outside.last() {
                rep.record(o - cfg.tol + SLACK, g.x_max(), |v| Witness {
                    input: phi.values().to_vec(),
                    partner: None,
                    policy: phi.policy(),
                    param: cfg.horizon as f64,
                    x: 0.0,
                    violation: v,
                });
            }
            rep.series.insert("uc_window_error".into(), window_err);
            rep.series.insert("aa_outside_cone".into(), outside);
        }
    }
    rep.series.insert("sup".into(), sups);
    Ok(rep.finish())
}
