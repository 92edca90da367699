//! Explicit time stepping for the four models, the moving-frame map
//! `phi -> T_{-ct}[P[t, phi]]` and limit-operator estimates.

use crate::error::{Error, Result};
use crate::gridfn::{translate, Extension, Grid, GridFunction};
use crate::kernels::{Kernel, Weights};
use crate::nonlinearity::{KppReaction, Reaction};
use std::collections::VecDeque;

const BLOW_UP: f64 = 1e12;
const CFL_FACTOR: f64 = 0.9;

/// The four evolution equations.
///
/// * `A`: `u_t = d u_xx - mu u + mu int f(y - ct, u(t - tau, y)) k(x - y) dy`
/// * `B`: `u_t = d (k*u - u) - mu u + mu f(x - ct, u(t - tau, x))`
/// * `C`: `u_t = d u_xx - mu u + mu f(u(t - tau, x))` on `x > 0`, `u(t, 0) = 0`
/// * `D`: `u_t = d u_xx + h(x, u)`
#[derive(Debug, Clone)]
pub enum ModelSpec {
    A { d: f64, mu: f64, tau: f64, c_shift: f64, kernel: Kernel, f: Reaction },
    B { d: f64, mu: f64, tau: f64, c_shift: f64, kernel: Kernel, f: Reaction },
    C { d: f64, mu: f64, tau: f64, f: Reaction },
    D { d: f64, h: KppReaction },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::A { .. } => "A",
            ModelSpec::B { .. } => "B",
            ModelSpec::C { .. } => "C",
            ModelSpec::D { .. } => "D",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("d must be positive, got {d}")));
        }
        if let Some(mu) = self.mu() {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Domain(format!("mu must be positive, got {mu}")));
            }
        }
        let tau = self.tau();
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
        }
        match self {
            ModelSpec::B { kernel, .. } if !(kernel.variance() > 0.0) => {
                Err(Error::Domain("model B needs a kernel with positive variance".into()))
            }
            ModelSpec::C { f, .. } => {
                let probe = 0.5 * f.u_star;
                if f.eval(-7.0, probe) != f.eval(7.0, probe) {
                    Err(Error::Domain("model C needs a reaction independent of s".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn d(&self) -> f64 {
        match self {
            ModelSpec::A { d, .. } | ModelSpec::B { d, .. } | ModelSpec::C { d, .. } | ModelSpec::D { d, .. } => *d,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match self {
            ModelSpec::A { mu, .. } | ModelSpec::B { mu, .. } | ModelSpec::C { mu, .. } => Some(*mu),
            ModelSpec::D { .. } => None,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            ModelSpec::A { tau, .. } | ModelSpec::B { tau, .. } | ModelSpec::C { tau, .. } => *tau,
            ModelSpec::D { .. } => 0.0,
        }
    }

    pub fn c_shift(&self) -> f64 {
        match self {
            ModelSpec::A { c_shift, .. } | ModelSpec::B { c_shift, .. } => *c_shift,
            _ => 0.0,
        }
    }

    pub fn reaction(&self) -> Option<&Reaction> {
        match self {
            ModelSpec::A { f, .. } | ModelSpec::B { f, .. } | ModelSpec::C { f, .. } => Some(f),
            ModelSpec::D { .. } => None,
        }
    }

    /// The invaded state far to the right.
    pub fn r_star(&self) -> f64 {
        match self {
            ModelSpec::A { f, .. } | ModelSpec::B { f, .. } | ModelSpec::C { f, .. } => f.u_star,
            ModelSpec::D { h, .. } => h.u_plus_star,
        }
    }

    /// Level that solutions started below it never exceed.
    pub fn invariant_level(&self) -> f64 {
        match self {
            ModelSpec::D { h, .. } => h.m_star,
            _ => self.r_star(),
        }
    }

    /// The same model with its habitat moved left by `y`, i.e. reaction
    /// evaluated at `s + y`. Conjugating the solution map by translation by
    /// `y` gives exactly this model's solution map.
    pub fn with_habitat_offset(&self, y: f64) -> Result<ModelSpec> {
        Ok(match self {
            ModelSpec::A { d, mu, tau, c_shift, kernel, f } => ModelSpec::A {
                d: *d,
                mu: *mu,
                tau: *tau,
                c_shift: *c_shift,
                kernel: kernel.clone(),
                f: f.with_offset(y),
            },
            ModelSpec::B { d, mu, tau, c_shift, kernel, f } => ModelSpec::B {
                d: *d,
                mu: *mu,
                tau: *tau,
                c_shift: *c_shift,
                kernel: kernel.clone(),
                f: f.with_offset(y),
            },
            ModelSpec::C { .. } => {
                return Err(Error::Domain("the half-line model is not conjugate to a habitat shift".into()))
            }
            ModelSpec::D { d, h } => ModelSpec::D { d: *d, h: h.with_offset(y) },
        })
    }

    fn lipschitz(&self) -> f64 {
        match self {
            ModelSpec::A { f, .. } | ModelSpec::B { f, .. } | ModelSpec::C { f, .. } => {
                f.lipschitz(2.0 * f.u_star.max(1e-3))
            }
            ModelSpec::D { h, .. } => h.lipschitz(h.m_star.max(1e-3)),
        }
    }

    /// Largest step for which every stencil weight is nonnegative.
    fn monotone_bound(&self, grid: &Grid, lip: f64) -> f64 {
        let dx2 = grid.dx() * grid.dx();
        match self {
            ModelSpec::A { d, mu, .. } | ModelSpec::C { d, mu, .. } => 1.0 / (2.0 * d / dx2 + mu),
            ModelSpec::B { d, mu, .. } => 1.0 / (d + mu),
            ModelSpec::D { d, .. } => 1.0 / (2.0 * d / dx2 + lip),
        }
    }

    fn raw_dt(&self, grid: &Grid) -> (f64, f64) {
        let dx2 = grid.dx() * grid.dx();
        let lip = self.lipschitz();
        let mut dt = match self {
            ModelSpec::A { d, .. } | ModelSpec::C { d, .. } | ModelSpec::D { d, .. } => CFL_FACTOR * dx2 / (2.0 * d),
            ModelSpec::B { d, mu, .. } => CFL_FACTOR / (d + mu * lip),
        };
        let bound = self.monotone_bound(grid, lip);
        if dt > bound {
            dt = CFL_FACTOR * bound;
        }
        (dt, bound)
    }
}

/// Explicit-scheme step: `0.9 dx^2 / 2d` with a Laplacian, `0.9 / (d + mu Lip f)`
/// otherwise, tightened if that would make a stencil weight negative, then
/// rounded down so it divides `tau`.
pub fn stable_dt(model: &ModelSpec, grid: &Grid) -> f64 {
    let (dt, _) = model.raw_dt(grid);
    round_to_delay(dt, model.tau())
}

fn round_to_delay(dt: f64, tau: f64) -> f64 {
    if tau > 0.0 {
        tau / (tau / dt).ceil()
    } else {
        dt
    }
}

/// Ring of past states `u(t - tau), ..., u(t)` spaced by `dt`.
#[derive(Debug, Clone)]
pub struct DelayHistory {
    slices: VecDeque<GridFunction>,
    dt: f64,
}

impl DelayHistory {
    /// Oldest slice first.
    pub fn new(slices: Vec<GridFunction>, dt: f64) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::Domain("history needs at least one slice".into()));
        }
        if slices.len() > 1 && !(dt > 0.0) {
            return Err(Error::Domain("history spacing must be positive".into()));
        }
        for s in &slices[1..] {
            slices[0].check_same_grid(s)?;
        }
        Ok(DelayHistory { slices: slices.into(), dt })
    }

    /// `phi` held constant over `[-tau, 0]`.
    pub fn constant(phi: &GridFunction, tau: f64, dt: f64) -> Self {
        let m = if tau > 0.0 { (tau / dt).round() as usize } else { 0 };
        DelayHistory { slices: std::iter::repeat(phi.clone()).take(m + 1).collect(), dt }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn tau(&self) -> f64 {
        (self.slices.len() - 1) as f64 * self.dt
    }

    pub fn oldest(&self) -> &GridFunction {
        &self.slices[0]
    }

    pub fn newest(&self) -> &GridFunction {
        &self.slices[self.slices.len() - 1]
    }

    fn push(&mut self, u: GridFunction) {
        self.slices.pop_front();
        self.slices.push_back(u);
    }
}

/// Initial data: a single profile (held constant on `[-tau, 0]`) or a full
/// history.
#[derive(Debug, Clone)]
pub enum InitialData {
    Profile(GridFunction),
    History(DelayHistory),
}

impl From<GridFunction> for InitialData {
    fn from(u: GridFunction) -> Self {
        InitialData::Profile(u)
    }
}

impl From<DelayHistory> for InitialData {
    fn from(h: DelayHistory) -> Self {
        InitialData::History(h)
    }
}

#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub current: GridFunction,
    history: Option<DelayHistory>,
}

impl State {
    pub fn new(model: &ModelSpec, init: InitialData, dt: f64) -> Result<State> {
        let tau = model.tau();
        match init {
            InitialData::Profile(u) => {
                let history = (tau > 0.0).then(|| DelayHistory::constant(&u, tau, dt));
                Ok(State { t: 0.0, current: u, history })
            }
            InitialData::History(h) => {
                if tau == 0.0 {
                    return Ok(State { t: 0.0, current: h.newest().clone(), history: None });
                }
                if (h.dt - dt).abs() > 1e-12 * dt || (h.tau() - tau).abs() > 1e-9 * tau {
                    return Err(Error::Precondition(format!(
                        "history spans {} with spacing {}, model needs tau = {tau} with dt = {dt}",
                        h.tau(),
                        h.dt
                    )));
                }
                Ok(State { t: 0.0, current: h.newest().clone(), history: Some(h) })
            }
        }
    }

    pub fn history(&self) -> Option<&DelayHistory> {
        self.history.as_ref()
    }

    fn delayed(&self) -> &GridFunction {
        self.history.as_ref().map_or(&self.current, |h| h.oldest())
    }
}

fn ghost(ext: Extension, edge: f64) -> f64 {
    match ext {
        Extension::EdgeConstant => edge,
        Extension::Zero => 0.0,
    }
}

/// A model bound to a grid and step, with cached convolution weights.
struct Scheme<'a> {
    model: &'a ModelSpec,
    grid: Grid,
    dt: f64,
    weights: Weights,
}

impl<'a> Scheme<'a> {
    fn new(model: &'a ModelSpec, grid: Grid, dt: f64, checked: bool) -> Result<Self> {
        model.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
        }
        if checked {
            let (raw, _) = model.raw_dt(&grid);
            if dt > raw * (1.0 + 1e-9) {
                return Err(Error::Precondition(format!("dt = {dt} exceeds the stable step {raw}")));
            }
            let tau = model.tau();
            if tau > 0.0 {
                let m = tau / dt;
                if (m - m.round()).abs() > 1e-6 {
                    return Err(Error::Precondition(format!("dt = {dt} does not divide tau = {tau}")));
                }
            }
        }
        let weights = match model {
            ModelSpec::A { kernel, .. } | ModelSpec::B { kernel, .. } => {
                let half = 0.5 * (grid.x_max() - grid.x_min());
                if kernel.cutoff() > half {
                    return Err(Error::Domain(format!(
                        "kernel cutoff {} exceeds the grid half-width {half}",
                        kernel.cutoff()
                    )));
                }
                kernel.weights(grid.dx())
            }
            _ => Kernel::dirac().weights(grid.dx()),
        };
        Ok(Scheme { model, grid, dt, weights })
    }

    /// One explicit Euler update from time `t`.
    fn advance(&self, t: f64, cur: &GridFunction, delayed: &GridFunction) -> Result<Vec<f64>> {
        let g = &self.grid;
        let n = g.len();
        let dt = self.dt;
        let u = cur.values();
        let pol = cur.policy();
        let (gl, gr) = (ghost(pol.left, u[0]), ghost(pol.right, u[n - 1]));
        let nb = |i: usize| -> (f64, f64) {
            let l = if i == 0 { gl } else { u[i - 1] };
            let r = if i + 1 == n { gr } else { u[i + 1] };
            (l, r)
        };
        let mut out = vec![0.0; n];
        match self.model {
            ModelSpec::A { d, mu, c_shift, f, .. } => {
                let lam = d * dt / (g.dx() * g.dx());
                let center = 1.0 - 2.0 * lam - mu * dt;
                let j = self.weights.half_width as i64;
                let shift = c_shift * t;
                let birth: Vec<f64> = (-j..n as i64 + j)
                    .map(|k| {
                        let x = g.x_min() + k as f64 * g.dx();
                        f.eval(x - shift, delayed.at(k))
                    })
                    .collect();
                let conv = self.weights.apply(&birth);
                for i in 0..n {
                    let (l, r) = nb(i);
                    out[i] = center * u[i] + lam * (l + r) + mu * dt * conv[i];
                }
            }
            ModelSpec::B { d, mu, c_shift, f, .. } => {
                let center = 1.0 - d * dt - mu * dt;
                let ext = self.weights.extend(u, cur.left_extension(), cur.right_extension());
                let conv = self.weights.apply(&ext);
                let shift = c_shift * t;
                let del = delayed.values();
                for i in 0..n {
                    out[i] = center * u[i] + d * dt * conv[i] + mu * dt * f.eval(g.x(i) - shift, del[i]);
                }
            }
            ModelSpec::C { d, mu, f, .. } => {
                let lam = d * dt / (g.dx() * g.dx());
                let center = 1.0 - 2.0 * lam - mu * dt;
                let del = delayed.values();
                for i in 0..n {
                    let x = g.x(i);
                    if x <= 1e-12 * g.dx() {
                        continue;
                    }
                    let (mut l, r) = nb(i);
                    if i == 0 || g.x(i - 1) <= 1e-12 * g.dx() {
                        l = 0.0;
                    }
                    out[i] = center * u[i] + lam * (l + r) + mu * dt * f.eval(0.0, del[i]);
                }
            }
            ModelSpec::D { d, h } => {
                let lam = d * dt / (g.dx() * g.dx());
                let center = 1.0 - 2.0 * lam;
                for i in 0..n {
                    let (l, r) = nb(i);
                    out[i] = center * u[i] + lam * (l + r) + dt * h.eval(g.x(i), u[i]);
                }
            }
        }
        let t_next = t + dt;
        if let Some(i) = out.iter().position(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(Error::Runtime {
                t: t_next,
                msg: format!("state left the admissible range at x = {} (value {})", g.x(i), out[i]),
            });
        }
        Ok(out)
    }

    fn step_in_place(&self, state: &mut State) -> Result<()> {
        let next = self.advance(state.t, &state.current, state.delayed())?;
        let next = GridFunction::from_parts(self.grid, next, state.current.policy());
        if let Some(h) = state.history.as_mut() {
            h.push(next.clone());
        }
        state.current = next;
        state.t += self.dt;
        Ok(())
    }
}

/// One explicit Euler step. Fails if `dt` is above the stable step or does
/// not divide `tau`.
pub fn step(model: &ModelSpec, state: &State, dt: f64) -> Result<State> {
    let scheme = Scheme::new(model, *state.current.grid(), dt, true)?;
    let mut next = state.clone();
    scheme.step_in_place(&mut next)?;
    Ok(next)
}

/// [`step`] without the stability check, for demonstrating what goes wrong
/// past it.
pub fn step_unchecked(model: &ModelSpec, state: &State, dt: f64) -> Result<State> {
    let scheme = Scheme::new(model, *state.current.grid(), dt, false)?;
    let mut next = state.clone();
    scheme.step_in_place(&mut next)?;
    Ok(next)
}

/// Called at every recorded time.
pub trait Observer {
    fn observe(&mut self, t: f64, u: &GridFunction) -> Result<()>;
}

impl<F: FnMut(f64, &GridFunction) -> Result<()>> Observer for F {
    fn observe(&mut self, t: f64, u: &GridFunction) -> Result<()> {
        self(t, u)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Fixed step; chosen by [`stable_dt`] when absent.
    pub dt: Option<f64>,
    /// Spacing of recorded frames; only the endpoints when absent.
    pub record_every: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub frames: Vec<GridFunction>,
    pub dt: f64,
    pub steps: usize,
    /// Extremes of the state over every step, not only recorded ones.
    pub min_value: f64,
    pub max_value: f64,
}

impl RunRecord {
    pub fn last(&self) -> &GridFunction {
        &self.frames[self.frames.len() - 1]
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Step size and count reaching `t_end`. Without delay the step is shrunk so
/// the run ends exactly at `t_end`; with delay it must divide `tau`, and the
/// run ends at the nearest multiple.
fn plan(model: &ModelSpec, grid: &Grid, t_end: f64, dt: Option<f64>) -> (f64, usize) {
    let dt = dt.unwrap_or_else(|| stable_dt(model, grid));
    if model.tau() > 0.0 {
        (dt, (t_end / dt - 1e-9).ceil().max(0.0) as usize)
    } else {
        let n = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
        if n == 0 {
            (dt, 0)
        } else {
            (t_end / n as f64, n)
        }
    }
}

pub fn simulate(
    model: &ModelSpec,
    init: impl Into<InitialData>,
    t_end: f64,
    opts: &SimOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    if !(t_end >= 0.0) {
        return Err(Error::Precondition(format!("end time must be >= 0, got {t_end}")));
    }
    let init = init.into();
    let grid = match &init {
        InitialData::Profile(u) => *u.grid(),
        InitialData::History(h) => *h.newest().grid(),
    };
    let (dt, n) = plan(model, &grid, t_end, opts.dt);
    let scheme = Scheme::new(model, grid, dt, true)?;
    let mut state = State::new(model, init, dt)?;
    let every = opts
        .record_every
        .map(|r| ((r / dt).round() as usize).max(1))
        .unwrap_or(usize::MAX);

    let mut rec = RunRecord {
        times: vec![0.0],
        frames: vec![state.current.clone()],
        dt,
        steps: n,
        min_value: state.current.inf(),
        max_value: state.current.sup(),
    };
    for o in observers.iter_mut() {
        o.observe(0.0, &state.current)?;
    }
    for k in 1..=n {
        scheme.step_in_place(&mut state)?;
        rec.min_value = rec.min_value.min(state.current.inf());
        rec.max_value = rec.max_value.max(state.current.sup());
        if k % every == 0 || k == n {
            let t = k as f64 * dt;
            rec.times.push(t);
            rec.frames.push(state.current.clone());
            for o in observers.iter_mut() {
                o.observe(t, &state.current)?;
            }
        }
    }
    Ok(rec)
}

/// `phi -> T_{-c t0}[P[t0, phi]]` with `phi` held constant over `[-tau, 0]`.
#[derive(Debug, Clone)]
pub struct MovingFrameMap {
    model: ModelSpec,
    c: f64,
    t0: f64,
    dt: Option<f64>,
}

impl MovingFrameMap {
    pub fn new(model: ModelSpec, c: f64, t0: f64) -> Result<Self> {
        model.validate()?;
        if !(t0 > model.tau()) {
            return Err(Error::Precondition(format!("t0 = {t0} must exceed tau = {}", model.tau())));
        }
        Ok(MovingFrameMap { model, c, t0, dt: None })
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        let opts = SimOptions { dt: self.dt, record_every: None };
        let rec = simulate(&self.model, phi.clone(), self.t0, &opts, &mut [])?;
        let u = rec.last();
        if self.c == 0.0 {
            return Ok(u.clone());
        }
        Ok(translate(u, -self.c * rec.final_time()))
    }
}

pub fn moving_frame_map(model: &ModelSpec, c: f64, t0: f64) -> Result<MovingFrameMap> {
    MovingFrameMap::new(model.clone(), c, t0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitSide {
    Plus,
    Minus,
}

/// `T_{-+y} Q_{t0} T_{+-y} [phi]` for each `y`, with `Q_{t0}` the map in the
/// frame moving with the habitat. Conjugation by translation is carried out
/// exactly by offsetting the habitat argument, so no data leave the grid.
pub fn limit_operator_estimate(
    model: &ModelSpec,
    t0: f64,
    phi: &GridFunction,
    ys: &[f64],
    side: LimitSide,
) -> Result<Vec<GridFunction>> {
    if ys.iter().any(|&y| !(y > 0.0)) || ys.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("offsets must be positive and increasing".into()));
    }
    let c = model.c_shift();
    ys.iter()
        .map(|&y| {
            let offset = match side {
                LimitSide::Plus => y,
                LimitSide::Minus => -y,
            };
            moving_frame_map(&model.with_habitat_offset(offset)?, c, t0)?.apply(phi)
        })
        .collect()
}
