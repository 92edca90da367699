//! Front tracking and spreading diagnostics on recorded runs.

use crate::error::{Error, Result};
use crate::evolve::{Observer, RunRecord};
use crate::gridfn::GridFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontSide {
    Rightmost,
    Leftmost,
}

/// Position where `u` crosses `lambda`, linearly interpolated between the
/// bracketing samples. `None` if `u` never reaches `lambda`.
pub fn level_position(u: &GridFunction, lambda: f64, side: FrontSide) -> Option<f64> {
    let v = u.values();
    let g = u.grid();
    match side {
        FrontSide::Rightmost => {
            let i = v.iter().rposition(|&x| x >= lambda)?;
            if i + 1 == v.len() {
                return Some(g.x_max());
            }
            let t = (v[i] - lambda) / (v[i] - v[i + 1]);
            Some(g.x(i) + t * g.dx())
        }
        FrontSide::Leftmost => {
            let i = v.iter().position(|&x| x >= lambda)?;
            if i == 0 {
                return Some(g.x_min());
            }
            let t = (v[i] - lambda) / (v[i] - v[i - 1]);
            Some(g.x(i) - t * g.dx())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrace {
    pub level: f64,
    pub side: FrontSide,
    pub times: Vec<f64>,
    pub positions: Vec<Option<f64>>,
}

impl FrontTrace {
    pub fn new(level: f64, side: FrontSide) -> Self {
        FrontTrace { level, side, times: Vec::new(), positions: Vec::new() }
    }

    pub fn from_run(run: &RunRecord, level: f64, side: FrontSide) -> Self {
        let mut tr = FrontTrace::new(level, side);
        for (t, u) in run.times.iter().zip(&run.frames) {
            tr.push(*t, u);
        }
        tr
    }

    pub fn push(&mut self, t: f64, u: &GridFunction) {
        self.times.push(t);
        self.positions.push(level_position(u, self.level, self.side));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,position\n");
        for (t, p) in self.times.iter().zip(&self.positions) {
            match p {
                Some(p) => s.push_str(&format!("{t:?},{p:?}\n")),
                None => s.push_str(&format!("{t:?},\n")),
            }
        }
        s
    }
}

impl Observer for FrontTrace {
    fn observe(&mut self, t: f64, u: &GridFunction) -> Result<()> {
        self.push(t, u);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of position against time over `[t_lo, t_hi]`.
pub fn empirical_speed(trace: &FrontTrace, t_lo: f64, t_hi: f64) -> Result<SpeedFit> {
    let mut pts = Vec::new();
    for (t, p) in trace.times.iter().zip(&trace.positions) {
        if *t < t_lo || *t > t_hi {
            continue;
        }
        match p {
            Some(p) => pts.push((*t, *p)),
            None => return Err(Error::Domain(format!("front absent at t = {t}"))),
        }
    }
    if pts.len() < 5 {
        return Err(Error::Domain(format!("need at least 5 points in [{t_lo}, {t_hi}], got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let slope = stx / stt;
    let sse: f64 = pts.iter().map(|p| (p.1 - xm - slope * (p.0 - tm)).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / stt).sqrt();
    Ok(SpeedFit { slope, stderr, points: pts.len() })
}

/// `(t, value)` samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

impl Curve {
    pub fn push(&mut self, t: f64, v: f64) {
        self.t.push(t);
        self.value.push(v);
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// Value at the recorded time closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = (0..self.t.len()).min_by(|&a, &b| (self.t[a] - t).abs().total_cmp(&(self.t[b] - t).abs()))?;
        Some(self.value[i])
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.t.last()?, *self.value.last()?))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value\n");
        for (t, v) in self.t.iter().zip(&self.value) {
            s.push_str(&format!("{t:?},{v:?}\n"));
        }
        s
    }
}

/// What the solution should approach inside the spreading interval.
#[derive(Debug, Clone)]
pub enum Target {
    Constant(f64),
    Profile(GridFunction),
}

impl Target {
    fn at(&self, x: f64) -> f64 {
        match self {
            Target::Constant(v) => *v,
            Target::Profile(w) => w.eval(x),
        }
    }
}

/// `e(t) = sup |u(t, x) - target(x)|` over grid points in
/// `[t (c_lo + eps), t (c_hi - eps)]`; times where that interval holds no
/// grid point are skipped.
pub fn interval_convergence(run: &RunRecord, target: &Target, c_lo: f64, c_hi: f64, eps: f64) -> Curve {
    let mut curve = Curve::default();
    for (t, u) in run.times.iter().zip(&run.frames) {
        let (a, b) = (t * (c_lo + eps), t * (c_hi - eps));
        if !(a < b) {
            continue;
        }
        let g = u.grid();
        let mut worst = None::<f64>;
        for (i, x) in g.xs().enumerate() {
            if x >= a && x <= b {
                let e = (u.values()[i] - target.at(x)).abs();
                worst = Some(worst.map_or(e, |w| w.max(e)));
            }
        }
        if let Some(e) = worst {
            curve.push(*t, e);
        }
    }
    curve
}

/// Region that should empty out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRegion {
    /// `x <= t (c - eps)`
    Behind { c: f64 },
    /// outside `[-t (c_minus + eps), t (c_plus + eps)]`
    OutsideCone { c_minus: f64, c_plus: f64 },
}

/// `m(t) = sup u(t, x)` over the region; times with an empty region are
/// skipped.
pub fn tail_decay(run: &RunRecord, region: TailRegion, eps: f64) -> Curve {
    let mut curve = Curve::default();
    for (t, u) in run.times.iter().zip(&run.frames) {
        let inside = |x: f64| match region {
            TailRegion::Behind { c } => x <= t * (c - eps),
            TailRegion::OutsideCone { c_minus, c_plus } => x < -t * (c_minus + eps) || x > t * (c_plus + eps),
        };
        let m = u
            .grid()
            .xs()
            .zip(u.values())
            .filter(|(x, _)| inside(*x))
            .map(|(_, v)| *v)
            .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |a| a.max(v))));
        if let Some(m) = m {
            curve.push(*t, m);
        }
    }
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{simulate, ModelSpec, SimOptions};
    use crate::gridfn::{ExtensionPolicy, Grid};
    use crate::nonlinearity::{bump_fixture, BumpKind, KppReaction};

    fn grid() -> Grid {
        Grid::from_range(-10.0, 10.0, 0.05).unwrap()
    }

    #[test]
    fn level_of_exponential() {
        let u = GridFunction::from_fn(grid(), ExtensionPolicy::EDGE, |x| (-x).exp().min(1.0)).unwrap();
        let x = level_position(&u, 0.5, FrontSide::Rightmost).unwrap();
        assert!((x - 2f64.ln()).abs() < grid().dx());
        let zero = GridFunction::constant(grid(), 0.0);
        assert_eq!(level_position(&zero, 0.5, FrontSide::Rightmost), None);
        let one = GridFunction::constant(grid(), 1.0);
        assert_eq!(level_position(&one, 0.5, FrontSide::Rightmost), Some(10.0));
        assert_eq!(level_position(&one, 0.5, FrontSide::Leftmost), Some(-10.0));
    }

    #[test]
    fn sides_agree_on_monotone_profiles() {
        // a rising profile and its mirror image cross the level at mirrored points
        let up = GridFunction::from_fn(grid(), ExtensionPolicy::EDGE, |x| 1.0 / (1.0 + (-x).exp())).unwrap();
        let down = GridFunction::from_fn(grid(), ExtensionPolicy::EDGE, |x| 1.0 / (1.0 + x.exp())).unwrap();
        let l = level_position(&up, 0.3, FrontSide::Leftmost).unwrap();
        let r = level_position(&down, 0.3, FrontSide::Rightmost).unwrap();
        assert!((r + l).abs() <= grid().dx());
        assert!((l - (0.3f64 / 0.7).ln()).abs() < 1e-3);
        // the rising profile stays above the level all the way to the edge
        assert_eq!(level_position(&up, 0.3, FrontSide::Rightmost), Some(10.0));
    }

    fn trace(pos: impl Fn(f64) -> f64) -> FrontTrace {
        let mut tr = FrontTrace::new(0.5, FrontSide::Rightmost);
        for k in 0..20 {
            let t = k as f64;
            tr.times.push(t);
            tr.positions.push(Some(pos(t)));
        }
        tr
    }

    #[test]
    fn speed_of_lines() {
        let fit = empirical_speed(&trace(|t| 2.0 * t + 1.0), 0.0, 19.0).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        let fit = empirical_speed(&trace(|_| 3.0), 0.0, 19.0).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(matches!(empirical_speed(&trace(|t| t), 0.0, 3.0), Err(Error::Domain(_))));
    }

    fn logistic_run(t_end: f64) -> RunRecord {
        let m = ModelSpec::D { d: 1.0, h: KppReaction::homogeneous(|u| u * (1.0 - u), 1.0, 1.0) };
        let g = Grid::from_range(-40.0, 40.0, 0.1).unwrap();
        let phi = bump_fixture(BumpKind::H, 0.0, g).unwrap();
        simulate(&m, phi, t_end, &SimOptions { dt: None, record_every: Some(1.0) }, &mut []).unwrap()
    }

    #[test]
    fn equilibrium_run_has_zero_error() {
        let m = ModelSpec::D { d: 1.0, h: KppReaction::homogeneous(|u| u * (1.0 - u), 1.0, 1.0) };
        let run = simulate(&m, GridFunction::constant(grid(), 1.0), 3.0, &SimOptions { dt: None, record_every: Some(0.5) }, &mut []).unwrap();
        let e = interval_convergence(&run, &Target::Constant(1.0), -2.0, 2.0, 0.4);
        assert!(!e.is_empty());
        assert!(e.value.iter().all(|&v| v == 0.0));
        assert!(interval_convergence(&run, &Target::Constant(1.0), -2.0, 2.0, 2.0).is_empty());
        let zero = simulate(&m, GridFunction::constant(grid(), 0.0), 3.0, &SimOptions { dt: None, record_every: Some(0.5) }, &mut []).unwrap();
        let m = tail_decay(&zero, TailRegion::OutsideCone { c_minus: 2.0, c_plus: 2.0 }, 0.1);
        assert!(m.value.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logistic_front_fills_and_empties() {
        let run = logistic_run(15.0);
        let e = interval_convergence(&run, &Target::Constant(1.0), -2.0, 2.0, 0.8);
        assert!(e.last().unwrap().1 < 0.05, "{:?}", e.last());
        let tr = FrontTrace::from_run(&run, 0.5, FrontSide::Rightmost);
        let fit = empirical_speed(&tr, 5.0, 15.0).unwrap();
        assert!(fit.slope > 1.6 && fit.slope < 2.05, "{fit:?}");
        // self-consistency against the run's own plateau
        let plateau = run.last().eval(0.0);
        let e2 = interval_convergence(&run, &Target::Constant(plateau), -2.0, 2.0, 0.8);
        assert!(e2.last().unwrap().1 < 0.05);
        let m = tail_decay(&run, TailRegion::OutsideCone { c_minus: 2.0, c_plus: 2.0 }, 0.5);
        assert!(m.at(15.0).unwrap() < 0.02, "{:?}", m.at(15.0));
    }
}
