//! One function per subcommand. Each writes its files and returns the
//! `quantity,value` summary plus whether every configured threshold held.

use super::config::{parse, AnalysisConfig, Scenario};
use crate::error::{Error, Result};
use crate::evolve::{simulate, ModelSpec, RunRecord};
use crate::fronts::{empirical_speed, interval_convergence, tail_decay, FrontSide, FrontTrace, TailRegion, Target};
use crate::gridfn::{ExtensionPolicy, Grid, GridFunction};
use crate::hypotheses::{
    check_monotone, check_strong_positivity, check_subhomogeneous, check_translation_comparison, limit_spread_speed,
    random_monotone_pairs, random_monotone_samples, CheckReport, Lcg, OperatorUnderTest,
};
use crate::nonlinearity::{bump_fixture, BumpKind};
use crate::speeds::{kpp_local_speed, min_wave_speed, sample_range, DispersionParams, SpeedReport};
use crate::waves::{dirichlet_steady_oracle, edge_limits, monotone_wave_iterate, nonlocal_wave_map, verify_connection, WaveMapParams};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: Vec<(String, String)>,
    pub passed: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome { summary: Vec::new(), passed: true }
    }

    fn put(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    fn put_num(&mut self, key: impl Into<String>, value: f64) {
        self.put(key, num(value));
    }

    fn check(&mut self, key: impl Into<String>, ok: bool) {
        self.put(key, if ok { "pass" } else { "fail" });
        self.passed &= ok;
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,value\n");
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn model_err(msg: impl Into<String>) -> Error {
    Error::Config { pointer: "/model/kind".into(), msg: msg.into() }
}

pub fn speed(s: &Scenario, out: Option<&Path>) -> Result<Outcome> {
    let model = s.model_spec()?;
    let mut o = Outcome::new();
    match &model {
        ModelSpec::B { d, mu, tau, kernel, f, .. } => {
            let p = DispersionParams::new(*d, *mu, *tau, f.fprime0, kernel.clone())?;
            let w = min_wave_speed(&p)?;
            o.put_num("c_star", w.c_star);
            o.put_num("c_star_dual", w.c_star_dual);
            o.put_num("argmin_rho", w.argmin_rho);
            if let Some(dir) = out {
                let report = SpeedReport::build(&p, &sample_range(-3.0, 3.0, 61))?;
                write(dir, "speeds.csv", &report.to_csv())?;
            }
        }
        ModelSpec::C { d, mu, tau, f } if *tau == 0.0 => {
            let c = kpp_local_speed(*d, *mu, f.fprime0)?;
            o.put_num("c_star", c.value);
            o.put("degenerate", c.degenerate.to_string());
        }
        ModelSpec::C { d, mu, tau, f } => {
            let a = ModelSpec::A { d: *d, mu: *mu, tau: *tau, c_shift: 0.0, kernel: crate::kernels::Kernel::dirac(), f: f.clone() };
            o.put_num("c_star", limit_spread_speed(&a)?);
        }
        _ => {
            o.put_num("c_star", limit_spread_speed(&model)?);
        }
    }
    o.put_num("c_shift", model.c_shift());
    if let Some(dir) = out {
        write(dir, "speed_summary.csv", &o.to_csv())?;
    }
    Ok(o)
}

fn run_csv(run: &RunRecord, stride: usize) -> String {
    let g = run.frames[0].grid();
    let cols: Vec<usize> = (0..g.len()).step_by(stride).collect();
    let mut s = String::from("t");
    for &i in &cols {
        s.push(',');
        s.push_str(&num(g.x(i)));
    }
    s.push('\n');
    for (t, u) in run.times.iter().zip(&run.frames) {
        s.push_str(&num(*t));
        for &i in &cols {
            s.push(',');
            s.push_str(&num(u.values()[i]));
        }
        s.push('\n');
    }
    s
}

fn side_name(side: FrontSide) -> &'static str {
    match side {
        FrontSide::Rightmost => "rightmost",
        FrontSide::Leftmost => "leftmost",
    }
}

fn fronts_csv(traces: &[FrontTrace]) -> String {
    let mut s = String::from("t");
    for tr in traces {
        let _ = write!(s, ",{}@{}", side_name(tr.side), num(tr.level));
    }
    s.push('\n');
    let Some(first) = traces.first() else { return s };
    for (k, t) in first.times.iter().enumerate() {
        s.push_str(&num(*t));
        for tr in traces {
            s.push(',');
            if let Some(p) = tr.positions[k] {
                s.push_str(&num(p));
            }
        }
        s.push('\n');
    }
    s
}

pub fn simulate_cmd(s: &Scenario, base: &Path, out: &Path) -> Result<Outcome> {
    let model = s.model_spec()?;
    s.check_width()?;
    let u0 = s.initial(&model, base)?;
    let run_cfg = s.run()?;
    let run = simulate(&model, u0, run_cfg.t_end, &s.sim_options()?, &mut [])?;
    write(out, "run.csv", &run_csv(&run, run_cfg.x_stride))?;

    let mut traces: Vec<FrontTrace> = s
        .analysis
        .iter()
        .filter_map(|a| match a {
            AnalysisConfig::Speed { level, side, .. } => {
                Some(FrontTrace::from_run(&run, *level, side.unwrap_or(FrontSide::Rightmost)))
            }
            _ => None,
        })
        .collect();
    if traces.is_empty() {
        traces.push(FrontTrace::from_run(&run, 0.5 * model.r_star(), FrontSide::Rightmost));
    }
    write(out, "fronts.csv", &fronts_csv(&traces))?;

    let mut o = Outcome::new();
    o.put_num("dt", run.dt);
    o.put("steps", run.steps.to_string());
    o.put_num("final_time", run.final_time());
    o.put_num("min_value", run.min_value);
    o.put_num("max_value", run.max_value);
    o.check("nonnegative", run.min_value >= 0.0);
    let mut next_trace = 0;
    let t_end = run.final_time();
    for (k, a) in s.analysis.iter().enumerate() {
        match a {
            AnalysisConfig::Speed { window, expect, .. } => {
                let tr = &traces[next_trace];
                next_trace += 1;
                let fit = empirical_speed(tr, window[0], window[1])?;
                o.put_num(format!("speed_{k}_slope"), fit.slope);
                o.put_num(format!("speed_{k}_stderr"), fit.stderr);
                if let Some([lo, hi]) = expect {
                    o.check(format!("speed_{k}"), fit.slope >= *lo && fit.slope <= *hi);
                }
            }
            AnalysisConfig::Interval { c_lo, c_hi, eps, at, max } => {
                let target = Target::Constant(model.r_star());
                let curve = interval_convergence(&run, &target, *c_lo, *c_hi, *eps);
                write(out, &format!("interval_{k}.csv"), &curve.to_csv())?;
                let e = curve.at(at.unwrap_or(t_end));
                o.put(format!("interval_{k}_error"), e.map(num).unwrap_or_default());
                if let Some(m) = max {
                    o.check(format!("interval_{k}"), e.is_some_and(|e| e < *m));
                }
            }
            AnalysisConfig::Tail { c, eps, at, max } => {
                let curve = tail_decay(&run, TailRegion::Behind { c: *c }, *eps);
                write(out, &format!("tail_{k}.csv"), &curve.to_csv())?;
                let m = curve.at(at.unwrap_or(t_end));
                o.put(format!("tail_{k}_max"), m.map(num).unwrap_or_default());
                if let Some(lim) = max {
                    o.check(format!("tail_{k}"), m.is_some_and(|m| m < *lim));
                }
            }
            _ => {}
        }
    }
    write(out, "diagnostics.csv", &o.to_csv())?;
    Ok(o)
}

pub fn wave(s: &Scenario, out: &Path) -> Result<Outcome> {
    let model = s.model_spec()?;
    let ModelSpec::A { d, mu, tau, c_shift, kernel, f } = &model else {
        return Err(model_err("the wave map is defined for model A"));
    };
    let (c, tol, max_iter, connection_tol) = s
        .analysis
        .iter()
        .find_map(|a| match a {
            AnalysisConfig::Wave { c, tol, max_iter, connection_tol } => Some((c.unwrap_or(*c_shift), *tol, *max_iter, *connection_tol)),
            _ => None,
        })
        .ok_or_else(|| Error::Config { pointer: "/analysis".into(), msg: "no wave entry".into() })?;
    let p = WaveMapParams { d: *d, mu: *mu, tau: *tau, kernel: kernel.clone(), f: f.clone() };
    let mut map = |w: &GridFunction| nonlocal_wave_map(w, c, &p);
    let grid = s.grid()?;
    let w = monotone_wave_iterate(&mut map, grid, model.r_star(), c, tol, max_iter)?;
    write(out, "wave.csv", &w.to_csv())?;
    let mut meta = serde_json::to_value(&w).map_err(|e| Error::Io(e.to_string()))?;
    let mut o = Outcome::new();
    o.put_num("speed", c);
    o.put_num("residual", w.residual);
    o.put("iterations", w.iterations.to_string());
    o.put_num("left_limit", w.left_limit);
    o.put_num("right_limit", w.right_limit);
    o.check("converged", w.converged);
    o.check("monotone_iterates", w.monotone_iterates);
    if let Some(t) = connection_tol {
        let conn = verify_connection(&w, model.r_star(), t);
        meta["connection"] = serde_json::to_value(conn).map_err(|e| Error::Io(e.to_string()))?;
        o.check("connection", conn.passed());
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    write(out, "wave.meta.json", &(text + "\n"))?;
    Ok(o)
}

fn xu_csv(u: &GridFunction, header: &str) -> String {
    let mut s = format!("{header}\n");
    let g = u.grid();
    for (i, v) in u.values().iter().enumerate() {
        let _ = writeln!(s, "{},{}", num(g.x(i)), num(*v));
    }
    s
}

pub fn steady(s: &Scenario, base: &Path, out: &Path) -> Result<Outcome> {
    let model = s.model_spec()?;
    let (window, tol) = s
        .analysis
        .iter()
        .find_map(|a| match a {
            AnalysisConfig::Steady { window, tol } => Some((*window, *tol)),
            _ => None,
        })
        .unwrap_or((None, None));
    let u0 = s.initial(&model, base)?;
    let run = simulate(&model, u0, s.run()?.t_end, &s.sim_options()?, &mut [])?;
    let u = run.last();
    write(out, "steady.csv", &xu_csv(u, "x,u"))?;
    let g = *u.grid();
    let mut o = Outcome::new();
    o.put_num("final_time", run.final_time());
    if run.frames.len() >= 2 {
        o.put_num("last_change", u.sup_distance(&run.frames[run.frames.len() - 2])?);
    }
    match &model {
        ModelSpec::C { d, mu, f, .. } => {
            if g.x_min() != 0.0 {
                return Err(Error::Config { pointer: "/grid/x_min".into(), msg: "the half-line model needs x_min = 0".into() });
            }
            let oracle = dirichlet_steady_oracle(*d, *mu, f, g.x_max(), g.dx())?;
            write(out, "oracle.csv", &xu_csv(&oracle.profile, "x,W"))?;
            let [a, b] = window.unwrap_or([g.x_min(), g.x_max()]);
            let err = g
                .xs()
                .enumerate()
                .filter(|(_, x)| *x >= a && *x <= b)
                .map(|(i, _)| (u.values()[i] - oracle.profile.values()[i]).abs())
                .fold(0.0, f64::max);
            o.put_num("sup_error", err);
            o.put_num("ode_residual", oracle.ode_residual(*d, *mu, f, a, b.min(0.9 * g.x_max())));
            o.put_num("slope_at_zero", oracle.slope_at_zero);
            if let Some(t) = tol {
                o.check("oracle_match", err < t);
            }
        }
        ModelSpec::D { h, .. } => {
            let (l, r) = edge_limits(u);
            o.put_num("left_limit", l);
            o.put_num("right_limit", r);
            if let Some(t) = tol {
                o.check("limits", (l - h.u_minus_star).abs() < t && (r - h.u_plus_star).abs() < t);
            }
        }
        _ => return Err(model_err("steady states are computed for models C and D")),
    }
    Ok(o)
}

/// Whole-cell shift closest to `y`, at least one cell.
fn grid_shift(g: &Grid, y: f64) -> f64 {
    (y / g.dx()).round().max(1.0) * g.dx()
}

pub fn hypotheses(s: &Scenario, out: &Path) -> Result<(Outcome, Vec<CheckReport>)> {
    let model = s.model_spec()?;
    let (seed, n, t0) = s
        .analysis
        .iter()
        .find_map(|a| match a {
            AnalysisConfig::Hypotheses { seed, n_samples, t0 } => Some((*seed, *n_samples, *t0)),
            _ => None,
        })
        .ok_or_else(|| Error::Config { pointer: "/analysis".into(), msg: "no hypotheses entry".into() })?;
    let g = s.grid()?;
    let op = OperatorUnderTest::moving_frame(&model, t0)?;
    let top = model.r_star();
    let mut rng = Lcg::new(seed);
    let phis = random_monotone_samples(g, &mut rng, top, n);
    let pairs = random_monotone_pairs(g, &mut rng, top, n);
    let mut reports = Vec::new();
    if !matches!(model, ModelSpec::C { .. }) {
        let ys = [grid_shift(&g, 1.0), grid_shift(&g, 3.0)];
        reports.push(check_translation_comparison(&op, &phis, &ys)?);
    }
    reports.push(check_monotone(&op, &pairs)?);
    reports.push(check_subhomogeneous(&op, &phis, &[0.25, 0.5, 0.75])?);
    if g.x_max() > 12.0 && g.x_min() < -2.0 {
        let bump = bump_fixture(BumpKind::H, 0.0, g)?.scale(top).with_policy(ExtensionPolicy::ZERO);
        reports.push(check_strong_positivity(&op, &[bump], 3)?);
    }
    let mut o = Outcome::new();
    for r in &reports {
        o.put_num(format!("{}_max_violation", r.name), r.max_violation);
        o.check(r.name.clone(), r.passed());
    }
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::Io(e.to_string()))?;
    write(out, "report.json", &(text + "\n"))?;
    Ok((o, reports))
}

/// `a:b:step`, inclusive of `b` up to rounding.
pub fn parse_values(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(format!("expected a:b:step, got {spec:?}"));
    };
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b, h) = (p(a)?, p(b)?, p(h)?);
    if !(h > 0.0) || !(b >= a) {
        return Err(format!("need step > 0 and b >= a in {spec:?}"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * h).collect())
}

pub fn thread_count() -> usize {
    std::env::var("WAVEFRONT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `simulate` once per value of a model parameter (or of any JSON
/// pointer into the scenario), each in `out/<param>=<value>/`.
pub fn sweep(text: &str, base: &Path, out: &Path, param: &str, values: &[f64]) -> Result<Outcome> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config { pointer: String::new(), msg: e.to_string() })?;
    parse(text)?;
    let pointer = if param.starts_with('/') { param.to_string() } else { format!("/model/{param}") };
    let (parent, key) = pointer.rsplit_once('/').expect("pointer starts with '/'");
    if doc.pointer(parent).and_then(|v| v.as_object()).is_none() {
        return Err(Error::Config { pointer, msg: "sweep parameter has no enclosing object".into() });
    }
    let name = key.to_string();
    let jobs: Vec<(f64, PathBuf, Scenario)> = values
        .iter()
        .map(|&v| {
            let mut d = doc.clone();
            d.pointer_mut(parent).and_then(|o| o.as_object_mut()).expect("checked above").insert(key.to_string(), v.into());
            let s = parse(&d.to_string())?;
            Ok((v, out.join(format!("{name}={}", num(v))), s))
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let results: Vec<Result<Outcome>> = pool.install(|| jobs.par_iter().map(|(_, dir, s)| simulate_cmd(s, base, dir)).collect());
    let mut keys: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for ((v, _, _), r) in jobs.iter().zip(results) {
        let r = r?;
        for (k, _) in &r.summary {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
        rows.push((*v, r));
    }
    let mut csv = format!("{name},passed");
    for k in &keys {
        let _ = write!(csv, ",{k}");
    }
    csv.push('\n');
    let mut o = Outcome::new();
    for (v, r) in &rows {
        let _ = write!(csv, "{},{}", num(*v), r.passed);
        for k in &keys {
            let val = r.summary.iter().find(|(kk, _)| kk == k).map(|(_, v)| v.as_str()).unwrap_or("");
            let _ = write!(csv, ",{val}");
        }
        csv.push('\n');
        o.passed &= r.passed;
    }
    write(out, "summary.csv", &csv)?;
    o.put("runs", rows.len().to_string());
    o.put("passed", rows.iter().filter(|r| r.1.passed).count().to_string());
    Ok(o)
}
