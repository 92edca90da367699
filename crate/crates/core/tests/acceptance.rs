//! Runs the eight acceptance criteria and prints one PASS/FAIL line each.

use std::time::Instant;
use wavefront::evolve::{simulate, stable_dt, LimitSide, ModelSpec, RunRecord, SimOptions};
use wavefront::fronts::{empirical_speed, interval_convergence, tail_decay, FrontSide, FrontTrace, TailRegion, Target};
use wavefront::gridfn::{ExtensionPolicy, Grid, GridFunction};
use wavefront::hypotheses::{
    check_limit_hypotheses, check_monotone, check_subhomogeneous, check_translation_comparison, random_monotone_pairs,
    random_monotone_samples, CheckReport, Lcg, LimitConfig, OperatorUnderTest,
};
use wavefront::kernels::Kernel;
use wavefront::nonlinearity::{bump_fixture, bump_value, BumpKind, KppReaction, Reaction, ShiftProfile};
use wavefront::speeds::{dispersion_speed, min_wave_speed, sample_range, DispersionParams, Side, SpeedReport};
use wavefront::waves::{
    dirichlet_steady_oracle, monotone_wave_iterate, nonlocal_wave_map, verify_connection, WaveMapParams,
};

struct Verdict {
    passed: bool,
    detail: String,
    /// `(label, min, max, allowed max)` for every trajectory produced.
    ranges: Vec<(String, f64, f64, f64)>,
}

impl Verdict {
    fn new(passed: bool, detail: String) -> Self {
        Verdict { passed, detail, ranges: Vec::new() }
    }

    fn range(mut self, label: &str, run: &RunRecord, allowed: f64) -> Self {
        self.ranges.push((label.into(), run.min_value, run.max_value, allowed));
        self
    }

    fn profile(mut self, label: &str, u: &GridFunction, allowed: f64) -> Self {
        self.ranges.push((label.into(), u.inf(), u.sup(), allowed));
        self
    }
}

fn failed(e: wavefront::Error) -> Verdict {
    Verdict::new(false, format!("error: {e}"))
}

fn logistic_h() -> KppReaction {
    KppReaction::homogeneous(|u| u * (1.0 - u), 1.0, 1.0)
}

fn habitat(left: f64, right: f64, half_width: f64) -> Reaction {
    Reaction::shifted_logistic(ShiftProfile::ramp(left, right, half_width), 1.0).unwrap()
}

fn every(r: f64) -> SimOptions {
    SimOptions { dt: None, record_every: Some(r) }
}

fn criterion_1() -> wavefront::Result<Verdict> {
    let start = Instant::now();
    let m = ModelSpec::D { d: 1.0, h: logistic_h() };
    let g = Grid::from_range(-150.0, 150.0, 0.1)?;
    let run = simulate(&m, bump_fixture(BumpKind::H, 0.0, g)?, 60.0, &every(1.0), &mut [])?;
    let fit = empirical_speed(&FrontTrace::from_run(&run, 0.5, FrontSide::Rightmost), 20.0, 60.0)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = (1.84..=2.02).contains(&fit.slope) && secs < 60.0;
    Ok(Verdict::new(ok, format!("speed {:.4} in [1.84, 2.02], {secs:.1} s", fit.slope)).range("c1 run", &run, 1.0))
}

fn criterion_2() -> wavefront::Result<Verdict> {
    let m = ModelSpec::A { d: 1.0, mu: 1.0, tau: 0.0, c_shift: 0.5, kernel: Kernel::dirac(), f: habitat(-0.5, 1.0, 10.0) };
    let g = Grid::from_range(-60.0, 240.0, 0.1)?;
    let u0 = GridFunction::from_fn(g, ExtensionPolicy::ZERO, |x| bump_value(BumpKind::XiD, 5.0, x - 20.0))?;
    let run = simulate(&m, u0, 80.0, &every(1.0), &mut [])?;
    let e = interval_convergence(&run, &Target::Constant(1.0), 0.5, 2.0, 0.4).at(80.0).unwrap_or(f64::NAN);
    let t = tail_decay(&run, TailRegion::Behind { c: 0.5 }, 0.2).at(80.0).unwrap_or(f64::NAN);
    let ok = e < 0.05 && t < 0.02;
    Ok(Verdict::new(ok, format!("e(80) = {e:.3e} < 0.05, m(80) = {t:.3e} < 0.02")).range("c2 run", &run, 1.0))
}

fn criterion_3() -> wavefront::Result<Verdict> {
    let p = WaveMapParams { d: 1.0, mu: 1.0, tau: 0.0, kernel: Kernel::gaussian(1.0)?, f: habitat(-0.5, 1.0, 10.0) };
    let g = Grid::from_range(-80.0, 80.0, 0.1)?;
    let mut map = |w: &GridFunction| nonlocal_wave_map(w, 1.0, &p);
    let w = monotone_wave_iterate(&mut map, g, 1.0, 1.0, 1e-8, 2000)?;
    let conn = verify_connection(&w, 1.0, 1e-3);
    let ok = w.converged && w.residual < 1e-8 && w.iterations <= 2000 && conn.passed() && w.monotone_iterates;
    let detail = format!(
        "residual {:.2e} after {} iterations, limits ({:.2e}, {:.6}), monotone iterates {}",
        w.residual, w.iterations, w.left_limit, w.right_limit, w.monotone_iterates
    );
    Ok(Verdict::new(ok, detail).profile("c3 wave", &w.profile, 1.0))
}

fn criterion_4() -> wavefront::Result<Verdict> {
    let f = Reaction::shifted_logistic(ShiftProfile::constant(1.0), 1.0)?;
    let m = ModelSpec::C { d: 1.0, mu: 1.0, tau: 0.0, f: f.clone() };
    let g = Grid::from_range(0.0, 80.0, 0.1)?;
    let oracle = dirichlet_steady_oracle(1.0, 1.0, &f, 80.0, 0.1)?;
    let residual = oracle.ode_residual(1.0, 1.0, &f, 0.0, 50.0);
    let small = GridFunction::from_fn(g, ExtensionPolicy::EDGE, |x| 0.2 * bump_value(BumpKind::XiD, 3.0, x - 10.0))?;
    let large = GridFunction::from_fn(g, ExtensionPolicy::EDGE, |x| 1.5 * (x / 5.0).min(1.0))?;
    let mut v = Verdict::new(true, String::new());
    let mut errs = Vec::new();
    for (label, u0) in [("c4 small", small), ("c4 large", large)] {
        let bound = u0.sup().max(1.0);
        let run = simulate(&m, u0, 200.0, &SimOptions::default(), &mut [])?;
        let u = run.last();
        let err = (0..g.len())
            .filter(|&i| g.x(i) <= 50.0)
            .map(|i| (u.values()[i] - oracle.profile.values()[i]).abs())
            .fold(0.0, f64::max);
        errs.push(err);
        v = v.range(label, &run, bound);
    }
    v.passed = residual < 1e-6 && errs.iter().all(|&e| e < 1e-2);
    v.detail = format!("ODE residual {residual:.2e}, sup errors on [0, 50] {:.2e} and {:.2e}", errs[0], errs[1]);
    Ok(v)
}

/// Dense-scan minimum of `ln l(c, rho) / rho`, evaluated straight from the
/// formula with the Gaussian transform `e^{alpha rho^2}`.
fn brute_force_speed(alpha: f64, d: f64, mu: f64, fp: f64, tau: f64, c: f64, side: Side) -> f64 {
    let s = match side {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    let bound = if s * c < 0.0 { (d + mu) / (s * c).abs() } else { f64::INFINITY };
    let hi = bound.min(20.0) * (1.0 - 1e-9);
    let lo = 1e-3;
    let n = 100_000;
    (0..=n)
        .map(|k| {
            let rho = lo + (hi - lo) * k as f64 / n as f64;
            let r = s * rho;
            let l = (d * (alpha * r * r).exp() + mu * fp * (-r * c * tau).exp()) / (c * r + d + mu);
            l.ln() / rho
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_5() -> wavefront::Result<Verdict> {
    let mut ok = true;
    let mut worst_dual: f64 = 0.0;
    let mut worst_scan: f64 = 0.0;
    let mut failures = 0;
    for tau in [0.0, 1.0] {
        let p = DispersionParams::new(1.0, 1.0, tau, 2.0, Kernel::gaussian(1.0)?)?;
        let report = SpeedReport::build(&p, &sample_range(-3.0, 3.0, 61))?;
        failures += report.positivity_failures().len();
        let w = min_wave_speed(&p)?;
        worst_dual = worst_dual.max((w.c_star - w.c_star_dual).abs());
        ok &= w.identities_agree(1e-4);
        for c in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
            for side in [Side::Plus, Side::Minus] {
                let got = dispersion_speed(&p, c, side)?.speed;
                let want = brute_force_speed(1.0, 1.0, 1.0, 2.0, tau, c, side);
                worst_scan = worst_scan.max((got - want).abs());
            }
        }
    }
    ok &= failures == 0 && worst_dual <= 1e-4 && worst_scan <= 1e-6;
    Ok(Verdict::new(
        ok,
        format!("{failures} positivity failures, dual gap {worst_dual:.2e}, scan gap {worst_scan:.2e}"),
    ))
}

fn criterion_6() -> wavefront::Result<Verdict> {
    let h = KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0))?;
    let m = ModelSpec::D { d: 1.0, h };
    let g = Grid::from_range(-180.0, 220.0, 0.1)?;
    // maximal steady state: the time-1 map iterated down from M* = 1
    let q = OperatorUnderTest::moving_frame(&m, 1.0)?;
    let mut w = GridFunction::constant(g, 1.0);
    let mut change = f64::INFINITY;
    let mut n = 0;
    while change > 1e-12 && n < 400 {
        let next = q.apply(&w)?;
        change = next.sup_distance(&w)?;
        w = next;
        n += 1;
    }
    let (l, r) = wavefront::waves::edge_limits(&w);
    let run = simulate(&m, bump_fixture(BumpKind::H, 0.0, g)?, 80.0, &every(1.0), &mut [])?;
    let c_left = 2f64.sqrt();
    let e = interval_convergence(&run, &Target::Profile(w.clone()), -c_left, 2.0, 0.3).at(80.0).unwrap_or(f64::NAN);
    let right = empirical_speed(&FrontTrace::from_run(&run, 0.25, FrontSide::Rightmost), 30.0, 80.0)?.slope;
    let left = -empirical_speed(&FrontTrace::from_run(&run, 0.25, FrontSide::Leftmost), 30.0, 80.0)?.slope;
    let ok = (l - 0.5).abs() < 1e-2
        && (r - 1.0).abs() < 1e-2
        && change <= 1e-12
        && e < 0.05
        && (left / c_left - 1.0).abs() < 0.1
        && (right / 2.0 - 1.0).abs() < 0.1;
    let detail = format!(
        "steady limits ({l:.4}, {r:.4}) after {n} maps, e(80) = {e:.3e}, speeds left {left:.4} right {right:.4}"
    );
    Ok(Verdict::new(ok, detail).range("c6 run", &run, 1.0).profile("c6 steady", &w, 1.0))
}

fn model_a(profile: ShiftProfile, kernel: Kernel) -> ModelSpec {
    ModelSpec::A { d: 1.0, mu: 1.0, tau: 0.0, c_shift: 0.5, kernel, f: Reaction::shifted_logistic(profile, 1.0).unwrap() }
}

fn suite(seed: u64) -> wavefront::Result<Vec<CheckReport>> {
    let g = Grid::from_range(-40.0, 40.0, 0.2)?;
    let ramp = || ShiftProfile::ramp(-0.5, 1.0, 10.0);
    let models = [
        model_a(ramp(), Kernel::gaussian(0.25)?),
        ModelSpec::B { d: 1.0, mu: 1.0, tau: 0.0, c_shift: 0.5, kernel: Kernel::gaussian(0.25)?, f: habitat(-0.5, 1.0, 10.0) },
        ModelSpec::D { d: 1.0, h: KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0))? },
    ];
    let mut reports = Vec::new();
    for m in &models {
        let o = OperatorUnderTest::moving_frame(m, 1.0)?;
        let mut rng = Lcg::new(seed);
        let phis = random_monotone_samples(g, &mut rng, 1.0, 30);
        let pairs = random_monotone_pairs(g, &mut rng, 1.0, 30);
        reports.push(check_translation_comparison(&o, &phis, &[0.2, 1.0, 2.0, 3.0, 5.0])?);
        reports.push(check_monotone(&o, &pairs)?);
        reports.push(check_subhomogeneous(&o, &phis, &[0.1, 0.25, 0.5, 0.75, 0.9])?);
    }
    Ok(reports)
}

fn criterion_7() -> wavefront::Result<Verdict> {
    let mut notes = Vec::new();
    let reports = suite(20_261_018)?;
    let worst = reports.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max);
    let mut ok = reports.iter().all(|r| r.max_violation <= 1e-10 && r.witnesses.is_empty());
    notes.push(format!("{} order checks, worst violation {worst:.2e}", reports.len()));

    let g = Grid::from_range(-40.0, 40.0, 0.2)?;
    let mut rng = Lcg::new(7);

    // decreasing habitat against translation comparison
    let bad = OperatorUnderTest::moving_frame(&model_a(ShiftProfile::ramp(1.0, -0.5, 10.0), Kernel::dirac()), 1.0)?;
    let r1 = check_translation_comparison(&bad, &random_monotone_samples(g, &mut rng, 1.0, 10), &[1.0, 3.0])?;
    // oversized step against monotonicity
    let d = ModelSpec::D { d: 1.0, h: logistic_h() };
    let cfl = OperatorUnderTest::single_step_unchecked(&d, 3.0 * stable_dt(&d, &g))?;
    let step = |x0: f64| GridFunction::from_fn(g, ExtensionPolicy::EDGE, move |x| if x >= x0 { 1.0 } else { 0.0 });
    let r2 = check_monotone(&cfl, &[(step(0.0)?, step(-0.2)?)])?;
    // superlinear reaction against subhomogeneity
    let sq = ModelSpec::D { d: 1.0, h: KppReaction::homogeneous(|u| u * u * (1.0 - u), 1.0, 1.0) };
    let sq_op = OperatorUnderTest::moving_frame(&sq, 1.0)?;
    let r3 = check_subhomogeneous(&sq_op, &random_monotone_samples(g, &mut rng, 1.0, 5), &[0.5])?;
    for (r, o) in [(&r1, &bad), (&r2, &cfl), (&r3, &sq_op)] {
        let replayed = match r.witnesses.first() {
            Some(w) => r.replay(w, o)?,
            None => f64::NAN,
        };
        ok &= replayed > 0.0;
        notes.push(format!("{} witness replays to {replayed:.2e}", r.name));
    }

    // left-limit decay from r*
    let a = model_a(ShiftProfile::ramp(-0.5, 1.0, 10.0), Kernel::dirac());
    let lg = Grid::from_range(-40.0, 40.0, 0.1)?;
    let cfg = LimitConfig { t0: 1.0, ys: vec![200.0, 400.0], horizon: 20, window: (0.0, 0.0), tol: 0.0, eps: 0.0 };
    let uaa = check_limit_hypotheses(&a, &GridFunction::constant(lg, 1.0), LimitSide::Minus, &cfg)?;
    let sups = &uaa.series["sup"];
    let strictly = sups.windows(2).all(|w| w[1] < w[0]);
    ok &= strictly && uaa.passed() && sups.len() == 20;
    notes.push(format!("sup Q_-^n[r*] strictly decreasing {strictly}, {:.3e} -> {:.3e}", sups[0], sups[sups.len() - 1]));

    let again = suite(20_261_018)?;
    let same = serde_json::to_string(&reports).unwrap() == serde_json::to_string(&again).unwrap();
    ok &= same;
    notes.push(format!("reports identical across runs {same}"));
    Ok(Verdict::new(ok, notes.join("; ")))
}

fn criterion_8(ranges: &[(String, f64, f64, f64)]) -> wavefront::Result<Verdict> {
    let line = Grid::from_range(-30.0, 30.0, 0.1)?;
    let half = Grid::from_range(0.0, 60.0, 0.1)?;
    let f1 = || Reaction::shifted_logistic(ShiftProfile::constant(1.0), 1.0).unwrap();
    let models = [
        (model_a(ShiftProfile::ramp(-0.5, 1.0, 10.0), Kernel::gaussian(0.25)?), line),
        (
            ModelSpec::A { d: 1.0, mu: 1.0, tau: 1.0, c_shift: 0.5, kernel: Kernel::gaussian(0.25)?, f: habitat(-0.5, 1.0, 10.0) },
            line,
        ),
        (ModelSpec::B { d: 1.0, mu: 1.0, tau: 0.0, c_shift: 0.5, kernel: Kernel::gaussian(0.25)?, f: habitat(-0.5, 1.0, 10.0) }, line),
        (ModelSpec::C { d: 1.0, mu: 1.0, tau: 0.0, f: f1() }, half),
        (ModelSpec::D { d: 1.0, h: KppReaction::logistic(ShiftProfile::ramp(0.5, 1.0, 10.0))? }, line),
    ];
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut tested = 0;
    for (k, (m, g)) in models.iter().enumerate() {
        let o = OperatorUnderTest::single_step(m, stable_dt(m, g))?;
        let mut rng = Lcg::new(1000 + k as u64);
        let rep = check_monotone(&o, &random_monotone_pairs(*g, &mut rng, 1.0, 200))?;
        worst = worst.max(rep.max_difference);
        tested += rep.samples_tested;
    }
    let mut bad = Vec::new();
    for (label, lo, hi, allowed) in ranges {
        if !(*lo >= 0.0 && *hi <= allowed + 1e-12) {
            bad.push(format!("{label}: [{lo:e}, {hi:e}]"));
        }
    }
    let ok = worst <= 1e-12 && tested == 5 * 200 && bad.is_empty() && ranges.len() >= 6;
    let detail = format!(
        "{tested} pairs, max Q[phi] - Q[psi] = {worst:.2e}; {} trajectories within [0, bound]{}",
        ranges.len(),
        if bad.is_empty() { String::new() } else { format!(", out of range: {}", bad.join(", ")) }
    );
    Ok(Verdict::new(ok, detail))
}

fn main() {
    let titles = [
        "homogeneous KPP speed",
        "shifting habitat spreading",
        "forced wave by map iteration",
        "Dirichlet steady state and attraction",
        "dispersion identities",
        "inhomogeneous KPP steady state",
        "hypothesis suite",
        "order preservation and invariants",
    ];
    let jobs: [fn() -> wavefront::Result<Verdict>; 7] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7];
    let mut verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|j| s.spawn(move || j().unwrap_or_else(failed))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Verdict::new(false, "panicked".into()))).collect()
    });
    let ranges: Vec<_> = verdicts.iter().flat_map(|v| v.ranges.clone()).collect();
    verdicts.push(criterion_8(&ranges).unwrap_or_else(failed));

    let mut all = true;
    for (k, (v, title)) in verdicts.iter().zip(titles).enumerate() {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {} [{title}]: {tag} ({})", k + 1, v.detail);
        all &= v.passed;
    }
    if !all {
        std::process::exit(1);
    }
}
