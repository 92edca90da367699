//! Spreading speeds: closed forms and the dispersion relation
//!
//! `l(c, rho) = (d khat(rho) + mu f'(0) e^{-rho c tau}) / (c rho + d + mu)`,
//! `l+(c, rho) = l(c, rho)`, `l-(c, rho) = l(c, -rho)`, and
//! `c+-*(c) = inf_{rho > 0} ln(l+-(c, rho)) / rho`.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use serde::Serialize;

const RHO_MIN: f64 = 1e-3;
const RHO_CAP: f64 = 1e3;
const SCAN_POINTS: usize = 400;
const GOLDEN_REL_TOL: f64 = 1e-8;
const BISECT_TOL: f64 = 1e-6;
const BRACKET_LIMIT: f64 = 1e3;

/// A closed-form speed; `degenerate` marks zero growth at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalSpeed {
    pub value: f64,
    pub degenerate: bool,
}

/// `2 sqrt(mu d (f'(0) - 1))`, or zero when `f'(0) <= 1`.
pub fn kpp_local_speed(d: f64, mu: f64, fprime0: f64) -> Result<LocalSpeed> {
    if !(d > 0.0 && mu > 0.0) {
        return Err(Error::Domain(format!("d and mu must be positive, got ({d}, {mu})")));
    }
    if fprime0 <= 1.0 {
        return Ok(LocalSpeed { value: 0.0, degenerate: true });
    }
    Ok(LocalSpeed { value: 2.0 * (mu * d * (fprime0 - 1.0)).sqrt(), degenerate: false })
}

/// `2 sqrt(d h'(0))`.
pub fn kpp_rd_speed(d: f64, hprime0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("d must be positive, got {d}")));
    }
    if !(hprime0 > 0.0) {
        return Err(Error::Domain(format!("h'(0) must be positive, got {hprime0}")));
    }
    Ok(2.0 * (d * hprime0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionParams {
    pub d: f64,
    pub mu: f64,
    pub tau: f64,
    pub fprime0: f64,
    pub kernel: Kernel,
}

impl DispersionParams {
    pub fn new(d: f64, mu: f64, tau: f64, fprime0: f64, kernel: Kernel) -> Result<Self> {
        if !(d > 0.0 && mu > 0.0) {
            return Err(Error::Domain(format!("d and mu must be positive, got ({d}, {mu})")));
        }
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
        }
        if !(fprime0 > 1.0) {
            return Err(Error::Domain(format!("f'(0) must exceed 1, got {fprime0}")));
        }
        Ok(DispersionParams { d, mu, tau, fprime0, kernel })
    }

    /// Open upper end of `rho` for which `(c, rho)` lies in the admissible set.
    fn rho_bound(&self, c: f64, side: Side) -> f64 {
        let slope = match side {
            Side::Plus => c,
            Side::Minus => -c,
        };
        if slope < 0.0 {
            (self.d + self.mu) / -slope
        } else {
            f64::INFINITY
        }
    }

    /// `ln l+-(c, rho)`; `+inf` outside the admissible set.
    pub fn log_dispersion(&self, c: f64, rho: f64, side: Side) -> Result<f64> {
        let signed = match side {
            Side::Plus => rho,
            Side::Minus => -rho,
        };
        let denom = c * signed + self.d + self.mu;
        if !(denom > 0.0) {
            return Ok(f64::INFINITY);
        }
        let a = self.d.ln() + self.kernel.log_khat(signed)?;
        let b = (self.mu * self.fprime0).ln() - signed * c * self.tau;
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let v = hi + (lo - hi).exp().ln_1p() - denom.ln();
        if v.is_nan() {
            return Err(Error::Range(format!("dispersion relation undefined at (c, rho) = ({c}, {rho})")));
        }
        Ok(v)
    }
}

/// `l+-(c, rho)`; `+inf` outside the admissible set.
pub fn dispersion_value(p: &DispersionParams, c: f64, rho: f64, side: Side) -> Result<f64> {
    let v = p.log_dispersion(c, rho, side)?.exp();
    if v.is_nan() {
        return Err(Error::Range(format!("dispersion value overflows at rho = {rho}")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionMin {
    pub speed: f64,
    pub argmin_rho: f64,
}

/// Largest usable `rho`: inside the admissible set, below the cap, and where
/// the exponential moment is still finite.
fn rho_max(p: &DispersionParams, c: f64, side: Side) -> (f64, bool) {
    let bound = p.rho_bound(c, side);
    let (mut hi, limited) = if bound.is_finite() { (bound * (1.0 - 1e-9), false) } else { (RHO_CAP, false) };
    if hi > RHO_CAP {
        hi = RHO_CAP;
    }
    let ok = |r: f64| p.log_dispersion(c, r, side).map(|v| v.is_finite()).unwrap_or(false);
    if ok(hi) {
        return (hi, limited);
    }
    // moment overflow: shrink until finite
    let mut lo = RHO_MIN;
    if !ok(lo) {
        return (lo, true);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, true)
}

/// `c+-*(c)` by a log-spaced scan on `[1e-3, rho_max]` refined with
/// golden-section search. The reported value is the smallest evaluated one,
/// so it never exceeds `ln l / rho` at any probed point.
pub fn dispersion_speed(p: &DispersionParams, c: f64, side: Side) -> Result<DispersionMin> {
    let (hi, overflow_limited) = rho_max(p, c, side);
    if hi <= RHO_MIN {
        return Err(Error::Range(format!("no admissible rho above {RHO_MIN} for c = {c}")));
    }
    let g = |r: f64| -> Result<f64> { Ok(p.log_dispersion(c, r, side)? / r) };
    let ratio = (hi / RHO_MIN).ln() / (SCAN_POINTS - 1) as f64;
    let rhos: Vec<f64> = (0..SCAN_POINTS).map(|i| RHO_MIN * (ratio * i as f64).exp()).collect();
    let vals = rhos.iter().map(|&r| g(r)).collect::<Result<Vec<_>>>()?;
    let (k, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if k == SCAN_POINTS - 1 && (overflow_limited || hi >= RHO_CAP) {
        return Err(Error::Range(format!(
            "no interior minimum below rho = {hi} for c = {c} (side {side:?})"
        )));
    }
    let mut best = (vals[k], rhos[k]);
    if k > 0 && k < SCAN_POINTS - 1 {
        // golden section in ln rho
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (rhos[k - 1].ln(), rhos[k + 1].ln());
        let mut x1 = b - invphi * (b - a);
        let mut x2 = a + invphi * (b - a);
        let mut f1 = g(x1.exp())?;
        let mut f2 = g(x2.exp())?;
        while (b - a) > GOLDEN_REL_TOL {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = g(x1.exp())?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = g(x2.exp())?;
            }
            for (f, x) in [(f1, x1), (f2, x2)] {
                if f < best.0 {
                    best = (f, x.exp());
                }
            }
        }
    }
    Ok(DispersionMin { speed: best.0, argmin_rho: best.1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinWaveSpeed {
    /// `inf {c : c+*(c) <= 0}`
    pub c_star: f64,
    /// `-sup {c : c-*(c) <= 0}`
    pub c_star_dual: f64,
    /// Minimizing `rho` of `c+*` at `c_star`.
    pub argmin_rho: f64,
}

impl MinWaveSpeed {
    pub fn identities_agree(&self, tol: f64) -> bool {
        (self.c_star - self.c_star_dual).abs() <= tol
    }
}

/// Bisection for the sign change of a monotone `g`, with `g(lo) > 0 >= g(hi)`.
fn bisect(g: &dyn Fn(f64) -> Result<bool>, mut lo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold of a predicate that is false for small `c` and true for large
/// `c`, bracketed by doubling away from zero.
fn threshold(pred: &dyn Fn(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi);
    if pred(0.0)? {
        hi = 0.0;
        lo = -1.0;
        while pred(lo)? {
            hi = lo;
            lo *= 2.0;
            if lo < -BRACKET_LIMIT {
                return Err(Error::Range("no sign change for c down to -1e3".into()));
            }
        }
    } else {
        lo = 0.0;
        hi = 1.0;
        while !pred(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_LIMIT {
                return Err(Error::Range("no sign change for c up to 1e3".into()));
            }
        }
    }
    bisect(pred, lo, hi)
}

/// `c* = inf {c : c+*(c) <= 0}`, together with the dual characterization
/// `-sup {c : c-*(c) <= 0}` computed independently.
pub fn min_wave_speed(p: &DispersionParams) -> Result<MinWaveSpeed> {
    let plus = |c: f64| -> Result<bool> { Ok(dispersion_speed(p, c, Side::Plus)?.speed <= 0.0) };
    let c_star = threshold(&plus)?;
    // c-* is nondecreasing in c, so {c : c-*(c) <= 0} = {-c : c-*(-c) <= 0} flips
    let minus = |c: f64| -> Result<bool> { Ok(dispersion_speed(p, -c, Side::Minus)?.speed <= 0.0) };
    let c_star_dual = threshold(&minus)?;
    let argmin_rho = dispersion_speed(p, c_star, Side::Plus)?.argmin_rho;
    Ok(MinWaveSpeed { c_star, c_star_dual, argmin_rho })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedRow {
    pub c: f64,
    pub c_plus_star: f64,
    pub c_minus_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedReport {
    pub rows: Vec<SpeedRow>,
    pub c_star: f64,
    pub c_star_dual: f64,
    pub argmin_rho: f64,
}

impl SpeedReport {
    pub fn build(p: &DispersionParams, cs: &[f64]) -> Result<Self> {
        let rows = cs
            .iter()
            .map(|&c| {
                Ok(SpeedRow {
                    c,
                    c_plus_star: dispersion_speed(p, c, Side::Plus)?.speed,
                    c_minus_star: dispersion_speed(p, c, Side::Minus)?.speed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = min_wave_speed(p)?;
        Ok(SpeedReport { rows, c_star: m.c_star, c_star_dual: m.c_star_dual, argmin_rho: m.argmin_rho })
    }

    /// Rows with `c+*(c) + c-*(c) <= 0`; empty for a valid relation.
    pub fn positivity_failures(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| !(r.c_plus_star + r.c_minus_star > 0.0)).map(|r| r.c).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("c,c_plus_star,c_minus_star\n");
        for r in &self.rows {
            s.push_str(&format!("{:?},{:?},{:?}\n", r.c, r.c_plus_star, r.c_minus_star));
        }
        s
    }
}

/// `n` evenly spaced values on `[a, b]`.
pub fn sample_range(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau: f64) -> DispersionParams {
        DispersionParams::new(1.0, 1.0, tau, 2.0, Kernel::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(kpp_local_speed(1.0, 1.0, 2.0).unwrap(), LocalSpeed { value: 2.0, degenerate: false });
        assert_eq!(kpp_local_speed(0.25, 4.0, 2.0).unwrap().value, 2.0);
        assert_eq!(kpp_local_speed(1.0, 1.0, 1.0).unwrap(), LocalSpeed { value: 0.0, degenerate: true });
        assert_eq!(kpp_rd_speed(1.0, 1.0).unwrap(), 2.0);
        assert!((kpp_rd_speed(1.0, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(kpp_rd_speed(2.0, 2.0).unwrap(), 4.0);
        assert!(matches!(kpp_rd_speed(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn local_speed_scaling() {
        for lam in [0.5f64, 2.0, 4.0] {
            let a = kpp_local_speed(lam * lam * 0.3, 1.7, 2.5).unwrap().value;
            let b = kpp_local_speed(0.3, 1.7, 2.5).unwrap().value;
            assert!((a - lam * b).abs() <= 1e-15 * a);
        }
    }

    #[test]
    fn dispersion_values() {
        let p = params(0.0);
        let v = dispersion_value(&p, 0.0, 1.0, Side::Plus).unwrap();
        assert!((v - (std::f64::consts::E + 2.0) / 2.0).abs() < 1e-12);
        for rho in [0.3, 1.0, 2.5] {
            let k = p.kernel.khat(rho).unwrap();
            let expect = (p.d * k + p.mu * p.fprime0) / (p.d + p.mu);
            assert!((dispersion_value(&p, 0.0, rho, Side::Plus).unwrap() - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(dispersion_value(&p, -4.0, 1.0, Side::Plus).unwrap(), f64::INFINITY);
        assert_eq!(dispersion_value(&p, 4.0, 1.0, Side::Minus).unwrap(), f64::INFINITY);
    }

    fn brute(p: &DispersionParams, c: f64, side: Side) -> f64 {
        let hi = match side {
            Side::Plus if c < 0.0 => (p.d + p.mu) / -c,
            Side::Minus if c > 0.0 => (p.d + p.mu) / c,
            _ => 20.0,
        }
        .min(20.0);
        let n = 100_000;
        (0..n)
            .map(|i| {
                let rho = RHO_MIN + (hi - RHO_MIN) * i as f64 / n as f64;
                let s = if side == Side::Plus { rho } else { -rho };
                let l = (p.d * (s * s).exp() + p.mu * p.fprime0 * (-s * c * p.tau).exp()) / (c * s + p.d + p.mu);
                l.ln() / rho
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_brute_force_scan() {
        for tau in [0.0, 1.0] {
            let p = params(tau);
            for c in [-1.0, 0.0, 0.7, 2.0] {
                for side in [Side::Plus, Side::Minus] {
                    let got = dispersion_speed(&p, c, side).unwrap().speed;
                    let want = brute(&p, c, side);
                    assert!(got <= want + 1e-12, "tau {tau} c {c} {side:?}: {got} > {want}");
                    assert!(want - got < 1e-6, "tau {tau} c {c} {side:?}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn symmetric_at_zero() {
        let p = params(0.0);
        let a = dispersion_speed(&p, 0.0, Side::Plus).unwrap();
        let b = dispersion_speed(&p, 0.0, Side::Minus).unwrap();
        assert!((a.speed - b.speed).abs() < 1e-12);
    }

    #[test]
    fn plus_speed_nonincreasing() {
        for tau in [0.0, 1.0] {
            let p = params(tau);
            let v: Vec<f64> = (-4..=4)
                .map(|i| dispersion_speed(&p, 0.5 * i as f64, Side::Plus).unwrap().speed)
                .collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{v:?}");
        }
    }

    #[test]
    fn minimal_speed_identities() {
        for tau in [0.0, 1.0] {
            let p = params(tau);
            let m = min_wave_speed(&p).unwrap();
            assert!(m.identities_agree(1e-4), "{m:?}");
            assert!(m.c_star > 0.0);
            let report = SpeedReport::build(&p, &sample_range(-3.0, 3.0, 61)).unwrap();
            assert!(report.positivity_failures().is_empty());
            for r in &report.rows {
                if r.c > -m.c_star + 1e-3 {
                    assert!(r.c_minus_star > 0.0);
                }
                if r.c < m.c_star - 1e-3 {
                    assert!(r.c_plus_star > 0.0);
                }
            }
        }
        // delay slows the spread
        let fast = min_wave_speed(&params(0.0)).unwrap().c_star;
        let slow = min_wave_speed(&params(1.0)).unwrap().c_star;
        assert!(slow < fast);
    }

    #[test]
    fn csv_layout() {
        let p = params(0.0);
        let r = SpeedReport::build(&p, &[0.0, 1.0]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "c,c_plus_star,c_minus_star");
        assert!(lines[1].starts_with("0.0,"));
        assert!(lines[2].starts_with("1.0,"));
    }

    #[test]
    fn rejects_no_growth() {
        assert!(DispersionParams::new(1.0, 1.0, 0.0, 1.0, Kernel::dirac()).is_err());
    }
}
