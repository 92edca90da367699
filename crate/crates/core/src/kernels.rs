//! Dispersal kernels, exponential moments and heat semigroups.

use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use std::f64::consts::PI;
use std::sync::Arc;

/// Tail level below which the Gaussian factor is dropped.
const HEAT_TAIL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    Dirac,
    Gaussian { alpha: f64 },
    /// `values[j] = k(j * step)` for `j = 0..=m`; the kernel is even.
    Tabulated { step: f64, values: Arc<Vec<f64>> },
}

/// A symmetric probability density on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    cutoff: f64,
}

impl Kernel {
    pub fn dirac() -> Self {
        Kernel { kind: KernelKind::Dirac, cutoff: 0.0 }
    }

    /// `exp(-x^2 / 4 alpha) / sqrt(4 pi alpha)`, truncated at `8 sqrt(2 alpha)`.
    pub fn gaussian(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("gaussian kernel needs alpha > 0, got {alpha}")));
        }
        Ok(Kernel { kind: KernelKind::Gaussian { alpha }, cutoff: 8.0 * (2.0 * alpha).sqrt() })
    }

    /// Kernel from samples on `-m*step, ..., m*step` (odd length). The samples
    /// are symmetrized and rescaled to unit trapezoid mass.
    pub fn tabulated(step: f64, samples: &[f64]) -> Result<Self> {
        if !(step > 0.0) || samples.len() < 3 || samples.len() % 2 == 0 {
            return Err(Error::Domain("tabulated kernel needs step > 0 and an odd number (>= 3) of samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("tabulated kernel samples must be finite and nonnegative".into()));
        }
        let m = samples.len() / 2;
        let mut half: Vec<f64> = (0..=m).map(|j| 0.5 * (samples[m + j] + samples[m - j])).collect();
        let mass = step * (half[0] + 2.0 * half[1..m].iter().sum::<f64>() + half[m]);
        if !(mass > 0.0) {
            return Err(Error::Domain("tabulated kernel has zero mass".into()));
        }
        half.iter_mut().for_each(|v| *v /= mass);
        Ok(Kernel {
            kind: KernelKind::Tabulated { step, values: Arc::new(half) },
            cutoff: m as f64 * step,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, KernelKind::Dirac)
    }

    /// Second moment `int x^2 k(x) dx`.
    pub fn variance(&self) -> f64 {
        match &self.kind {
            KernelKind::Dirac => 0.0,
            KernelKind::Gaussian { alpha } => 2.0 * alpha,
            KernelKind::Tabulated { step, values } => {
                let m = values.len() - 1;
                let g = |j: usize| (j as f64 * step).powi(2) * values[j];
                step * 2.0 * ((1..m).map(g).sum::<f64>() + 0.5 * g(m))
            }
        }
    }

    /// Density value; zero past the cutoff. The Dirac kernel has no density.
    pub fn density(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > self.cutoff {
            return 0.0;
        }
        match &self.kind {
            KernelKind::Dirac => 0.0,
            KernelKind::Gaussian { alpha } => (-x * x / (4.0 * alpha)).exp() / (4.0 * PI * alpha).sqrt(),
            KernelKind::Tabulated { step, values } => {
                let p = x / step;
                let j = (p.floor() as usize).min(values.len() - 1);
                if j + 1 >= values.len() {
                    return values[values.len() - 1];
                }
                let t = p - j as f64;
                values[j] + t * (values[j + 1] - values[j])
            }
        }
    }

    /// Convolution weights on a lattice of spacing `dx`, indexed from `-J`,
    /// renormalized to sum exactly to one.
    pub fn weights(&self, dx: f64) -> Weights {
        if self.is_dirac() {
            return Weights { half_width: 0, w: vec![1.0] };
        }
        let j_max = (self.cutoff / dx + 1e-9).floor() as usize;
        let mut w: Vec<f64> = (0..=2 * j_max)
            .map(|k| dx * self.density((k as f64 - j_max as f64) * dx))
            .collect();
        // force exact symmetry after rounding
        for k in 0..j_max {
            let avg = 0.5 * (w[k] + w[2 * j_max - k]);
            w[k] = avg;
            w[2 * j_max - k] = avg;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Weights { half_width: j_max, w }
    }

    /// `int e^{rho y} k(y) dy`.
    pub fn khat(&self, rho: f64) -> Result<f64> {
        let v = match &self.kind {
            KernelKind::Dirac => 1.0,
            KernelKind::Gaussian { alpha } => (alpha * rho * rho).exp(),
            KernelKind::Tabulated { step, values } => {
                let m = values.len() - 1;
                let edge = values[m] * (rho.abs() * self.cutoff).exp();
                if edge >= 1e-14 {
                    return Err(Error::Precondition(format!(
                        "tabulated kernel tail e^(rho R) k(R) = {edge:e} has not decayed for rho = {rho}"
                    )));
                }
                let g = |j: usize| values[j] * (rho * j as f64 * step).cosh();
                step * (values[0] + 2.0 * (1..m).map(g).sum::<f64>() + g(m))
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Range(format!("exponential moment overflows at rho = {rho}")))
        }
    }

    /// `ln khat(rho)`, exact for Gaussian kernels even where `khat` overflows.
    pub fn log_khat(&self, rho: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Gaussian { alpha } => Ok(alpha * rho * rho),
            _ => self.khat(rho).map(f64::ln),
        }
    }

    pub fn convolve(&self, u: &GridFunction) -> Result<GridFunction> {
        if self.is_dirac() {
            return Ok(u.clone());
        }
        let g = u.grid();
        if self.cutoff > 0.5 * (g.x_max() - g.x_min()) {
            return Err(Error::Domain(format!(
                "kernel cutoff {} exceeds the grid half-width {}",
                self.cutoff,
                0.5 * (g.x_max() - g.x_min())
            )));
        }
        let w = self.weights(g.dx());
        let ext = w.extend(u.values(), u.left_extension(), u.right_extension());
        Ok(u.with_values(w.apply(&ext))?.with_policy(u.policy()))
    }
}

/// Symmetric convolution stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub half_width: usize,
    pub w: Vec<f64>,
}

impl Weights {
    /// Pads `values` with `half_width` ghost cells on each side.
    pub fn extend(&self, values: &[f64], left: f64, right: f64) -> Vec<f64> {
        let j = self.half_width;
        let mut out = Vec::with_capacity(values.len() + 2 * j);
        out.extend(std::iter::repeat(left).take(j));
        out.extend_from_slice(values);
        out.extend(std::iter::repeat(right).take(j));
        out
    }

    /// Convolution of a padded array; returns the unpadded length.
    pub fn apply(&self, padded: &[f64]) -> Vec<f64> {
        let n = padded.len() - 2 * self.half_width;
        if self.half_width == 0 {
            return padded.to_vec();
        }
        (0..n)
            .map(|i| {
                padded[i..i + self.w.len()]
                    .iter()
                    .zip(self.w.iter().rev())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Which of the three heat semigroups to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatMode {
    /// Half line `x > 0` with zero boundary value.
    DirichletHalfLine,
    /// Half line `x > -z` with zero boundary value.
    Shifted(f64),
    WholeLine,
}

/// `e^{-mu t}` times the heat kernel of `d u_xx` on the chosen domain,
/// applied by lattice quadrature. Outside the grid `phi` takes its extension
/// values.
pub fn heat_apply(mode: HeatMode, mu: f64, d: f64, t: f64, phi: &GridFunction) -> Result<GridFunction> {
    if !(t >= 0.0) || !(mu >= 0.0) || !(d > 0.0) {
        return Err(Error::Precondition(format!("heat_apply needs t >= 0, mu >= 0, d > 0 (got {t}, {mu}, {d})")));
    }
    if t == 0.0 {
        return Ok(phi.clone());
    }
    let z = match mode {
        HeatMode::DirichletHalfLine => Some(0.0),
        HeatMode::Shifted(z) => Some(z),
        HeatMode::WholeLine => None,
    };
    let grid = phi.grid();
    let dx = grid.dx();
    let four_dt = 4.0 * d * t;
    let radius = (four_dt * (1.0 / HEAT_TAIL).ln()).sqrt();
    let j_max = (radius / dx).ceil() as i64;
    let gauss = |r: f64| (-r * r / four_dt).exp();
    // lattice sum of the direct kernel; makes constants exact on the whole line
    let norm: f64 = (-j_max..=j_max).map(|j| gauss(j as f64 * dx)).sum();
    let decay = (-mu * t).exp();

    let values = (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            if let Some(z) = z {
                if x < -z {
                    return 0.0;
                }
            }
            let mut acc = 0.0;
            for j in -j_max..=j_max {
                let k = i as i64 + j;
                let y = grid.x_min() + k as f64 * dx;
                let kern = match z {
                    None => gauss(x - y),
                    Some(z) => {
                        if y < -z {
                            continue;
                        }
                        (gauss(x - y) - gauss(x + y + 2.0 * z)).max(0.0)
                    }
                };
                acc += kern * phi.at(k);
            }
            decay * acc / norm
        })
        .collect();
    phi.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{ExtensionPolicy, Grid};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::from_range(-30.0, 30.0, 0.05).unwrap()
    }

    #[test]
    fn dirac_is_identity() {
        let u = GridFunction::from_fn(grid(), ExtensionPolicy::EDGE, |x| x.sin()).unwrap();
        assert_eq!(Kernel::dirac().convolve(&u).unwrap(), u);
        assert_eq!(Kernel::dirac().khat(3.0).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_keeps_constants() {
        let u = GridFunction::constant(grid(), 0.7);
        let v = Kernel::gaussian(1.0).unwrap().convolve(&u).unwrap();
        assert!(v.values().iter().all(|x| (x - 0.7).abs() < 1e-10));
    }

    #[test]
    fn gaussian_heaviside_midpoint() {
        let u = GridFunction::from_fn(grid(), ExtensionPolicy::EDGE, |x| {
            if x > 0.0 {
                1.0
            } else if x == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let v = Kernel::gaussian(1.0).unwrap().convolve(&u).unwrap();
        let i0 = grid().nearest_index(0.0).unwrap();
        assert!((v.values()[i0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn cutoff_too_large() {
        let g = Grid::from_range(-5.0, 5.0, 0.1).unwrap();
        let u = GridFunction::constant(g, 1.0);
        assert!(matches!(Kernel::gaussian(1.0).unwrap().convolve(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn khat_values() {
        let k = Kernel::gaussian(1.0).unwrap();
        assert_eq!(k.khat(0.0).unwrap(), 1.0);
        assert!((k.khat(1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        // trapezoid oracle on a wide fine lattice
        let h = 1e-3;
        let quad: f64 = (-40_000..=40_000)
            .map(|j| {
                let y = j as f64 * h;
                h * (y - y * y / 4.0).exp() / (4.0 * PI).sqrt()
            })
            .sum();
        assert!((quad - std::f64::consts::E).abs() < 1e-9);
        assert!(matches!(k.khat(30.0), Err(Error::Range(_))));
        assert_eq!(k.log_khat(30.0).unwrap(), 900.0);
    }

    #[test]
    fn khat_even_and_convex() {
        let k = Kernel::gaussian(0.7).unwrap();
        for i in 1..40 {
            let r = 0.1 * i as f64;
            assert_eq!(k.khat(r).unwrap(), k.khat(-r).unwrap());
            let h = 1e-3;
            let second = k.khat(r + h).unwrap() - 2.0 * k.khat(r).unwrap() + k.khat(r - h).unwrap();
            assert!(second > 0.0);
        }
    }

    #[test]
    fn tabulated_matches_gaussian() {
        let alpha = 0.5;
        let step = 0.01;
        let m = 1200;
        let samples: Vec<f64> = (0..=2 * m)
            .map(|j| {
                let x = (j as f64 - m as f64) * step;
                (-x * x / (4.0 * alpha)).exp() / (4.0 * PI * alpha).sqrt()
            })
            .collect();
        let k = Kernel::tabulated(step, &samples).unwrap();
        assert!((k.khat(0.0).unwrap() - 1.0).abs() < 1e-12);
        let exact = (alpha * 1.5f64 * 1.5).exp();
        assert!((k.khat(1.5).unwrap() - exact).abs() < 1e-9);
        assert!((k.variance() - 2.0 * alpha).abs() < 1e-9);
        assert!(matches!(k.khat(100.0), Err(Error::Precondition(_))));
        assert!(Kernel::tabulated(step, &samples[1..]).is_err());
    }

    #[test]
    fn heat_dirichlet_vanishes_at_origin() {
        let g = Grid::from_range(0.0, 40.0, 0.1).unwrap();
        let phi = GridFunction::from_fn(g, ExtensionPolicy::EDGE, |x| 1.0 + (x * 0.3).sin()).unwrap();
        let v = heat_apply(HeatMode::DirichletHalfLine, 0.5, 1.0, 2.0, &phi).unwrap();
        assert_eq!(v.values()[0], 0.0);
        let w = heat_apply(HeatMode::Shifted(0.0), 0.5, 1.0, 2.0, &phi).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn heat_whole_line_constants() {
        let phi = GridFunction::constant(grid(), 1.0);
        for t in [0.01, 0.5, 3.0] {
            let v = heat_apply(HeatMode::WholeLine, 0.3, 1.0, t, &phi).unwrap();
            let target = (-0.3 * t).exp();
            assert!(v.values().iter().all(|x| (x - target).abs() < 1e-9), "t = {t}");
        }
        assert_eq!(heat_apply(HeatMode::WholeLine, 0.3, 1.0, 0.0, &phi).unwrap(), phi);
        assert!(heat_apply(HeatMode::WholeLine, 0.3, 0.0, 1.0, &phi).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn heat_modes_ordered(vals in prop::collection::vec(0.0f64..2.0, 61), z in 0.0f64..3.0, dz in 0.0f64..2.0) {
            let g = Grid::from_range(-6.0, 6.0, 0.2).unwrap();
            let phi = GridFunction::new(g, vals, ExtensionPolicy::ZERO).unwrap();
            let a = heat_apply(HeatMode::Shifted(z), 0.2, 1.0, 0.7, &phi).unwrap();
            let b = heat_apply(HeatMode::Shifted(z + dz), 0.2, 1.0, 0.7, &phi).unwrap();
            let c = heat_apply(HeatMode::WholeLine, 0.2, 1.0, 0.7, &phi).unwrap();
            let d = heat_apply(HeatMode::DirichletHalfLine, 0.2, 1.0, 0.7, &phi).unwrap();
            for i in 0..g.len() {
                prop_assert!(a.values()[i] <= b.values()[i]);
                prop_assert!(b.values()[i] <= c.values()[i]);
                prop_assert!(d.values()[i] <= a.values()[i]);
            }
        }

        #[test]
        fn convolution_preserves_order(
            base in prop::collection::vec(0.0f64..1.0, 201),
            bump in prop::collection::vec(0.0f64..1.0, 201),
        ) {
            let g = Grid::from_range(-10.0, 10.0, 0.1).unwrap();
            let u = GridFunction::new(g, base.clone(), ExtensionPolicy::EDGE).unwrap();
            let v = GridFunction::new(g, base.iter().zip(&bump).map(|(a, b)| a + b).collect(), ExtensionPolicy::EDGE).unwrap();
            let k = Kernel::gaussian(0.5).unwrap();
            let (cu, cv) = (k.convolve(&u).unwrap(), k.convolve(&v).unwrap());
            for i in 0..g.len() {
                prop_assert!(cu.values()[i] <= cv.values()[i]);
                prop_assert!(cu.values()[i] >= 0.0);
            }
        }
    }
}
