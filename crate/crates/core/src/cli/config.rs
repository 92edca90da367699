//! Scenario files: a single JSON document with `"version": 1`.

use crate::error::{Error, Result};
use crate::evolve::{ModelSpec, SimOptions};
use crate::fronts::FrontSide;
use crate::gridfn::{ExtensionPolicy, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::nonlinearity::{bump_fixture, BumpKind, KppReaction, Reaction, ShiftProfile};
use serde::Deserialize;
use std::path::Path;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub analysis: Vec<AnalysisConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelConfig {
    A {
        d: f64,
        mu: f64,
        #[serde(default)]
        tau: f64,
        #[serde(default)]
        c_shift: f64,
        #[serde(default)]
        kernel: KernelConfig,
        f: ReactionConfig,
    },
    B {
        d: f64,
        mu: f64,
        #[serde(default)]
        tau: f64,
        #[serde(default)]
        c_shift: f64,
        kernel: KernelConfig,
        f: ReactionConfig,
    },
    C {
        d: f64,
        mu: f64,
        #[serde(default)]
        tau: f64,
        f: ReactionConfig,
    },
    D {
        d: f64,
        h: KppConfig,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    #[default]
    Dirac,
    Gaussian {
        alpha: f64,
    },
    Tabulated {
        step: f64,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Constant { value: f64 },
    Ramp { left: f64, right: f64, half_width: f64 },
}

/// `f` for models A to C.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReactionConfig {
    /// `mu f - mu u = u (r(s) - u)`.
    ShiftedLogistic { r: ProfileConfig },
    Tabulated { u: Vec<f64>, f: Vec<f64> },
}

/// `h` for model D.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KppConfig {
    /// `h(x, u) = u (r(x) - u)`.
    Logistic { r: ProfileConfig },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Occupied for `x <= x0`.
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    #[default]
    H,
    XiD,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Bump {
        #[serde(default)]
        shape: BumpShape,
        #[serde(default)]
        d: f64,
        /// Plateau height; `r*` when absent.
        #[serde(default)]
        height: Option<f64>,
    },
    Heaviside {
        x0: f64,
        #[serde(default)]
        value: Option<f64>,
        #[serde(default)]
        side: Side,
    },
    Constant {
        value: f64,
    },
    /// CSV with header `x,u`, interpolated linearly onto the grid. Relative
    /// paths are taken from the scenario file's directory.
    Tabulated {
        file: String,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub record_every: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Write every n-th grid column to `run.csv`.
    #[serde(default = "one")]
    pub x_stride: usize,
}

fn one() -> usize {
    1
}

fn default_max_iter() -> usize {
    2000
}

fn default_t0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum AnalysisConfig {
    Speed {
        level: f64,
        window: [f64; 2],
        #[serde(default)]
        side: Option<FrontSide>,
        /// Passing range for the fitted slope.
        #[serde(default)]
        expect: Option<[f64; 2]>,
    },
    Interval {
        c_lo: f64,
        c_hi: f64,
        eps: f64,
        #[serde(default)]
        at: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    Tail {
        c: f64,
        eps: f64,
        #[serde(default)]
        at: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    Wave {
        #[serde(default)]
        c: Option<f64>,
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        connection_tol: Option<f64>,
    },
    Steady {
        #[serde(default)]
        window: Option<[f64; 2]>,
        #[serde(default)]
        tol: Option<f64>,
    },
    Hypotheses {
        seed: u64,
        n_samples: usize,
        #[serde(default = "default_t0")]
        t0: f64,
    },
}

impl AnalysisConfig {
    /// Largest front speed the analysis expects to observe.
    fn speed_bound(&self) -> f64 {
        match self {
            AnalysisConfig::Speed { expect: Some([_, hi]), .. } => hi.abs(),
            AnalysisConfig::Interval { c_lo, c_hi, .. } => c_lo.abs().max(c_hi.abs()),
            AnalysisConfig::Tail { c, .. } => c.abs(),
            AnalysisConfig::Wave { c: Some(c), .. } => c.abs(),
            _ => 0.0,
        }
    }
}

fn config_err(pointer: &str, e: impl std::fmt::Display) -> Error {
    Error::Config { pointer: pointer.into(), msg: e.to_string() }
}

/// Parses a scenario, reporting schema errors with a JSON pointer to the
/// offending value (or, for a missing field, to where it should be).
pub fn parse(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut pointer = String::new();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
                serde_path_to_error::Segment::Map { key } | serde_path_to_error::Segment::Enum { variant: key } => {
                    pointer.push('/');
                    pointer.push_str(&key.replace('~', "~0").replace('/', "~1"));
                }
                serde_path_to_error::Segment::Unknown => {}
            }
        }
        let msg = e.inner().to_string();
        if let Some(field) = msg.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            pointer.push('/');
            pointer.push_str(field);
        }
        Error::Config { pointer, msg }
    })?;
    if s.version != VERSION {
        return Err(config_err("/version", format!("unsupported version {}, expected {VERSION}", s.version)));
    }
    Ok(s)
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err("", format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn profile(p: &ProfileConfig) -> ShiftProfile {
    match *p {
        ProfileConfig::Constant { value } => ShiftProfile::constant(value),
        ProfileConfig::Ramp { left, right, half_width } => ShiftProfile::ramp(left, right, half_width),
    }
}

fn kernel(k: &KernelConfig, at: &str) -> Result<Kernel> {
    match k {
        KernelConfig::Dirac => Ok(Kernel::dirac()),
        KernelConfig::Gaussian { alpha } => Kernel::gaussian(*alpha),
        KernelConfig::Tabulated { step, values } => Kernel::tabulated(*step, values),
    }
    .map_err(|e| config_err(at, e))
}

fn reaction(f: &ReactionConfig, mu: f64, at: &str) -> Result<Reaction> {
    match f {
        ReactionConfig::ShiftedLogistic { r } => Reaction::shifted_logistic(profile(r), mu),
        ReactionConfig::Tabulated { u, f } => Reaction::tabulated(u.clone(), f.clone()),
    }
    .map_err(|e| config_err(at, e))
}

impl Scenario {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = match &self.model {
            ModelConfig::A { d, mu, tau, c_shift, kernel: k, f } => ModelSpec::A {
                d: *d,
                mu: *mu,
                tau: *tau,
                c_shift: *c_shift,
                kernel: kernel(k, "/model/kernel")?,
                f: reaction(f, *mu, "/model/f")?,
            },
            ModelConfig::B { d, mu, tau, c_shift, kernel: k, f } => ModelSpec::B {
                d: *d,
                mu: *mu,
                tau: *tau,
                c_shift: *c_shift,
                kernel: kernel(k, "/model/kernel")?,
                f: reaction(f, *mu, "/model/f")?,
            },
            ModelConfig::C { d, mu, tau, f } => ModelSpec::C {
                d: *d,
                mu: *mu,
                tau: *tau,
                f: reaction(f, *mu, "/model/f")?.assume_s_independent(),
            },
            ModelConfig::D { d, h } => {
                let KppConfig::Logistic { r } = h;
                ModelSpec::D { d: *d, h: KppReaction::logistic(profile(r)).map_err(|e| config_err("/model/h", e))? }
            }
        };
        m.validate().map_err(|e| config_err("/model", e))?;
        Ok(m)
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid;
        Grid::from_range(g.x_min, g.x_max, g.dx).map_err(|e| config_err("/grid", e))
    }

    pub fn run(&self) -> Result<&RunConfig> {
        let r = self.run.as_ref().ok_or_else(|| config_err("/run", "missing field `run`"))?;
        if !(r.t_end >= 0.0) {
            return Err(config_err("/run/T", "T must be >= 0"));
        }
        if r.x_stride == 0 {
            return Err(config_err("/run/x_stride", "x_stride must be >= 1"));
        }
        Ok(r)
    }

    pub fn sim_options(&self) -> Result<SimOptions> {
        let r = self.run()?;
        Ok(SimOptions { dt: r.dt, record_every: r.record_every })
    }

    /// Checks that fronts moving at the fastest analysed speed stay 20 units
    /// clear of both edges.
    pub fn check_width(&self) -> Result<()> {
        let Some(run) = &self.run else { return Ok(()) };
        let c = self.analysis.iter().map(AnalysisConfig::speed_bound).fold(0.0, f64::max);
        let need = 2.0 * c * run.t_end + 40.0;
        let have = self.grid.x_max - self.grid.x_min;
        if c > 0.0 && have < need {
            return Err(config_err("/grid", format!("grid width {have} is below 2 c T + 40 = {need}")));
        }
        Ok(())
    }

    pub fn initial(&self, model: &ModelSpec, base: &Path) -> Result<GridFunction> {
        let grid = self.grid()?;
        let init = self.initial.as_ref().ok_or_else(|| config_err("/initial", "missing field `initial`"))?;
        let r_star = model.r_star();
        let at = "/initial";
        let u = match init {
            InitialConfig::Bump { shape, d, height } => {
                let kind = match shape {
                    BumpShape::H => BumpKind::H,
                    BumpShape::XiD => BumpKind::XiD,
                };
                bump_fixture(kind, *d, grid).map_err(|e| config_err(at, e))?.scale(height.unwrap_or(r_star))
            }
            InitialConfig::Heaviside { x0, value, side } => {
                let v = value.unwrap_or(r_star);
                let (x0, side) = (*x0, *side);
                let policy = match side {
                    Side::Left => ExtensionPolicy { left: crate::gridfn::Extension::EdgeConstant, right: crate::gridfn::Extension::Zero },
                    Side::Right => ExtensionPolicy::FRONT,
                };
                GridFunction::from_fn(grid, policy, |x| {
                    let inside = match side {
                        Side::Left => x <= x0,
                        Side::Right => x >= x0,
                    };
                    if inside {
                        v
                    } else {
                        0.0
                    }
                })
                .map_err(|e| config_err(at, e))?
            }
            InitialConfig::Constant { value } => GridFunction::constant(grid, *value),
            InitialConfig::Tabulated { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| config_err("/initial/file", format!("{}: {e}", path.display())))?;
                let (xs, us) = read_xu(&text).map_err(|e| config_err("/initial/file", e))?;
                GridFunction::from_fn(grid, ExtensionPolicy::EDGE, |x| interpolate(&xs, &us, x)).map_err(|e| config_err(at, e))?
            }
        };
        if !u.is_nonnegative() {
            return Err(config_err(at, "initial data must be nonnegative"));
        }
        Ok(u)
    }
}

fn read_xu(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("x,u") => {}
        other => return Err(format!("expected header `x,u`, got {other:?}")),
    }
    let (mut xs, mut us) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut it = line.split(',');
        let mut num = || -> std::result::Result<f64, String> {
            it.next()
                .ok_or_else(|| format!("line {}: too few columns", k + 2))?
                .trim()
                .parse()
                .map_err(|e| format!("line {}: {e}", k + 2))
        };
        let (x, u) = (num()?, num()?);
        if xs.last().is_some_and(|&p| x <= p) {
            return Err(format!("line {}: x must increase", k + 2));
        }
        xs.push(x);
        us.push(u);
    }
    if xs.is_empty() {
        return Err("no data rows".into());
    }
    Ok((xs, us))
}

fn interpolate(xs: &[f64], us: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&p| p <= x);
    if j == 0 {
        return us[0];
    }
    if j == xs.len() {
        return us[xs.len() - 1];
    }
    let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    us[j - 1] + t * (us[j] - us[j - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "model": {"kind": "A", "d": 1, "mu": 1, "f": {"type": "shifted-logistic", "r": {"type": "constant", "value": 1}}},
        "grid": {"x_min": -10, "x_max": 10, "dx": 0.1}
    }"#;

    fn pointer(text: &str) -> String {
        match parse(text) {
            Err(Error::Config { pointer, .. }) => pointer,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scenario() {
        let s = parse(MINIMAL).unwrap();
        let m = s.model_spec().unwrap();
        assert_eq!(m.name(), "A");
        assert_eq!(m.r_star(), 1.0);
        assert_eq!(s.grid().unwrap().len(), 201);
        assert!(matches!(s.run(), Err(Error::Config { .. })));
    }

    #[test]
    fn schema_errors_carry_pointers() {
        assert_eq!(pointer(r#"{"version": 1, "grid": {"x_min": 0, "x_max": 1, "dx": 0.1}}"#), "/model");
        assert_eq!(pointer(&MINIMAL.replace("\"dx\": 0.1", "\"dx\": 0.1, \"dy\": 2")), "/grid/dy");
        assert!(pointer(&MINIMAL.replace("\"mu\": 1,", "\"mu\": 1, \"nu\": 1,")).starts_with("/model"));
        assert_eq!(pointer(&MINIMAL.replace("\"mu\": 1,", "")), "/model/mu");
        assert_eq!(pointer(&MINIMAL.replace("\"version\": 1", "\"version\": 2")), "/version");
        // type errors inside a tagged object resolve to the object
        assert_eq!(pointer(&MINIMAL.replace("\"d\": 1,", "\"d\": \"one\",")), "/model");
    }

    #[test]
    fn semantic_errors_carry_pointers() {
        let s = parse(&MINIMAL.replace("\"d\": 1,", "\"d\": -1,")).unwrap();
        assert!(matches!(s.model_spec(), Err(Error::Config { pointer, .. }) if pointer == "/model"));
        let s = parse(&MINIMAL.replace("\"dx\": 0.1", "\"dx\": -0.1")).unwrap();
        assert!(matches!(s.grid(), Err(Error::Config { pointer, .. }) if pointer == "/grid"));
    }

    #[test]
    fn width_rule() {
        let text = MINIMAL.replace(
            "\"grid\"",
            "\"run\": {\"T\": 10}, \"analysis\": [{\"type\": \"tail\", \"c\": 2, \"eps\": 0.1}], \"grid\"",
        );
        let s = parse(&text).unwrap();
        assert!(s.check_width().is_err());
    }

    #[test]
    fn tabulated_initial_data() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("u0.csv"), "x,u\n-1,0\n1,1\n").unwrap();
        let text = MINIMAL.replace("\"grid\"", "\"initial\": {\"type\": \"tabulated\", \"file\": \"u0.csv\"}, \"grid\"");
        let s = parse(&text).unwrap();
        let m = s.model_spec().unwrap();
        let u = s.initial(&m, dir.path()).unwrap();
        assert_eq!(u.eval(-5.0), 0.0);
        assert_eq!(u.eval(5.0), 1.0);
        assert!((u.eval(0.0) - 0.5).abs() < 1e-12);
        assert!(read_xu("x,v\n").is_err());
        assert!(read_xu("x,u\n1,0\n0,1\n").is_err());
    }
}
