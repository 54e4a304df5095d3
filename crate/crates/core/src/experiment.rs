//! Config-driven experiment runs: parameter sweeps over manifolds, orders and
//! resolutions, one CSV per experiment kind plus a summary of the checks.
//!
//! Configs are INI text:
//!
//! ```text
//! [experiment]
//! manifold = S2
//! s = 0.25, 0.5
//! resolutions = 32, 64
//! epsilon_multiplier = 4
//! methods = spectral, heat, pv
//! band_limit = 6
//! seed = 7
//!
//! [checks]
//! run = contour_scalar, transport_u0
//! ```

use crate::checks::{all_checks, run_check, CheckContext, CheckOutcome};
use crate::csvio;
use crate::error::{Error, Result};
use crate::geometry::{Field, Grid, Manifold, ManifoldKind, SpectralBasis};
use crate::heat::{fractional_apply_heat, TimeQuadrature};
use crate::parametrix::{remainder_probe, solve_transport_u0, write_remainder_csv, ParametrixGeometry, RemainderRow, ResolventParametrix};
use crate::pvkernel::{diagonal_asymptotics_check, pv_apply, riesz_apply, Amplitude, KernelSpec, PvMode, PvScheme};
use crate::spectral::fractional_apply_spectral;
use ini::Ini;
use num_complex::Complex64;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Spectral,
    Heat,
    Pv,
    Riesz,
    Parametrix,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectral" => Ok(Method::Spectral),
            "heat" => Ok(Method::Heat),
            "pv" => Ok(Method::Pv),
            "riesz" => Ok(Method::Riesz),
            "parametrix" => Ok(Method::Parametrix),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::Heat => "heat",
            Method::Pv => "pv",
            Method::Riesz => "riesz",
            Method::Parametrix => "parametrix",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub manifold: Manifold,
    pub s_values: Vec<f64>,
    pub resolutions: Vec<usize>,
    /// ε = epsilon_multiplier · grid spacing.
    pub epsilon_multiplier: f64,
    pub methods: Vec<Method>,
    pub band_limit: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Check names to run after the sweep ("all" expands to every check).
    pub checks: Vec<String>,
    /// Fill the runtime_seconds column (otherwise "NA", keeping reruns bit-identical).
    pub record_timings: bool,
}

impl ExperimentConfig {
    /// Parses INI text; the output directory defaults to `out`.
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let sec = ini
            .section(Some("experiment"))
            .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
        let get = |k: &str| sec.get(k).map(str::trim).filter(|v| !v.is_empty());
        let list = |k: &str| -> Vec<String> {
            get(k).map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()).unwrap_or_default()
        };
        let num = |k: &str, v: &str| -> Result<f64> { v.parse().map_err(|_| Error::Config(format!("{k}: cannot parse '{v}'"))) };
        let manifold = Manifold::from_label(get("manifold").ok_or_else(|| Error::Config("missing key 'manifold'".into()))?)
            .map_err(|e| Error::Config(e.to_string()))?;
        let s_values = list("s").iter().map(|v| num("s", v)).collect::<Result<Vec<_>>>()?;
        let resolutions = list("resolutions")
            .iter()
            .map(|v| v.parse::<usize>().map_err(|_| Error::Config(format!("resolutions: cannot parse '{v}'"))))
            .collect::<Result<Vec<_>>>()?;
        let epsilon_multiplier = get("epsilon_multiplier").map(|v| num("epsilon_multiplier", v)).transpose()?.unwrap_or(4.0);
        let methods = list("methods").iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
        let band_limit = get("band_limit")
            .map(|v| v.parse::<usize>().map_err(|_| Error::Config(format!("band_limit: cannot parse '{v}'"))))
            .transpose()?
            .unwrap_or(6);
        let seed = get("seed")
            .map(|v| v.parse::<u64>().map_err(|_| Error::Config(format!("seed: cannot parse '{v}'"))))
            .transpose()?
            .unwrap_or(7);
        let output = PathBuf::from(get("output").unwrap_or("out"));
        let record_timings = match get("record_timings") {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => return Err(Error::Config(format!("record_timings: expected true/false, got '{v}'"))),
        };
        let checks = ini
            .section(Some("checks"))
            .and_then(|c| c.get("run"))
            .map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
            .unwrap_or_default();
        let cfg = ExperimentConfig {
            manifold,
            s_values,
            resolutions,
            epsilon_multiplier,
            methods,
            band_limit,
            seed,
            output,
            checks,
            record_timings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    /// Every listed method must be runnable with the listed parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for name in &self.checks {
            if name != "all" && !all_checks().iter().any(|c| c.name == name) {
                return bad(format!("unknown check '{name}'"));
            }
        }
        if self.methods.is_empty() {
            return Ok(());
        }
        if self.resolutions.is_empty() {
            return bad("no resolutions listed".into());
        }
        for &s in &self.s_values {
            if !(s > -1.0 && s < 1.0 && s != 0.0) {
                return bad(format!("order s = {s} outside (−1, 1)∖{{0}}"));
            }
        }
        let positive = self.s_values.iter().any(|&s| s > 0.0);
        let negative = self.s_values.iter().any(|&s| s < 0.0);
        for m in &self.methods {
            match m {
                Method::Heat | Method::Pv if !positive => return bad(format!("method {} needs some s > 0", m.label())),
                Method::Riesz if !negative => return bad("method riesz needs some s < 0".into()),
                _ => {}
            }
        }
        if self.methods.contains(&Method::Riesz) && matches!(self.manifold.kind(), ManifoldKind::Torus { dim: 1 }) {
            if let Some(s) = self.s_values.iter().find(|&&s| s <= -0.5) {
                return bad(format!("riesz on T1 needs s > −1/2, got {s}"));
            }
        }
        if self.methods.iter().any(|m| matches!(m, Method::Pv | Method::Riesz)) && !(self.epsilon_multiplier >= 2.0) {
            return bad(format!("epsilon_multiplier = {} puts ε below twice the grid spacing", self.epsilon_multiplier));
        }
        for &res in &self.resolutions {
            let g = Grid::build(self.manifold, res).map_err(|e| Error::Config(e.to_string()))?;
            SpectralBasis::new(g, self.band_limit).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn check_names(&self) -> Vec<&'static str> {
        if self.checks.iter().any(|c| c == "all") {
            return all_checks().iter().map(|c| c.name).collect();
        }
        all_checks().iter().filter(|c| self.checks.iter().any(|n| n == c.name)).map(|c| c.name).collect()
    }
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckOutcome>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Deterministic band-limited real test field of unit L² norm with zero mean.
pub fn sweep_field(basis: &SpectralBasis, seed: u64) -> Result<Field> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c = basis.zero_coeffs();
    for v in c.coeffs_mut().iter_mut().skip(1) {
        let x: f64 = StandardNormal.sample(&mut rng);
        *v = Complex64::new(x, 0.0);
    }
    let f = basis.synthesize(&c)?.map(|v| Complex64::new(v.re, 0.0)).project_mean_zero();
    let norm = f.l2_norm();
    Ok(f.scaled(1.0 / norm))
}

struct Row {
    s: f64,
    resolution: usize,
    method: Method,
    mode: &'static str,
    epsilon: f64,
    l2: f64,
    linf: f64,
    converged: bool,
    seconds: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output)?;
    let m = cfg.manifold;
    let mut rows: Vec<Row> = Vec::new();
    let mut remainders: Vec<(usize, RemainderRow)> = Vec::new();
    let tq = TimeQuadrature::default();
    for &res in &cfg.resolutions {
        if cfg.methods.is_empty() {
            break;
        }
        let g = Grid::build(m, res)?;
        let basis = SpectralBasis::new(g.clone(), cfg.band_limit)?;
        let f = sweep_field(&basis, cfg.seed)?;
        let scheme = PvScheme::new(g.clone(), cfg.epsilon_multiplier)?;
        for &s in &cfg.s_values {
            let truth = fractional_apply_spectral(&f, s, &basis)?;
            for &method in &cfg.methods {
                let applicable = match method {
                    Method::Spectral => true,
                    Method::Heat | Method::Pv => s > 0.0,
                    Method::Riesz => s < 0.0,
                    Method::Parametrix => false,
                };
                if !applicable {
                    continue;
                }
                let modes: &[(&'static str, Option<PvMode>)] = match method {
                    Method::Pv => &[("full", Some(PvMode::FullOperator)), ("representation", Some(PvMode::Representation))],
                    Method::Riesz => &[("full", Some(PvMode::FullOperator))],
                    _ => &[("exact", None)],
                };
                for &(mode, pv_mode) in modes {
                    let t0 = Instant::now();
                    let out = match (method, pv_mode) {
                        (Method::Spectral, _) => Ok(truth.clone()),
                        (Method::Heat, _) => fractional_apply_heat(&f, s, &tq, &basis),
                        (Method::Pv, Some(pm)) => pv_apply(&f, &KernelSpec::new(m, s)?, &scheme.clone().with_mode(pm)),
                        (_, pm) => riesz_apply(&f, &KernelSpec::new(m, s)?, &scheme.clone().with_mode(pm.unwrap_or(PvMode::FullOperator))),
                    };
                    let seconds = t0.elapsed().as_secs_f64();
                    // Non-convergence flags the row and the sweep moves on.
                    let (l2, linf, converged) = match out {
                        Ok(out) => (out.rel_l2_error(&truth)?, out.rel_linf_error(&truth)?, true),
                        Err(Error::NonConvergence(_)) => (f64::NAN, f64::NAN, false),
                        Err(e) => return Err(e),
                    };
                    rows.push(Row {
                        s,
                        resolution: res,
                        method,
                        mode,
                        epsilon: if pv_mode.is_some() { scheme.epsilon } else { f64::NAN },
                        l2,
                        linf,
                        converged,
                        seconds,
                    });
                }
            }
        }
        if cfg.methods.contains(&Method::Parametrix) {
            let z = Complex64::new(if m.is_sphere() { -4.0 } else { -1.0 }, 0.0);
            for depth in 0..=1 {
                let pr = ResolventParametrix::new(m, depth)?;
                let (_, norm) = remainder_probe(&pr, z, &f, &g)?;
                remainders.push((res, RemainderRow { depth, z, residual_l2: norm }));
            }
        }
    }

    let mut files = Vec::new();
    let mut open = |name: &str| -> Result<BufWriter<File>> {
        let p = cfg.output.join(name);
        files.push(p.clone());
        Ok(BufWriter::new(File::create(p)?))
    };
    let timing = |x: f64| if cfg.record_timings { csvio::num(x) } else { "NA".to_string() };

    if !cfg.methods.is_empty() {
        let mut w = csvio::writer(open("comparison.csv")?);
        w.write_record(["manifold", "n", "s", "resolution", "method", "mode", "L2_rel_error", "Linf_rel_error", "converged"])?;
        for r in &rows {
            w.write_record([
                m.label().to_string(),
                m.dim().to_string(),
                csvio::num(r.s),
                r.resolution.to_string(),
                r.method.label().to_string(),
                r.mode.to_string(),
                csvio::num(r.l2),
                csvio::num(r.linf),
                r.converged.to_string(),
            ])?;
        }
        w.flush()?;
    }
    if cfg.methods.iter().any(|x| matches!(x, Method::Spectral | Method::Heat)) {
        let mut w = csvio::writer(open("spectral_heat.csv")?);
        w.write_record(["manifold", "resolution", "s", "band_limit", "method", "L2_error", "Linf_error", "runtime_seconds"])?;
        for r in rows.iter().filter(|r| matches!(r.method, Method::Spectral | Method::Heat)) {
            w.write_record([
                m.label().to_string(),
                r.resolution.to_string(),
                csvio::num(r.s),
                cfg.band_limit.to_string(),
                r.method.label().to_string(),
                csvio::num(r.l2),
                csvio::num(r.linf),
                timing(r.seconds),
            ])?;
        }
        w.flush()?;
    }
    if cfg.methods.iter().any(|x| matches!(x, Method::Pv | Method::Riesz)) {
        let mut w = csvio::writer(open("pvkernel.csv")?);
        w.write_record([
            "manifold",
            "n",
            "s",
            "resolution",
            "epsilon",
            "mode",
            "L2_rel_error",
            "Linf_rel_error",
            "kernel_limit_estimate",
            "kernel_limit_target",
            "slope",
        ])?;
        let mut diag = Vec::new();
        for &s in &cfg.s_values {
            let d = if s > 0.0 && m.dim() <= 2 {
                let r = diagonal_asymptotics_check(s, m, &[0.2, 0.1, 0.05, 0.025], Amplitude::Transport)?;
                (r.limit, r.target, r.slope)
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            diag.push((s, d));
        }
        for r in rows.iter().filter(|r| matches!(r.method, Method::Pv | Method::Riesz)) {
            let (lim, target, slope) = diag.iter().find(|d| d.0 == r.s).map(|d| d.1).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            let mode = if r.method == Method::Riesz { "riesz" } else { r.mode };
            w.write_record([
                m.label().to_string(),
                m.dim().to_string(),
                csvio::num(r.s),
                r.resolution.to_string(),
                csvio::num(r.epsilon),
                mode.to_string(),
                csvio::num(r.l2),
                csvio::num(r.linf),
                csvio::num(lim),
                csvio::num(target),
                csvio::num(slope),
            ])?;
        }
        w.flush()?;
    }
    if cfg.methods.contains(&Method::Parametrix) {
        let rows: Vec<RemainderRow> = remainders.iter().map(|r| r.1).collect();
        write_remainder_csv(&rows, open("remainder.csv")?)?;
        let geom = ParametrixGeometry::new(m);
        let r_max = if m.is_sphere() { 0.9 * std::f64::consts::PI } else { 3.0 };
        solve_transport_u0(&geom, &[1.0, 0.0], r_max, 91)?.write_csv(open("ray_profile.csv")?)?;
    }

    let ctx = CheckContext { seed: cfg.seed };
    let checks = cfg.check_names().into_iter().map(|n| run_check(n, &ctx)).collect::<Result<Vec<_>>>()?;
    let mut w = csvio::writer(open("summary.csv")?);
    w.write_record(["criterion", "check", "module", "passed"])?;
    for c in &checks {
        w.write_record([c.info.criterion.to_string(), c.info.name.to_string(), c.info.module.to_string(), c.passed.to_string()])?;
    }
    w.flush()?;
    Ok(RunReport { files, checks })
}
