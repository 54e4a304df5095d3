//! Numerical checks of the fractional Sobolev embedding and of pointwise
//! inequalities for Λ^α = (−Δ_g)^{α/2}.

use crate::csvio;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Field, Grid, Manifold, ManifoldKind, Mode, SpectralBasis};
use crate::spectral::lambda_power;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Seeded ensemble of band-limited real fields: a unit normal coefficient
/// per mode, then normalized to unit L².
#[derive(Clone, Copy, Debug)]
pub struct EnsembleSpec {
    pub count: usize,
    pub band_limit: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    /// Members on the given basis (the band limit must match it).
    pub fn generate(&self, basis: &SpectralBasis) -> Result<Vec<Field>> {
        if basis.band_limit() != self.band_limit {
            return invalid(format!(
                "ensemble band limit {} does not match the basis band limit {}",
                self.band_limit,
                basis.band_limit()
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let coeffs: Vec<Vec<Complex64>> = (0..self.count)
            .map(|_| {
                (0..basis.len())
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(x, 0.0)
                    })
                    .collect()
            })
            .collect();
        coeffs
            .into_par_iter()
            .map(|c| {
                let f = basis.synthesize(&basis.coeffs_from(c)?)?;
                let real = f.map(|v| Complex64::new(v.re, 0.0));
                let norm = real.l2_norm();
                Ok(real.scaled(1.0 / norm))
            })
            .collect()
    }
}

/// Sobolev exponent p = 2n/(n − 2s).
pub fn sobolev_exponent(n: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 0.5) {
        return invalid(format!("the embedding is checked for s ∈ (0, 1/2), got {s}"));
    }
    let n = n as f64;
    Ok(2.0 * n / (n - 2.0 * s))
}

/// ‖f‖_p / (‖f‖₂ + ‖Λ^s f‖₂) with p = 2n/(n − 2s).
pub fn sobolev_ratio(f: &Field, s: f64, manifold: Manifold, basis: &SpectralBasis) -> Result<f64> {
    let p = sobolev_exponent(manifold.dim(), s)?;
    if f.grid().manifold() != manifold {
        return Err(Error::GridMismatch("field lives on a different manifold".into()));
    }
    let ls = lambda_power(f, s, basis)?;
    Ok(f.lp_norm(p) / (f.l2_norm() + ls.l2_norm()))
}

/// Band-limited zonal bump e^{−(1 − cos θ)/w²} on S², projected on `basis`.
pub fn zonal_bump(basis: &SpectralBasis, width: f64) -> Result<Field> {
    let g = basis.grid().clone();
    if !g.manifold().is_sphere() {
        return invalid("zonal bumps live on the sphere");
    }
    let raw = Field::from_real_fn(g, |p| (-(1.0 - p.unit_vector()[2]) / (width * width)).exp());
    basis.synthesize(&basis.analyze(&raw)?)
}

/// Outcome of the pointwise check 2fΛ^αf − Λ^α(f²) ≥ 0.
#[derive(Clone, Copy, Debug)]
pub struct PointwiseReport {
    pub min_slack: f64,
    /// ‖f‖_∞‖Λ^αf‖_∞ + ‖Λ^α(f²)‖_∞.
    pub scale: f64,
    /// Sup distance between f² and its band-2L projection on the refined grid.
    pub aliasing: f64,
    pub holds: bool,
}

const POINTWISE_TOL: f64 = 1e-6;

/// Evaluates the slack on a grid of twice the resolution, where f² is
/// exactly representable by modes of twice the band limit.
pub fn pointwise_inequality_check(f: &Field, alpha: f64, manifold: Manifold, basis: &SpectralBasis) -> Result<PointwiseReport> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return invalid(format!("α must lie in (0, 2), got {alpha}"));
    }
    let grid = f.grid();
    if grid.manifold() != manifold || **basis.grid() != **grid {
        return Err(Error::GridMismatch("field, basis and manifold disagree".into()));
    }
    if f.values().iter().any(|v| v.im.abs() > 1e-12 * (1.0 + v.re.abs())) {
        return invalid("the pointwise check needs a real field");
    }
    let fine = Grid::build(manifold, 2 * grid.resolution())?;
    let band = basis.band_limit();
    let fine_basis = SpectralBasis::new(fine.clone(), band)?;
    let fine_basis2 = SpectralBasis::new(fine.clone(), 2 * band)?;
    let coeffs = fine_basis.coeffs_from(basis.analyze(f)?.coeffs().to_vec())?;
    let ff = fine_basis.synthesize(&coeffs)?;
    let lf = lambda_power(&ff, alpha, &fine_basis)?;
    let sq = ff.map(|v| v * v);
    let sq_proj = fine_basis2.synthesize(&fine_basis2.analyze(&sq)?)?;
    let aliasing = sq.sub(&sq_proj)?.linf_norm();
    let lsq = lambda_power(&sq_proj, alpha, &fine_basis2)?;
    let min_slack = (0..fine.len())
        .map(|i| 2.0 * ff.values()[i].re * lf.values()[i].re - lsq.values()[i].re)
        .fold(f64::INFINITY, f64::min);
    let scale = ff.linf_norm() * lf.linf_norm() + lsq.linf_norm();
    // roundoff floor for fields with (nearly) vanishing Λ^α f
    let tol = POINTWISE_TOL * scale + 64.0 * f64::EPSILON * ff.linf_norm().powi(2);
    if aliasing > tol {
        return Err(Error::NonConvergence(format!(
            "aliasing {aliasing:.3e} of f² exceeds the tolerance {tol:.3e}; raise the resolution"
        )));
    }
    Ok(PointwiseReport { min_slack, scale, aliasing, holds: min_slack >= -tol })
}

/// Pointwise admissible constants for two readings of the nonlinear lower bound
/// ∇f·Λ^α∇f ≥ A(x) + |∇f|^{2+α}/(c‖f‖_∞^α):
/// `literal` with A = ½|∇f|², `nonlocal` with A = ½Λ^α(|∇f|²).
#[derive(Clone, Debug)]
pub struct ConstantinVicolReport {
    /// Smallest c at each sampled point (None where the gradient is negligible
    /// or where no c > 0 works).
    pub literal_c: Vec<Option<f64>>,
    pub nonlocal_c: Vec<Option<f64>>,
    /// Smallest c valid at every point where some c works.
    pub literal_fit: f64,
    pub nonlocal_fit: f64,
    /// Fraction of nondegenerate points where no c > 0 works.
    pub literal_infeasible: f64,
    pub nonlocal_infeasible: f64,
}

fn gradient_multiplier(mode: &Mode, axis: usize) -> Complex64 {
    match (*mode, axis) {
        (Mode::Fourier1 { k }, 0) => Complex64::new(0.0, k as f64),
        (Mode::Fourier2 { k1, .. }, 0) => Complex64::new(0.0, k1 as f64),
        (Mode::Fourier2 { k2, .. }, 1) => Complex64::new(0.0, k2 as f64),
        _ => Complex64::default(),
    }
}

fn torus_derivative(f: &Field, axis: usize, basis: &SpectralBasis) -> Result<Field> {
    let mut c = basis.analyze(f)?;
    let modes = c.modes().to_vec();
    for (a, m) in c.coeffs_mut().iter_mut().zip(&modes) {
        *a *= gradient_multiplier(m, axis);
    }
    basis.synthesize(&c)
}

/// Measures both readings on a torus; asserts nothing.
pub fn constantin_vicol_probe(f: &Field, alpha: f64, manifold: Manifold) -> Result<ConstantinVicolReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("α must lie in (0, 1), got {alpha}"));
    }
    if !matches!(manifold.kind(), ManifoldKind::Torus { .. }) {
        return invalid("the nonlinear bound is probed on tori only");
    }
    let grid = f.grid();
    let band = (grid.resolution() - 1) / 4;
    // gradients band-limited at L, products at 2L on the same grid
    let basis = SpectralBasis::new(grid.clone(), band)?;
    let basis2 = SpectralBasis::new(grid.clone(), 2 * band)?;
    let f = basis.synthesize(&basis.analyze(f)?)?;
    let n = manifold.dim();
    let grads = (0..n).map(|a| torus_derivative(&f, a, &basis)).collect::<Result<Vec<_>>>()?;
    let lgrads = grads.iter().map(|g| lambda_power(g, alpha, &basis)).collect::<Result<Vec<_>>>()?;
    let len = grid.len();
    let g2: Vec<f64> = (0..len).map(|i| grads.iter().map(|g| g.values()[i].re.powi(2)).sum()).collect();
    let lhs: Vec<f64> = (0..len)
        .map(|i| grads.iter().zip(&lgrads).map(|(g, l)| g.values()[i].re * l.values()[i].re).sum())
        .collect();
    let g2_field = Field::new(grid.clone(), g2.iter().map(|&v| Complex64::new(v, 0.0)).collect())?;
    let lg2 = lambda_power(&g2_field, alpha, &basis2)?;
    let sup = f.linf_norm();
    let gmax = g2.iter().cloned().fold(0.0, f64::max).sqrt();
    let admissible = |a: &dyn Fn(usize) -> f64| -> (Vec<Option<f64>>, f64, f64) {
        let mut cs = Vec::with_capacity(len);
        let (mut fit, mut bad, mut total) = (0.0f64, 0usize, 0usize);
        for i in 0..len {
            let gn = g2[i].sqrt();
            if !(gn > 1e-8 * gmax.max(sup)) {
                cs.push(None);
                continue;
            }
            total += 1;
            let gap = lhs[i] - a(i);
            if gap > 0.0 {
                let c = gn.powf(2.0 + alpha) / (sup.powf(alpha) * gap);
                fit = fit.max(c);
                cs.push(Some(c));
            } else {
                bad += 1;
                cs.push(None);
            }
        }
        let frac = if total == 0 { 0.0 } else { bad as f64 / total as f64 };
        (cs, if total == bad { f64::NAN } else { fit }, frac)
    };
    let (literal_c, literal_fit, literal_infeasible) = admissible(&|i| 0.5 * g2[i]);
    let (nonlocal_c, nonlocal_fit, nonlocal_infeasible) = admissible(&|i| 0.5 * lg2.values()[i].re);
    Ok(ConstantinVicolReport {
        literal_c,
        nonlocal_c,
        literal_fit,
        nonlocal_fit,
        literal_infeasible,
        nonlocal_infeasible,
    })
}

/// One row of an inequality table.
#[derive(Clone, Debug)]
pub struct StatRow {
    pub ensemble_id: usize,
    pub s_or_alpha: f64,
    pub statistic: String,
    pub value: f64,
    pub seed: u64,
}

/// Columns ensemble_id, s_or_alpha, statistic, value, seed.
pub fn write_stats_csv<W: Write>(rows: &[StatRow], w: W) -> Result<()> {
    let mut out = csvio::writer(w);
    out.write_record(["ensemble_id", "s_or_alpha", "statistic", "value", "seed"])?;
    for r in rows {
        out.write_record([
            r.ensemble_id.to_string(),
            csvio::num(r.s_or_alpha),
            r.statistic.clone(),
            csvio::num(r.value),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Summary of an ensemble sweep.
#[derive(Clone, Debug)]
pub struct EnsembleSummary {
    pub sobolev_ratios: Vec<f64>,
    pub sobolev_median: f64,
    pub sobolev_max: f64,
    /// (α, smallest slack/scale over the ensemble, all members hold)
    pub pointwise: Vec<(f64, f64, bool)>,
    pub rows: Vec<StatRow>,
}

impl EnsembleSummary {
    pub fn sobolev_bounded(&self) -> bool {
        self.sobolev_max <= 10.0 * self.sobolev_median
    }

    pub fn pointwise_holds(&self) -> bool {
        self.pointwise.iter().all(|c| c.2)
    }
}

/// Sobolev ratios at order `s` and pointwise slacks at each α over a seeded ensemble.
pub fn ensemble_sweep(ens: &EnsembleSpec, basis: &SpectralBasis, s: f64, alphas: &[f64]) -> Result<EnsembleSummary> {
    let m = basis.grid().manifold();
    let members = ens.generate(basis)?;
    let sobolev_ratios = members.par_iter().map(|f| sobolev_ratio(f, s, m, basis)).collect::<Result<Vec<f64>>>()?;
    let mut sorted = sobolev_ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let sobolev_median = if sorted.is_empty() {
        f64::NAN
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let sobolev_max = sorted.last().copied().unwrap_or(f64::NAN);
    let mut rows: Vec<StatRow> = sobolev_ratios
        .iter()
        .enumerate()
        .map(|(i, &v)| StatRow { ensemble_id: i, s_or_alpha: s, statistic: "sobolev_ratio".into(), value: v, seed: ens.seed })
        .collect();
    let mut pointwise = Vec::new();
    for &alpha in alphas {
        let reports = members
            .par_iter()
            .map(|f| pointwise_inequality_check(f, alpha, m, basis))
            .collect::<Result<Vec<_>>>()?;
        let worst = reports.iter().map(|r| r.min_slack / r.scale).fold(f64::INFINITY, f64::min);
        pointwise.push((alpha, worst, reports.iter().all(|r| r.holds)));
        rows.extend(reports.iter().enumerate().map(|(i, r)| StatRow {
            ensemble_id: i,
            s_or_alpha: alpha,
            statistic: "pointwise_min_slack".into(),
            value: r.min_slack,
            seed: ens.seed,
        }));
    }
    Ok(EnsembleSummary { sobolev_ratios, sobolev_median, sobolev_max, pointwise, rows })
}

/// Basis used for ensembles on a grid.
pub fn ensemble_basis(grid: Arc<Grid>, band_limit: usize) -> Result<SpectralBasis> {
    SpectralBasis::new(grid, band_limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobolev_ratio_of_a_constant() {
        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 16).unwrap();
        let basis = SpectralBasis::new(g.clone(), 6).unwrap();
        let one = Field::constant(g, 1.0);
        let p = sobolev_exponent(2, 0.4).unwrap();
        assert!((p - 10.0 / 3.0).abs() < 1e-14);
        let vol = s2.volume();
        let want = vol.powf(1.0 / p - 0.5);
        assert!((sobolev_ratio(&one, 0.4, s2, &basis).unwrap() - want).abs() < 1e-12);
        assert!(sobolev_ratio(&one, 0.6, s2, &basis).is_err());
    }

    #[test]
    fn zonal_bumps_stay_bounded() {
        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 48).unwrap();
        let basis = SpectralBasis::new(g, 40).unwrap();
        let ratios: Vec<f64> = [0.8, 0.4, 0.2, 0.1]
            .iter()
            .map(|&w| sobolev_ratio(&zonal_bump(&basis, w).unwrap(), 0.4, s2, &basis).unwrap())
            .collect();
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 1.0), "{ratios:?}");
    }

    #[test]
    fn pointwise_examples() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 32).unwrap();
        let basis = SpectralBasis::new(g.clone(), 6).unwrap();
        let c = pointwise_inequality_check(&Field::constant(g.clone(), 2.0), 1.0, t1, &basis).unwrap();
        assert!(c.min_slack.abs() < 1e-12 && c.holds);
        // f = sin x, α = 1: 2 sin²x − Λ(sin²x) = 2 sin²x − 2·(−½cos 2x)... = 1 − cos 2x − ... ≥ 0
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].sin());
        let r = pointwise_inequality_check(&f, 1.0, t1, &basis).unwrap();
        // sin²x = ½ − ½cos 2x, Λ(sin²x) = −cos 2x, slack = 1 − cos 2x + cos 2x = 1
        assert!((r.min_slack - 1.0).abs() < 1e-10 && r.holds);
        assert!(r.aliasing < 1e-12);
    }

    #[test]
    fn ensemble_is_reproducible_and_inequalities_hold() {
        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 16).unwrap();
        let basis = SpectralBasis::new(g, 8).unwrap();
        let ens = EnsembleSpec { count: 20, band_limit: 8, seed: 7 };
        let a = ensemble_sweep(&ens, &basis, 0.4, &[0.5, 1.0, 1.5]).unwrap();
        let b = ensemble_sweep(&ens, &basis, 0.4, &[0.5, 1.0, 1.5]).unwrap();
        assert!(a.pointwise_holds() && a.sobolev_bounded());
        let bits = |s: &EnsembleSummary| s.rows.iter().map(|r| r.value.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let mut buf = Vec::new();
        write_stats_csv(&a.rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("ensemble_id,s_or_alpha,statistic,value,seed\n"));
    }

    #[test]
    fn constantin_vicol_is_scale_invariant() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 64).unwrap();
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].sin());
        let r1 = constantin_vicol_probe(&f, 0.5, t1).unwrap();
        let r2 = constantin_vicol_probe(&f.scaled(2.0), 0.5, t1).unwrap();
        assert!((r1.nonlocal_fit - r2.nonlocal_fit).abs() < 1e-10 * r1.nonlocal_fit.abs().max(1.0));
        assert!((r1.literal_fit.is_nan() && r2.literal_fit.is_nan()) || (r1.literal_fit - r2.literal_fit).abs() < 1e-10 * r1.literal_fit);
        let flat = constantin_vicol_probe(&Field::constant(g, 1.0), 0.5, t1).unwrap();
        assert!(flat.literal_c.iter().all(|c| c.is_none()));
        assert!(constantin_vicol_probe(&f, 0.5, Manifold::sphere()).is_err());
    }
}
