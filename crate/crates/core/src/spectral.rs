//! Exact spectral calculus on band-limited fields: fractional powers,
//! the resolvent, and the imaginary-axis contour formula for λ^s.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Field, SpectralBasis, SpectralCoeffs};
use crate::quad;
use num_complex::Complex64;
use std::f64::consts::PI;

/// a_ν = ⟨f, Y_ν⟩.
pub fn analyze(f: &Field, basis: &SpectralBasis) -> Result<SpectralCoeffs> {
    basis.analyze(f)
}

pub(crate) fn check_order(s: f64) -> Result<()> {
    if !(s > -1.0 && s < 1.0) || s == 0.0 {
        return invalid(format!("order s = {s} outside (-1, 1) \\ {{0}}"));
    }
    Ok(())
}

pub(crate) fn require_mean_zero(f: &Field, what: &str) -> Result<()> {
    let scale = f.linf_norm();
    if f.mean().norm() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return invalid(format!("{what}: input must be mean-zero (mean = {:e})", f.mean().norm()));
    }
    Ok(())
}

/// Synthesizes Σ m(λ_ν) a_ν Y_ν.
pub fn apply_multiplier(f: &Field, basis: &SpectralBasis, m: impl Fn(f64) -> Complex64) -> Result<Field> {
    let c = basis.analyze(f)?;
    basis.synthesize(&c.multiplied(m))
}

/// −Δ_g f.
pub fn laplacian_apply(f: &Field, basis: &SpectralBasis) -> Result<Field> {
    apply_multiplier(f, basis, |l| Complex64::new(l, 0.0))
}

/// (−Δ_g)^s f = Σ λ_ν^s a_ν Y_ν. For s < 0 the input must be mean-zero and
/// the λ = 0 mode is dropped; for s > 0 it is annihilated.
pub fn fractional_apply_spectral(f: &Field, s: f64, basis: &SpectralBasis) -> Result<Field> {
    check_order(s)?;
    if s < 0.0 {
        require_mean_zero(f, "negative fractional power")?;
    }
    apply_multiplier(f, basis, |l| {
        Complex64::new(if l > 0.0 { l.powf(s) } else { 0.0 }, 0.0)
    })
}

/// Λ^α f with Λ = (−Δ_g)^{1/2}, for any real α ≥ 0.
pub fn lambda_power(f: &Field, alpha: f64, basis: &SpectralBasis) -> Result<Field> {
    if !(alpha >= 0.0) {
        return invalid(format!("Λ^α needs α ≥ 0, got {alpha}"));
    }
    apply_multiplier(f, basis, |l| {
        Complex64::new(if l > 0.0 { l.powf(0.5 * alpha) } else if alpha == 0.0 { 1.0 } else { 0.0 }, 0.0)
    })
}

fn check_off_spectrum(z: Complex64, basis: &SpectralBasis) -> Result<()> {
    if let Some(m) = basis.modes().iter().find(|m| (Complex64::new(m.eigenvalue(), 0.0) - z).norm() < 1e-12) {
        return invalid(format!("z = {z} coincides with eigenvalue {}", m.eigenvalue()));
    }
    Ok(())
}

/// Σ (λ_ν − z)^{−1} a_ν Y_ν.
pub fn resolvent_apply(f: &Field, z: Complex64, basis: &SpectralBasis) -> Result<Field> {
    check_off_spectrum(z, basis)?;
    apply_multiplier(f, basis, |l| 1.0 / (Complex64::new(l, 0.0) - z))
}

/// Operator norm of the resolvent on the mean-zero band-limited subspace.
pub fn resolvent_norm_mean_zero(z: Complex64, basis: &SpectralBasis) -> Result<f64> {
    check_off_spectrum(z, basis)?;
    Ok(basis
        .modes()
        .iter()
        .filter(|m| !m.is_constant())
        .map(|m| 1.0 / (Complex64::new(m.eigenvalue(), 0.0) - z).norm())
        .fold(0.0, f64::max))
}

/// One row of the resolvent bound sweep at z = it.
#[derive(Clone, Debug)]
pub struct ResolventBoundRow {
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
}

/// Checks ‖(−Δ_g − it)^{−1}‖ ≤ C(1 + (1+|t|)^{−1}) with C = 1/λ_min.
pub fn resolvent_bound_sweep(ts: &[f64], basis: &SpectralBasis) -> Result<Vec<ResolventBoundRow>> {
    let c = 1.0 / basis.lambda_min_positive();
    ts.iter()
        .map(|&t| {
            let norm = resolvent_norm_mean_zero(Complex64::new(0.0, t), basis)?;
            Ok(ResolventBoundRow { t, norm, bound: c * (1.0 + 1.0 / (1.0 + t.abs())) })
        })
        .collect()
}

/// Discretization of the contour: the imaginary axis from −iR to iR,
/// principal branch of z^s.
#[derive(Clone, Copy, Debug)]
pub struct ContourSpec {
    pub axis_extent: f64,
    pub node_count: usize,
    /// Number of terms of the large-|y| expansion added beyond R (0 = plain truncation).
    pub tail_terms: usize,
}

impl ContourSpec {
    pub fn new(axis_extent: f64, node_count: usize) -> Self {
        ContourSpec { axis_extent, node_count, tail_terms: 4 }
    }

    pub fn doubled(&self) -> Self {
        ContourSpec { axis_extent: 2.0 * self.axis_extent, node_count: 2 * self.node_count, ..*self }
    }

    fn validate(&self, lambda: f64) -> Result<()> {
        if self.node_count < 16 || self.node_count % 2 != 0 {
            return invalid(format!("contour node_count must be even and ≥ 16, got {}", self.node_count));
        }
        if !(self.axis_extent >= 100.0 * lambda) {
            return invalid(format!("contour extent {} below 100·λ = {}", self.axis_extent, 100.0 * lambda));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ContourResult {
    pub value: Complex64,
    pub doubled_value: Complex64,
    pub rel_change: f64,
}

/// (1/2πi)∫ z^s (λ − z)^{−1} dz along the imaginary axis, one refinement
/// level only. Pairing ±y leaves (1/π)∫₀^R y^s (λ cos(πs/2) − y sin(πs/2))/(λ²+y²) dy,
/// and the imaginary part cancels exactly.
pub fn contour_power_scalar_once(lambda: f64, s: f64, spec: &ContourSpec) -> Result<Complex64> {
    if !(lambda > 0.0) {
        return invalid(format!("contour scalar needs λ > 0, got {lambda}"));
    }
    if !(s > -1.0 && s < 0.0) {
        return invalid(format!("contour scalar needs s ∈ (−1, 0), got {s}"));
    }
    spec.validate(lambda)?;
    let (c, sn) = ((0.5 * PI * s).cos(), (0.5 * PI * s).sin());
    let r = spec.axis_extent;
    let y0 = 1e-4 * lambda;
    // head on [0, y0]: 1/(λ²+y²) = λ^{-2} Σ (−y²/λ²)^k
    let mut head = 0.0;
    for k in 0..4 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let p = s + 2.0 * k as f64;
        let scale = sign / lambda.powi(2 + 2 * k);
        head += scale * (lambda * c * y0.powf(p + 1.0) / (p + 1.0) - sn * y0.powf(p + 2.0) / (p + 2.0));
    }
    // body on [y0, R] in u = ln y
    let (ua, ub) = (y0.ln(), r.ln());
    let panels = (spec.node_count / 16).max(1);
    let per_panel = spec.node_count / panels;
    let body: f64 = quad::uniform_rule(ua, ub, panels, per_panel)
        .iter()
        .map(|&(u, w)| {
            let y = u.exp();
            w * y.powf(s + 1.0) * (lambda * c - y * sn) / (lambda * lambda + y * y)
        })
        .sum();
    // tail on [R, ∞): 1/(λ²+y²) = y^{-2} Σ (−λ²/y²)^k, ∫_R^∞ y^p dy = −R^{p+1}/(p+1)
    let mut tail = 0.0;
    for k in 0..spec.tail_terms {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let l2k = lambda.powi(2 * k as i32);
        let p1 = s - 2.0 - 2.0 * k as f64;
        let p2 = s - 1.0 - 2.0 * k as f64;
        tail += sign * l2k * (lambda * c * (-r.powf(p1 + 1.0) / (p1 + 1.0)) - sn * (-r.powf(p2 + 1.0) / (p2 + 1.0)));
    }
    Ok(Complex64::new((head + body + tail) / PI, 0.0))
}

/// Contour value with the stability check: R and node_count doubled once,
/// relative change above 10⁻⁶ is a non-convergence error.
pub fn contour_power_scalar(lambda: f64, s: f64, spec: &ContourSpec) -> Result<ContourResult> {
    let value = contour_power_scalar_once(lambda, s, spec)?;
    let doubled_value = contour_power_scalar_once(lambda, s, &spec.doubled())?;
    let rel_change = (doubled_value - value).norm() / value.norm();
    if !(rel_change <= 1e-6) {
        return Err(Error::NonConvergence(format!(
            "contour scalar λ={lambda}, s={s}: relative change {rel_change:e} on doubling"
        )));
    }
    Ok(ContourResult { value, doubled_value, rel_change })
}

/// max|f| / (Σ (1+λ_ν)^{n/2+ε} |a_ν|²)^{1/2}.
pub fn linfty_embedding_check(f: &Field, epsilon: f64, basis: &SpectralBasis) -> Result<f64> {
    if !(epsilon > 0.0) {
        return invalid(format!("embedding check needs ε > 0, got {epsilon}"));
    }
    let n = basis.grid().manifold().dim() as f64;
    let c = basis.analyze(f)?;
    let h: f64 = c
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, a)| (1.0 + c.lambda(i)).powf(0.5 * n + epsilon) * a.norm_sqr())
        .sum();
    Ok(f.linf_norm() / h.sqrt())
}
