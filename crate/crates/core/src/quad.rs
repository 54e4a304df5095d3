//! Small quadrature toolbox shared by the evaluation routes.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Nodes and weights of a composite rule whose panel edges grow geometrically
/// from `a` to `b` (requires `0 < a < b`), with `per_panel` Gauss points each.
pub fn geometric_rule(a: f64, b: f64, ratio: f64, per_panel: usize) -> Vec<(f64, f64)> {
    debug_assert!(a > 0.0 && b > a && ratio > 1.0);
    let gl = gauss_legendre(per_panel);
    let panels = ((b / a).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (b / a).powf(1.0 / panels as f64);
    let mut out = Vec::with_capacity(panels * per_panel);
    let mut lo = a;
    for p in 0..panels {
        let hi = if p + 1 == panels { b } else { lo * q };
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        out.extend(gl.iter().map(|&(x, w)| (c + h * x, h * w)));
        lo = hi;
    }
    out
}

/// Composite Gauss–Legendre on `panels` equal panels of [a, b].
pub fn uniform_rule(a: f64, b: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(per_panel);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let (c, h) = (lo + 0.5 * width, 0.5 * width);
        out.extend(gl.iter().map(|&(x, w)| (c + h * x, h * w)));
    }
    out
}

/// Tanh–sinh integration of a real integrand on a finite interval. Accurate
/// for analytic integrands with endpoint layers and derivative singularities;
/// integrable blow-ups at an endpoint must be removed by substitution first
/// (the rule stalls near 1e-7 on 1/√x).
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, abs_tol).integral
}

/// Tanh–sinh on [a, b] split at interior break points, which keeps features
/// away from the middle of a single tanh–sinh panel.
pub fn tanh_sinh_split<F: Fn(f64) -> f64>(f: F, edges: &[f64], abs_tol: f64) -> f64 {
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| tanh_sinh(&f, w[0], w[1], abs_tol))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6);
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(10)).sum();
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        assert!(rule.windows(2).all(|p| p[0].0 < p[1].0));
    }

    #[test]
    fn geometric_rule_handles_power_singularity() {
        // ∫_{1e-12}^1 t^{-1/2} dt = 2(1 - 1e-6)
        let rule = geometric_rule(1e-12, 1.0, 1.15, 8);
        let v: f64 = rule.iter().map(|&(t, w)| w / t.sqrt()).sum();
        assert!((v - 2.0 * (1.0 - 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_layers() {
        let v = tanh_sinh(|x| x.sqrt(), 0.0, 1.0, 1e-14);
        assert!((v - 2.0 / 3.0).abs() < 1e-13);
        let g = tanh_sinh(|x| (-x * x / 4e-4).exp(), 0.0, 3.0, 1e-14);
        assert!((g - 0.01 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
