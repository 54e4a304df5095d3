//! Gamma, Legendre polynomials and the modified Bessel function K_ν.

use crate::error::{domain, Result};
use num_complex::Complex64;

/// Euler Gamma. Poles at 0, −1, −2, … are a domain error.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("gamma: non-finite argument {x}"));
    }
    if x <= 0.0 && x == x.round() {
        return domain(format!("gamma: pole at {x}"));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Legendre polynomials P_0..=P_lmax at x.
pub fn legendre_p_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax >= 1 {
        p.push(x);
    }
    for l in 2..=lmax {
        let lf = l as f64;
        let v = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(v);
    }
    p
}

/// Result of a K_ν evaluation: the value of e^{w}·K_ν(w) and whether the
/// unscaled value lies in the underflow regime (|w| > 700).
#[derive(Clone, Copy, Debug)]
pub struct BesselEval {
    pub scaled: Complex64,
    pub precision_warning: bool,
}

impl BesselEval {
    pub fn value(&self, w: Complex64) -> Complex64 {
        self.scaled * (-w).exp()
    }
}

/// e^{w}·K_ν(w) for Re(w) > 0, via the even trapezoid rule on
/// ∫₀^∞ e^{−w(cosh t − 1)} cosh(νt) dt. The rule converges geometrically
/// in 1/h; h is halved until two levels agree.
pub fn bessel_k_scaled(nu: f64, w: Complex64) -> Result<BesselEval> {
    if !(w.re > 0.0) || !w.is_finite() {
        return domain(format!("bessel_k: need Re(w) > 0, got {w}"));
    }
    if !nu.is_finite() {
        return domain("bessel_k: non-finite order");
    }
    let nu = nu.abs();
    let integrand = |t: f64| -> Complex64 {
        let c = t.cosh();
        (-w * (c - 1.0)).exp() * (nu * t).cosh()
    };
    // Magnitude of the integrand, |.| = e^{−Re w (cosh t − 1)} cosh(νt); its peak
    // sits where Re(w) sinh t ≈ ν tanh(νt).
    let mag = |t: f64| (-w.re * (t.cosh() - 1.0) + nu * t).exp();
    let t_peak = (nu / w.re).asinh();
    let peak = mag(t_peak).max(1.0);
    // Truncate once the magnitude has fallen 40 e-folds below the peak.
    let mut t_max = t_peak + 1.0;
    while mag(t_max) > peak * 1e-18 {
        t_max += 0.5;
        if t_max > 60.0 {
            break;
        }
    }
    let mut h = 0.25_f64.min(t_max / 8.0);
    // level sum with step h: h·(g(0)/2 + Σ g(jh))
    let mut sum = integrand(0.0) * 0.5;
    let mut j = 1;
    while (j as f64) * h <= t_max {
        sum += integrand(j as f64 * h);
        j += 1;
    }
    let mut prev = sum * h;
    for _ in 0..14 {
        let half = 0.5 * h;
        let mut odd = Complex64::new(0.0, 0.0);
        let mut t = half;
        while t <= t_max {
            odd += integrand(t);
            t += h;
        }
        sum += odd;
        h = half;
        let cur = sum * h;
        if (cur - prev).norm() <= 1e-15 * cur.norm() {
            prev = cur;
            break;
        }
        prev = cur;
    }
    Ok(BesselEval {
        scaled: prev,
        precision_warning: w.norm() > 700.0,
    })
}

/// K_ν(w) for Re(w) > 0; K_{−ν} = K_ν.
pub fn bessel_k(nu: f64, w: Complex64) -> Result<Complex64> {
    Ok(bessel_k_scaled(nu, w)?.value(w))
}

/// Real-argument convenience wrapper.
pub fn bessel_k_real(nu: f64, w: f64) -> Result<f64> {
    Ok(bessel_k(nu, Complex64::new(w, 0.0))?.re)
}

/// Empirical constants in |K_ℓ(w)| ≤ C w^{−ℓ} (w ≤ 1) and ≤ C e^{−w} (w > 1).
#[derive(Clone, Debug)]
pub struct BesselBound {
    pub order: f64,
    /// `None` when ℓ = 0 (logarithmic singularity, flagged separately).
    pub c_small: Option<f64>,
    pub c_large: Option<f64>,
    pub log_singular_order: bool,
    pub holds: bool,
}

pub fn bessel_k_bound_check(ell: f64, samples: &[f64]) -> Result<BesselBound> {
    let ell = ell.abs();
    let log_singular = ell == 0.0;
    let mut small: Option<f64> = None;
    let mut large: Option<f64> = None;
    for &w in samples {
        if !(w > 0.0) {
            continue;
        }
        let e = bessel_k_scaled(ell, Complex64::new(w, 0.0))?;
        if w <= 1.0 {
            let v = e.value(Complex64::new(w, 0.0)).norm() * w.powf(ell);
            small = Some(small.map_or(v, |c: f64| c.max(v)));
        } else {
            let v = e.scaled.norm();
            large = Some(large.map_or(v, |c: f64| c.max(v)));
        }
    }
    let c_small = if log_singular { None } else { small };
    let finite = |c: Option<f64>| c.map_or(true, f64::is_finite);
    Ok(BesselBound {
        order: ell,
        c_small,
        c_large: large,
        log_singular_order: log_singular,
        holds: !log_singular && finite(c_small) && finite(large),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn gamma_classical_values() {
        // ∫₀^∞ t^{-1/2} e^{-t} dt = 2∫₀^∞ e^{-u²} du, by Gauss–Legendre on [0, 10]
        let rule = crate::quad::uniform_rule(0.0, 10.0, 20, 20);
        let oracle: f64 = 2.0 * rule.iter().map(|&(u, w)| w * (-u * u).exp()).sum::<f64>();
        assert!((gamma_fn(0.5).unwrap() - oracle).abs() < 1e-13);
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let reflected = PI / ((-0.5 * PI).sin() * gamma_fn(1.5).unwrap());
        assert!((gamma_fn(-0.5).unwrap() - reflected).abs() < 1e-13);
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-3.0).is_err());
    }

    #[test]
    fn gamma_relative_accuracy_on_range() {
        // recurrence Γ(x+1) = xΓ(x) across [-5, 20], plus factorial anchors
        let mut x = -4.95;
        while x < 19.0 {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(((lhs - rhs) / rhs).abs() < 1e-12, "x = {x}");
            x += 0.37;
        }
        let mut fact = 1.0;
        for k in 1..20 {
            assert!(((gamma_fn(k as f64).unwrap() - fact) / fact).abs() < 1e-13);
            fact *= k as f64;
        }
        // mpmath reference values
        assert!(((gamma_fn(-4.5).unwrap() + 0.0600196013005042464) / 0.0600196013005042464).abs() < 1e-12);
        assert!(((gamma_fn(19.7).unwrap() - 5.00123362481732657e16) / 5.00123362481732657e16).abs() < 1e-12);
    }

    #[test]
    fn legendre_values() {
        let p = legendre_p_all(3, 0.3);
        assert!((p[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((p[3] - 0.5 * (5.0 * 0.027 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn bessel_half_integer_closed_forms() {
        // K_{1/2}, K_{3/2}, K_{5/2} are elementary, also for complex w.
        let ws = [c(1.0, 0.0), c(1e-3, 0.0), c(50.0, 0.0), c(1.0, 1.0), c(3.0, -4.0), c(0.01, 0.5), c(20.0, 30.0)];
        for w in ws {
            let base = (PI / (2.0 * w)).sqrt() * (-w).exp();
            let k12 = base;
            let k32 = base * (1.0 + 1.0 / w);
            let k52 = base * (1.0 + 3.0 / w + 3.0 / (w * w));
            assert!(rel(bessel_k(0.5, w).unwrap(), k12) < 1e-10, "{w}");
            assert!(rel(bessel_k(1.5, w).unwrap(), k32) < 1e-10, "{w}");
            assert!(rel(bessel_k(2.5, w).unwrap(), k52) < 1e-10, "{w}");
        }
        assert!((bessel_k_real(0.5, 1.0).unwrap() - 0.4610685044478946).abs() < 1e-12);
    }

    #[test]
    fn bessel_reference_values() {
        // reference values from an arbitrary-precision library
        let cases = [
            (0.0, c(1.0, 0.0), c(0.421024438240708333, 0.0)),
            (1.0, c(1.0, 0.0), c(0.601907230197234575, 0.0)),
            (2.0, c(1e-3, 0.0), c(1999999.50000097163, 0.0)),
            (6.0, c(1e-3, 0.0), c(3.83999980800000552e21, 0.0)),
            (6.0, c(50.0, 0.0), c(4.86872070253754038e-23, 0.0)),
            (0.0, c(50.0, 0.0), c(3.41016774978949551e-23, 0.0)),
            (3.3, c(7.5, 0.0), c(0.000489592836584601539, 0.0)),
            (1.5, c(1.0, 1.0), c(-0.0877604547763469078, -0.606710281429022821)),
            (0.0, c(0.5, 2.0), c(-0.446902980206422354, -0.261071405407145549)),
            (0.25, c(1e-3, 1e-3), c(10.5112206436428875, -2.24674194670953859)),
        ];
        for (nu, w, want) in cases {
            let got = bessel_k(nu, w).unwrap();
            assert!(rel(got, want) < 1e-10, "nu={nu} w={w}: {got} vs {want}");
        }
    }

    #[test]
    fn bessel_small_argument_law() {
        let w = 1e-3;
        let v = w * w * bessel_k_real(2.0, w).unwrap();
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn bessel_symmetry_recurrence_derivative() {
        let ws = [c(1e-3, 0.0), c(0.3, 0.0), c(2.0, 1.0), c(10.0, -5.0), c(45.0, 0.0)];
        for w in ws {
            for &nu in &[0.3, 1.0, 2.5, 5.0] {
                let a = bessel_k(nu, w).unwrap();
                assert!(rel(bessel_k(-nu, w).unwrap(), a) < 1e-10);
                let lhs = bessel_k(nu + 1.0, w).unwrap() - bessel_k(nu - 1.0, w).unwrap();
                let rhs = a * (2.0 * nu) / w;
                assert!(rel(lhs, rhs) < 1e-8, "nu={nu} w={w}");
            }
        }
        let h = 1e-5;
        for &w in &[0.1, 1.0, 4.0] {
            let d = (bessel_k_real(0.0, w + h).unwrap() - bessel_k_real(0.0, w - h).unwrap()) / (2.0 * h);
            assert!((d + bessel_k_real(1.0, w).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn bessel_positive_decreasing() {
        for &nu in &[0.0, 0.5, 3.0] {
            let mut last = f64::INFINITY;
            let mut w = 1e-3;
            while w < 50.0 {
                let v = bessel_k_real(nu, w).unwrap();
                assert!(v > 0.0 && v < last);
                last = v;
                w *= 1.3;
            }
        }
        assert!(bessel_k(1.0, c(0.0, 1.0)).is_err());
        assert!(bessel_k(1.0, c(-1.0, 0.0)).is_err());
        assert!(bessel_k_scaled(0.0, c(800.0, 0.0)).unwrap().precision_warning);
    }

    #[test]
    fn bound_check_examples() {
        let samples: Vec<f64> = (0..=50).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 50.0)).collect();
        let b = bessel_k_bound_check(1.0, &samples).unwrap();
        assert!(b.holds && b.c_small.unwrap().is_finite() && b.c_large.unwrap().is_finite());
        let b = bessel_k_bound_check(0.5, &[2.0]).unwrap();
        assert!((b.c_large.unwrap() - (PI / 4.0).sqrt()).abs() < 1e-12);
        let small: Vec<f64> = samples.iter().copied().filter(|&w| w <= 1.0).collect();
        let b = bessel_k_bound_check(3.0, &small).unwrap();
        assert!((b.c_small.unwrap() - 8.0).abs() < 1e-4);
        let b = bessel_k_bound_check(0.0, &samples).unwrap();
        assert!(b.log_singular_order && b.c_small.is_none() && !b.holds);
    }
}
