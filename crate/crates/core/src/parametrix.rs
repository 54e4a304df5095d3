//! Hadamard parametrix for the resolvent (−Δ_g − z)^{−1}: Bessel potentials
//! F_ν, the transport equation for u₀, and the assembled operator
//! P_N f(x) = ∫ χ Σ_{ν≤N} u_ν F_ν(d(x, y)) f(y) dvol(y).

use crate::csvio;
use crate::error::{domain, invalid, Error, Result};
use crate::geometry::{Field, Grid, Manifold, ManifoldKind, SpectralBasis};
use crate::heat::{calibrate_u1, loglog_slope};
use crate::pvkernel::cutoff;
use crate::specfun::{bessel_k, bessel_k_bound_check, BesselBound};
use crate::spectral::laplacian_apply;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// F_ν(r) = c_ν (w/r)^ℓ K_ℓ(w r), ℓ = n/2 − ν − 1, w = √(−z) with Re w > 0.
///
/// c₀ = (2π)^{−n/2} makes F₀ the decaying fundamental solution of −Δ − z in
/// ℝⁿ; c_ν = c₀/2^ν follows from −2F_ν′(r)/r = F_{ν−1}(r).
#[derive(Clone, Copy, Debug)]
pub struct BesselPotential {
    pub nu: usize,
    pub z: Complex64,
    pub n: usize,
    pub c_nu: f64,
}

impl BesselPotential {
    pub fn new(nu: usize, z: Complex64, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("dimension must be positive");
        }
        if z.im == 0.0 && z.re >= 0.0 {
            return domain(format!("z = {z} lies on the nonnegative real axis"));
        }
        let c0 = (2.0 * PI).powf(-0.5 * n as f64);
        Ok(BesselPotential { nu, z, n, c_nu: c0 / 2f64.powi(nu as i32) })
    }

    /// √(−z) on the principal branch.
    pub fn w(&self) -> Complex64 {
        (-self.z).sqrt()
    }

    /// Order ℓ = n/2 − ν − 1 of the K function.
    pub fn order(&self) -> f64 {
        0.5 * self.n as f64 - self.nu as f64 - 1.0
    }
}

pub fn f_nu_eval(p: &BesselPotential, r: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return domain(format!("F_ν is evaluated at r > 0, got {r}"));
    }
    let w = p.w();
    if !(w.re > 0.0) {
        return domain("√(−z) must have positive real part");
    }
    let ell = p.order();
    Ok((w / r).powf(ell) * bessel_k(ell.abs(), w * r)? * p.c_nu)
}

/// Largest relative residual of −2F_ν′(r)/r = F_{ν−1}(r) with central
/// differences of step 10⁻⁶ r.
pub fn f_nu_recursion_check(p: &BesselPotential, r_samples: &[f64]) -> Result<f64> {
    if p.nu == 0 {
        return invalid("the recursion needs ν ≥ 1");
    }
    let prev = BesselPotential::new(p.nu - 1, p.z, p.n)?;
    let mut worst: f64 = 0.0;
    for &r in r_samples {
        let h = 1e-6 * r;
        let d = (f_nu_eval(p, r + h)? - f_nu_eval(p, r - h)?) / (2.0 * h);
        let lhs = d * (-2.0 / r);
        let rhs = f_nu_eval(&prev, r)?;
        worst = worst.max((lhs - rhs).norm() / rhs.norm());
    }
    Ok(worst)
}

/// Closed-form flat fundamental solutions of −Δ − z: e^{−wr}/(2w) in 1-d,
/// e^{−wr}/(4πr) in 3-d.
pub fn flat_fundamental_solution(n: usize, z: Complex64, r: f64) -> Result<Complex64> {
    let w = (-z).sqrt();
    match n {
        1 => Ok((-w * r).exp() / (2.0 * w)),
        3 => Ok((-w * r).exp() / (4.0 * PI * r)),
        _ => invalid("closed forms are available for n = 1 and n = 3"),
    }
}

/// Flat-equation check for F₀: (max relative deviation from the closed form,
/// max relative residual of −F″ − (n−1)F′/r − zF by finite differences).
pub fn flat_equation_check(n: usize, z: Complex64, r_samples: &[f64]) -> Result<(f64, f64)> {
    let p = BesselPotential::new(0, z, n)?;
    let (mut closed, mut pde): (f64, f64) = (0.0, 0.0);
    for &r in r_samples {
        let f = f_nu_eval(&p, r)?;
        closed = closed.max((f - flat_fundamental_solution(n, z, r)?).norm() / f.norm());
        let h = 1e-4 * r;
        let (fp, fm) = (f_nu_eval(&p, r + h)?, f_nu_eval(&p, r - h)?);
        let d2 = (fp - f * 2.0 + fm) / (h * h);
        let d1 = (fp - fm) / (2.0 * h);
        let res = -d2 - d1 * ((n as f64 - 1.0) / r) - z * f;
        let scale = (z * f).norm() + d2.norm();
        pde = pde.max(res.norm() / scale);
    }
    Ok((closed, pde))
}

/// Fitted blow-up exponents of |F_ν| as r → 0 for ν = 0..=max_nu, from the
/// log-log slope over r ∈ [r_small, 8 r_small].
pub fn blowup_exponents(n: usize, z: Complex64, max_nu: usize, r_small: f64) -> Result<Vec<f64>> {
    let rs: Vec<f64> = (0..4).map(|k| r_small * 2f64.powi(k)).collect();
    (0..=max_nu)
        .map(|nu| {
            let p = BesselPotential::new(nu, z, n)?;
            let ys = rs.iter().map(|&r| Ok(f_nu_eval(&p, r)?.norm())).collect::<Result<Vec<f64>>>()?;
            Ok(loglog_slope(&rs, &ys))
        })
        .collect()
}

/// K_ℓ bound constants for every order ℓ = n/2 − ν − 1, ν ≤ max_nu.
pub fn bessel_bounds_for(n: usize, max_nu: usize, samples: &[f64]) -> Result<Vec<BesselBound>> {
    (0..=max_nu)
        .map(|nu| bessel_k_bound_check((0.5 * n as f64 - nu as f64 - 1.0).abs(), samples))
        .collect()
}

/// Geometry of normal coordinates centered at a point of a model manifold.
#[derive(Clone, Copy, Debug)]
pub struct ParametrixGeometry {
    pub manifold: Manifold,
}

/// Finite-difference step for the first-order symbol.
const FD_STEP: f64 = 1e-5;

impl ParametrixGeometry {
    pub fn new(manifold: Manifold) -> Self {
        ParametrixGeometry { manifold }
    }

    fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// g_{jk}(x) in normal coordinates (only the first `dim` entries are used).
    pub fn metric(&self, x: &[f64; 2]) -> [[f64; 2]; 2] {
        let mut g = [[1.0, 0.0], [0.0, 1.0]];
        if let ManifoldKind::Sphere = self.manifold.kind() {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r > 0.0 {
                let q = (r.sin() / r).powi(2);
                let u = [x[0] / r, x[1] / r];
                for j in 0..2 {
                    for k in 0..2 {
                        let radial = u[j] * u[k];
                        let delta = if j == k { 1.0 } else { 0.0 };
                        g[j][k] = radial + q * (delta - radial);
                    }
                }
            }
        }
        g
    }

    fn inverse_and_root_det(&self, x: &[f64; 2]) -> ([[f64; 2]; 2], f64) {
        let g = self.metric(x);
        if self.dim() == 1 {
            return ([[1.0 / g[0][0], 0.0], [0.0, 0.0]], g[0][0].sqrt());
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        (inv, det.sqrt())
    }

    /// First-order coefficients b^j with Δ_g = g^{jk}∂_j∂_k − b^j∂_j, i.e.
    /// b^j = −(1/√g) ∂_k(√g g^{kj}), by central differences.
    pub fn first_order_symbol(&self, x: &[f64; 2]) -> [f64; 2] {
        let n = self.dim();
        let (_, root) = self.inverse_and_root_det(x);
        let mut b = [0.0; 2];
        for k in 0..n {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += FD_STEP;
            xm[k] -= FD_STEP;
            let (ip, rp) = self.inverse_and_root_det(&xp);
            let (im, rm) = self.inverse_and_root_det(&xm);
            for j in 0..n {
                b[j] -= (rp * ip[k][j] - rm * im[k][j]) / (2.0 * FD_STEP) / root;
            }
        }
        b
    }

    /// h(x) = Σ g_{jk} b^j x_k + n − tr g^{−1}. The trace term is the
    /// difference between g^{jk}∂_j∂_k and the flat Laplacian acting on a
    /// function of |x|²; together h = −⟨x, ∇ log √det g⟩.
    pub fn h(&self, x: &[f64; 2]) -> f64 {
        let n = self.dim();
        let g = self.metric(x);
        let (inv, _) = self.inverse_and_root_det(x);
        let b = self.first_order_symbol(x);
        let mut acc = n as f64;
        for j in 0..n {
            acc -= inv[j][j];
            for k in 0..n {
                acc += g[j][k] * b[j] * x[k];
            }
        }
        acc
    }
}

/// Radial profile of u₀ along one geodesic ray.
#[derive(Clone, Debug)]
pub struct TransportProfile {
    pub r: Vec<f64>,
    pub u0: Vec<f64>,
    pub theta_inv_sqrt: Vec<f64>,
}

impl TransportProfile {
    pub fn max_abs_diff(&self) -> f64 {
        self.u0.iter().zip(&self.theta_inv_sqrt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Columns r, u0, theta_inv_sqrt, abs_diff.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csvio::writer(w);
        out.write_record(["r", "u0", "theta_inv_sqrt", "abs_diff"])?;
        for i in 0..self.r.len() {
            out.write_record([
                csvio::num(self.r[i]),
                csvio::num(self.u0[i]),
                csvio::num(self.theta_inv_sqrt[i]),
                csvio::num((self.u0[i] - self.theta_inv_sqrt[i]).abs()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integrates 2r u₀′(r) = h(r) u₀(r), u₀(0) = 1, along the ray r·direction
/// with an adaptive Dormand–Prince 5(4) pair at local tolerance 10⁻¹⁰, and
/// reports u₀ at `samples` equally spaced radii in [0, r_max].
pub fn solve_transport_u0(geom: &ParametrixGeometry, direction: &[f64; 2], r_max: f64, samples: usize) -> Result<TransportProfile> {
    let m = geom.manifold;
    if !(r_max > 0.0 && r_max < m.injectivity_radius()) {
        return domain(format!("r_max = {r_max} must lie in (0, injectivity radius)"));
    }
    let n = m.dim();
    let norm = direction[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return invalid("direction must be nonzero");
    }
    let dir = [direction[0] / norm, if n > 1 { direction[1] / norm } else { 0.0 }];
    let h_at = |r: f64| geom.h(&[r * dir[0], r * dir[1]]);
    // normal coordinates force h = O(r²)
    let probe = 1e-2;
    if h_at(probe).abs() > 10.0 * probe * probe {
        return invalid("h is not O(r²) at the center: malformed geometry");
    }
    let rhs = |r: f64, u: f64| if r < 1e-6 { 0.0 } else { h_at(r) / (2.0 * r) * u };
    let mut out = TransportProfile { r: vec![0.0], u0: vec![1.0], theta_inv_sqrt: vec![1.0] };
    let mut u = 1.0;
    let mut r = 0.0;
    let mut step: f64 = 1e-3;
    for k in 1..samples.max(2) {
        let target = r_max * k as f64 / (samples.max(2) - 1) as f64;
        while r < target {
            let hstep = step.min(target - r);
            let (next, err) = dopri5_step(&rhs, r, u, hstep);
            let tol = 1e-10;
            if err <= tol {
                r += hstep;
                u = next;
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 4.0) };
            step = hstep * factor;
            if step < 1e-14 {
                return Err(Error::NonConvergence(format!("transport step underflow at r = {r}")));
            }
        }
        out.r.push(target);
        out.u0.push(u);
        out.theta_inv_sqrt.push(m.amplitude_at(target));
    }
    Ok(out)
}

fn dopri5_step(f: &impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(t, y);
    let k2 = f(t + h / 5.0, y + h * k1 / 5.0);
    let k3 = f(t + 3.0 * h / 10.0, y + h * (3.0 * k1 + 9.0 * k2) / 40.0);
    let k4 = f(t + 4.0 * h / 5.0, y + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0 + 32.0 * k3 / 9.0));
    let k5 = f(
        t + 8.0 * h / 9.0,
        y + h * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0 + 64448.0 * k3 / 6561.0 - 212.0 * k4 / 729.0),
    );
    let k6 = f(
        t + h,
        y + h * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0 + 46732.0 * k3 / 5247.0 + 49.0 * k4 / 176.0 - 5103.0 * k5 / 18656.0),
    );
    let y5 = y + h * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0 + 125.0 * k4 / 192.0 - 2187.0 * k5 / 6784.0 + 11.0 * k6 / 84.0);
    let k7 = f(t + h, y5);
    let y4 = y + h
        * (5179.0 * k1 / 57600.0 + 7571.0 * k3 / 16695.0 + 393.0 * k4 / 640.0 - 92097.0 * k5 / 339200.0
            + 187.0 * k6 / 2100.0
            + k7 / 40.0);
    (y5, (y5 - y4).abs())
}

/// Checks that u₀ removes the F₀′ term on the sphere: away from r = 0 the
/// radial residual (−Δ_g − z)(u F₀) − (−Δ_g u) F₀ is returned relative to
/// |z u F₀|, for u = u₀ (should vanish) and u ≡ 1 (should not).
pub fn transport_cancellation_check(z: Complex64, r_samples: &[f64]) -> Result<(f64, f64)> {
    let p = BesselPotential::new(0, z, 2)?;
    let s2 = Manifold::sphere();
    let residual = |amp: &dyn Fn(f64) -> f64| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &r in r_samples {
            let h = 1e-4 * r;
            let v = |q: f64| -> Result<Complex64> { Ok(f_nu_eval(&p, q)? * amp(q)) };
            let (vp, v0, vm) = (v(r + h)?, v(r)?, v(r - h)?);
            // Δ_g on radial functions of S²: v″ + cot r v′
            let lap_v = (vp - v0 * 2.0 + vm) / (h * h) + (vp - vm) / (2.0 * h) / r.tan();
            let (ap, a0, am) = (amp(r + h), amp(r), amp(r - h));
            let lap_a = (ap - 2.0 * a0 + am) / (h * h) + (ap - am) / (2.0 * h) / r.tan();
            let f0 = f_nu_eval(&p, r)?;
            let res = -lap_v - z * v0 + f0 * lap_a;
            // the flat part −Δ_flat F₀ − zF₀ vanishes; what remains is the metric correction
            let flat = {
                let (fp, fm) = (f_nu_eval(&p, r + h)?, f_nu_eval(&p, r - h)?);
                -((fp - f0 * 2.0 + fm) / (h * h) + (fp - fm) / (2.0 * h) / r) - z * f0
            };
            worst = worst.max((res - flat * a0).norm() / (z * v0).norm());
        }
        Ok(worst)
    };
    let with_u0 = residual(&|q| s2.amplitude_at(q))?;
    let with_one = residual(&|_| 1.0)?;
    Ok((with_u0, with_one))
}

/// Assembled right parametrix of −Δ_g − z.
#[derive(Clone, Debug)]
pub struct ResolventParametrix {
    pub manifold: Manifold,
    pub depth: usize,
    pub cutoff_radius: f64,
    /// Ball radius (in grid spacings) handled by the closed-form polar weight.
    pub center_multiplier: f64,
    u1: Option<Arc<U1Table>>,
}

/// Chebyshev table of the calibrated U₁ on the sphere.
#[derive(Debug)]
struct U1Table {
    hi: f64,
    vals: Vec<f64>,
}

impl U1Table {
    const ORDER: usize = 24;

    fn build(hi: f64) -> Result<Self> {
        let vals = (0..=Self::ORDER)
            .into_par_iter()
            .map(|j| {
                let x = (PI * j as f64 / Self::ORDER as f64).cos();
                Ok(calibrate_u1(Manifold::sphere(), 0.5 * hi * (1.0 + x))?.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(U1Table { hi, vals })
    }

    fn eval(&self, d: f64) -> f64 {
        let x = (2.0 * d / self.hi - 1.0).clamp(-1.0, 1.0);
        let (mut num, mut den) = (0.0, 0.0);
        for (j, v) in self.vals.iter().enumerate() {
            let xj = (PI * j as f64 / Self::ORDER as f64).cos();
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == Self::ORDER {
                w *= 0.5;
            }
            if x == xj {
                return *v;
            }
            num += w * v / (x - xj);
            den += w / (x - xj);
        }
        num / den
    }
}

impl ResolventParametrix {
    /// Depth N ≤ 2. Tori sum images within 4π on the universal cover; the
    /// sphere uses a cutoff at 0.9π, inside the injectivity radius.
    pub fn new(manifold: Manifold, depth: usize) -> Result<Self> {
        if depth > 2 {
            return invalid(format!("parametrix depth is capped at 2, got {depth}"));
        }
        if depth == 2 && manifold.is_sphere() {
            return invalid("u₂ is not available on the sphere");
        }
        let cutoff_radius = if manifold.is_sphere() { 0.9 * PI } else { 4.0 * PI };
        let u1 = if depth >= 1 && manifold.is_sphere() { Some(Arc::new(U1Table::build(cutoff_radius)?)) } else { None };
        Ok(ResolventParametrix { manifold, depth, cutoff_radius, center_multiplier: 2.0, u1 })
    }

    /// u_ν at distance d (tori: u₀ = 1, u_ν = 0 for ν ≥ 1).
    pub fn amplitude(&self, nu: usize, d: f64) -> f64 {
        match (nu, &self.u1) {
            (0, _) => self.manifold.amplitude_at(d),
            (1, Some(t)) => t.eval(d),
            _ => 0.0,
        }
    }

    /// χ Σ_ν u_ν F_ν at distance d on a single sheet.
    fn radial_kernel(&self, pots: &[BesselPotential], d: f64) -> Result<Complex64> {
        let chi = cutoff(d, self.cutoff_radius);
        if chi == 0.0 {
            return Ok(Complex64::default());
        }
        let mut acc = Complex64::default();
        for (nu, p) in pots.iter().enumerate() {
            let a = self.amplitude(nu, d);
            if a != 0.0 {
                acc += f_nu_eval(p, d)? * a;
            }
        }
        Ok(acc * chi)
    }

    /// ∫_{B(ε)} F₀ dvol in flat polar coordinates.
    fn center_weight(&self, z: Complex64, eps: f64) -> Result<Complex64> {
        let w = (-z).sqrt();
        match self.manifold.dim() {
            1 => Ok((Complex64::new(1.0, 0.0) - (-w * eps).exp()) / (w * w)),
            2 => Ok((Complex64::new(1.0, 0.0) - w * eps * bessel_k(1.0, w * eps)?) / (w * w)),
            _ => invalid("unsupported dimension"),
        }
    }
}

/// Quadrature of P_N f on the grid. Points within ε = center_multiplier ·
/// spacing of x are replaced by f(x)·∫_{B(ε*)} F₀, with ε* matching the
/// excluded quadrature volume.
pub fn apply_parametrix(f: &Field, pr: &ResolventParametrix, z: Complex64, grid: &Arc<Grid>) -> Result<Field> {
    if **f.grid() != **grid {
        return Err(Error::GridMismatch("field and parametrix grid differ".into()));
    }
    if grid.manifold() != pr.manifold {
        return Err(Error::GridMismatch("parametrix and grid manifolds differ".into()));
    }
    let pots = (0..=pr.depth).map(|nu| BesselPotential::new(nu, z, pr.manifold.dim())).collect::<Result<Vec<_>>>()?;
    if !(pots[0].w().re > 0.0) {
        return domain("z must satisfy Re √(−z) > 0");
    }
    let m = pr.manifold;
    let eps = pr.center_multiplier * grid.spacing();
    let pts = grid.points();
    let weights = grid.weights();
    let reps = grid.orbit_representatives();
    let images: Vec<[f64; 2]> = match m.kind() {
        ManifoldKind::Sphere => vec![[0.0, 0.0]],
        ManifoldKind::Torus { dim: 1 } => (-2..=2).map(|i| [2.0 * PI * i as f64, 0.0]).collect(),
        ManifoldKind::Torus { .. } => {
            let mut v = Vec::new();
            for i in -2..=2 {
                for j in -2..=2 {
                    v.push([2.0 * PI * i as f64, 2.0 * PI * j as f64]);
                }
            }
            v
        }
    };
    let rows = reps
        .iter()
        .map(|&r| {
            let entries = (0..grid.len())
                .into_par_iter()
                .map(|j| {
                    let d = grid.distance(r, j);
                    let mut acc = Complex64::default();
                    let mut center = false;
                    if m.is_sphere() {
                        if d <= eps {
                            center = true;
                        } else {
                            acc += pr.radial_kernel(&pots, d)?;
                        }
                    } else {
                        let off = m.torus_offset(&pts[r], &pts[j]);
                        for im in &images {
                            let (a, b) = (off[0] + im[0], off[1] + im[1]);
                            let dd = (a * a + b * b).sqrt();
                            if dd <= eps {
                                center = true;
                            } else if dd < pr.cutoff_radius {
                                acc += pr.radial_kernel(&pots, dd)?;
                            }
                        }
                    }
                    Ok((acc * weights[j], center))
                })
                .collect::<Result<Vec<_>>>()?;
            let excluded: f64 = entries.iter().enumerate().filter(|(_, e)| e.1).map(|(j, _)| weights[j]).sum();
            let ball = pr.center_weight(z, m.ball_radius_for_volume(excluded))?;
            let row: Vec<Complex64> = entries.into_iter().map(|e| e.0).collect();
            Ok((r, row, ball))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut row_of = vec![0; grid.len()];
    for (k, row) in rows.iter().enumerate() {
        row_of[row.0] = k;
    }
    let vals = f.values();
    let mut out = vec![Complex64::default(); grid.len()];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (rep, shift) = grid.orbit_of(i);
        let (_, row, ball) = &rows[row_of[rep]];
        let mut acc = vals[i] * ball;
        for (j, k) in row.iter().enumerate() {
            if *k != Complex64::default() {
                acc += vals[grid.shifted(j, shift)] * k;
            }
        }
        *o = acc;
    });
    Field::new(grid.clone(), out)
}

/// (−Δ_g − z)(P_N f) − f with −Δ_g applied spectrally at the grid's Nyquist band.
pub fn remainder_probe(pr: &ResolventParametrix, z: Complex64, f: &Field, grid: &Arc<Grid>) -> Result<(Field, f64)> {
    let pf = apply_parametrix(f, pr, z, grid)?;
    let band = match grid.manifold().kind() {
        ManifoldKind::Sphere => grid.resolution() - 1,
        _ => (grid.resolution() - 1) / 2,
    };
    let basis = SpectralBasis::new(grid.clone(), band)?;
    let lap = laplacian_apply(&pf, &basis)?;
    let residual = lap.zip_with(&pf, |a, b| a - z * b)?.sub(f)?;
    let norm = residual.l2_norm();
    Ok((residual, norm))
}

/// One remainder-probe row.
#[derive(Clone, Copy, Debug)]
pub struct RemainderRow {
    pub depth: usize,
    pub z: Complex64,
    pub residual_l2: f64,
}

/// Columns N, z_re, z_im, residual_L2.
pub fn write_remainder_csv<W: Write>(rows: &[RemainderRow], w: W) -> Result<()> {
    let mut out = csvio::writer(w);
    out.write_record(["N", "z_re", "z_im", "residual_L2"])?;
    for r in rows {
        out.write_record([r.depth.to_string(), csvio::num(r.z.re), csvio::num(r.z.im), csvio::num(r.residual_l2)])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mode;
    use crate::spectral::resolvent_apply;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn f0_matches_flat_closed_forms() {
        let rs: Vec<f64> = (1..=20).map(|i| 0.25 * i as f64).collect();
        for n in [1, 3] {
            for z in [c(-1.0), c(-4.0), Complex64::new(-1.0, 2.0)] {
                let (closed, pde) = flat_equation_check(n, z, &rs).unwrap();
                assert!(closed < 1e-10, "n={n} z={z}: {closed}");
                assert!(pde < 1e-6, "n={n} z={z}: {pde}");
            }
        }
        let p = BesselPotential::new(0, c(-1.0), 3).unwrap();
        let r: f64 = 0.7;
        assert!((f_nu_eval(&p, r).unwrap().re - (-r).exp() / (4.0 * PI * r)).abs() < 1e-14);
        let p = BesselPotential::new(0, c(-1.0), 1).unwrap();
        assert!((f_nu_eval(&p, r).unwrap().re - 0.5 * (-r).exp()).abs() < 1e-14);
        assert!(f_nu_eval(&p, 0.0).is_err());
        assert!(BesselPotential::new(0, c(2.0), 3).is_err());
    }

    #[test]
    fn recursion_holds() {
        let rs: Vec<f64> = (0..50).map(|i| 0.1 + 0.1 * i as f64).collect();
        let p = BesselPotential::new(1, c(-1.0), 3).unwrap();
        assert!(f_nu_recursion_check(&p, &rs).unwrap() < 1e-5);
        for n in [1, 2, 3] {
            let p = BesselPotential::new(2, c(-4.0), n).unwrap();
            assert!(f_nu_recursion_check(&p, &rs).unwrap() < 1e-5);
        }
        assert!(f_nu_recursion_check(&BesselPotential::new(0, c(-1.0), 3).unwrap(), &rs).is_err());
    }

    #[test]
    fn blowup_steps_by_two() {
        let e = blowup_exponents(7, c(-1.0), 2, 1e-4).unwrap();
        for (nu, x) in e.iter().enumerate() {
            let want = -7.0 + 2.0 + 2.0 * nu as f64;
            assert!((x - want).abs() < 0.1, "ν={nu}: {x}");
        }
        // ℓ = 0 (n = 2, ν = 0): logarithmic, |F| ~ |log r|/(2π)
        let p = BesselPotential::new(0, c(-1.0), 2).unwrap();
        let r: f64 = 1e-8;
        assert!((f_nu_eval(&p, r).unwrap().re / (-r.ln() / (2.0 * PI)) - 1.0).abs() < 0.05);
    }

    #[test]
    fn geometry_and_transport() {
        let s2 = ParametrixGeometry::new(Manifold::sphere());
        for &r in &[0.3, 1.0, 2.0] {
            let x = [r * 0.6, r * 0.8];
            assert!((s2.h(&x) - (1.0 - r / r.tan())).abs() < 1e-8, "r={r}");
        }
        let prof = solve_transport_u0(&s2, &[1.0, 1.0], 0.9 * PI, 91).unwrap();
        assert!(prof.max_abs_diff() < 1e-6, "{}", prof.max_abs_diff());
        let k = prof.r.iter().position(|&r| r > 0.1).unwrap();
        let (r, u) = (prof.r[k], prof.u0[k]);
        assert!(((u - 1.0) / (r * r) - 1.0 / 12.0).abs() < 2e-3);
        for m in [Manifold::torus(1).unwrap(), Manifold::torus(2).unwrap()] {
            let g = ParametrixGeometry::new(m);
            let prof = solve_transport_u0(&g, &[1.0, 0.0], 3.0, 11).unwrap();
            assert!(prof.u0.iter().all(|&u| u == 1.0));
        }
        assert!(solve_transport_u0(&s2, &[1.0, 0.0], 3.5, 10).is_err());
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("r,u0,theta_inv_sqrt,abs_diff\n"));
    }

    #[test]
    fn transport_cancels_the_first_order_term() {
        let rs = [0.3, 0.6, 1.0, 1.5];
        let (with_u0, with_one) = transport_cancellation_check(c(-4.0), &rs).unwrap();
        assert!(with_u0 < 1e-5, "{with_u0}");
        assert!(with_one > 1e-2, "{with_one}");
    }

    #[test]
    fn torus_parametrix_matches_resolvent() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 256).unwrap();
        let pr = ResolventParametrix::new(t1, 0).unwrap();
        let z = c(-1.0);
        let f = Field::from_real_fn(g.clone(), |p| (3.0 * p.coords()[0]).sin());
        let out = apply_parametrix(&f, &pr, z, &g).unwrap();
        assert!(out.rel_l2_error(&f.scaled(0.1)).unwrap() < 1e-2);
        let zero = apply_parametrix(&Field::zeros(g.clone()), &pr, z, &g).unwrap();
        assert_eq!(zero.linf_norm(), 0.0);
        let (res, norm) = remainder_probe(&pr, z, &Field::zeros(g.clone()), &g).unwrap();
        assert_eq!(norm, 0.0);
        assert_eq!(res.linf_norm(), 0.0);
        let (_, norm) = remainder_probe(&pr, z, &f, &g).unwrap();
        assert!(norm.is_finite() && norm < 0.1 * f.l2_norm());
        assert!(ResolventParametrix::new(t1, 3).is_err());
    }

    #[test]
    fn sphere_parametrix_approximates_resolvent() {
        // the quadrature converges to P_N Y₁₀, which differs from the resolvent by the remainder
        let s2 = Manifold::sphere();
        let z = c(-4.0);
        let mut coef = Vec::new();
        let mut errs = Vec::new();
        for res in [16, 32, 48] {
            let g = Grid::build(s2, res).unwrap();
            let basis = SpectralBasis::new(g.clone(), 3).unwrap();
            let y10 = basis.eigenfunction_of(Mode::Harmonic { l: 1, m: 0 }).unwrap();
            let truth = resolvent_apply(&y10, z, &basis).unwrap();
            let i = basis.index_of(Mode::Harmonic { l: 1, m: 0 }).unwrap();
            let mut row = Vec::new();
            for depth in [0, 1] {
                let out = apply_parametrix(&y10, &ResolventParametrix::new(s2, depth).unwrap(), z, &g).unwrap();
                row.push(out.rel_l2_error(&truth).unwrap());
                if depth == 0 {
                    coef.push(crate::spectral::analyze(&out, &basis).unwrap().coeffs()[i].re * 6.0);
                }
            }
            errs.push(row);
        }
        assert!((coef[2] - coef[1]).abs() < (coef[1] - coef[0]).abs(), "{coef:?}");
        assert!(errs[2][0] < 5e-2 && errs[2][1] < errs[2][0], "{errs:?}");
    }
}
