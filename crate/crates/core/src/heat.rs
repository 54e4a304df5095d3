//! Heat kernels of the model manifolds, their short-time parametrix, the
//! Li–Yau comparison, and the semigroup route to (−Δ_g)^s.
//!
//! Conventions: the semigroup is e^{−t(−Δ_g)} with −Δ_g ≥ 0, and
//!
//! ```text
//! (−Δ_g)^s f = (1/|Γ(−s)|) ∫₀^∞ (f − e^{−t(−Δ_g)} f) t^{−1−s} dt,
//! ```
//!
//! which reproduces λ^s on an eigenfunction.

use crate::error::{domain, invalid, Error, Result};
use crate::geometry::{Field, Manifold, ManifoldKind, Point, SpectralBasis};
use crate::quad;
use crate::specfun::{gamma_fn, legendre_p_all};
use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2, TAU};

/// Below this time the sphere kernel switches from the Legendre series to the
/// image integral in [`HeatMode::Exact`].
const SPHERE_SERIES_MIN_T: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatMode {
    /// Eigenfunction series truncated at `band_limit`; errors out when the
    /// truncation is not negligible.
    ExactSeries,
    /// Series where it converges quickly, closed-form image integral (sphere)
    /// or periodized Gaussian (torus) at small times.
    Exact,
    /// (4πt)^{−n/2} e^{−d²/4t} Σ_{j≤order} U_j t^j, valid for d < inj and t ≤ 1.
    Parametrix { order: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct HeatKernelModel {
    pub manifold: Manifold,
    pub mode: HeatMode,
    pub band_limit: usize,
}

impl HeatKernelModel {
    pub fn exact(manifold: Manifold) -> Self {
        HeatKernelModel { manifold, mode: HeatMode::Exact, band_limit: 4096 }
    }

    pub fn series(manifold: Manifold, band_limit: usize) -> Self {
        HeatKernelModel { manifold, mode: HeatMode::ExactSeries, band_limit }
    }

    pub fn parametrix(manifold: Manifold, order: usize) -> Self {
        HeatKernelModel { manifold, mode: HeatMode::Parametrix { order }, band_limit: 0 }
    }

    /// G(x, y, t) according to the model's mode.
    pub fn eval(&self, x: &Point, y: &Point, t: f64) -> Result<f64> {
        match self.mode {
            HeatMode::Parametrix { order } => heat_parametrix(x, y, t, order, self.manifold),
            _ => heat_kernel_exact(x, y, t, self),
        }
    }
}

/// Exact heat kernel. The model must be in an exact mode.
pub fn heat_kernel_exact(x: &Point, y: &Point, t: f64, model: &HeatKernelModel) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("heat kernel needs t > 0, got {t}"));
    }
    let m = model.manifold;
    match (m.kind(), model.mode) {
        (_, HeatMode::Parametrix { .. }) => invalid("heat_kernel_exact called with a parametrix model"),
        (ManifoldKind::Torus { dim }, HeatMode::Exact) => Ok(torus_heat(&m.torus_offset(x, y), dim, t)),
        (ManifoldKind::Torus { dim }, HeatMode::ExactSeries) => {
            let off = m.torus_offset(x, y);
            let mut v = 1.0;
            for c in off.iter().take(dim) {
                v *= torus_heat_1d_series(*c, t, model.band_limit)?;
            }
            Ok(v)
        }
        (ManifoldKind::Sphere, HeatMode::Exact) => Ok(sphere_heat(m.distance(x, y), t)),
        (ManifoldKind::Sphere, HeatMode::ExactSeries) => sphere_heat_series(m.distance(x, y), t, model.band_limit),
    }
}

/// 1-d periodic heat kernel at signed offset δ.
pub fn torus_heat_1d(delta: f64, t: f64) -> f64 {
    if t >= 1.0 {
        // Fourier series: terms e^{−k²t} with t ≥ 1 die after a handful of k.
        let mut acc = 0.0;
        let mut k = 1.0_f64;
        loop {
            let term = (-k * k * t).exp();
            if term < 1e-18 {
                break;
            }
            acc += term * (k * delta).cos();
            k += 1.0;
        }
        (1.0 + 2.0 * acc) / TAU
    } else {
        let d = delta - TAU * (delta / TAU).round();
        let pref = 1.0 / (4.0 * PI * t).sqrt();
        // images with (d − 2πν)²/4t up to ≈ 40 beyond the nearest one
        let reach = ((160.0 * t).sqrt() / TAU).ceil() as i64 + 1;
        let mut acc = 0.0;
        for nu in -reach..=reach {
            let r = d - TAU * nu as f64;
            acc += (-r * r / (4.0 * t)).exp();
        }
        pref * acc
    }
}

fn torus_heat_1d_series(delta: f64, t: f64, band_limit: usize) -> Result<f64> {
    let mut acc = 0.0;
    for k in 1..=band_limit {
        let kf = k as f64;
        acc += (-kf * kf * t).exp() * (kf * delta).cos();
    }
    let next = ((band_limit + 1) as f64).powi(2);
    if (-next * t).exp() > 1e-14 {
        return Err(Error::NonConvergence(format!(
            "torus heat series at t = {t} needs more than {band_limit} modes"
        )));
    }
    Ok((1.0 + 2.0 * acc) / TAU)
}

/// Periodized Gaussian on Tⁿ at the displacement `offset`.
pub fn torus_heat(offset: &[f64; 2], dim: usize, t: f64) -> f64 {
    offset.iter().take(dim).map(|&c| torus_heat_1d(c, t)).product()
}

/// Σ_ℓ (2ℓ+1)/4π e^{−ℓ(ℓ+1)t} P_ℓ(cos d) with ℓ ≤ `lmax`. Reports
/// non-convergence when the first omitted term is not below 10⁻¹⁴·(4πt)^{-1}.
pub fn sphere_heat_series(d: f64, t: f64, lmax: usize) -> Result<f64> {
    let need = series_terms_needed(t);
    if need > lmax {
        return Err(Error::NonConvergence(format!(
            "sphere heat series at t = {t} needs ℓ up to {need} (> {lmax}); use the exact or parametrix mode"
        )));
    }
    Ok(sphere_series_sum(d, t, need))
}

fn series_terms_needed(t: f64) -> usize {
    // (2ℓ+1) e^{−ℓ(ℓ+1)t} ≤ 10⁻¹⁴ · (1/t) is ensured by ℓ(ℓ+1)t ≥ 36 + ln(2ℓ+1)
    let mut l = 1usize;
    while ((l * (l + 1)) as f64) * t < 36.0 + ((2 * l + 1) as f64 * t.max(1e-300)).ln().max(0.0) {
        l += 1;
    }
    l
}

fn sphere_series_sum(d: f64, t: f64, lmax: usize) -> f64 {
    let p = legendre_p_all(lmax, d.cos());
    let mut acc = 0.0;
    for (l, pl) in p.iter().enumerate().rev() {
        let lf = l as f64;
        acc += (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * t).exp() * pl;
    }
    acc / (4.0 * PI)
}

/// Heat kernel of the unit sphere at geodesic distance `d`.
pub fn sphere_heat(d: f64, t: f64) -> f64 {
    if t >= SPHERE_SERIES_MIN_T {
        sphere_series_sum(d, t, series_terms_needed(t))
    } else {
        sphere_heat_image(d, t)
    }
}

/// Small-time representation
/// G = √2 e^{t/4} (4πt)^{−3/2} Σ_{k=−1}^{1} (−1)^k ∫_θ^π (φ+2πk) e^{−(φ+2πk)²/4t} (cos θ − cos φ)^{−1/2} dφ;
/// the |k| ≥ 2 images are below e^{−2π²/t} relative and dropped.
fn sphere_heat_image(theta: f64, t: f64) -> f64 {
    let theta = theta.clamp(0.0, PI - 1e-12);
    let pref = SQRT_2 * (0.25 * t).exp() * (4.0 * PI * t).powf(-1.5);
    let q = 1.0 / (4.0 * t);
    // images relative to the main Gaussian e^{−θ²/4t}
    let images = |phi: f64| -> f64 {
        let main = phi * (-(phi * phi - theta * theta) * q).exp();
        let a = phi + TAU;
        let b = phi - TAU;
        main - a * (-(a * a - theta * theta) * q).exp() - b * (-(b * b - theta * theta) * q).exp()
    };
    let integral = if theta < 1e-6 {
        // 1 − cos φ = 2 sin²(φ/2)
        let f = |phi: f64| {
            if phi == 0.0 {
                return SQRT_2; // limit of φ/(√2 sin(φ/2))
            }
            images(phi) / (SQRT_2 * (0.5 * phi).sin())
        };
        let w = (8.0 * t.sqrt()).min(PI);
        quad::tanh_sinh_split(f, &[0.0, w, PI], 1e-15 * (1.0 + w))
    } else {
        // φ = θ + (π−θ)v², cos θ − cos φ = 2 sin((φ+θ)/2) sin((φ−θ)/2)
        let span = PI - theta;
        let f = |v: f64| {
            if v == 0.0 {
                return images(theta) * 2.0 * (span / theta.sin()).sqrt();
            }
            let phi = theta + span * v * v;
            let den = (2.0 * (0.5 * (phi + theta)).sin() * (0.5 * span * v * v).sin()).sqrt();
            images(phi) * 2.0 * span * v / den
        };
        let layer = (theta / span).sqrt().min(1.0);
        let gauss = (2.0 * t / (theta * span)).sqrt().min((4.0 * t).powf(0.25) / span.sqrt()).min(1.0);
        let mut edges = vec![0.0, 1.0];
        for e in [layer, 8.0 * gauss, gauss] {
            if e > 1e-6 && e < 1.0 {
                edges.push(e);
            }
        }
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup();
        quad::tanh_sinh_split(f, &edges, 1e-15)
    };
    pref * (-theta * theta * q).exp() * integral
}

/// Heat kernel of the manifold at a displacement: distance for the sphere,
/// signed offset for tori.
pub fn heat_at(manifold: Manifold, offset: &[f64; 2], d: f64, t: f64) -> f64 {
    match manifold.kind() {
        ManifoldKind::Torus { dim } => torus_heat(offset, dim, t),
        ManifoldKind::Sphere => sphere_heat(d, t),
    }
}

/// Result of calibrating the second heat coefficient U₁ at one distance.
#[derive(Clone, Copy, Debug)]
pub struct U1Calibration {
    pub value: f64,
    /// Largest residual of the polynomial fit, in units of the fitted quantity.
    pub fit_error: f64,
}

/// U₁ on the sphere at distance `d`, from a least-squares fit of
/// ρ(t) = G (4πt) e^{d²/4t} − U₀ ≈ U₁t + U₂t² + U₃t³ at small t.
pub fn calibrate_u1(manifold: Manifold, d: f64) -> Result<U1Calibration> {
    if !manifold.is_sphere() {
        return Ok(U1Calibration { value: 0.0, fit_error: 0.0 });
    }
    if !(d >= 0.0 && d < manifold.injectivity_radius()) {
        return domain(format!("U₁ calibration needs 0 ≤ d < π, got {d}"));
    }
    let u0 = manifold.amplitude_at(d);
    let t0 = (d * d / 40.0).max(0.002);
    let rows: Vec<(f64, f64)> = (0..6)
        .map(|j| {
            let t = t0 * 2f64.powi(j);
            let rho = sphere_heat(d, t) * 4.0 * PI * t * (d * d / (4.0 * t)).exp() - u0;
            (t, rho)
        })
        .collect();
    // normal equations for ρ/t = U₁ + U₂t + U₃t² (3×3)
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for &(t, rho) in &rows {
        let y = rho / t;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            b[i] += basis[i] * y;
            for k in 0..3 {
                a[i][k] += basis[i] * basis[k];
            }
        }
    }
    let c = solve3(a, b);
    let fit_error = rows
        .iter()
        .map(|&(t, rho)| (rho / t - (c[0] + c[1] * t + c[2] * t * t)).abs())
        .fold(0.0, f64::max);
    Ok(U1Calibration { value: c[0], fit_error })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Short-time parametrix (4πt)^{−n/2} e^{−d²/4t} Σ_{j≤order} U_j t^j.
/// U₀ = Θ^{−1/2}; U₁ is calibrated on the sphere and vanishes on tori.
pub fn heat_parametrix(x: &Point, y: &Point, t: f64, order: usize, manifold: Manifold) -> Result<f64> {
    heat_parametrix_at(manifold.distance(x, y), t, order, manifold)
}

pub fn heat_parametrix_at(d: f64, t: f64, order: usize, manifold: Manifold) -> Result<f64> {
    if !(d >= 0.0 && d < manifold.injectivity_radius()) {
        return domain(format!("parametrix needs d < injectivity radius, got {d}"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return domain(format!("parametrix needs 0 < t ≤ 1, got {t}"));
    }
    if order > 1 && manifold.is_sphere() {
        return invalid("parametrix order above 1 is not available on the sphere");
    }
    let n = manifold.dim() as f64;
    let mut amp = manifold.amplitude_at(d);
    if order >= 1 && manifold.is_sphere() {
        amp += calibrate_u1(manifold, d)?.value * t;
    }
    Ok((4.0 * PI * t).powf(-0.5 * n) * (-d * d / (4.0 * t)).exp() * amp)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Fitted exponent p in |G − parametrix(k)| ≈ C t^p (4πt)^{−n/2} e^{−d²/4t}.
pub fn parametrix_error_exponent(manifold: Manifold, d: f64, order: usize, ts: &[f64]) -> Result<f64> {
    let n = manifold.dim() as f64;
    let mut ys = Vec::with_capacity(ts.len());
    for &t in ts {
        let exact = match manifold.kind() {
            ManifoldKind::Sphere => sphere_heat(d, t),
            ManifoldKind::Torus { dim } => torus_heat(&[d, 0.0], dim, t),
        };
        let approx = heat_parametrix_at(d, t, order, manifold)?;
        let gauss = (4.0 * PI * t).powf(-0.5 * n) * (-d * d / (4.0 * t)).exp();
        ys.push(((exact - approx) / gauss).abs().max(1e-300));
    }
    Ok(loglog_slope(ts, ys.as_slice()))
}

/// Outcome of the Li–Yau comparison sweep.
#[derive(Clone, Debug)]
pub struct LiYauReport {
    pub holds: bool,
    /// Smallest C that makes the bound hold at every sample.
    pub tightest_c: f64,
    /// Curvature value used in the factor e^{−Cκt}: min(κ, 0).
    pub kappa_used: f64,
    /// Whether some C ∈ [10⁻³, 10³] satisfies the bound with κ taken literally.
    pub literal_kappa_satisfiable: bool,
}

/// Compares G(x,y,t) with C V(√t)^{−1} e^{−Cκt} e^{−d²/5t} on a d × t lattice
/// (the two ball volumes coincide on homogeneous spaces). The bound is the
/// one available under Ric ≥ −K with K ≥ 0, so κ enters as min(κ, 0).
pub fn li_yau_check(manifold: Manifold, d_samples: &[f64], t_samples: &[f64], c_candidate: f64) -> Result<LiYauReport> {
    let kappa = manifold.ricci_lower().min(0.0);
    let mut samples = Vec::new();
    for &d in d_samples {
        if !(d >= 0.0 && d <= manifold.diameter()) {
            return invalid(format!("Li–Yau sample distance {d} outside [0, diam]"));
        }
        for &t in t_samples {
            if !(t > 0.0) {
                return invalid(format!("Li–Yau sample time {t} must be positive"));
            }
            let g = heat_at(manifold, &[d, 0.0], d, t);
            let v = manifold.ball_volume(t.sqrt());
            // log domain: g underflows where e^{d²/5t} overflows
            samples.push((t, (g.ln() + v.ln() + d * d / (5.0 * t)).exp()));
        }
    }
    // with κ ≤ 0 the requirement C e^{−Cκt} ≥ r is monotone in C
    let need = |c: f64, k: f64| samples.iter().all(|&(t, r)| c * (-c * k * t).exp() >= r);
    let tightest_c = if kappa == 0.0 {
        samples.iter().map(|s| s.1).fold(0.0, f64::max)
    } else {
        let (mut lo, mut hi) = (0.0, samples.iter().map(|s| s.1).fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if need(mid, kappa) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let k_lit = manifold.ricci_lower();
    let literal_kappa_satisfiable = (0..=600).any(|i| need(10f64.powf(-3.0 + i as f64 / 100.0), k_lit));
    Ok(LiYauReport {
        holds: need(c_candidate, kappa),
        tightest_c,
        kappa_used: kappa,
        literal_kappa_satisfiable,
    })
}

/// Time nodes for ∫₀^∞ (·) t^{−1−s} dt: analytic head on (0, t_min],
/// geometric Gauss panels on [t_min, split] and [split, T_max], analytic tail.
#[derive(Clone, Debug)]
pub struct TimeQuadrature {
    pub split_point: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub ratio: f64,
    pub per_panel: usize,
    pub small_time_nodes: Vec<(f64, f64)>,
    pub large_time_nodes: Vec<(f64, f64)>,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature::new(1e-12, 50.0, 1.15, 8)
    }
}

impl TimeQuadrature {
    pub fn new(t_min: f64, t_max: f64, ratio: f64, per_panel: usize) -> Self {
        let split_point = 1.0;
        TimeQuadrature {
            split_point,
            t_min,
            t_max,
            ratio,
            per_panel,
            small_time_nodes: quad::geometric_rule(t_min, split_point, ratio, per_panel),
            large_time_nodes: quad::geometric_rule(split_point, t_max, ratio, per_panel),
        }
    }

    /// Same interval with panel ratio √ratio (twice the panels).
    pub fn refined(&self) -> Self {
        TimeQuadrature::new(self.t_min, self.t_max, self.ratio.sqrt(), self.per_panel)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.small_time_nodes.iter().chain(self.large_time_nodes.iter())
    }

    /// ∫₀^∞ (1 − e^{−tλ}) t^{−1−s} dt by quadrature, with the bound on the
    /// neglected part of the tail.
    pub fn scalar_integral(&self, lambda: f64, s: f64) -> (f64, f64) {
        if lambda == 0.0 {
            return (0.0, 0.0);
        }
        // head: 1 − e^{−λt} = λt − (λt)²/2 + …
        let tm = self.t_min;
        let head = lambda * tm.powf(1.0 - s) / (1.0 - s) - 0.5 * lambda * lambda * tm.powf(2.0 - s) / (2.0 - s);
        let body: f64 = self
            .nodes()
            .map(|&(t, w)| w * (-(lambda * t)).exp_m1().abs() * t.powf(-1.0 - s))
            .sum();
        // tail: ∫_T^∞ t^{−1−s} dt = T^{−s}/s, minus ∫_T^∞ e^{−λt} t^{−1−s} ≤ e^{−λT} T^{−1−s}/λ
        let tail = self.t_max.powf(-s) / s;
        let bound = (-lambda * self.t_max).exp() * self.t_max.powf(-1.0 - s) / lambda;
        (head + body + tail, bound)
    }

    /// The multiplier m(λ) ≈ λ^s realized by this quadrature.
    pub fn multiplier(&self, lambda: f64, s: f64) -> Result<f64> {
        let norm = gamma_fn(-s)?.abs();
        let (v, bound) = self.scalar_integral(lambda, s);
        if lambda > 0.0 && bound / norm > 1e-9 * lambda.powf(s) {
            return Err(Error::NonConvergence(format!(
                "heat time tail: T_max = {} too small for λ = {lambda} (tail bound {bound:e})",
                self.t_max
            )));
        }
        Ok(v / norm)
    }
}

fn check_heat_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("heat route needs s ∈ (0, 1), got {s}"));
    }
    Ok(())
}

/// (−Δ_g)^s f through the time integral, the semigroup applied spectrally.
pub fn fractional_apply_heat(f: &Field, s: f64, tq: &TimeQuadrature, basis: &SpectralBasis) -> Result<Field> {
    check_heat_order(s)?;
    let c = basis.analyze(f)?;
    let mut out = c.clone();
    let mut cache: Vec<(f64, f64)> = Vec::new();
    for (i, a) in out.coeffs_mut().iter_mut().enumerate() {
        let lambda = c.lambda(i);
        let m = match cache.iter().find(|p| p.0 == lambda) {
            Some(p) => p.1,
            None => {
                let m = tq.multiplier(lambda, s)?;
                cache.push((lambda, m));
                m
            }
        };
        *a *= m;
    }
    basis.synthesize(&out)
}

/// Pieces of the time split of the heat route, each as a field.
#[derive(Clone, Debug)]
pub struct HeatSplit {
    /// (1/|Γ(−s)|)∫₁^∞ (f − e^{tΔ}f) t^{−1−s} dt
    pub large_time: Field,
    /// sup|large_time| / sup|f|
    pub large_time_constant: f64,
    /// Bound 2∫_{d>r} K_far(d) dvol on the far-field small-time kernel mass,
    /// K_far = (1/|Γ(−s)|)∫₀¹ G t^{−1−s} dt; multiplies sup|f|.
    pub far_small_time_constant: f64,
    pub far_radius: f64,
}

/// Measures the large-time piece and the far-field small-time piece of the
/// split at t = 1, d = `far_radius`, reporting the constants C in ‖piece‖ ≤ C‖f‖_∞.
pub fn heat_split_pieces(f: &Field, s: f64, basis: &SpectralBasis, far_radius: f64) -> Result<HeatSplit> {
    check_heat_order(s)?;
    let norm = gamma_fn(-s)?.abs();
    let tq = TimeQuadrature::default();
    let large = crate::spectral::apply_multiplier(f, basis, |lambda| {
        if lambda == 0.0 {
            return Complex64::default();
        }
        let body: f64 = tq
            .large_time_nodes
            .iter()
            .map(|&(t, w)| w * (-(lambda * t)).exp_m1().abs() * t.powf(-1.0 - s))
            .sum();
        Complex64::new((body + tq.t_max.powf(-s) / s) / norm, 0.0)
    })?;
    let manifold = basis.grid().manifold();
    // far-field small-time kernel mass on the annulus d ∈ [r, diam]
    let far_kernel = |d: f64, off: [f64; 2]| -> f64 {
        let t_lo = (d * d / 3000.0).max(1e-14);
        quad::geometric_rule(t_lo, 1.0, 1.3, 8)
            .iter()
            .map(|&(t, w)| w * heat_at(manifold, &off, d, t) * t.powf(-1.0 - s))
            .sum::<f64>()
            / norm
    };
    let mass = match manifold.kind() {
        ManifoldKind::Sphere => {
            let rule = quad::uniform_rule(far_radius, PI, 16, 8);
            rule.iter().map(|&(d, w)| w * TAU * d.sin() * far_kernel(d, [d, 0.0])).sum::<f64>()
        }
        ManifoldKind::Torus { dim: 1 } => {
            let rule = quad::uniform_rule(far_radius, PI, 16, 8);
            2.0 * rule.iter().map(|&(d, w)| w * far_kernel(d, [d, 0.0])).sum::<f64>()
        }
        ManifoldKind::Torus { .. } => {
            let rule = quad::uniform_rule(-PI, PI, 16, 8);
            let mut acc = 0.0;
            for &(a, wa) in &rule {
                for &(b, wb) in &rule {
                    let d = (a * a + b * b).sqrt();
                    if d > far_radius {
                        acc += wa * wb * far_kernel(d, [a, b]);
                    }
                }
            }
            acc
        }
    };
    let fmax = f.linf_norm();
    Ok(HeatSplit {
        large_time_constant: if fmax > 0.0 { large.linf_norm() / fmax } else { 0.0 },
        large_time: large,
        far_small_time_constant: 2.0 * mass,
        far_radius,
    })
}

/// Extending the Gaussian piece of the small-time integral from (0, 1] to
/// (0, ∞): returns (added part ∫₁^∞, full integral) for
/// (1/|Γ(−s)|)∫ (4πt)^{−n/2} e^{−d²/4t} t^{−1−s} dt at distance d.
pub fn completion_gap(manifold: Manifold, s: f64, d: f64) -> Result<(f64, f64)> {
    check_heat_order(s)?;
    let n = manifold.dim() as f64;
    let norm = gamma_fn(-s)?.abs();
    let g = |t: f64| (4.0 * PI * t).powf(-0.5 * n) * (-d * d / (4.0 * t)).exp() * t.powf(-1.0 - s);
    let t_lo = (d * d / 3000.0).max(1e-300);
    let lower: f64 = quad::geometric_rule(t_lo, 1.0, 1.15, 8).iter().map(|&(t, w)| w * g(t)).sum();
    let added: f64 = quad::geometric_rule(1.0, 1e6, 1.15, 8).iter().map(|&(t, w)| w * g(t)).sum::<f64>()
        + 1e6f64.powf(-0.5 * n - s) * (4.0 * PI).powf(-0.5 * n) / (0.5 * n + s);
    Ok((added / norm, (lower + added) / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, Mode};

    #[test]
    fn torus_small_time_diagonal_matches_lattice_sum() {
        let t = 0.25;
        let oracle: f64 = (-20..=20).map(|nu: i32| (-(TAU * nu as f64).powi(2) / (4.0 * t)).exp()).sum::<f64>()
            / (4.0 * PI * t).sqrt();
        assert!((torus_heat_1d(0.0, t) - oracle).abs() < 1e-14);
        // series and images agree across the switch
        for &d in &[0.0, 0.7, 2.0, PI] {
            for &t in &[0.5, 0.99, 1.0, 1.5] {
                let images: f64 = (-20..=20)
                    .map(|nu: i32| (-(d - TAU * nu as f64).powi(2) / (4.0 * t)).exp())
                    .sum::<f64>()
                    / (4.0 * PI * t).sqrt();
                assert!((torus_heat_1d(d, t) - images).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_image_formula_matches_series() {
        for &d in &[0.0, 1e-7, 1e-3, 0.05, 0.3, 1.0, 2.0, 3.0, PI - 1e-3, PI] {
            for &t in &[0.02, 0.05, 0.0999] {
                let series = sphere_series_sum(d, t, 400);
                let image = sphere_heat_image(d, t);
                let scale = (4.0 * PI * t).recip();
                assert!((series - image).abs() < 1e-10 * scale, "d={d} t={t}: {series} vs {image}");
            }
        }
    }

    #[test]
    fn sphere_kernel_small_time_diagonal_expansion() {
        // G(x,x,t) = (4πt)^{-1}(1 + t/3 + t²/15 + 4t³/315 + …)
        for &t in &[1e-4, 1e-3, 1e-2] {
            let g = sphere_heat(0.0, t) * 4.0 * PI * t;
            let want = 1.0 + t / 3.0 + t * t / 15.0 + 4.0 * t.powi(3) / 315.0;
            assert!((g - want).abs() < t.powi(4) + 1e-11, "t={t}: {g}");
        }
    }

    #[test]
    fn series_mode_flags_small_times() {
        let m = Manifold::sphere();
        let model = HeatKernelModel::series(m, 32);
        let x = m.point(&[0.3, 0.0]).unwrap();
        let y = m.point(&[0.6, 1.0]).unwrap();
        assert!(heat_kernel_exact(&x, &y, 1e-3, &model).is_err());
        assert!(heat_kernel_exact(&x, &y, 0.5, &model).is_ok());
        assert!(heat_kernel_exact(&x, &y, 0.0, &HeatKernelModel::exact(m)).is_err());
    }

    fn mass(grid: &Grid, x: &Point, t: f64) -> f64 {
        let m = grid.manifold();
        let model = HeatKernelModel::exact(m);
        let vals: Vec<f64> = grid.points().iter().map(|y| model.eval(x, y, t).unwrap()).collect();
        grid.integrate(&vals)
    }

    #[test]
    fn stochastic_completeness_and_equilibrium() {
        for (m, res, t) in [
            (Manifold::sphere(), 32, 0.1),
            (Manifold::sphere(), 48, 0.05),
            (Manifold::torus(1).unwrap(), 64, 0.05),
            (Manifold::torus(2).unwrap(), 32, 0.2),
        ] {
            let g = Grid::build(m, res).unwrap();
            let x = m.point(&vec![0.4; m.dim()]).unwrap();
            assert!((mass(&g, &x, t) - 1.0).abs() < 1e-8, "{} t={t}", m.label());
            let y = m.point(&vec![2.0; m.dim()]).unwrap();
            let far = HeatKernelModel::exact(m).eval(&x, &y, 60.0).unwrap();
            assert!((far - 1.0 / m.volume()).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetry_positivity_chapman_kolmogorov() {
        let m = Manifold::sphere();
        let g = Grid::build(m, 40).unwrap();
        let model = HeatKernelModel::exact(m);
        let x = m.point(&[0.5, 0.2]).unwrap();
        let y = m.point(&[1.4, 2.5]).unwrap();
        let t = 0.1;
        assert_eq!(model.eval(&x, &y, t).unwrap(), model.eval(&y, &x, t).unwrap());
        let vals: Vec<f64> = g
            .points()
            .iter()
            .map(|z| {
                let a = model.eval(&x, z, t).unwrap();
                let b = model.eval(z, &y, t).unwrap();
                assert!(a > 0.0);
                a * b
            })
            .collect();
        let lhs = g.integrate(&vals);
        assert!((lhs - model.eval(&x, &y, 2.0 * t).unwrap()).abs() < 1e-6);

        let m1 = Manifold::torus(1).unwrap();
        let g1 = Grid::build(m1, 64).unwrap();
        let model1 = HeatKernelModel::exact(m1);
        let (x, y) = (m1.point(&[0.3]).unwrap(), m1.point(&[4.0]).unwrap());
        let vals: Vec<f64> = g1
            .points()
            .iter()
            .map(|z| model1.eval(&x, z, 0.2).unwrap() * model1.eval(z, &y, 0.2).unwrap())
            .collect();
        assert!((g1.integrate(&vals) - model1.eval(&x, &y, 0.4).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn parametrix_examples() {
        let s2 = Manifold::sphere();
        let x = s2.point(&[0.7, 0.1]).unwrap();
        let t = 0.01;
        let p0 = heat_parametrix(&x, &x, t, 0, s2).unwrap();
        assert!((p0 * 4.0 * PI * t - 1.0).abs() < 1e-14);
        assert!((s2.amplitude_at(PI / 2.0) - (PI / 2.0).sqrt()).abs() < 1e-14);
        let t1 = Manifold::torus(1).unwrap();
        let (a, b) = (t1.point(&[0.2]).unwrap(), t1.point(&[1.9]).unwrap());
        let d: f64 = 1.7;
        let gauss = (4.0 * PI * 0.3f64).powf(-0.5) * (-d * d / 1.2).exp();
        assert!((heat_parametrix(&a, &b, 0.3, 0, t1).unwrap() - gauss).abs() < 1e-15);
        assert!(heat_parametrix(&a, &b, 2.0, 0, t1).is_err());
        let far = s2.point(&[PI, 0.0]).unwrap();
        let north = s2.point(&[0.0, 0.0]).unwrap();
        assert!(heat_parametrix(&north, &far, 0.1, 0, s2).is_err());
    }

    #[test]
    fn u1_calibration_matches_curvature_value() {
        // U₁(x,x) = R/6 = 1/3 on the unit sphere
        let c = calibrate_u1(Manifold::sphere(), 0.0).unwrap();
        assert!((c.value - 1.0 / 3.0).abs() < 1e-6, "{c:?}");
        assert!(c.fit_error < 1e-6);
        assert_eq!(calibrate_u1(Manifold::torus(2).unwrap(), 0.3).unwrap().value, 0.0);
    }

    #[test]
    fn parametrix_error_exponents() {
        let ts: Vec<f64> = (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect();
        let s2 = Manifold::sphere();
        for &d in &[0.0, 0.1] {
            for k in 0..=1 {
                let p = parametrix_error_exponent(s2, d, k, &ts).unwrap();
                assert!((p - (k as f64 + 1.0)).abs() < 0.2, "d={d} k={k}: {p}");
            }
        }
    }

    #[test]
    fn li_yau_examples() {
        let ds: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let ts: Vec<f64> = (0..=12).map(|i| 0.01 * 10f64.powf(i as f64 / 4.0)).collect();
        let r = li_yau_check(Manifold::sphere(), &ds, &ts, 10.0).unwrap();
        assert!(r.holds && r.tightest_c.is_finite() && r.tightest_c > 0.0);
        assert!(!r.literal_kappa_satisfiable);
        let at_c = li_yau_check(Manifold::sphere(), &ds, &ts, r.tightest_c * (1.0 + 1e-12)).unwrap();
        assert!(at_c.holds);
        let flat = li_yau_check(Manifold::torus(2).unwrap(), &[0.1, 1.0, 3.0], &ts, 10.0).unwrap();
        assert!(flat.holds);
    }

    #[test]
    fn scalar_heat_identity() {
        // ∫₀^∞ (1 − e^{−t}) t^{−3/2} dt = 2√π, checked against an independent tanh–sinh evaluation
        let tq = TimeQuadrature::default();
        let (v, _) = tq.scalar_integral(1.0, 0.5);
        // u = √t: 2∫₀^∞ (1 − e^{−u²}) u^{−2} du, split at u = 1 and u = 40
        let inner = |u: f64| if u == 0.0 { 2.0 } else { 2.0 * (-(u * u)).exp_m1().abs() / (u * u) };
        let oracle = quad::tanh_sinh_split(inner, &[0.0, 1.0, 8.0, 40.0], 1e-14) + 2.0 / 40.0;
        assert!((oracle - 2.0 * PI.sqrt()).abs() < 1e-10);
        assert!((v - oracle).abs() / oracle < 1e-6);
        for &lambda in &[0.5, 1.0, 2.0, 10.0] {
            for &s in &[0.25, 0.5, 0.75] {
                let m = tq.multiplier(lambda, s).unwrap();
                assert!((m / lambda.powf(s) - 1.0).abs() < 1e-6, "λ={lambda} s={s}: {m}");
            }
        }
    }

    #[test]
    fn time_quadrature_refinement_reduces_error() {
        let coarse = TimeQuadrature::new(1e-12, 50.0, 3.0, 4);
        let fine = coarse.refined();
        let e = |tq: &TimeQuadrature| (tq.multiplier(3.0, 0.4).unwrap() - 3f64.powf(0.4)).abs();
        assert!(e(&fine) < 0.5 * e(&coarse));
        assert!(coarse.nodes().all(|&(_, w)| w > 0.0));
        let short = TimeQuadrature::new(1e-12, 2.0, 1.15, 8);
        assert!(short.multiplier(1.0, 0.5).is_err());
    }

    #[test]
    fn heat_route_matches_spectral_on_sphere() {
        let b = SpectralBasis::new(Grid::build(Manifold::sphere(), 20).unwrap(), 8).unwrap();
        let y10 = b.eigenfunction_of(Mode::Harmonic { l: 1, m: 0 }).unwrap();
        let tq = TimeQuadrature::default();
        let out = fractional_apply_heat(&y10, 0.5, &tq, &b).unwrap();
        assert!(out.rel_l2_error(&y10.scaled(2f64.sqrt())).unwrap() < 1e-5);
        let one = Field::constant(b.grid().clone(), 1.0);
        assert!(fractional_apply_heat(&one, 0.5, &tq, &b).unwrap().linf_norm() < 1e-14);
        assert!(fractional_apply_heat(&one, -0.5, &tq, &b).is_err());
    }

    #[test]
    fn split_constants_are_finite() {
        let b = SpectralBasis::new(Grid::build(Manifold::sphere(), 16).unwrap(), 6).unwrap();
        let f = b.eigenfunction_of(Mode::Harmonic { l: 3, m: 2 }).unwrap();
        let sp = heat_split_pieces(&f, 0.5, &b, PI / 2.0).unwrap();
        // on an eigenfunction the large-time piece is the exact scalar tail
        let lambda: f64 = 12.0;
        let tail = {
            let tq = TimeQuadrature::default();
            let body: f64 = tq.large_time_nodes.iter().map(|&(t, w)| w * (1.0 - (-lambda * t).exp()) * t.powf(-1.5)).sum();
            (body + tq.t_max.powf(-0.5) / 0.5) / gamma_fn(-0.5).unwrap().abs()
        };
        assert!((sp.large_time_constant - tail).abs() < 1e-10);
        assert!(sp.far_small_time_constant.is_finite() && sp.far_small_time_constant > 0.0);
    }

    #[test]
    fn completion_reproduces_flat_constant() {
        // full Gaussian integral = c_{n,s}/d^{n+2s} with c = 4^s Γ(n/2+s)/(π^{n/2}|Γ(−s)|)
        for (m, s) in [(Manifold::torus(1).unwrap(), 0.5), (Manifold::sphere(), 0.25)] {
            let n = m.dim() as f64;
            let d = 0.3;
            let (added, total) = completion_gap(m, s, d).unwrap();
            let c = 4f64.powf(s) * gamma_fn(0.5 * n + s).unwrap() / (PI.powf(0.5 * n) * gamma_fn(-s).unwrap().abs());
            assert!((total * d.powf(n + 2.0 * s) / c - 1.0).abs() < 1e-8);
            assert!(added > 0.0 && added < total);
        }
    }
}
