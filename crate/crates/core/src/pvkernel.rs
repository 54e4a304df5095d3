//! Singular-integral representation of (−Δ_g)^s.
//!
//! For s ∈ (0, 1)
//!
//! ```text
//! (−Δ_g)^s f(x) = P.V.∫ (f(x) − f(y)) K_s(x, y) dvol(y),
//! K_s(x, y) = (c_{n,s} χ u₀ + k)(x, y) / d(x, y)^{n+2s}  + smooth,
//! ```
//!
//! and for s ∈ (−1, 0) the same kernel integrated against f(y) (mean-zero f).
//! The exact kernel K_s is obtained from the heat kernel,
//! K_s = (1/|Γ(−s)|)[∫₀¹ G t^{−1−s} dt + ∫₁^∞ (G − 1/vol) t^{−1−s} dt + 1/(vol·s)].

use crate::error::{invalid, Error, Result};
use crate::geometry::{Field, Grid, Manifold, ManifoldKind, Point, SpectralBasis};
use crate::heat::{heat_at, loglog_slope};
use crate::quad;
use crate::specfun::gamma_fn;
use crate::spectral::{check_order, laplacian_apply, require_mean_zero};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// c_{n,s} = 4^s Γ(n/2+s) / (π^{n/2} |Γ(−s)|).
pub fn c_ns_constant(n: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    if n == 0 {
        return invalid("dimension must be positive");
    }
    let nh = 0.5 * n as f64;
    if nh + s <= 0.0 {
        return invalid(format!("c_ns needs n/2 + s > 0 (n = {n}, s = {s})"));
    }
    Ok(4f64.powf(s) * gamma_fn(nh + s)? / (PI.powf(nh) * gamma_fn(-s)?.abs()))
}

/// Smooth monotone cutoff: 1 on [0, R/2], 0 on [R, ∞).
pub fn cutoff(d: f64, radius: f64) -> f64 {
    let half = 0.5 * radius;
    if d <= half {
        return 1.0;
    }
    if d >= radius {
        return 0.0;
    }
    let x = (radius - d) / half; // 1 at R/2, 0 at R
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitude {
    /// u₀ = Θ^{−1/2}.
    Transport,
    /// u₀ ≡ 1 (ablation).
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Correction {
    /// k ≡ 0.
    Zero,
    /// k(x, y) = κ₁·d·χ(d), κ₁ fitted from the diagonal residual.
    Calibrated { kappa1: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct KernelSpec {
    pub s: f64,
    pub n: usize,
    pub c_ns: f64,
    pub cutoff_radius: f64,
    pub parametrix_depth: usize,
    pub amplitude: Amplitude,
    pub correction: Correction,
}

impl KernelSpec {
    /// Defaults: cutoff π/2 on S², π on tori, transport amplitude, k ≡ 0.
    pub fn new(manifold: Manifold, s: f64) -> Result<Self> {
        let n = manifold.dim();
        let cutoff_radius = if manifold.is_sphere() { 0.5 * PI } else { PI };
        Ok(KernelSpec {
            s,
            n,
            c_ns: c_ns_constant(n, s)?,
            cutoff_radius,
            parametrix_depth: 0,
            amplitude: Amplitude::Transport,
            correction: Correction::Zero,
        })
    }

    pub fn with_cutoff(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return invalid(format!("cutoff radius must be positive, got {radius}"));
        }
        self.cutoff_radius = radius;
        Ok(self)
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Fits k = κ₁ d against the exact kernel on d ∈ [0.05, 0.4].
    pub fn calibrated(mut self, manifold: Manifold) -> Result<Self> {
        let ds: Vec<f64> = (1..=8).map(|i| 0.05 * i as f64).collect();
        let p = self.n as f64 + 2.0 * self.s;
        let (mut num, mut den) = (0.0, 0.0);
        for &d in &ds {
            let k = exact_offdiagonal_kernel_at(manifold, self.s, &[d, 0.0], d)?.value;
            let r = d.powf(p) * k - self.c_ns * self.amplitude_value(manifold, d);
            num += r * d;
            den += d * d;
        }
        self.correction = Correction::Calibrated { kappa1: num / den };
        Ok(self)
    }

    fn amplitude_value(&self, manifold: Manifold, d: f64) -> f64 {
        match self.amplitude {
            Amplitude::Transport => manifold.amplitude_at(d),
            Amplitude::Unit => 1.0,
        }
    }

    /// Kernel as a function of distance.
    pub fn eval_at(&self, manifold: Manifold, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return invalid("kernel is singular at d = 0");
        }
        let chi = cutoff(d, self.cutoff_radius);
        if chi == 0.0 {
            return Ok(0.0);
        }
        let k = match self.correction {
            Correction::Zero => 0.0,
            Correction::Calibrated { kappa1 } => kappa1 * d,
        };
        let u0 = if d < manifold.injectivity_radius() { self.amplitude_value(manifold, d) } else { 0.0 };
        Ok(chi * (self.c_ns * u0 + k) / d.powf(self.n as f64 + 2.0 * self.s))
    }
}

/// [c_ns χ u₀ + k](x, y) / d(x, y)^{n+2s}.
pub fn kernel_eval(x: &Point, y: &Point, spec: &KernelSpec, manifold: Manifold) -> Result<f64> {
    let d = manifold.distance(x, y);
    if d == 0.0 {
        return invalid("kernel_eval: x = y is singular");
    }
    spec.eval_at(manifold, d)
}

/// Exact kernel split into its total value and the constant equilibrium
/// contribution 1/(vol·s·|Γ(−s)|) contained in it.
#[derive(Clone, Copy, Debug)]
pub struct ExactKernel {
    pub value: f64,
    pub equilibrium: f64,
}

impl ExactKernel {
    pub fn without_equilibrium(&self) -> f64 {
        self.value - self.equilibrium
    }
}

/// Exact off-diagonal kernel K_s(x, y) from the heat route.
pub fn exact_offdiagonal_kernel(x: &Point, y: &Point, s: f64, manifold: Manifold) -> Result<ExactKernel> {
    let d = manifold.distance(x, y);
    let off = if manifold.is_sphere() { [d, 0.0] } else { manifold.torus_offset(x, y) };
    exact_offdiagonal_kernel_at(manifold, s, &off, d)
}

/// Same as [`exact_offdiagonal_kernel`] at a displacement (`offset` is used on
/// tori, `d` on the sphere).
pub fn exact_offdiagonal_kernel_at(manifold: Manifold, s: f64, offset: &[f64; 2], d: f64) -> Result<ExactKernel> {
    check_order(s)?;
    if !(d > 0.0) {
        return invalid("exact kernel is singular at d = 0");
    }
    if let ManifoldKind::Torus { dim: 1 } = manifold.kind() {
        if s <= -0.5 {
            return invalid(format!("on T¹ the kernel needs n + 2s > 0, got s = {s}"));
        }
    }
    let norm = gamma_fn(-s)?.abs();
    let vol = manifold.volume();
    let t_lo = (d * d / 2960.0).max(1e-14);
    let small: f64 = quad::geometric_rule(t_lo, 1.0, 1.25, 8)
        .iter()
        .map(|&(t, w)| w * heat_at(manifold, offset, d, t) * t.powf(-1.0 - s))
        .sum();
    let large: f64 = quad::geometric_rule(1.0, 60.0, 1.25, 8)
        .iter()
        .map(|&(t, w)| w * (heat_at(manifold, offset, d, t) - 1.0 / vol) * t.powf(-1.0 - s))
        .sum();
    let equilibrium = 1.0 / (vol * s * norm);
    let value = (small + large) / norm + equilibrium;
    if !value.is_finite() {
        return Err(Error::NonConvergence(format!("exact kernel quadrature failed at d = {d}")));
    }
    Ok(ExactKernel { value, equilibrium })
}

/// Hurwitz zeta ζ(p, a) for p > 1, a > 0 (direct sum plus Euler–Maclaurin).
fn hurwitz_zeta(p: f64, a: f64) -> f64 {
    let n = 20;
    let mut acc: f64 = (0..n).map(|k| (a + k as f64).powf(-p)).sum();
    let x = a + n as f64;
    acc += x.powf(1.0 - p) / (p - 1.0) + 0.5 * x.powf(-p);
    // Bernoulli terms B₂/2!, B₄/4!, B₆/6!
    let b = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0];
    let mut rising = p;
    let mut pow = x.powf(-p - 1.0);
    for (j, bj) in b.iter().enumerate() {
        acc += bj * rising * pow;
        let m = 2 * j as i32 + 1;
        rising *= (p + m as f64) * (p + m as f64 + 1.0);
        pow /= x * x;
    }
    acc
}

/// c_{n,s} Σ_ν |δ − 2πν|^{−n−2s} on Tⁿ: near images summed directly, the
/// rest added analytically (Hurwitz zeta in 1-d, the integral of
/// |2πν|^{−n−2s} outside the box in 2-d).
pub fn lattice_kernel(n: usize, s: f64, offset: &[f64; 2]) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("lattice kernel needs s ∈ (0, 1), got {s}"));
    }
    let c = c_ns_constant(n, s)?;
    let p = n as f64 + 2.0 * s;
    let tau = 2.0 * PI;
    match n {
        1 => {
            let x = offset[0];
            let mut acc: f64 = (-3..=3).map(|nu: i32| (x - tau * nu as f64).abs().powf(-p)).sum();
            let a = x / tau;
            acc += tau.powf(-p) * (hurwitz_zeta(p, 4.0 - a) + hurwitz_zeta(p, 4.0 + a));
            Ok(c * acc)
        }
        2 => {
            let mut acc = 0.0;
            // the integral tail is only midpoint-accurate, so the box is wide
            const B: i32 = 60;
            for i in -B..=B {
                for j in -B..=B {
                    let dx = offset[0] - tau * i as f64;
                    let dy = offset[1] - tau * j as f64;
                    acc += (dx * dx + dy * dy).sqrt().powf(-p);
                }
            }
            // ∫ outside the square of half-width B + ½ in ν, polar: r_b(φ) = (B + ½)/cos φ
            let rb = B as f64 + 0.5;
            let rule = quad::uniform_rule(0.0, 0.25 * PI, 4, 16);
            let octant: f64 = rule
                .iter()
                .map(|&(phi, w)| w * (rb / phi.cos()).powf(2.0 - p) / (p - 2.0))
                .sum();
            acc += 8.0 * octant * tau.powf(-p);
            Ok(c * acc)
        }
        _ => invalid("lattice kernel defined for n = 1, 2"),
    }
}

/// Piecewise Chebyshev table of g(d) = d^{p}·K(d) on [d_lo, π] with panels
/// doubling in length away from d_lo.
struct RadialTable {
    power: f64,
    panels: Vec<(f64, f64, Vec<f64>)>,
    order: usize,
}

impl RadialTable {
    fn build(d_lo: f64, d_hi: f64, power: f64, order: usize, k: impl Fn(f64) -> Result<f64> + Sync) -> Result<Self> {
        let mut edges = vec![d_lo];
        let mut e = d_lo;
        while e < d_hi {
            e = (2.0 * e).min(d_hi);
            if d_hi - e < 0.25 * e {
                e = d_hi;
            }
            edges.push(e);
        }
        let jobs: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
        let panels = jobs
            .par_iter()
            .map(|&(a, b)| {
                let vals = (0..=order)
                    .map(|j| {
                        let x = (PI * j as f64 / order as f64).cos();
                        let d = 0.5 * (a + b) + 0.5 * (b - a) * x;
                        Ok(d.powf(power) * k(d)?)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((a, b, vals))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialTable { power, panels, order })
    }

    fn eval(&self, d: f64) -> f64 {
        let idx = self
            .panels
            .iter()
            .position(|p| d <= p.1)
            .unwrap_or(self.panels.len() - 1);
        let (a, b, vals) = &self.panels[idx];
        let x = ((2.0 * d - a - b) / (b - a)).clamp(-1.0, 1.0);
        // barycentric formula on Chebyshev–Lobatto nodes
        let (mut num, mut den) = (0.0, 0.0);
        for (j, v) in vals.iter().enumerate() {
            let xj = (PI * j as f64 / self.order as f64).cos();
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == self.order {
                w *= 0.5;
            }
            let diff = x - xj;
            if diff == 0.0 {
                return v / d.powf(self.power);
            }
            num += w * v / diff;
            den += w / diff;
        }
        num / den / d.powf(self.power)
    }
}

/// How far the kernel reaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PvMode {
    /// Only the spec kernel (c χ u₀ + k)/d^{n+2s}; the far field is dropped.
    Representation,
    /// The exact kernel everywhere (equals the spec kernel plus its smooth remainder).
    FullOperator,
}

/// Discretization of the principal value on a grid.
#[derive(Clone)]
pub struct PvScheme {
    pub epsilon: f64,
    pub grid: Arc<Grid>,
    pub symmetrized: bool,
    pub mode: PvMode,
    /// Adds the second-order Taylor model of the excluded ball.
    pub ball_correction: bool,
    basis: Arc<SpectralBasis>,
}

impl PvScheme {
    /// ε = `multiplier`·spacing, full-operator mode with the ball correction.
    pub fn new(grid: Arc<Grid>, multiplier: f64) -> Result<Self> {
        let epsilon = multiplier * grid.spacing();
        PvScheme::with_epsilon(grid, epsilon)
    }

    pub fn with_epsilon(grid: Arc<Grid>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 2.0 * grid.spacing() * (1.0 - 1e-12)) {
            return invalid(format!(
                "ε = {epsilon} is below twice the grid spacing {}",
                grid.spacing()
            ));
        }
        let band = match grid.manifold().kind() {
            ManifoldKind::Sphere => grid.resolution() - 1,
            _ => (grid.resolution() - 1) / 2,
        };
        let basis = Arc::new(SpectralBasis::new(grid.clone(), band)?);
        Ok(PvScheme {
            epsilon,
            grid,
            symmetrized: true,
            mode: PvMode::FullOperator,
            ball_correction: true,
            basis,
        })
    }

    pub fn with_mode(mut self, mode: PvMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_ball_correction(mut self, on: bool) -> Self {
        self.ball_correction = on;
        self
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }
}

/// One kernel row per orbit representative.
struct Row {
    rep: usize,
    /// Radius of a ball with the excluded quadrature volume.
    eps_star: f64,
    /// K − c u₀/d^{n+2s} at ε*: the bounded part of the kernel in the ball.
    regular: f64,
    /// (j, w_j K(rep, j)) for d(rep, j) > ε.
    entries: Vec<(usize, f64)>,
}

struct KernelRows {
    rows: Vec<Row>,
    /// row index for each orbit representative
    row_of: Vec<usize>,
}

fn kernel_rows(spec: &KernelSpec, scheme: &PvScheme) -> Result<KernelRows> {
    let grid = &scheme.grid;
    let m = grid.manifold();
    let reps = grid.orbit_representatives();
    let eps = scheme.epsilon;
    let table = match (scheme.mode, m.kind()) {
        (PvMode::FullOperator, ManifoldKind::Sphere) => Some(RadialTable::build(0.5 * eps, PI, 2.0 + 2.0 * spec.s, 16, |d| {
            Ok(exact_offdiagonal_kernel_at(m, spec.s, &[d, 0.0], d)?.value)
        })?),
        _ => None,
    };
    // kernel at a displacement (offset used on tori only)
    let kernel_fn = |off: &[f64; 2], d: f64| -> Result<f64> {
        match (scheme.mode, &table) {
            (PvMode::Representation, _) => spec.eval_at(m, d),
            (PvMode::FullOperator, Some(t)) => Ok(t.eval(d)),
            (PvMode::FullOperator, None) => Ok(exact_offdiagonal_kernel_at(m, spec.s, off, d)?.value),
        }
    };
    let pts = grid.points();
    let offset = |i: usize, j: usize, d: f64| if m.is_sphere() { [d, 0.0] } else { m.torus_offset(&pts[i], &pts[j]) };
    let weights = grid.weights();
    let rows = reps
        .iter()
        .map(|&r| {
            let entries: Vec<Result<Option<(usize, f64)>>> = (0..grid.len())
                .into_par_iter()
                .map(|j| {
                    let d = grid.distance(r, j);
                    if d <= eps {
                        return Ok(None);
                    }
                    Ok(Some((j, weights[j] * kernel_fn(&offset(r, j, d), d)?)))
                })
                .collect();
            let mut row = Vec::with_capacity(grid.len());
            let mut excluded = 0.0;
            for (j, e) in entries.into_iter().enumerate() {
                match e? {
                    Some(p) => row.push(p),
                    None => excluded += weights[j],
                }
            }
            let eps_star = m.ball_radius_for_volume(excluded);
            let p = spec.n as f64 + 2.0 * spec.s;
            let singular = spec.c_ns * spec.amplitude_value(m, eps_star) / eps_star.powf(p);
            let regular = kernel_fn(&[eps_star, 0.0], eps_star)? - singular;
            Ok(Row { rep: r, eps_star, regular, entries: row })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut row_of = vec![0; grid.len()];
    for (k, row) in rows.iter().enumerate() {
        row_of[row.rep] = k;
    }
    Ok(KernelRows { rows, row_of })
}

fn check_scheme(f: &Field, spec: &KernelSpec, scheme: &PvScheme) -> Result<()> {
    if **f.grid() != *scheme.grid {
        return Err(Error::GridMismatch("field and PV scheme use different grids".into()));
    }
    if spec.n != scheme.grid.manifold().dim() {
        return invalid("kernel dimension does not match the manifold");
    }
    Ok(())
}

/// P.V. quadrature of (f(x) − f(y))·K(x, y) outside the ε-ball, plus the
/// Taylor model c ω ε*^{2−2s}/(2n(2−2s))·(−Δf)(x) of the ball, with ε* the
/// radius of a ball whose volume equals the excluded quadrature weight.
pub fn pv_apply(f: &Field, spec: &KernelSpec, scheme: &PvScheme) -> Result<Field> {
    check_order(spec.s)?;
    if spec.s < 0.0 {
        return invalid("pv_apply needs s ∈ (0, 1); use riesz_apply for negative orders");
    }
    if !scheme.symmetrized {
        return invalid("pv_apply requires the symmetrized difference f(x) − f(y)");
    }
    check_scheme(f, spec, scheme)?;
    let grid = &scheme.grid;
    let m = grid.manifold();
    let rows = kernel_rows(spec, scheme)?;
    let lap = if scheme.ball_correction { Some(laplacian_apply(f, &scheme.basis)?) } else { None };
    let n = m.dim() as f64;
    let omega = m.unit_sphere_area();
    let s = spec.s;
    let vals = f.values();
    let mut out = vec![Complex64::default(); grid.len()];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (rep, shift) = grid.orbit_of(i);
        let row = &rows.rows[rows.row_of[rep]];
        let fx = vals[i];
        let mut acc = Complex64::default();
        for &(j, wk) in &row.entries {
            acc += (fx - vals[grid.shifted(j, shift)]) * wk;
        }
        if let Some(lap) = &lap {
            let e = row.eps_star;
            let coef = spec.c_ns * omega * e.powf(2.0 - 2.0 * s) / (2.0 * n * (2.0 - 2.0 * s));
            acc += lap.values()[i] * coef;
        }
        *o = acc;
    });
    Field::new(grid.clone(), out)
}

/// ∫ f(y) K(x, y) dvol(y) for s ∈ (−1, 0) on mean-zero f, with the excluded
/// ball modelled by f(x)[c ω ε*^{−2s}/(−2s) + R |B(ε*)|] + (Δf)(x) c ω ε*^{2−2s}/(2n(2−2s)),
/// R the bounded part of the kernel at ε*.
pub fn riesz_apply(f: &Field, spec: &KernelSpec, scheme: &PvScheme) -> Result<Field> {
    check_order(spec.s)?;
    if spec.s > 0.0 {
        return invalid("riesz_apply needs s ∈ (−1, 0)");
    }
    check_scheme(f, spec, scheme)?;
    require_mean_zero(f, "riesz_apply")?;
    let grid = &scheme.grid;
    let m = grid.manifold();
    if let ManifoldKind::Torus { dim: 1 } = m.kind() {
        if spec.s <= -0.5 {
            return invalid(format!("on T¹ the Riesz kernel needs s > −1/2, got {}", spec.s));
        }
    }
    let rows = kernel_rows(spec, scheme)?;
    let lap = if scheme.ball_correction { Some(laplacian_apply(f, &scheme.basis)?) } else { None };
    let n = m.dim() as f64;
    let omega = m.unit_sphere_area();
    let s = spec.s;
    let vals = f.values();
    let mut out = vec![Complex64::default(); grid.len()];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (rep, shift) = grid.orbit_of(i);
        let row = &rows.rows[rows.row_of[rep]];
        let mut acc = Complex64::default();
        for &(j, wk) in &row.entries {
            acc += vals[grid.shifted(j, shift)] * wk;
        }
        let e = row.eps_star;
        let ball = spec.c_ns * omega * e.powf(-2.0 * s) / (-2.0 * s) + row.regular * m.ball_volume(e);
        acc += vals[i] * ball;
        if let Some(lap) = &lap {
            // f(y) ≈ f(x) + ½ (y−x)ᵀH(y−x): the Hessian term averages to Δf/(2n) r²
            let coef = spec.c_ns * omega * e.powf(2.0 - 2.0 * s) / (2.0 * n * (2.0 - 2.0 * s));
            acc -= lap.values()[i] * coef;
        }
        *o = acc;
    });
    Field::new(grid.clone(), out)
}

/// Representation-mode error measured in L^∞ and in H^{−N}:
/// (‖e‖_∞, (Σ (1+λ)^{−N} |ê|²)^{1/2}) with e = representation − truth.
pub fn representation_error_norms(f: &Field, spec: &KernelSpec, scheme: &PvScheme, truth: &Field, depth: usize) -> Result<(f64, f64)> {
    let rep = pv_apply(f, spec, &scheme.clone().with_mode(PvMode::Representation))?;
    let e = rep.sub(truth)?;
    let c = scheme.basis.analyze(&e)?;
    let h: f64 = c
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, a)| (1.0 + c.lambda(i)).powf(-(depth as f64)) * a.norm_sqr())
        .sum();
    Ok((e.linf_norm(), h.sqrt()))
}

/// Result of the diagonal-asymptotics check.
#[derive(Clone, Debug)]
pub struct DiagonalReport {
    pub limit: f64,
    pub target: f64,
    pub slope: f64,
    /// (d, d^{n+2s} K_s, residual r(d))
    pub samples: Vec<(f64, f64, f64)>,
}

impl DiagonalReport {
    pub fn relative_limit_error(&self) -> f64 {
        (self.limit - self.target).abs() / self.target
    }
}

/// r(d) = d^{n+2s} K_s(x, y(d)) − c_ns u₀(d) along a geodesic from x; returns
/// the extrapolated limit of d^{n+2s} K_s and the log-log slope of |r|.
pub fn diagonal_asymptotics_check(s: f64, manifold: Manifold, d_sequence: &[f64], amplitude: Amplitude) -> Result<DiagonalReport> {
    if d_sequence.len() < 3 {
        return invalid("diagonal check needs at least three distances");
    }
    if d_sequence.windows(2).any(|w| !(w[1] < w[0])) || d_sequence.iter().any(|&d| !(d > 0.0 && d < manifold.injectivity_radius())) {
        return invalid("d_sequence must decrease within (0, injectivity radius)");
    }
    let n = manifold.dim();
    let target = c_ns_constant(n, s)?;
    let p = n as f64 + 2.0 * s;
    let mut samples = Vec::with_capacity(d_sequence.len());
    for &d in d_sequence {
        let k = exact_offdiagonal_kernel_at(manifold, s, &[d, 0.0], d)?.value;
        let g = d.powf(p) * k;
        let u0 = match amplitude {
            Amplitude::Transport => manifold.amplitude_at(d),
            Amplitude::Unit => 1.0,
        };
        samples.push((d, g, g - target * u0));
    }
    // Richardson on the last three samples with the observed exponent
    let k = samples.len();
    let (d1, g1, _) = samples[k - 3];
    let (d2, g2, _) = samples[k - 2];
    let (d3, g3, _) = samples[k - 1];
    let limit = {
        let a = (g1 - g2) / (g2 - g3);
        let q = d1 / d2;
        let alpha = if a > 0.0 && (q - d2 / d3).abs() < 1e-9 { a.ln() / q.ln() } else { f64::NAN };
        if alpha.is_finite() && alpha > 0.0 {
            g3 - (g2 - g3) / ((d2 / d3).powf(alpha) - 1.0)
        } else {
            // non-monotone or uneven sequence: fit g = L + a d²
            let r = (d2 / d3).powi(2);
            (r * g3 - g2) / (r - 1.0)
        }
    };
    let ds: Vec<f64> = samples.iter().map(|x| x.0).collect();
    let rs: Vec<f64> = samples.iter().map(|x| x.2.abs().max(1e-300)).collect();
    Ok(DiagonalReport { limit, target, slope: loglog_slope(&ds, &rs), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mode;
    use crate::spectral::fractional_apply_spectral;

    /// ∫₀^∞ (1 − cos u) u^{−1−2s} du, by tanh–sinh on periods (u = v² near 0)
    /// and two integration-by-parts terms for the oscillatory tail.
    fn symbol_integral(s: f64) -> f64 {
        let a = 1.0 + 2.0 * s;
        let head = quad::tanh_sinh(|v: f64| if v == 0.0 { 0.0 } else { 4.0 * (0.5 * v * v).sin().powi(2) * v.powf(-1.0 - 4.0 * s) }, 0.0, 1.0, 1e-15);
        let m = 200;
        let mut body = 0.0;
        for k in 0..m {
            let lo = if k == 0 { 1.0 } else { 2.0 * PI * k as f64 };
            let hi = 2.0 * PI * (k + 1) as f64;
            body += quad::tanh_sinh(|u: f64| 2.0 * (0.5 * u).sin().powi(2) * u.powf(-a), lo, hi, 1e-15);
        }
        let u = 2.0 * PI * m as f64;
        // ∫_U^∞ u^{−a} = U^{1−a}/(a−1); ∫_U^∞ cos u u^{−a} ≈ a U^{−a−1} − a(a+1)(a+2) U^{−a−3}
        let tail = u.powf(1.0 - a) / (a - 1.0) - (a * u.powf(-a - 1.0) - a * (a + 1.0) * (a + 2.0) * u.powf(-a - 3.0));
        head + body + tail
    }

    #[test]
    fn c_ns_reproduces_the_symbol() {
        for &s in &[0.25, 0.5, 0.75] {
            let i = symbol_integral(s);
            // 1-d: c ∫_ℝ (1 − cos ξ)|ξ|^{−1−2s} dξ = 1
            assert!((c_ns_constant(1, s).unwrap() * 2.0 * i - 1.0).abs() < 1e-7, "s={s} {}", c_ns_constant(1, s).unwrap() * 2.0 * i - 1.0);
            // 2-d: c ∫ |cos φ|^{2s} dφ ∫ (1 − cos u) u^{−1−2s} du = 1
            let ang = 4.0 * quad::tanh_sinh(|p: f64| p.cos().max(0.0).powf(2.0 * s), 0.0, 0.5 * PI, 1e-15);
            assert!((c_ns_constant(2, s).unwrap() * ang * i - 1.0).abs() < 1e-7, "s={s}");
        }
        assert!((c_ns_constant(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
        assert!((c_ns_constant(2, 0.5).unwrap() - 0.5 / PI).abs() < 1e-14);
        // s → 0⁺: c_{n,s} ≈ s Γ(n/2)/π^{n/2}
        let s = 1e-5;
        assert!((c_ns_constant(2, s).unwrap() / s * PI - 1.0).abs() < 1e-3);
        assert!((c_ns_constant(1, s).unwrap() / s - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cutoff_shape() {
        let r = 2.0;
        assert_eq!(cutoff(0.9, r), 1.0);
        assert_eq!(cutoff(2.0, r), 0.0);
        let mut last = 1.0;
        for i in 1..100 {
            let v = cutoff(1.0 + i as f64 / 100.0, r);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
    }

    #[test]
    fn kernel_eval_examples() {
        let t1 = Manifold::torus(1).unwrap();
        let spec = KernelSpec::new(t1, 0.5).unwrap();
        let d = 0.01;
        assert!((spec.eval_at(t1, d).unwrap() - spec.c_ns / d.powi(2)).abs() < 1e-9);
        let s2 = Manifold::sphere();
        let spec = KernelSpec::new(s2, 0.5).unwrap();
        let want = c_ns_constant(2, 0.5).unwrap() * (0.2 / 0.2f64.sin()).sqrt() / 0.2f64.powi(3);
        assert!((spec.eval_at(s2, 0.2).unwrap() - want).abs() < 1e-12);
        assert_eq!(spec.eval_at(s2, 2.0).unwrap(), 0.0);
        let x = s2.point(&[0.3, 0.3]).unwrap();
        assert!(kernel_eval(&x, &x, &spec, s2).is_err());
    }

    #[test]
    fn torus_exact_kernel_matches_lattice_sum() {
        let t1 = Manifold::torus(1).unwrap();
        // s = 1/2 closed form: (1/π) Σ_ν (d − 2πν)^{−2} = (1/π)/(4 sin²(d/2))
        let d: f64 = 0.5;
        let k = exact_offdiagonal_kernel_at(t1, 0.5, &[d, 0.0], d).unwrap();
        let closed = 1.0 / (PI * 4.0 * (0.5 * d).sin().powi(2));
        assert!((k.value - closed).abs() < 1e-8 * closed, "{} vs {closed}", k.value);
        assert!((lattice_kernel(1, 0.5, &[d, 0.0]).unwrap() - closed).abs() < 1e-10 * closed);
        for &s in &[0.25, 0.75] {
            for &d in &[0.1, 1.0, 3.0] {
                let k = exact_offdiagonal_kernel_at(t1, s, &[d, 0.0], d).unwrap().value;
                let l = lattice_kernel(1, s, &[d, 0.0]).unwrap();
                assert!((k - l).abs() < 1e-7 * l, "s={s} d={d}: {k} vs {l}");
            }
        }
        let t2 = Manifold::torus(2).unwrap();
        for &s in &[0.25, 0.5, 0.75] {
            for off in [[0.3, 0.0], [1.0, -2.0], [PI, PI]] {
                let d = (off[0] * off[0] + off[1] * off[1]).sqrt();
                let k = exact_offdiagonal_kernel_at(t2, s, &off, d).unwrap().value;
                let l = lattice_kernel(2, s, &off).unwrap();
                assert!((k - l).abs() < 1e-5 * l, "s={s} off={off:?}: {k} vs {l}");
            }
        }
    }

    #[test]
    fn sphere_kernel_diagonal_limit() {
        let ds = [0.2, 0.1, 0.05, 0.025];
        let r = diagonal_asymptotics_check(0.5, Manifold::sphere(), &ds, Amplitude::Transport).unwrap();
        assert!(r.relative_limit_error() < 0.02, "{r:?}");
        assert!(r.slope >= 0.8, "{r:?}");
        // finite smooth value near the antipode
        let s2 = Manifold::sphere();
        let k = exact_offdiagonal_kernel_at(s2, 0.5, &[3.1, 0.0], 3.1).unwrap();
        assert!(k.value.is_finite());
    }

    #[test]
    fn pv_annihilates_constants_and_matches_truth_on_t1() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 256).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let spec = KernelSpec::new(t1, 0.5).unwrap();
        let one = Field::constant(g.clone(), 3.0);
        assert!(pv_apply(&one, &spec, &scheme).unwrap().linf_norm() < 1e-10);
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].sin());
        let out = pv_apply(&f, &spec, &scheme).unwrap();
        assert!(out.rel_l2_error(&f).unwrap() < 1e-2);
        assert!(PvScheme::new(g.clone(), 1.0).is_err());
    }

    #[test]
    fn pv_on_sphere_y10() {
        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 32).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let spec = KernelSpec::new(s2, 0.5).unwrap();
        let y10 = scheme.basis().eigenfunction_of(Mode::Harmonic { l: 1, m: 0 }).unwrap();
        let truth = fractional_apply_spectral(&y10, 0.5, scheme.basis()).unwrap();
        let out = pv_apply(&y10, &spec, &scheme).unwrap();
        assert!(out.rel_l2_error(&truth).unwrap() < 5e-2, "{}", out.rel_l2_error(&truth).unwrap());
    }

    fn band_field(basis: &SpectralBasis, seed: f64) -> Field {
        let mut c = basis.zero_coeffs();
        for (i, v) in c.coeffs_mut().iter_mut().enumerate().skip(1) {
            *v = (seed * i as f64).sin().into();
        }
        basis.synthesize(&c).unwrap()
    }

    #[test]
    fn riesz_matches_spectral() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 256).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let spec = KernelSpec::new(t1, -0.25).unwrap();
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].sin());
        let out = riesz_apply(&f, &spec, &scheme).unwrap();
        assert!(out.rel_l2_error(&f).unwrap() < 5e-2);
        assert!(riesz_apply(&Field::constant(g.clone(), 1.0), &spec, &scheme).is_err());
        assert!(KernelSpec::new(t1, -0.5).is_err());

        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 32).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let spec = KernelSpec::new(s2, -0.5).unwrap();
        let y20 = scheme.basis().eigenfunction_of(Mode::Harmonic { l: 2, m: 0 }).unwrap();
        let out = riesz_apply(&y20, &spec, &scheme).unwrap();
        assert!(out.rel_l2_error(&y20.scaled(6f64.powf(-0.5))).unwrap() < 5e-2);
    }

    #[test]
    fn riesz_inverts_pv() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 256).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let basis = SpectralBasis::new(g.clone(), 6).unwrap();
        let f = band_field(&basis, 1.3);
        let s = 0.25;
        let forward = pv_apply(&f, &KernelSpec::new(t1, s).unwrap(), &scheme).unwrap().project_mean_zero();
        let back = riesz_apply(&forward, &KernelSpec::new(t1, -s).unwrap(), &scheme).unwrap();
        assert!(back.rel_l2_error(&f).unwrap() < 5e-2);
    }

    #[test]
    fn pv_is_nearly_self_adjoint() {
        let s2 = Manifold::sphere();
        let g = Grid::build(s2, 24).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap().with_ball_correction(false);
        let spec = KernelSpec::new(s2, 0.5).unwrap();
        let basis = SpectralBasis::new(g.clone(), 5).unwrap();
        let f = band_field(&basis, 0.7);
        let h = band_field(&basis, 2.9);
        let af = pv_apply(&f, &spec, &scheme).unwrap();
        let ah = pv_apply(&h, &spec, &scheme).unwrap();
        let lhs = af.inner(&h).unwrap();
        let rhs = f.inner(&ah).unwrap();
        let scale = af.l2_norm() * h.l2_norm();
        assert!((lhs - rhs).norm() < 1e-10 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn pv_is_nonnegative_at_a_strict_maximum() {
        let t2 = Manifold::torus(2).unwrap();
        let g = Grid::build(t2, 32).unwrap();
        let scheme = PvScheme::new(g.clone(), 2.0).unwrap().with_ball_correction(false);
        let c = g.points()[g.len() / 2 + 16].clone();
        let bump = Field::from_real_fn(g.clone(), |p| (-t2.distance(p, &c).powi(2)).exp());
        let i = (0..g.len()).find(|&i| t2.distance(&g.points()[i], &c) == 0.0).unwrap();
        for &s in &[0.25, 0.5, 0.75] {
            let out = pv_apply(&bump, &KernelSpec::new(t2, s).unwrap(), &scheme).unwrap();
            assert!(out.values()[i].re > 0.0);
        }
    }

    #[test]
    fn representation_mode_error_norms() {
        let t1 = Manifold::torus(1).unwrap();
        let g = Grid::build(t1, 128).unwrap();
        let scheme = PvScheme::new(g.clone(), 4.0).unwrap();
        let spec = KernelSpec::new(t1, 0.5).unwrap();
        let f = Field::from_real_fn(g.clone(), |p| (2.0 * p.coords()[0]).cos());
        let truth = f.scaled(2.0);
        let (linf, hn) = representation_error_norms(&f, &spec, &scheme, &truth, 2).unwrap();
        // dropping the far field costs an O(‖f‖) error, smaller in negative norms
        assert!(linf > 1e-3 && hn < linf);
    }
}
