//! Eigenbases of −Δ_g on the model manifolds and the grid transforms
//! (discrete Fourier on tori, Gauss–Legendre spherical-harmonic transform on S²).

use super::grid::{Field, Grid, GridLayout};
use super::ManifoldKind;
use crate::csvio;
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

/// Label of one eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// e^{ikx}/√(2π) on T¹.
    Fourier1 { k: i64 },
    /// e^{i(k₁x₁+k₂x₂)}/(2π) on T².
    Fourier2 { k1: i64, k2: i64 },
    /// Real spherical harmonic Y_{ℓ,m}: m > 0 uses cos(mφ), m < 0 uses sin(|m|φ).
    Harmonic { l: usize, m: i64 },
}

impl Mode {
    pub fn eigenvalue(&self) -> f64 {
        match *self {
            Mode::Fourier1 { k } => (k * k) as f64,
            Mode::Fourier2 { k1, k2 } => (k1 * k1 + k2 * k2) as f64,
            Mode::Harmonic { l, .. } => (l * (l + 1)) as f64,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.eigenvalue() == 0.0
    }
}

/// An eigenvalue with its eigenfunction sampled on a grid.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub mode: Mode,
    pub lambda: f64,
    pub eigenfunction: Field,
}

/// Expansion coefficients a_ν = ⟨f, Y_ν⟩ against a [`SpectralBasis`].
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    modes: Arc<Vec<Mode>>,
    coeffs: Vec<Complex64>,
    band_limit: usize,
}

impl SpectralCoeffs {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.modes[i].eigenvalue()
    }

    /// Σ |a_ν|².
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a spectral multiplier a_ν ↦ m(λ_ν)·a_ν.
    pub fn multiplied(&self, m: impl Fn(f64) -> Complex64) -> SpectralCoeffs {
        SpectralCoeffs {
            modes: self.modes.clone(),
            band_limit: self.band_limit,
            coeffs: self
                .coeffs
                .iter()
                .zip(self.modes.iter())
                .map(|(a, mode)| a * m(mode.eigenvalue()))
                .collect(),
        }
    }

    /// Coefficient of the λ = 0 mode (zero if absent).
    pub fn constant_coeff(&self) -> Complex64 {
        self.modes
            .iter()
            .position(|m| m.is_constant())
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// CSV: eigen_index, lambda, a_re, a_im.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csvio::writer(w);
        wr.write_record(["eigen_index", "lambda", "a_re", "a_im"])?;
        for (i, a) in self.coeffs.iter().enumerate() {
            wr.write_record([
                i.to_string(),
                csvio::num(self.lambda(i)),
                csvio::num(a.re),
                csvio::num(a.im),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

enum Transform {
    Torus1 { n: usize },
    Torus2 { n: usize, kmax: i64 },
    Sphere {
        nlat: usize,
        nlon: usize,
        lmax: usize,
        /// normalized associated Legendre λ_ℓ^m(θ_i), indexed [ring][tri(ℓ, m)]
        legendre: Vec<Vec<f64>>,
        cos_tab: Vec<f64>,
        sin_tab: Vec<f64>,
    },
}

/// Band-limited eigenbasis attached to a grid, with forward/inverse transforms.
pub struct SpectralBasis {
    grid: Arc<Grid>,
    band_limit: usize,
    modes: Arc<Vec<Mode>>,
    transform: Transform,
}

fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre functions (no Condon–Shortley phase)
/// such that Y_{ℓ,0} = λ_ℓ^0(θ) and ∫_{S²} Y² = 1 for Y = √2 λ_ℓ^m(θ) cos(mφ).
pub(crate) fn normalized_legendre(lmax: usize, theta: f64) -> Vec<f64> {
    let (st, ct) = theta.sin_cos();
    let mut out = vec![0.0; tri(lmax, lmax) + 1];
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st;
        }
        out[tri(m, m)] = pmm;
        if m < lmax {
            let mut prev2 = pmm;
            let mut prev1 = ((2 * m + 3) as f64).sqrt() * ct * pmm;
            out[tri(m + 1, m)] = prev1;
            for l in (m + 2)..=lmax {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let cur = a * (ct * prev1 - b * prev2);
                out[tri(l, m)] = cur;
                prev2 = prev1;
                prev1 = cur;
            }
        }
    }
    out
}

impl SpectralBasis {
    /// Torus: |k_j| ≤ band_limit (needs resolution ≥ 2·band_limit + 1).
    /// Sphere: ℓ ≤ band_limit (needs resolution ≥ band_limit + 1).
    pub fn new(grid: Arc<Grid>, band_limit: usize) -> Result<Self> {
        let (modes, transform) = match grid.layout() {
            GridLayout::Torus1 { n } => {
                if 2 * band_limit + 1 > n {
                    return nyquist(band_limit, n);
                }
                let k = band_limit as i64;
                let mut modes: Vec<Mode> = (-k..=k).map(|k| Mode::Fourier1 { k }).collect();
                modes.sort_by_key(|m| match *m {
                    Mode::Fourier1 { k } => (k * k, -k),
                    _ => unreachable!(),
                });
                (modes, Transform::Torus1 { n })
            }
            GridLayout::Torus2 { n } => {
                if 2 * band_limit + 1 > n {
                    return nyquist(band_limit, n);
                }
                let k = band_limit as i64;
                let mut modes = Vec::new();
                for k1 in -k..=k {
                    for k2 in -k..=k {
                        modes.push(Mode::Fourier2 { k1, k2 });
                    }
                }
                modes.sort_by_key(|m| match *m {
                    Mode::Fourier2 { k1, k2 } => (k1 * k1 + k2 * k2, -k1, -k2),
                    _ => unreachable!(),
                });
                (modes, Transform::Torus2 { n, kmax: k })
            }
            GridLayout::Sphere { nlat, nlon } => {
                if band_limit + 1 > nlat {
                    return nyquist(band_limit, nlat);
                }
                let mut modes = Vec::new();
                for l in 0..=band_limit {
                    for m in -(l as i64)..=(l as i64) {
                        modes.push(Mode::Harmonic { l, m });
                    }
                }
                let legendre = (0..nlat)
                    .map(|i| {
                        let theta = grid.points()[i * nlon].coords()[0];
                        normalized_legendre(band_limit, theta)
                    })
                    .collect();
                let cos_tab = (0..nlon).map(|k| (TAU * k as f64 / nlon as f64).cos()).collect();
                let sin_tab = (0..nlon).map(|k| (TAU * k as f64 / nlon as f64).sin()).collect();
                (
                    modes,
                    Transform::Sphere { nlat, nlon, lmax: band_limit, legendre, cos_tab, sin_tab },
                )
            }
        };
        debug_assert!(matches!(grid.manifold().kind(), ManifoldKind::Torus { .. } | ManifoldKind::Sphere));
        Ok(SpectralBasis { grid, band_limit, modes: Arc::new(modes), transform })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Index of a mode, if it belongs to the basis.
    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        self.modes.iter().position(|m| *m == mode)
    }

    /// Smallest positive eigenvalue present.
    pub fn lambda_min_positive(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.eigenvalue())
            .filter(|l| *l > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes.iter().map(|m| m.eigenvalue()).fold(0.0, f64::max)
    }

    pub fn zero_coeffs(&self) -> SpectralCoeffs {
        SpectralCoeffs {
            modes: self.modes.clone(),
            coeffs: vec![Complex64::default(); self.modes.len()],
            band_limit: self.band_limit,
        }
    }

    /// Coefficients with a single unit entry.
    pub fn unit_coeffs(&self, idx: usize) -> SpectralCoeffs {
        let mut c = self.zero_coeffs();
        c.coeffs[idx] = Complex64::new(1.0, 0.0);
        c
    }

    pub fn coeffs_from(&self, coeffs: Vec<Complex64>) -> Result<SpectralCoeffs> {
        if coeffs.len() != self.modes.len() {
            return invalid(format!("expected {} coefficients, got {}", self.modes.len(), coeffs.len()));
        }
        Ok(SpectralCoeffs { modes: self.modes.clone(), coeffs, band_limit: self.band_limit })
    }

    fn check_coeffs(&self, c: &SpectralCoeffs) -> Result<()> {
        if !Arc::ptr_eq(&c.modes, &self.modes) && *c.modes != *self.modes {
            return Err(Error::GridMismatch("coefficients belong to a different basis".into()));
        }
        Ok(())
    }

    /// a_ν = Σ w f Ȳ_ν.
    pub fn analyze(&self, f: &Field) -> Result<SpectralCoeffs> {
        if **f.grid() != *self.grid {
            return Err(Error::GridMismatch("field and basis use different grids".into()));
        }
        let vals = f.values();
        let coeffs = match &self.transform {
            Transform::Torus1 { n, .. } => {
                let h = TAU / *n as f64;
                let norm = h / TAU.sqrt();
                self.modes
                    .iter()
                    .map(|m| {
                        let Mode::Fourier1 { k } = *m else { unreachable!() };
                        let mut acc = Complex64::default();
                        for (j, v) in vals.iter().enumerate() {
                            acc += v * root(*n, -k * j as i64);
                        }
                        acc * norm
                    })
                    .collect()
            }
            Transform::Torus2 { n, kmax } => {
                let n = *n;
                let h = TAU / n as f64;
                let norm = h * h / TAU;
                let width = (2 * kmax + 1) as usize;
                // partial[i][k2] = Σ_b f(i,b) e^{-i k2 x_b}
                let mut partial = vec![Complex64::default(); n * width];
                for i in 0..n {
                    for (q, k2) in (-kmax..=*kmax).enumerate() {
                        let mut acc = Complex64::default();
                        for b in 0..n {
                            acc += vals[i * n + b] * root(n, -k2 * b as i64);
                        }
                        partial[i * width + q] = acc;
                    }
                }
                self.modes
                    .iter()
                    .map(|m| {
                        let Mode::Fourier2 { k1, k2 } = *m else { unreachable!() };
                        let q = (k2 + kmax) as usize;
                        let mut acc = Complex64::default();
                        for i in 0..n {
                            acc += partial[i * width + q] * root(n, -k1 * i as i64);
                        }
                        acc * norm
                    })
                    .collect()
            }
            Transform::Sphere { nlat, nlon, lmax, legendre, cos_tab, sin_tab } => {
                let (nlat, nlon, lmax) = (*nlat, *nlon, *lmax);
                let dphi = TAU / nlon as f64;
                let gl = self.grid.ring_weights();
                let mut a = vec![Complex64::default(); self.modes.len()];
                for i in 0..nlat {
                    let ring = &vals[i * nlon..(i + 1) * nlon];
                    let w = gl[i] * dphi;
                    for m in 0..=lmax {
                        let mut c = Complex64::default();
                        let mut s = Complex64::default();
                        for (k, v) in ring.iter().enumerate() {
                            let idx = (m * k) % nlon;
                            c += v * cos_tab[idx];
                            s += v * sin_tab[idx];
                        }
                        let scale = if m == 0 { w } else { w * std::f64::consts::SQRT_2 };
                        for l in m..=lmax {
                            let p = legendre[i][tri(l, m)] * scale;
                            let base = l * l + l;
                            a[base + m] += c * p;
                            if m > 0 {
                                a[base - m] += s * p;
                            }
                        }
                    }
                }
                a
            }
        };
        Ok(SpectralCoeffs { modes: self.modes.clone(), coeffs, band_limit: self.band_limit })
    }

    /// f = Σ a_ν Y_ν on the grid.
    pub fn synthesize(&self, c: &SpectralCoeffs) -> Result<Field> {
        self.check_coeffs(c)?;
        let a = &c.coeffs;
        let n_pts = self.grid.len();
        let mut out = vec![Complex64::default(); n_pts];
        match &self.transform {
            Transform::Torus1 { n, .. } => {
                let norm = 1.0 / TAU.sqrt();
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = Complex64::default();
                    for (m, coef) in self.modes.iter().zip(a) {
                        let Mode::Fourier1 { k } = *m else { unreachable!() };
                        acc += coef * root(*n, k * j as i64);
                    }
                    *o = acc * norm;
                }
            }
            Transform::Torus2 { n, kmax } => {
                let n = *n;
                let width = (2 * kmax + 1) as usize;
                // g[i][k2] = Σ_{k1} a(k1,k2) e^{i k1 x_i}
                let mut grid_k = vec![Complex64::default(); width * width];
                for (m, coef) in self.modes.iter().zip(a) {
                    let Mode::Fourier2 { k1, k2 } = *m else { unreachable!() };
                    grid_k[(k1 + kmax) as usize * width + (k2 + kmax) as usize] = *coef;
                }
                let mut g = vec![Complex64::default(); n * width];
                for i in 0..n {
                    for q in 0..width {
                        let mut acc = Complex64::default();
                        for (p, k1) in (-kmax..=*kmax).enumerate() {
                            acc += grid_k[p * width + q] * root(n, k1 * i as i64);
                        }
                        g[i * width + q] = acc;
                    }
                }
                let norm = 1.0 / TAU;
                for i in 0..n {
                    for b in 0..n {
                        let mut acc = Complex64::default();
                        for (q, k2) in (-kmax..=*kmax).enumerate() {
                            acc += g[i * width + q] * root(n, k2 * b as i64);
                        }
                        out[i * n + b] = acc * norm;
                    }
                }
            }
            Transform::Sphere { nlat, nlon, lmax, legendre, cos_tab, sin_tab } => {
                let (nlat, nlon, lmax) = (*nlat, *nlon, *lmax);
                for i in 0..nlat {
                    let mut cm = vec![Complex64::default(); lmax + 1];
                    let mut sm = vec![Complex64::default(); lmax + 1];
                    for m in 0..=lmax {
                        for l in m..=lmax {
                            let p = legendre[i][tri(l, m)];
                            let base = l * l + l;
                            cm[m] += a[base + m] * p;
                            if m > 0 {
                                sm[m] += a[base - m] * p;
                            }
                        }
                        if m > 0 {
                            cm[m] *= std::f64::consts::SQRT_2;
                            sm[m] *= std::f64::consts::SQRT_2;
                        }
                    }
                    for k in 0..nlon {
                        let mut acc = cm[0];
                        for m in 1..=lmax {
                            let idx = (m * k) % nlon;
                            acc += cm[m] * cos_tab[idx] + sm[m] * sin_tab[idx];
                        }
                        out[i * nlon + k] = acc;
                    }
                }
            }
        }
        Field::new(self.grid.clone(), out)
    }

    /// Grid samples of the eigenfunction with index `idx`.
    pub fn eigenfunction(&self, idx: usize) -> Result<Field> {
        if idx >= self.modes.len() {
            return invalid(format!("eigen index {idx} out of range"));
        }
        self.synthesize(&self.unit_coeffs(idx))
    }

    /// Eigenfunction for a given mode label.
    pub fn eigenfunction_of(&self, mode: Mode) -> Result<Field> {
        let idx = self
            .index_of(mode)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {mode:?} not in basis")))?;
        self.eigenfunction(idx)
    }

    pub fn eigenpairs(&self) -> Result<Vec<EigenPair>> {
        (0..self.modes.len())
            .map(|i| {
                Ok(EigenPair {
                    mode: self.modes[i],
                    lambda: self.modes[i].eigenvalue(),
                    eigenfunction: self.eigenfunction(i)?,
                })
            })
            .collect()
    }
}

fn nyquist<T>(band_limit: usize, n: usize) -> Result<T> {
    invalid(format!("band limit {band_limit} exceeds the Nyquist limit of a grid with {n} nodes"))
}

/// e^{2πi·e/n} computed from the reduced exponent to avoid phase drift.
#[inline]
fn root(n: usize, e: i64) -> Complex64 {
    let r = e.rem_euclid(n as i64) as f64;
    Complex64::from_polar(1.0, TAU * r / n as f64)
}

/// Eigenpairs of −Δ_g up to `band_limit`, sampled on `grid`.
pub fn eigenbasis(grid: Arc<Grid>, band_limit: usize) -> Result<Vec<EigenPair>> {
    SpectralBasis::new(grid, band_limit)?.eigenpairs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;

    fn gram_error(pairs: &[EigenPair]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in pairs.iter().enumerate() {
            for (j, b) in pairs.iter().enumerate() {
                let g = a.eigenfunction.inner(&b.eigenfunction).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    #[test]
    fn sphere_gram_matrix_is_identity() {
        let g = Grid::build(Manifold::sphere(), 32).unwrap();
        let pairs = eigenbasis(g, 8).unwrap();
        assert_eq!(pairs.len(), 81);
        assert!(gram_error(&pairs) < 1e-8);
    }

    #[test]
    fn torus_gram_matrices_are_identity() {
        let g1 = Grid::build(Manifold::torus(1).unwrap(), 16).unwrap();
        assert!(gram_error(&eigenbasis(g1, 7).unwrap()) < 1e-12);
        let g2 = Grid::build(Manifold::torus(2).unwrap(), 12).unwrap();
        assert!(gram_error(&eigenbasis(g2, 4).unwrap()) < 1e-12);
    }

    #[test]
    fn eigenvalues() {
        let g = Grid::build(Manifold::sphere(), 8).unwrap();
        let b = SpectralBasis::new(g, 3).unwrap();
        let l1: Vec<_> = b.modes().iter().filter(|m| matches!(m, Mode::Harmonic { l: 1, .. })).collect();
        assert_eq!(l1.len(), 3);
        assert!(l1.iter().all(|m| m.eigenvalue() == 2.0));
        assert_eq!(Mode::Fourier1 { k: 3 }.eigenvalue(), 9.0);
    }

    #[test]
    fn nonconstant_eigenfunctions_integrate_to_zero() {
        for (m, res, bl) in [
            (Manifold::sphere(), 20, 10),
            (Manifold::torus(1).unwrap(), 32, 10),
            (Manifold::torus(2).unwrap(), 16, 5),
        ] {
            let b = SpectralBasis::new(Grid::build(m, res).unwrap(), bl).unwrap();
            for (i, mode) in b.modes().iter().enumerate() {
                let f = b.eigenfunction(i).unwrap();
                if !mode.is_constant() {
                    assert!(f.integral().norm() < 1e-8, "{mode:?}");
                }
            }
        }
    }

    #[test]
    fn y10_matches_closed_form() {
        let g = Grid::build(Manifold::sphere(), 8).unwrap();
        let b = SpectralBasis::new(g.clone(), 2).unwrap();
        let f = b.eigenfunction_of(Mode::Harmonic { l: 1, m: 0 }).unwrap();
        let c = (3.0 / (4.0 * PI)).sqrt();
        for (p, v) in g.points().iter().zip(f.values()) {
            assert!((v.re - c * p.coords()[0].cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn nyquist_rejected() {
        let g = Grid::build(Manifold::sphere(), 8).unwrap();
        assert!(SpectralBasis::new(g, 8).is_err());
        let t = Grid::build(Manifold::torus(1).unwrap(), 8).unwrap();
        assert!(SpectralBasis::new(t.clone(), 4).is_err());
        assert!(SpectralBasis::new(t, 3).is_ok());
    }

    #[test]
    fn analyze_synthesize_round_trip() {
        let g = Grid::build(Manifold::sphere(), 12).unwrap();
        let b = SpectralBasis::new(g, 6).unwrap();
        let coeffs: Vec<Complex64> = (0..b.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let c = b.coeffs_from(coeffs.clone()).unwrap();
        let back = b.analyze(&b.synthesize(&c).unwrap()).unwrap();
        for (x, y) in back.coeffs().iter().zip(&coeffs) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
