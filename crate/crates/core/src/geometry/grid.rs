use super::{Manifold, ManifoldKind, Point};
use crate::csvio;
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::sync::Arc;

/// Index layout of a grid; used for translation/rotation symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// `n` equispaced points on T¹.
    Torus1 { n: usize },
    /// `n × n` product grid on T², row-major in (x₁, x₂).
    Torus2 { n: usize },
    /// `nlat` Gauss–Legendre colatitudes × `nlon` equispaced longitudes, row-major.
    Sphere { nlat: usize, nlon: usize },
}

/// Quadrature grid: points and positive weights summing to the manifold volume.
#[derive(Debug, Clone)]
pub struct Grid {
    manifold: Manifold,
    resolution: usize,
    layout: GridLayout,
    points: Vec<Point>,
    weights: Vec<f64>,
    units: Vec<[f64; 3]>,
    /// Sphere only: Gauss–Legendre weights in cos θ per ring.
    ring_weights: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.manifold == other.manifold && self.resolution == other.resolution
    }
}

impl Grid {
    /// Torus: `resolution` points per axis. Sphere: `resolution` Gauss–Legendre
    /// colatitudes and `2·resolution` longitudes.
    pub fn build(manifold: Manifold, resolution: usize) -> Result<Arc<Grid>> {
        if resolution < 4 {
            return invalid(format!("grid resolution must be >= 4, got {resolution}"));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut units = Vec::new();
        let mut ring_weights = Vec::new();
        let layout = match manifold.kind() {
            ManifoldKind::Torus { dim: 1 } => {
                let h = TAU / resolution as f64;
                for i in 0..resolution {
                    points.push(manifold.point(&[i as f64 * h])?);
                    weights.push(h);
                }
                GridLayout::Torus1 { n: resolution }
            }
            ManifoldKind::Torus { .. } => {
                let h = TAU / resolution as f64;
                for i in 0..resolution {
                    for k in 0..resolution {
                        points.push(manifold.point(&[i as f64 * h, k as f64 * h])?);
                        weights.push(h * h);
                    }
                }
                GridLayout::Torus2 { n: resolution }
            }
            ManifoldKind::Sphere => {
                let nlat = resolution;
                let nlon = 2 * resolution;
                let dphi = TAU / nlon as f64;
                // ascending colatitude = descending cos θ
                let rule: Vec<(f64, f64)> = gauss_legendre(nlat).into_iter().rev().collect();
                for &(x, w) in &rule {
                    let theta = x.clamp(-1.0, 1.0).acos();
                    ring_weights.push(w);
                    for k in 0..nlon {
                        let p = manifold.point(&[theta, k as f64 * dphi])?;
                        units.push(p.unit_vector());
                        points.push(p);
                        weights.push(w * dphi);
                    }
                }
                GridLayout::Sphere { nlat, nlon }
            }
        };
        Ok(Arc::new(Grid {
            manifold,
            resolution,
            layout,
            points,
            weights,
            units,
            ring_weights,
        }))
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    /// Characteristic spacing: 2π/resolution on tori, π/resolution on the sphere.
    pub fn spacing(&self) -> f64 {
        match self.layout {
            GridLayout::Sphere { .. } => PI / self.resolution as f64,
            _ => TAU / self.resolution as f64,
        }
    }

    /// Distance between two grid points by index (uses cached unit vectors on the sphere).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self.layout {
            GridLayout::Sphere { .. } => super::great_circle(&self.units[i], &self.units[j]),
            _ => self.manifold.distance(&self.points[i], &self.points[j]),
        }
    }

    /// Σ w·v.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Indices of one point per symmetry orbit. Tori are translation invariant
    /// (one orbit); on the sphere every colatitude ring is one orbit under
    /// rotation about the polar axis.
    pub fn orbit_representatives(&self) -> Vec<usize> {
        match self.layout {
            GridLayout::Sphere { nlat, nlon } => (0..nlat).map(|a| a * nlon).collect(),
            _ => vec![0],
        }
    }

    /// (representative, symmetry shift) carrying the representative to point `i`.
    pub fn orbit_of(&self, i: usize) -> (usize, usize) {
        match self.layout {
            GridLayout::Sphere { nlon, .. } => ((i / nlon) * nlon, i % nlon),
            _ => (0, i),
        }
    }

    /// Image of point `j` under the symmetry `shift` returned by [`Grid::orbit_of`].
    #[inline]
    pub fn shifted(&self, j: usize, shift: usize) -> usize {
        match self.layout {
            GridLayout::Torus1 { n } => {
                let k = j + shift;
                if k >= n {
                    k - n
                } else {
                    k
                }
            }
            GridLayout::Torus2 { n } => {
                let (a, b) = (j / n, j % n);
                let (p, q) = (shift / n, shift % n);
                ((a + p) % n) * n + (b + q) % n
            }
            GridLayout::Sphere { nlon, .. } => {
                let (a, b) = (j / nlon, j % nlon);
                a * nlon + (b + shift) % nlon
            }
        }
    }

    /// Writes the grid as CSV (value columns zero).
    pub fn write_csv<W: Write>(self: &Arc<Self>, w: W) -> Result<()> {
        Field::zeros(self.clone()).write_csv(w)
    }
}

/// Complex samples of a function on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    mean_zero: bool,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            ));
        }
        Ok(Field { grid, values, mean_zero: false })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Field { grid, values, mean_zero: false }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![Complex64::new(c, 0.0); grid.len()];
        Field { grid, values, mean_zero: false }
    }

    pub fn from_real_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.points().iter().map(|p| Complex64::new(f(p), 0.0)).collect();
        Field { grid, values, mean_zero: false }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = grid.points().iter().map(f).collect();
        Field { grid, values, mean_zero: false }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_flagged_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Sets the mean-zero flag after checking |mean| < 10⁻⁸·max|values|.
    pub fn with_mean_zero_flag(mut self) -> Result<Self> {
        let scale = self.linf_norm();
        if self.mean().norm() >= 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return invalid(format!(
                "field mean {:e} is not zero relative to max |f| = {scale:e}",
                self.mean().norm()
            ));
        }
        self.mean_zero = true;
        Ok(self)
    }

    /// Subtracts the weighted mean and sets the mean-zero flag.
    pub fn project_mean_zero(&self) -> Field {
        let m = self.mean();
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v - m).collect(),
            mean_zero: true,
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.integral() / self.grid.manifold().volume()
    }

    pub fn integral(&self) -> Complex64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| v * *w)
            .sum()
    }

    /// Weighted inner product Σ w f ḡ.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| a * b.conj() * *w)
            .sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// (Σ w |f|^p)^{1/p}.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch(format!(
                "{} resolution {} vs {} resolution {}",
                self.grid.manifold().label(),
                self.grid.resolution(),
                other.grid.manifold().label(),
                other.grid.resolution()
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            mean_zero: false,
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            mean_zero: false,
        })
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.map(|v| v * c);
        out.mean_zero = self.mean_zero;
        out
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    /// ‖self − truth‖₂ / ‖truth‖₂.
    pub fn rel_l2_error(&self, truth: &Field) -> Result<f64> {
        Ok(self.sub(truth)?.l2_norm() / truth.l2_norm())
    }

    /// max|self − truth| / max|truth|.
    pub fn rel_linf_error(&self, truth: &Field) -> Result<f64> {
        Ok(self.sub(truth)?.linf_norm() / truth.linf_norm())
    }

    /// CSV with columns coord_1..coord_n, weight, value_re, value_im.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.grid.manifold().dim();
        let mut wr = csvio::writer(w);
        let mut header: Vec<String> = (1..=dim).map(|k| format!("coord_{k}")).collect();
        header.extend(["weight", "value_re", "value_im"].map(String::from));
        wr.write_record(&header)?;
        for ((p, w), v) in self.grid.points().iter().zip(self.grid.weights()).zip(&self.values) {
            let mut row: Vec<String> = p.coords().iter().map(|c| csvio::num(*c)).collect();
            row.push(csvio::num(*w));
            row.push(csvio::num(v.re));
            row.push(csvio::num(v.im));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`]; coordinates and weights must match `grid`.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, r: R) -> Result<Field> {
        let dim = grid.manifold().dim();
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 3 {
                return invalid(format!("row {i}: expected {} columns", dim + 3));
            }
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {i} column {k}: {e}")))
            };
            let p = grid.points().get(i).ok_or_else(|| Error::Io("too many rows".into()))?;
            for k in 0..dim {
                if (parse(k)? - p.coords()[k]).abs() > 1e-12 {
                    return Err(Error::GridMismatch(format!("row {i}: coordinate mismatch")));
                }
            }
            values.push(Complex64::new(parse(dim + 1)?, parse(dim + 2)?));
        }
        Field::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_weights_total_area() {
        let g = Grid::build(Manifold::sphere(), 16).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-10);
        assert!(g.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn sphere_integrates_cos_squared() {
        let g = Grid::build(Manifold::sphere(), 16).unwrap();
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].cos().powi(2));
        assert!((f.integral().re - 4.0 * PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_exact_for_high_degree_polynomials() {
        let g = Grid::build(Manifold::sphere(), 16).unwrap();
        // degree 2·16 − 2 = 30 in cos θ: ∫ cos^30 θ dA = 4π/31
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].cos().powi(30));
        assert!((f.integral().re - 4.0 * PI / 31.0).abs() < 1e-10);
    }

    #[test]
    fn torus_uniform_product_rule() {
        let g = Grid::build(Manifold::torus(2).unwrap(), 32).unwrap();
        assert_eq!(g.len(), 32 * 32);
        let h = TAU / 32.0;
        assert!(g.weights().iter().all(|w| (w - h * h).abs() < 1e-15));
        let total: f64 = g.weights().iter().sum();
        assert!((total - TAU * TAU).abs() < 1e-10);
    }

    #[test]
    fn rejects_small_resolution() {
        assert!(Grid::build(Manifold::sphere(), 3).is_err());
    }

    #[test]
    fn orbit_shifts_preserve_distances() {
        for m in [Manifold::sphere(), Manifold::torus(1).unwrap(), Manifold::torus(2).unwrap()] {
            let g = Grid::build(m, 8).unwrap();
            for i in [0, 5, g.len() - 1] {
                let (rep, sh) = g.orbit_of(i);
                assert_eq!(g.shifted(rep, sh), i);
                for j in 0..g.len() {
                    let a = g.distance(rep, j);
                    let b = g.distance(i, g.shifted(j, sh));
                    assert!((a - b).abs() < 1e-12, "{} {i} {j}", m.label());
                }
            }
        }
    }

    #[test]
    fn mean_zero_flag() {
        let g = Grid::build(Manifold::torus(1).unwrap(), 16).unwrap();
        let f = Field::from_real_fn(g.clone(), |p| p.coords()[0].sin());
        assert!(f.clone().with_mean_zero_flag().unwrap().is_flagged_mean_zero());
        let c = Field::constant(g.clone(), 1.0);
        assert!(c.clone().with_mean_zero_flag().is_err());
        assert!(c.project_mean_zero().linf_norm() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::build(Manifold::sphere(), 4).unwrap();
        let f = Field::from_fn(g.clone(), |p| Complex64::new(p.coords()[0].cos(), p.coords()[1]));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("coord_1,coord_2,weight,value_re,value_im\n"));
        assert!(!text.contains('\r'));
        let back = Field::read_csv(g.clone(), buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = Grid::build(Manifold::sphere(), 8).unwrap();
        let b = Grid::build(Manifold::sphere(), 10).unwrap();
        let fa = Field::constant(a, 1.0);
        let fb = Field::constant(b, 1.0);
        assert!(matches!(fa.inner(&fb), Err(Error::GridMismatch(_))));
    }
}
