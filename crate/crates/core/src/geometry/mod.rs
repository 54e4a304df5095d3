//! Model manifolds: the flat torus ℝⁿ/(2πℤ)ⁿ (n = 1, 2) and the unit sphere S².
//!
//! Distances, exponential-map volume densities and ball volumes are all in
//! closed form. Quadrature grids, sampled fields and eigenbases live in the
//! submodules.

mod basis;
mod grid;

pub use basis::{eigenbasis, EigenPair, Mode, SpectralBasis, SpectralCoeffs};
pub use grid::{Field, Grid, GridLayout};

use crate::error::{domain, invalid, Result};
use std::f64::consts::{PI, TAU};

/// Which model manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    /// ℝⁿ/(2πℤ)ⁿ with the flat metric.
    Torus { dim: usize },
    /// The round unit sphere in ℝ³.
    Sphere,
}

/// A model Riemannian manifold together with its closed-form geometric data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Manifold {
    kind: ManifoldKind,
}

impl Manifold {
    pub fn torus(dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return invalid(format!("torus dimension must be 1 or 2, got {dim}"));
        }
        Ok(Manifold { kind: ManifoldKind::Torus { dim } })
    }

    pub fn sphere() -> Self {
        Manifold { kind: ManifoldKind::Sphere }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ManifoldKind::Sphere)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Torus { dim } => dim,
            ManifoldKind::Sphere => 2,
        }
    }

    /// Lower bound κ for the Ricci curvature.
    pub fn ricci_lower(&self) -> f64 {
        match self.kind {
            ManifoldKind::Torus { .. } => 0.0,
            ManifoldKind::Sphere => 1.0,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        PI
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Torus { dim } => TAU.powi(dim as i32),
            ManifoldKind::Sphere => 4.0 * PI,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            ManifoldKind::Torus { dim } => PI * (dim as f64).sqrt(),
            ManifoldKind::Sphere => PI,
        }
    }

    /// Short tag used in file names and CSV columns.
    pub fn label(&self) -> &'static str {
        match self.kind {
            ManifoldKind::Torus { dim: 1 } => "T1",
            ManifoldKind::Torus { .. } => "T2",
            ManifoldKind::Sphere => "S2",
        }
    }

    /// Parses the labels produced by [`Manifold::label`] (case-insensitive,
    /// also accepts `torus1`, `torus2`, `sphere`).
    pub fn from_label(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t1" | "torus1" | "torus" => Manifold::torus(1),
            "t2" | "torus2" => Manifold::torus(2),
            "s2" | "sphere" => Ok(Manifold::sphere()),
            other => invalid(format!("unknown manifold '{other}'")),
        }
    }

    /// Canonical point from chart coordinates: torus angles reduced to
    /// [0, 2π); sphere (colatitude, longitude) reduced to [0, π] × [0, 2π).
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.dim() {
            return invalid(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                coords.len()
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coordinate");
        }
        let mut c = [0.0; 2];
        match self.kind {
            ManifoldKind::Torus { .. } => {
                for (dst, src) in c.iter_mut().zip(coords) {
                    *dst = wrap_angle(*src);
                }
            }
            ManifoldKind::Sphere => {
                let mut theta = coords[0].rem_euclid(TAU);
                let mut phi = coords[1];
                if theta > PI {
                    theta = TAU - theta;
                    phi += PI;
                }
                phi = wrap_angle(phi);
                if theta == 0.0 || theta == PI {
                    phi = 0.0;
                }
                c = [theta, phi];
            }
        }
        Ok(Point { coords: c, dim: self.dim() })
    }

    /// Geodesic distance. Torus: nearest periodic image; sphere: great-circle angle.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Torus { dim } => {
                let mut acc = 0.0;
                for j in 0..dim {
                    let d = min_image(x.coords[j] - y.coords[j]);
                    acc += d * d;
                }
                acc.sqrt()
            }
            ManifoldKind::Sphere => {
                let u = x.unit_vector();
                let v = y.unit_vector();
                great_circle(&u, &v)
            }
        }
    }

    /// Signed displacement y − x on the torus, each component in [−π, π].
    pub fn torus_offset(&self, x: &Point, y: &Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for j in 0..self.dim() {
            out[j] = min_image(y.coords[j] - x.coords[j]);
        }
        out
    }

    /// Volume density Θ of the exponential map at distance `d` from the center.
    pub fn theta_at(&self, d: f64) -> f64 {
        match self.kind {
            ManifoldKind::Torus { .. } => 1.0,
            ManifoldKind::Sphere => sinc(d),
        }
    }

    /// Θ(x, y): exponential-map volume density at y in normal coordinates centered at x.
    pub fn jacobian_theta(&self, x: &Point, y: &Point) -> Result<f64> {
        let d = self.distance(x, y);
        if d >= self.injectivity_radius() {
            return domain(format!(
                "distance {d} is not below the injectivity radius {}",
                self.injectivity_radius()
            ));
        }
        Ok(self.theta_at(d))
    }

    /// Leading transport amplitude Θ^{-1/2} as a function of distance.
    pub fn amplitude_at(&self, d: f64) -> f64 {
        1.0 / self.theta_at(d).sqrt()
    }

    /// Volume of the geodesic ball of radius r (torus: euclidean, capped at the total volume).
    pub fn ball_volume(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self.kind {
            ManifoldKind::Torus { dim: 1 } => (2.0 * r).min(TAU),
            ManifoldKind::Torus { .. } => (PI * r * r).min(TAU * TAU),
            ManifoldKind::Sphere => {
                if r >= PI {
                    4.0 * PI
                } else {
                    TAU * (1.0 - r.cos())
                }
            }
        }
    }

    /// Inverse of [`Manifold::ball_volume`] on its strictly increasing range.
    pub fn ball_radius_for_volume(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, self.volume());
        match self.kind {
            ManifoldKind::Torus { dim: 1 } => 0.5 * v,
            ManifoldKind::Torus { .. } => (v / PI).sqrt(),
            ManifoldKind::Sphere => {
                // 1 − cos r = 2 sin²(r/2)
                2.0 * (v / (4.0 * PI)).sqrt().min(1.0).asin()
            }
        }
    }

    /// Area of the euclidean unit sphere S^{n−1} in the tangent space.
    pub fn unit_sphere_area(&self) -> f64 {
        match self.dim() {
            1 => 2.0,
            _ => TAU,
        }
    }
}

/// A canonicalized point in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: usize,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Embedding of a sphere point (colatitude, longitude) in ℝ³.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.coords[0].sin_cos();
        let (sp, cp) = self.coords[1].sin_cos();
        [st * cp, st * sp, ct]
    }
}

pub(crate) fn great_circle(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn min_image(d: f64) -> f64 {
    let w = d.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// sin(d)/d with the removable singularity filled in.
pub(crate) fn sinc(d: f64) -> f64 {
    if d.abs() < 1e-4 {
        let d2 = d * d;
        1.0 - d2 / 6.0 + d2 * d2 / 120.0
    } else {
        d.sin() / d
    }
}
