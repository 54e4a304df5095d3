//! The heat-semigroup route to (−Δ)^s against the spectral multiplier, and
//! exact versus parametrix heat kernels on S².

use fraclap::geometry::{Grid, Manifold, SpectralBasis};
use fraclap::heat::{fractional_apply_heat, heat_parametrix_at, sphere_heat, TimeQuadrature};
use fraclap::spectral::fractional_apply_spectral;
use fraclap::{Complex64, Result};

fn main() -> Result<()> {
    let grid = Grid::build(Manifold::sphere(), 16)?;
    let basis = SpectralBasis::new(grid.clone(), 8)?;
    let mut c = basis.zero_coeffs();
    for (i, v) in c.coeffs_mut().iter_mut().enumerate().skip(1) {
        *v = Complex64::new(1.0 / (1.0 + i as f64), 0.0);
    }
    let f = basis.synthesize(&c)?.project_mean_zero();
    let tq = TimeQuadrature::default();
    for &s in &[0.25, 0.5, 0.75] {
        let heat = fractional_apply_heat(&f, s, &tq, &basis)?;
        let spec = fractional_apply_spectral(&f, s, &basis)?;
        println!("s={s}: heat vs spectral relative L2 = {:.2e}", heat.rel_l2_error(&spec)?);
    }

    let d = 0.3;
    for &t in &[0.1, 0.03, 0.01] {
        let exact = sphere_heat(d, t);
        let row: Vec<String> = (0..=1)
            .map(|k| heat_parametrix_at(d, t, k, Manifold::sphere()).map(|p| format!("{:.2e}", (p - exact).abs() / exact)))
            .collect::<Result<_>>()?;
        println!("d={d} t={t}: G={exact:.6e}, parametrix rel err by order {row:?}");
    }
    Ok(())
}
