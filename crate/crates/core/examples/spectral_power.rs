//! Λ^{2s} on S² three ways: eigen-multiplier, Cauchy contour for the scalar
//! power, and the resolvent on a single harmonic.

use fraclap::geometry::{Grid, Manifold, Mode, SpectralBasis};
use fraclap::spectral::{contour_power_scalar, fractional_apply_spectral, resolvent_apply, ContourSpec};
use fraclap::{Complex64, Result};

fn main() -> Result<()> {
    for &(lambda, s) in &[(2.0, -0.5), (10.0, -0.25)] {
        let r = contour_power_scalar(lambda, s, &ContourSpec::new(1000.0 * lambda, 256))?;
        println!("contour λ={lambda} s={s}: {:.12} (exact {:.12}, refinement change {:.1e})", r.value.re, f64::powf(lambda, s), r.rel_change);
    }

    let grid = Grid::build(Manifold::sphere(), 24)?;
    let basis = SpectralBasis::new(grid, 6)?;
    let y = basis.eigenfunction_of(Mode::Harmonic { l: 3, m: 1 })?;
    let out = fractional_apply_spectral(&y, 0.5, &basis)?;
    let ratio = out.values()[5].re / y.values()[5].re;
    println!("Λ Y_3^1 / Y_3^1 = {ratio:.12} (√12 = {:.12})", 12f64.sqrt());

    let z = Complex64::new(-1.0, 0.5);
    let r = resolvent_apply(&y, z, &basis)?;
    println!("(−Δ − z)^{{-1}} Y_3^1 / Y_3^1 = {:.6}", r.values()[5] / y.values()[5]);
    Ok(())
}
