//! Bessel-potential layers F_ν and the resolvent parametrix: recursion
//! residuals, flat fundamental solutions and remainder size by depth.

use fraclap::geometry::{Grid, Manifold, Mode, SpectralBasis};
use fraclap::parametrix::{
    apply_parametrix, f_nu_recursion_check, flat_equation_check, remainder_probe, BesselPotential, ResolventParametrix,
};
use fraclap::spectral::resolvent_apply;
use fraclap::{Complex64, Result};

fn main() -> Result<()> {
    let z = Complex64::new(-4.0, 0.0);
    let rs: Vec<f64> = (1..40).map(|i| 0.1 * i as f64).collect();
    for n in 1..=3 {
        let res = f_nu_recursion_check(&BesselPotential::new(1, z, n)?, &rs)?;
        println!("n={n}: F_1 recursion residual {res:.1e}");
    }
    for n in [1, 3] {
        let (closed, pde) = flat_equation_check(n, z, &rs)?;
        println!("n={n}: F_0 vs closed form {closed:.1e}, pde residual {pde:.1e}");
    }

    let m = Manifold::sphere();
    let grid = Grid::build(m, 32)?;
    let basis = SpectralBasis::new(grid.clone(), 3)?;
    let f = basis.eigenfunction_of(Mode::Harmonic { l: 1, m: 0 })?;
    let truth = resolvent_apply(&f, z, &basis)?;
    for depth in 0..=1 {
        let pr = ResolventParametrix::new(m, depth)?;
        let err = apply_parametrix(&f, &pr, z, &grid)?.rel_l2_error(&truth)?;
        let (_, rem) = remainder_probe(&pr, z, &f, &grid)?;
        println!("S2 depth {depth}: relative L2 vs resolvent {err:.2e}, remainder L2 {rem:.2e}");
    }
    Ok(())
}
