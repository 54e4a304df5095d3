//! Negative orders through the Riesz-potential kernel, and the round trip
//! Riesz ∘ PV ≈ identity on mean-zero fields of S².

use fraclap::geometry::{Grid, Manifold, Mode, SpectralBasis};
use fraclap::pvkernel::{pv_apply, riesz_apply, KernelSpec, PvScheme};
use fraclap::spectral::fractional_apply_spectral;
use fraclap::Result;

fn main() -> Result<()> {
    let m = Manifold::sphere();
    let grid = Grid::build(m, 48)?;
    let basis = SpectralBasis::new(grid.clone(), 4)?;
    let scheme = PvScheme::new(grid, 4.0)?;
    let f = basis.eigenfunction_of(Mode::Harmonic { l: 2, m: 1 })?.add(&basis.eigenfunction_of(Mode::Harmonic { l: 1, m: 0 })?)?;
    for &s in &[-0.25, -0.5] {
        let truth = fractional_apply_spectral(&f, s, &basis)?;
        let out = riesz_apply(&f, &KernelSpec::new(m, s)?, &scheme)?;
        let back = riesz_apply(&pv_apply(&f, &KernelSpec::new(m, -s)?, &scheme)?.project_mean_zero(), &KernelSpec::new(m, s)?, &scheme)?;
        println!("s={s}: Riesz relative L2 {:.2e}, round trip {:.2e}", out.rel_l2_error(&truth)?, back.rel_l2_error(&f)?);
    }
    Ok(())
}
