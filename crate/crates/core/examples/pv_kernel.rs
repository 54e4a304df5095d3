//! Principal-value quadrature of (−Δ)^s with the exact kernel, compared with
//! the spectral truth on T¹ and S² at two resolutions.

use fraclap::geometry::{Grid, Manifold, SpectralBasis};
use fraclap::pvkernel::{c_ns_constant, pv_apply, KernelSpec, PvMode, PvScheme};
use fraclap::spectral::fractional_apply_spectral;
use fraclap::{Complex64, Result};

fn main() -> Result<()> {
    for n in 1..=2 {
        println!("c_{{{n},1/2}} = {:.10}", c_ns_constant(n, 0.5)?);
    }
    for (m, resolutions) in [(Manifold::torus(1)?, [128, 256]), (Manifold::sphere(), [32, 64])] {
        for res in resolutions {
            let grid = Grid::build(m, res)?;
            let basis = SpectralBasis::new(grid.clone(), 5)?;
            let mut c = basis.zero_coeffs();
            for (i, v) in c.coeffs_mut().iter_mut().enumerate().skip(1) {
                *v = Complex64::new((1.3 * i as f64).cos(), 0.0);
            }
            let f = basis.synthesize(&c)?.map(|v| Complex64::new(v.re, 0.0)).project_mean_zero();
            let truth = fractional_apply_spectral(&f, 0.5, &basis)?;
            let spec = KernelSpec::new(m, 0.5)?;
            for mode in [PvMode::FullOperator, PvMode::Representation] {
                let scheme = PvScheme::new(grid.clone(), 4.0)?.with_mode(mode);
                let err = pv_apply(&f, &spec, &scheme)?.rel_l2_error(&truth)?;
                println!("{} res={res} ε={:.4} {mode:?}: relative L2 {err:.2e}", m.label(), scheme.epsilon);
            }
        }
    }
    Ok(())
}
