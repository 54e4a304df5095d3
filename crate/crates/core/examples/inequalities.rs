//! The pointwise inequality 2f·Λ^α f ≥ Λ^α(f²) and the fractional Sobolev ratio on
//! a seeded ensemble of band-limited fields on S²; per-member stats as CSV.

use fraclap::geometry::{Grid, Manifold};
use fraclap::inequalities::{ensemble_basis, ensemble_sweep, write_stats_csv, EnsembleSpec};
use fraclap::Result;

fn main() -> Result<()> {
    let grid = Grid::build(Manifold::sphere(), 16)?;
    let basis = ensemble_basis(grid, 8)?;
    let ens = EnsembleSpec { count: 40, band_limit: 8, seed: 11 };
    let sum = ensemble_sweep(&ens, &basis, 0.4, &[0.5, 1.0, 1.5])?;
    for (alpha, worst, holds) in &sum.pointwise {
        println!("α={alpha}: worst slack/scale {worst:.3e}, holds {holds}");
    }
    println!("Sobolev ratio median {:.4}, max {:.4}", sum.sobolev_median, sum.sobolev_max);
    let path = std::env::temp_dir().join("fraclap_inequality_stats.csv");
    write_stats_csv(&sum.rows, std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
