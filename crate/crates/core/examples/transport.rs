//! Transport equation along a geodesic ray of S²: the ODE solution u₀
//! against Θ^{−1/2}, written as a CSV ray profile.

use fraclap::geometry::Manifold;
use fraclap::parametrix::{solve_transport_u0, ParametrixGeometry};
use fraclap::Result;

fn main() -> Result<()> {
    let geom = ParametrixGeometry::new(Manifold::sphere());
    let p = solve_transport_u0(&geom, &[0.6, 0.8], 0.9 * std::f64::consts::PI, 10)?;
    println!("max |u₀ − Θ^(−1/2)| = {:.2e}", p.max_abs_diff());
    p.write_csv(std::io::stdout().lock())?;
    Ok(())
}
