//! Near-diagonal behaviour of the exact kernel: d^{n+2s} K_s(d) → c_{n,s}
//! with an O(d) residual, printed as a table.

use fraclap::geometry::Manifold;
use fraclap::pvkernel::{diagonal_asymptotics_check, Amplitude};
use fraclap::Result;

fn main() -> Result<()> {
    let ds = [0.2, 0.1, 0.05, 0.025];
    for m in [Manifold::sphere(), Manifold::torus(2)?] {
        for &s in &[0.25, 0.5, 0.75] {
            let r = diagonal_asymptotics_check(s, m, &ds, Amplitude::Transport)?;
            println!(
                "{} s={s}: limit {:.6} target {:.6} (rel {:.1e}), residual slope {:.2}",
                m.label(),
                r.limit,
                r.target,
                r.relative_limit_error(),
                r.slope
            );
        }
    }
    Ok(())
}
