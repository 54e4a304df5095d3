//! A small config-driven sweep: spectral, heat and PV on S², CSVs written to
//! a temporary directory, plus two acceptance checks.

use fraclap::experiment::{run_experiment, ExperimentConfig};
use fraclap::Result;

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("fraclap_experiment");
    let text = format!(
        "[experiment]\nmanifold = S2\ns = 0.5\nresolutions = 24, 32\nmethods = spectral, heat, pv\nband_limit = 4\noutput = {}\n\n[checks]\nrun = contour_scalar, bessel_layer\n",
        out.display()
    );
    let cfg = ExperimentConfig::parse(&text)?;
    let rep = run_experiment(&cfg)?;
    for f in &rep.files {
        println!("wrote {}", f.display());
    }
    for c in &rep.checks {
        println!("{}", c.line());
    }
    print!("{}", std::fs::read_to_string(out.join("comparison.csv"))?);
    Ok(())
}
