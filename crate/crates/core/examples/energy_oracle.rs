// Dirichlet energy of z ↦ z^k on the unit sphere against the exact value 4πk.
//
// `cargo run --release --example energy_oracle`

use std::f64::consts::PI;

use brl::bochner::richardson_over_grids;
use brl::geometry::{DomainModel, TargetModel};
use brl::maps::{total_energy, AnalyticMap};

pub fn run_example() -> brl::Result<Vec<f64>> {
    let t = TargetModel::sphere(1.0)?;
    let d = DomainModel::round_sphere(1.0, 64, 128)?;
    let mut errors = Vec::new();
    for k in 1..=3u32 {
        let map = AnalyticMap::Holomorphic { k };
        let r = richardson_over_grids(&d, 3, |g| Ok(total_energy(&map.sample(g, &t)?)))?;
        let exact = 4.0 * PI * k as f64;
        let rel = (r.extrapolated - exact).abs() / exact;
        println!(
            "k = {k}: E(64x128) = {:.8}  extrapolated {:.10}  exact {:.10}  rel. error {rel:.1e}",
            r.finest, r.extrapolated, exact
        );
        errors.push(rel);
    }
    Ok(errors)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
