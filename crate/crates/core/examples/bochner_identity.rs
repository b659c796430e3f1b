// Pointwise Bochner residual of harmonic maps under grid refinement.
//
// The residual `½Δ|df|² − ‖∇df‖² − Q` shrinks by about 4 per halving of h.
//
// `cargo run --release --example bochner_identity`

use brl::bochner::BochnerData;
use brl::geometry::{DomainModel, TargetModel};
use brl::maps::AnalyticMap;

pub fn run_example() -> brl::Result<Vec<f64>> {
    let mut ratios = Vec::new();
    for map in [AnalyticMap::IdentitySphere, AnalyticMap::Holomorphic { k: 2 }] {
        let target = TargetModel::parse(&map.default_target())?;
        let mut prev: Option<f64> = None;
        for n1 in [16, 32, 64] {
            let d = DomainModel::round_sphere(1.0, n1, 2 * n1)?;
            let b = BochnerData::compute(&map.sample(&d, &target)?)?;
            let sup = b.sup_residual();
            print!("{:<22} {n1:>3}x{:<3} sup|residual| = {sup:.3e}", map.name(), 2 * n1);
            if let Some(p) = prev {
                print!("  ratio = {:.3}", p / sup);
                ratios.push(p / sup);
            }
            println!("  ∫ identity / Vol = {:.3e}", b.integral_identity() / d.volume());
            prev = Some(sup);
        }
    }
    Ok(ratios)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
