// The inequality chain for the eigenvalues of the pullback metric.
//
// `cargo run --example lambda_chain`

use brl::bochner::{lambda_chain_check, LambdaChain};
use brl::geometry::{DomainModel, TargetModel};
use brl::maps::{AnalyticMap, PointwiseMapData};

pub fn run_example() -> brl::Result<Vec<LambdaChain>> {
    let mut chains = Vec::new();
    for lambdas in [vec![1.0, 1.0], vec![4.0, 1.0], vec![2.0, 2.0, 2.0], vec![3.0, 0.5, 0.0]] {
        chains.push(lambda_chain_check(&lambdas)?);
    }
    // eigenvalues read off a homothety and a branched cover
    let d = DomainModel::round_sphere(1.0, 16, 32)?;
    for map in [AnalyticMap::RadialScaling { r: 2.0 }, AnalyticMap::Holomorphic { k: 2 }] {
        let f = map.sample(&d, &TargetModel::parse(&map.default_target())?)?;
        let node = d.index(5, 3);
        chains.push(lambda_chain_check(PointwiseMapData::compute(&f, node)?.lambdas())?);
    }
    for c in &chains {
        println!(
            "n={}  Σλᵢλⱼ = {:.6} = {:.6} ≤ {:.6}  spread {:.2e}  equality {}",
            c.n, c.lhs, c.mid, c.bound, c.spread, c.equality
        );
    }
    Ok(chains)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
