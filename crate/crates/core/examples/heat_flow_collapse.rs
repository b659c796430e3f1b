// Harmonic map heat flow from a small cap on the flat torus into S².
//
// The image shrinks to a point and the energy never increases.
//
// `cargo run --release --example heat_flow_collapse`

use brl::flow::{run_flow, FlowParams, FlowSummary};
use brl::geometry::{DomainModel, TargetModel};
use brl::maps::AnalyticMap;

pub fn run_example() -> brl::Result<FlowSummary> {
    let d = DomainModel::flat_torus(1.0, 1.0, 16, 16)?;
    let f0 = AnalyticMap::Cap { amplitude: 0.3 }.sample(&d, &TargetModel::sphere(1.0)?)?;
    let (_, summary) = run_flow(&f0, &FlowParams { stride: 50, ..FlowParams::default() })?;
    for row in &summary.trace {
        println!(
            "step {:>5}  E = {:.6e}  sup|τ| = {:.3e}  diam = {:.3e}",
            row.step, row.energy, row.sup_tension, row.image_diameter
        );
    }
    println!(
        "{:?} after {} steps (dt = {:.3e}), largest energy increase {:.2e}",
        summary.outcome,
        summary.steps,
        summary.dt,
        summary.max_energy_increase()
    );
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
