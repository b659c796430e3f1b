// Rigidity report for homotheties S²(1) → S²(r), which sit exactly at the threshold.
//
// `cargo run --release --example equality_homothety`

use brl::geometry::{DomainModel, TargetModel};
use brl::maps::AnalyticMap;
use brl::rigidity::{build_report, equality_diagnostics, EqualityDiagnostics, ReportOptions};

pub fn run_example() -> brl::Result<Vec<EqualityDiagnostics>> {
    let d = DomainModel::round_sphere(1.0, 32, 64)?;
    let opts = ReportOptions { global_sample: 256, ..ReportOptions::default() };
    let mut out = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let f = AnalyticMap::RadialScaling { r }.sample(&d, &TargetModel::sphere(r)?)?;
        let rep = build_report(&f, &opts)?;
        let diag = equality_diagnostics(&rep)?;
        println!(
            "r = {r}: {} (margin {:.3e}, tol {:.3e})  homothety factor {:.6}  λ spread {:.1e}  sup‖∇df‖ {:.3e}  passed {}",
            rep.classification,
            rep.margin,
            rep.tol,
            rep.equality.homothety_factor,
            rep.equality.lambda_spread,
            rep.equality.hess_sup,
            diag.passed
        );
        out.push(diag);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
