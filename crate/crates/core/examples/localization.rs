// Curvature along a thin equatorial band on an ellipsoid against the whole ellipsoid.
//
// `cargo run --release --example localization`

use brl::geometry::{DomainModel, TargetModel};
use brl::maps::AnalyticMap;
use brl::rigidity::{localization_gap, LocalizationGap, ReportOptions};

pub fn run_example() -> brl::Result<LocalizationGap> {
    let d = DomainModel::flat_torus(1.0, 1.0, 32, 32)?;
    let t = TargetModel::ellipsoid(1.0, 1.0, 2.0)?;
    let f = AnalyticMap::EquatorialBand { height: 0.05 }.sample(&d, &t)?;
    let g = localization_gap(&f, &ReportOptions::default())?;
    println!(
        "sec_max on image {:.4}  over the ellipsoid {:.4}  gap {:.4}",
        g.sec_max_image, g.sec_max_global_sample, g.gap
    );
    Ok(g)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
