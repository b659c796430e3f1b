// Classification of the map catalog against what the rigidity theorem allows.
//
// `cargo run --release --example consistency_scan`

use brl::rigidity::{consistency_table, default_catalog, ConsistencyTable, ReportOptions};

pub fn run_example() -> brl::Result<ConsistencyTable> {
    let opts = ReportOptions { global_sample: 256, ..ReportOptions::default() };
    let table = consistency_table(&default_catalog(32)?, &opts)?;
    for r in &table.rows {
        println!(
            "{:<22} {:<9} margin {:>10.3e}  tol {:.3e}  {:?}  {}",
            r.map,
            r.classification.to_string(),
            r.margin,
            r.tol,
            r.status,
            r.detail
        );
    }
    table.check()?;
    Ok(table)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
