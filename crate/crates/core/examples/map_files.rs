// Saving a sampled map, loading it back and reporting on the file through the CLI driver.
//
// `cargo run --release --example map_files`

use brl::cli::{parse_config, run};
use brl::geometry::{DomainModel, TargetModel};
use brl::maps::{io, AnalyticMap};

pub fn run_example() -> brl::Result<serde_json::Value> {
    let dir = std::env::temp_dir().join(format!("brl-map-files-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("holomorphic2.map");

    let d = DomainModel::round_sphere(1.0, 16, 32)?;
    let f = AnalyticMap::Holomorphic { k: 2 }.sample(&d, &TargetModel::sphere(1.0)?)?;
    io::save(&f, &path)?;
    let g = io::load(&path)?;
    assert_eq!(f.values(), g.values());

    let args = ["brl", "report", "--load", path.to_str().unwrap(), "--global-sample", "256"];
    let mut out = Vec::new();
    run(&parse_config(args)?, &mut out)?;
    let doc: serde_json::Value = serde_json::from_slice(&out)?;
    println!(
        "{} on {}: {} with margin {}",
        doc["map"], doc["report"]["domain"], doc["report"]["classification"], doc["report"]["margin"]
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(doc)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
