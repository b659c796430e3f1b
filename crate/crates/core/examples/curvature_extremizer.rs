// Largest sectional curvature over sampled regions of a few targets.
//
// `cargo run --example curvature_extremizer`

use brl::geometry::{sec_max_over_region, SecMaxOptions, TargetModel};

pub fn run_example() -> brl::Result<Vec<(String, f64)>> {
    let opts = SecMaxOptions::default();
    let mut out = Vec::new();
    for text in ["sphere:r=2", "ellipsoid:a=1,b=1,c=2", "prodspheres:r1=1,r2=2", "torusemb:r1=1,r2=2"] {
        let t = TargetModel::parse(text)?;
        let sample = t.quasi_uniform_sample(1024, opts.seed);
        let m = sec_max_over_region(&t, &sample, &opts)?;
        println!(
            "{:<24} sec_max = {:.12}  min sampled = {:.6}  witness at {:?}",
            t.descriptor(),
            m.value,
            m.min_sampled,
            m.witness.base.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
        );
        out.push((t.descriptor(), m.value));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> brl::Result<()> {
    run_example().map(|_| ())
}
