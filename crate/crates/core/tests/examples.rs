mod curvature_extremizer {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/curvature_extremizer.rs"));
}
mod bochner_identity {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/bochner_identity.rs"));
}
mod lambda_chain {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lambda_chain.rs"));
}
mod heat_flow_collapse {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/heat_flow_collapse.rs"));
}
mod equality_homothety {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/equality_homothety.rs"));
}
mod localization {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/localization.rs"));
}
mod consistency_scan {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/consistency_scan.rs"));
}
mod energy_oracle {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/energy_oracle.rs"));
}

#[test]
fn curvature_extremizer_runs() {
    let values = curvature_extremizer::run_example().expect("curvature example should run");
    // the ellipsoid maximum sits at the poles, which a finite sample only approaches
    let expected = [(0.25, 1e-9), (4.0, 0.1), (1.0, 1e-9), (0.0, 1e-9)];
    for ((name, v), (e, tol)) in values.iter().zip(expected) {
        assert!((v - e).abs() < tol, "{name}: {v} vs {e}");
    }
}

#[test]
fn bochner_identity_runs() {
    let ratios = bochner_identity::run_example().expect("bochner example should run");
    assert!(ratios.iter().all(|r| (3.0..=5.0).contains(r)), "{ratios:?}");
}

#[test]
fn lambda_chain_runs() {
    let chains = lambda_chain::run_example().expect("lambda chain example should run");
    assert!(chains.iter().all(|c| c.lhs <= c.bound + 1e-12));
    assert!(chains[0].equality && chains[2].equality && chains[4].equality);
    assert!(!chains[1].equality && !chains[3].equality);
}

#[test]
fn heat_flow_collapse_runs() {
    let s = heat_flow_collapse::run_example().expect("flow example should run");
    assert_eq!(s.outcome, brl::flow::FlowOutcome::CollapsedToConstant);
    assert!(s.max_energy_increase() <= brl::flow::ENERGY_SLACK);
}

#[test]
fn equality_homothety_runs() {
    let diags = equality_homothety::run_example().expect("homothety example should run");
    assert!(diags.iter().all(|d| d.passed));
}

#[test]
fn localization_runs() {
    let g = localization::run_example().expect("localization example should run");
    assert!(g.sec_max_image <= 0.26 && g.gap > 3.5, "{g:?}");
}

#[test]
fn consistency_scan_runs() {
    let t = consistency_scan::run_example().expect("consistency example should run");
    assert_eq!(t.rows.len(), 7);
}

#[test]
fn energy_oracle_runs() {
    let errs = energy_oracle::run_example().expect("energy example should run");
    assert!(errs.iter().all(|e| *e < 1e-5), "{errs:?}");
}

mod map_files {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/map_files.rs"));
}

#[test]
fn map_files_runs() {
    let doc = map_files::run_example().expect("map file example should run");
    assert_eq!(doc["report"]["classification"], "violated");
}
