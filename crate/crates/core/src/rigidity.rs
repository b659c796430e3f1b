//! Pinching reports, equality-case diagnostics and the consistency scan.
//!
//! A harmonic map with `Ric_min > ((n−1)/n)·Sec_max(f(M))·sup|df|²` must be
//! constant; at equality it is constant or a homothety with parallel
//! differential and totally geodesic image. The report evaluates both sides
//! on a grid and classifies the map inside an `O(h²)` equality band.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::bochner::ErrorModel;
use crate::error::{Error, Result};
use crate::flow::image_diameter;
use crate::geometry::{sec_max_over_region, CurvatureSample, DomainModel, SecMaxOptions, TargetKind, TargetModel};
use crate::linalg::symmetric_eigen_desc;
use crate::maps::{AnalyticMap, DiscreteMap, PointwiseMapData};

/// `C` in `tol(h) = C·h²`; see [`calibrate_error_model`].
pub const DEFAULT_TOL_C: f64 = 4.0;
/// Safety factor applied to the measured calibration constant.
pub const CALIBRATION_SAFETY: f64 = 2.0;
/// A map whose image diameter is below this counts as constant.
pub const CONSTANT_DIAMETER: f64 = 1e-3;
/// Planes with `Sec` below this violate the nonnegativity hypothesis.
pub const HYPOTHESIS_SLACK: f64 = 1e-10;
pub const GLOBAL_SAMPLE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Strict,
    Equality,
    Violated,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Strict => "strict",
            Classification::Equality => "equality",
            Classification::Violated => "violated",
        })
    }
}

pub const PREDICT_CONSTANT: &str = "constant";
pub const PREDICT_EQUALITY: &str = "constant or homothetic with totally geodesic image";
pub const PREDICT_NONE: &str = "no conclusion (hypothesis fails)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub error_model: ErrorModel,
    pub sec: SecMaxOptions,
    /// Size of the target sample used as the global curvature comparator.
    pub global_sample: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { error_model: ErrorModel::new(DEFAULT_TOL_C), sec: SecMaxOptions::default(), global_sample: GLOBAL_SAMPLE }
    }
}

/// Grid sups that vanish for homotheties with parallel differential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqualityMeasures {
    /// `sup ‖∇df‖`.
    pub hess_sup: f64,
    /// `sup (λ_max − λ_min)`.
    pub lambda_spread: f64,
    /// Mean of all `λᵢ`.
    pub homothety_factor: f64,
    /// `sup |df|² − inf |df|²`.
    pub df_norm2_spread: f64,
    /// Equal to `hess_sup`: the image's second fundamental form is bounded by `∇df`.
    pub totally_geodesic_residual: f64,
    /// Distance of the image from its best-fit `n`-plane (Euclidean targets only).
    pub affine_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinchingReport {
    pub domain: String,
    pub target: String,
    pub resolution: [usize; 2],
    pub h: f64,
    pub n: usize,
    pub ric_min: f64,
    pub ric_min_node: usize,
    pub ric_min_point: [f64; 2],
    pub sec_max_image: f64,
    pub sec_max_witness: CurvatureSample,
    /// Smallest sectional curvature among planes sampled on the image.
    pub sec_min_image_sampled: f64,
    pub sec_max_global_sample: f64,
    pub hypothesis_flag: bool,
    pub s0: f64,
    pub e_max: f64,
    /// `((n−1)/n)·sec_max_image·S₀`, used for classification.
    pub threshold_s0: f64,
    /// `((n−1)/n)·sec_max_image·e_max`, the `e_max` form of the statement.
    pub threshold_e: f64,
    pub margin: f64,
    pub tol: f64,
    pub tol_c: f64,
    pub classification: Classification,
    pub prediction: String,
    pub constant: bool,
    pub image_diameter: f64,
    pub sup_tension: f64,
    pub harmonic_tol: f64,
    pub harmonic: bool,
    /// Set when the map is not numerically harmonic and the theorem does not apply.
    pub harmonic_warning: bool,
    pub equality: EqualityMeasures,
    pub seed: u64,
    pub global_sample_size: usize,
}

impl PinchingReport {
    /// `(threshold_s0, margin)` recomputed from the stored fields.
    pub fn recompute(&self) -> (f64, f64) {
        let t = coefficient(self.n) * self.sec_max_image * self.s0;
        (t, self.ric_min - t)
    }
}

/// `(n−1)/n`.
pub fn coefficient(n: usize) -> f64 {
    (n as f64 - 1.0) / n as f64
}

pub fn classify(margin: f64, tol: f64) -> Classification {
    if margin > tol {
        Classification::Strict
    } else if margin >= -tol {
        Classification::Equality
    } else {
        Classification::Violated
    }
}

/// Distinct points of a point cloud, in first-seen order.
fn distinct_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut seen = BTreeSet::new();
    points
        .into_iter()
        .filter(|p| seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect()
}

/// Distance of the node values from their best-fit `dim`-dimensional affine
/// subspace (principal components), as the largest orthogonal deviation.
pub fn affine_flatness_residual(points: &[Vec<f64>], dim: usize) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let m = points[0].len();
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..m).map(|c| points.iter().map(|p| p[c]).sum::<f64>() / n).collect();
    let mut cov = nalgebra::DMatrix::zeros(m, m);
    for p in points {
        let d = nalgebra::DVector::from_iterator(m, p.iter().zip(&mean).map(|(a, b)| a - b));
        cov += &d * d.transpose();
    }
    let (_, vecs) = symmetric_eigen_desc(&(cov / n));
    let keep = dim.min(m);
    points
        .iter()
        .map(|p| {
            let d = nalgebra::DVector::from_iterator(m, p.iter().zip(&mean).map(|(a, b)| a - b));
            let mut r = d.clone();
            for c in 0..keep {
                let v = vecs.column(c);
                r -= v * v.dot(&d);
            }
            r.norm()
        })
        .fold(0.0, f64::max)
}

struct NodeSummary {
    s: f64,
    spread: f64,
    lambda_sum: f64,
    hess: f64,
    tension: f64,
    flagged: bool,
}

fn equality_measures(f: &DiscreteMap, nodes: &[NodeSummary]) -> EqualityMeasures {
    let inner: Vec<&NodeSummary> = nodes.iter().filter(|s| !s.flagged).collect();
    let hess_sup = inner.iter().map(|s| s.hess).fold(0.0, f64::max).sqrt();
    let lambda_spread = inner.iter().map(|s| s.spread).fold(0.0, f64::max);
    let homothety_factor =
        inner.iter().map(|s| s.lambda_sum).sum::<f64>() / (inner.len().max(1) * f.domain().dim()) as f64;
    let smax = inner.iter().map(|s| s.s).fold(f64::NEG_INFINITY, f64::max);
    let smin = inner.iter().map(|s| s.s).fold(f64::INFINITY, f64::min);
    let affine_residual = match f.target().kind {
        TargetKind::Euclidean { .. } => Some(affine_flatness_residual(&f.points(), f.domain().dim())),
        _ => None,
    };
    EqualityMeasures {
        hess_sup,
        lambda_spread,
        homothety_factor,
        df_norm2_spread: if inner.is_empty() { 0.0 } else { smax - smin },
        totally_geodesic_residual: hess_sup,
        affine_residual,
    }
}

/// Assembles the pinching report of `f`.
pub fn build_report(f: &DiscreteMap, opts: &ReportOptions) -> Result<PinchingReport> {
    let d = f.domain();
    let t = f.target();
    let n = d.dim();
    let h = d.h();
    let tol = opts.error_model.tol(h);

    let nodes: Vec<NodeSummary> = (0..d.node_count())
        .into_par_iter()
        .map(|k| {
            let p = PointwiseMapData::compute(f, k)?;
            let l = p.lambdas();
            Ok(NodeSummary {
                s: p.s(),
                spread: l[0] - l[l.len() - 1],
                lambda_sum: l.iter().sum(),
                hess: p.hessian.norm2,
                tension: p.tension.norm(),
                flagged: d.is_flagged(k),
            })
        })
        .collect::<Result<_>>()?;

    let (ric_min, ric_min_node) = d.ricci_min(&d.all_nodes())?;
    let image = distinct_points(f.points());
    let sec = sec_max_over_region(t, &image, &opts.sec)?;
    let sec_max_global_sample = global_curvature(t, &sec.witness, opts)?;
    let hypothesis_flag = sec.min_sampled >= -HYPOTHESIS_SLACK;

    let s0 = nodes.iter().map(|s| s.s).fold(0.0, f64::max);
    let e_max = 0.5 * s0;
    let threshold_s0 = coefficient(n) * sec.value * s0;
    let threshold_e = coefficient(n) * sec.value * e_max;
    let margin = ric_min - threshold_s0;
    let classification = classify(margin, tol);

    let sup_tension = nodes.iter().filter(|s| !s.flagged).map(|s| s.tension).fold(0.0, f64::max);
    let harmonic_tol = harmonic_tolerance(opts.error_model, h, s0);
    let harmonic = sup_tension <= harmonic_tol;
    let diameter = image_diameter(f);
    let constant = diameter < CONSTANT_DIAMETER;
    let prediction = if constant {
        PREDICT_CONSTANT
    } else if !hypothesis_flag {
        PREDICT_NONE
    } else {
        match classification {
            Classification::Strict => PREDICT_CONSTANT,
            Classification::Equality => PREDICT_EQUALITY,
            Classification::Violated => PREDICT_NONE,
        }
    };

    let (n1, n2) = d.shape();
    Ok(PinchingReport {
        domain: d.descriptor(),
        target: t.descriptor(),
        resolution: [n1, n2],
        h,
        n,
        ric_min,
        ric_min_node,
        ric_min_point: d.coords(ric_min_node),
        sec_max_image: sec.value,
        sec_max_witness: sec.witness,
        sec_min_image_sampled: sec.min_sampled,
        sec_max_global_sample,
        hypothesis_flag,
        s0,
        e_max,
        threshold_s0,
        threshold_e,
        margin,
        tol,
        tol_c: opts.error_model.c,
        classification,
        prediction: prediction.to_string(),
        constant,
        image_diameter: diameter,
        sup_tension,
        harmonic_tol,
        harmonic,
        harmonic_warning: !harmonic,
        equality: equality_measures(f, &nodes),
        seed: opts.sec.seed,
        global_sample_size: opts.global_sample,
    })
}

/// Tension allowed for a map to count as numerically harmonic:
/// `tol(h)·max(1, S₀)`, since the discretization error of `Δf` scales with
/// the size of the derivatives.
pub fn harmonic_tolerance(model: ErrorModel, h: f64, s0: f64) -> f64 {
    model.tol(h) * s0.max(1.0)
}

/// Sec_max over a quasi-uniform target sample together with the image, so the
/// comparator always contains the image maximum.
fn global_curvature(t: &TargetModel, image_witness: &CurvatureSample, opts: &ReportOptions) -> Result<f64> {
    if opts.global_sample == 0 {
        return Ok(image_witness.value);
    }
    let sample = t.quasi_uniform_sample(opts.global_sample, opts.sec.seed);
    let g = sec_max_over_region(t, &sample, &opts.sec)?;
    Ok(g.value.max(image_witness.value))
}

/// Outcome of the equality-case checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityDiagnostics {
    pub skipped: bool,
    pub measures: EqualityMeasures,
    pub tol: f64,
    pub parallel: bool,
    pub equal_lambdas: bool,
    pub constant_energy_density: bool,
    pub affine: Option<bool>,
    pub passed: bool,
}

/// Checks the equality-case conclusions: `∇df ≈ 0`, all `λᵢ` equal and
/// `|df|²` constant, each within `tol(h)`.
pub fn equality_diagnostics(report: &PinchingReport) -> Result<EqualityDiagnostics> {
    if report.classification != Classification::Equality {
        return Err(Error::Usage(format!(
            "equality diagnostics need an equality-classified report, got {}",
            report.classification
        )));
    }
    let m = report.equality;
    let tol = report.tol;
    if report.constant {
        return Ok(EqualityDiagnostics {
            skipped: true,
            measures: m,
            tol,
            parallel: true,
            equal_lambdas: true,
            constant_energy_density: true,
            affine: m.affine_residual.map(|_| true),
            passed: true,
        });
    }
    let parallel = m.hess_sup <= tol;
    let equal_lambdas = m.lambda_spread <= tol;
    let constant_energy_density = m.df_norm2_spread <= tol;
    let affine = m.affine_residual.map(|r| r <= tol);
    let passed = parallel && equal_lambdas && constant_energy_density && affine.unwrap_or(true);
    Ok(EqualityDiagnostics { skipped: false, measures: m, tol, parallel, equal_lambdas, constant_energy_density, affine, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationGap {
    pub sec_max_image: f64,
    pub sec_max_global_sample: f64,
    pub gap: f64,
}

/// Curvature along the image against curvature over the whole target.
pub fn localization_gap(f: &DiscreteMap, opts: &ReportOptions) -> Result<LocalizationGap> {
    let image = distinct_points(f.points());
    let sec = sec_max_over_region(f.target(), &image, &opts.sec)?;
    let global = global_curvature(f.target(), &sec.witness, opts)?;
    Ok(LocalizationGap { sec_max_image: sec.value, sec_max_global_sample: global, gap: global - sec.value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub map: String,
    pub resolution: [usize; 2],
    pub harmonic: bool,
    pub constant: bool,
    pub margin: f64,
    pub tol: f64,
    pub classification: Classification,
    pub prediction: String,
    pub equality_passed: Option<bool>,
    pub status: ScanStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyTable {
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != ScanStatus::Fail)
    }

    /// Fails on the first violating row.
    pub fn check(&self) -> Result<()> {
        match self.rows.iter().find(|r| r.status == ScanStatus::Fail) {
            Some(r) => Err(Error::ConsistencyFailure { map: r.map.clone(), detail: r.detail.clone() }),
            None => Ok(()),
        }
    }
}

/// Checks one map against the theorem: a numerically harmonic nonconstant map
/// may not sit strictly above threshold, and at equality it must pass the
/// equality diagnostics.
pub fn consistency_row(name: &str, f: &DiscreteMap, opts: &ReportOptions) -> Result<ConsistencyRow> {
    let r = build_report(f, opts)?;
    let mut row = ConsistencyRow {
        map: name.to_string(),
        resolution: r.resolution,
        harmonic: r.harmonic,
        constant: r.constant,
        margin: r.margin,
        tol: r.tol,
        classification: r.classification,
        prediction: r.prediction.clone(),
        equality_passed: None,
        status: ScanStatus::Pass,
        detail: String::new(),
    };
    if !r.harmonic {
        row.status = ScanStatus::Skipped;
        row.detail = format!("not numerically harmonic: sup|tau| = {:e} > {:e}", r.sup_tension, r.harmonic_tol);
        return Ok(row);
    }
    if !r.constant && r.classification == Classification::Strict {
        row.status = ScanStatus::Fail;
        row.detail = format!("nonconstant harmonic map above threshold: margin {:e} > tol {:e}", r.margin, r.tol);
        return Ok(row);
    }
    if r.classification == Classification::Equality {
        let diag = equality_diagnostics(&r)?;
        row.equality_passed = Some(diag.passed);
        if !diag.passed {
            row.status = ScanStatus::Fail;
            row.detail = format!(
                "equality diagnostics failed: hess_sup {:e}, lambda_spread {:e}, |df|^2 spread {:e}, tol {:e}",
                diag.measures.hess_sup, diag.measures.lambda_spread, diag.measures.df_norm2_spread, diag.tol
            );
            return Ok(row);
        }
    }
    row.detail = if r.constant { "constant".into() } else { format!("{}", r.classification) };
    Ok(row)
}

/// Builds the table without failing on violations.
pub fn consistency_table(maps: &[(String, DiscreteMap)], opts: &ReportOptions) -> Result<ConsistencyTable> {
    let rows = maps.iter().map(|(name, f)| consistency_row(name, f, opts)).collect::<Result<_>>()?;
    Ok(ConsistencyTable { rows })
}

/// Builds the table and fails with the first offending map.
pub fn theorem_consistency_scan(maps: &[(String, DiscreteMap)], opts: &ReportOptions) -> Result<ConsistencyTable> {
    let table = consistency_table(maps, opts)?;
    table.check()?;
    Ok(table)
}

/// The harmonic catalog maps on `S²(1)` at `n1 × 2n1`.
pub fn default_catalog(n1: usize) -> Result<Vec<(String, DiscreteMap)>> {
    let maps = [
        AnalyticMap::Constant { point: None },
        AnalyticMap::IdentitySphere,
        AnalyticMap::RadialScaling { r: 0.5 },
        AnalyticMap::RadialScaling { r: 1.0 },
        AnalyticMap::RadialScaling { r: 2.0 },
        AnalyticMap::Holomorphic { k: 2 },
        AnalyticMap::Holomorphic { k: 3 },
    ];
    maps.iter()
        .map(|m| {
            let d = DomainModel::parse(&m.default_domain(), n1, 2 * n1)?;
            let t = TargetModel::parse(&m.default_target())?;
            Ok((m.name(), m.sample(&d, &t)?))
        })
        .collect()
}

/// Measures `C` for `tol(h) = C·h²` on the homothety family
/// `S²(1) → S²(r)`, `r ∈ {0.5, 1, 2}`: the largest of `|margin|`,
/// λ-spread, `sup‖∇df‖` and `|df|²` spread over `h²`, times
/// [`CALIBRATION_SAFETY`].
pub fn calibrate_error_model(n1: usize) -> Result<ErrorModel> {
    let opts = ReportOptions { global_sample: 0, ..ReportOptions::default() };
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        let d = DomainModel::round_sphere(1.0, n1, 2 * n1)?;
        let f = AnalyticMap::RadialScaling { r }.sample(&d, &TargetModel::sphere(r)?)?;
        let rep = build_report(&f, &opts)?;
        let m = rep.equality;
        let h2 = rep.h * rep.h;
        for v in [rep.margin.abs(), m.lambda_spread, m.hess_sup, m.df_norm2_spread] {
            worst = worst.max(v / h2);
        }
    }
    Ok(ErrorModel::new(CALIBRATION_SAFETY * worst))
}
