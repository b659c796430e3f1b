//! The Bochner quantity `Q(f)`, the Bochner–Weitzenböck identity
//! `½Δ|df|² = ‖∇df‖² + Q(f)` for harmonic maps, its integrated form, and the
//! inequalities that turn it into a pinching estimate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sectional_curvature, DomainModel, TargetModel};
use crate::maps::calculus::laplacian_scalar_unchecked;
use crate::maps::{AnalyticMap, DiscreteMap, PointwiseMapData};

/// Pairs with `λᵢλⱼ` below this carry no weight in the target term.
pub const DEGENERATE_PAIR: f64 = 1e-14;

/// Tolerance for the exact algebraic identities of the λ-chain.
pub const CHAIN_TOL: f64 = 1e-12;

/// Resolution-indexed tolerance `tol(h) = C·h²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorModel {
    pub c: f64,
}

impl ErrorModel {
    pub fn new(c: f64) -> Self {
        Self { c }
    }

    pub fn tol(&self, h: f64) -> f64 {
        self.c * h * h
    }

    pub fn tol_for(&self, domain: &DomainModel) -> f64 {
        self.tol(domain.h())
    }
}

/// `Ricⁱʲ (f*ḡ)ᵢⱼ`, the frame-free form of `Σ Ric(eᵢ,eᵢ)|df(eᵢ)|²`.
pub fn ricci_contraction(domain: &DomainModel, node: usize, pullback: &DMatrix<f64>) -> f64 {
    let p = domain.coords(node);
    let ric = domain.ricci(p);
    let ginv = domain.inverse_metric(p);
    let ric_up = ginv * ric * ginv;
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += ric_up[(i, j)] * pullback[(i, j)];
        }
    }
    s
}

/// Invariant path: `gⁱᵏ gʲˡ ⟨R̄(∂ᵢf, ∂ⱼf)∂ₗf, ∂ₖf⟩` with `R̄` from the Gauss equation.
pub fn target_term_invariant(f: &DiscreteMap, data: &PointwiseMapData) -> f64 {
    let target = f.target();
    if target.constant_curvature() == Some(0.0) {
        return 0.0;
    }
    let d = f.domain();
    let ginv = d.inverse_metric(d.coords(data.node));
    let geo = target.point_geometry(f.value(data.node));
    let cols: Vec<DVector<f64>> = (0..2).map(|a| data.jacobian.column(a).into_owned()).collect();
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let w = ginv[(i, k)] * ginv[(j, l)];
                    if w != 0.0 {
                        s += w * geo.riemann(&cols[i], &cols[j], &cols[l], &cols[k]);
                    }
                }
            }
        }
    }
    s
}

/// Diagonalized path: `2 Σ_{i<j} Sec(uᵢ,uⱼ) λᵢλⱼ` in the λ-frame, `uᵢ = df(eᵢ)`.
pub fn target_term_diagonal(f: &DiscreteMap, data: &PointwiseMapData) -> Result<f64> {
    let lambdas = &data.spectrum.lambdas;
    let u = &data.jacobian * &data.spectrum.frame;
    let q = f.value(data.node);
    let mut s = 0.0;
    for i in 0..lambdas.len() {
        for j in i + 1..lambdas.len() {
            let w = lambdas[i] * lambdas[j];
            if w < DEGENERATE_PAIR {
                continue;
            }
            let ui: Vec<f64> = u.column(i).iter().cloned().collect();
            let uj: Vec<f64> = u.column(j).iter().cloned().collect();
            s += 2.0 * sectional_curvature(f.target(), q, &ui, &uj)? * w;
        }
    }
    Ok(s)
}

/// Per-node Bochner data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BochnerNode {
    pub node: usize,
    pub i: usize,
    pub j: usize,
    pub flagged: bool,
    pub e: f64,
    pub lambdas: Vec<f64>,
    pub ricci_term: f64,
    pub target_term: f64,
    pub q: f64,
    pub hess: f64,
    pub lap: f64,
    pub residual: f64,
    pub tension: f64,
}

/// Bochner quantities at every node of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct BochnerData {
    pub nodes: Vec<BochnerNode>,
    pub h: f64,
    weights: Vec<f64>,
}

impl BochnerData {
    pub fn compute(f: &DiscreteMap) -> Result<Self> {
        let d = f.domain();
        let partial: Vec<(PointwiseMapData, f64, f64)> = (0..d.node_count())
            .into_par_iter()
            .map(|k| {
                let data = PointwiseMapData::compute(f, k)?;
                let ric = ricci_contraction(d, k, &data.spectrum.pullback);
                let tgt = target_term_invariant(f, &data);
                Ok((data, ric, tgt))
            })
            .collect::<Result<_>>()?;
        let s_field: Vec<f64> = partial.iter().map(|(p, _, _)| p.s()).collect();
        let nodes = partial
            .into_par_iter()
            .map(|(data, ric, tgt)| {
                let k = data.node;
                let (i, j) = d.grid_indices(k);
                let lap = 0.5 * laplacian_scalar_unchecked(d, &s_field, k);
                let q = ric - tgt;
                let hess = data.hessian.norm2;
                BochnerNode {
                    node: k,
                    i,
                    j,
                    flagged: d.is_flagged(k),
                    e: data.e(),
                    lambdas: data.spectrum.lambdas.clone(),
                    ricci_term: ric,
                    target_term: tgt,
                    q,
                    hess,
                    lap,
                    residual: lap - hess - q,
                    tension: data.tension.norm(),
                }
            })
            .collect();
        let weights = (0..d.node_count()).map(|k| d.weight(k)).collect();
        Ok(Self { nodes, h: d.h(), weights })
    }

    /// Sup of `|½Δ|df|² − ‖∇df‖² − Q|` over nodes outside the polar caps.
    pub fn sup_residual(&self) -> f64 {
        self.sup_unflagged(|n| n.residual.abs())
    }

    /// Sup of `|τ|` over nodes outside the polar caps; the residual is
    /// meaningful only when this is small.
    pub fn sup_tension(&self) -> f64 {
        self.sup_unflagged(|n| n.tension)
    }

    pub fn sup_hess(&self) -> f64 {
        self.sup_unflagged(|n| n.hess)
    }

    fn sup_unflagged(&self, g: impl Fn(&BochnerNode) -> f64) -> f64 {
        self.nodes.iter().filter(|n| !n.flagged).map(g).fold(0.0, f64::max)
    }

    /// Quadrature of `‖∇df‖² + Q` over the whole domain, poles included.
    pub fn integral_identity(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(n, w)| (n.hess + n.q) * w).sum()
    }

    /// `Σ ½|df|² dvol`.
    pub fn energy(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(n, w)| n.e * w).sum()
    }
}

/// `Q(f)` at one node.
pub fn bochner_q(f: &DiscreteMap, node: usize) -> Result<f64> {
    let data = PointwiseMapData::compute(f, node)?;
    Ok(ricci_contraction(f.domain(), node, &data.spectrum.pullback) - target_term_invariant(f, &data))
}

/// Sup-norm of the Bochner residual over nodes outside the polar caps,
/// together with the sup of the tension it presupposes to be small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub sup_residual: f64,
    pub sup_tension: f64,
    pub h: f64,
}

pub fn bochner_residual(f: &DiscreteMap) -> Result<ResidualSummary> {
    let b = BochnerData::compute(f)?;
    Ok(ResidualSummary { sup_residual: b.sup_residual(), sup_tension: b.sup_tension(), h: b.h })
}

/// `∫(‖∇df‖² + Q) dvol` by quadrature.
pub fn integral_identity_residual(f: &DiscreteMap) -> Result<f64> {
    Ok(BochnerData::compute(f)?.integral_identity())
}

/// Repeated Richardson extrapolation of a quantity with an even error
/// expansion `c₂h² + c₄h⁴ + …`, from values on grids halved level by level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Richardson {
    /// `(latitude rows, value)`, coarsest first.
    pub levels: Vec<(usize, f64)>,
    /// Value at the finest level, without extrapolation.
    pub finest: f64,
    pub extrapolated: f64,
}

impl Richardson {
    pub fn from_levels(levels: Vec<(usize, f64)>) -> Self {
        let mut row: Vec<f64> = levels.iter().map(|l| l.1).collect();
        let mut factor = 4.0;
        while row.len() > 1 {
            row = row.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
            factor *= 4.0;
        }
        let finest = levels.last().map(|l| l.1).unwrap_or(f64::NAN);
        Self { levels, finest, extrapolated: row.first().copied().unwrap_or(f64::NAN) }
    }
}

/// Evaluates `quantity` on `domain` and on `count − 1` successively halved
/// grids, then extrapolates to `h → 0`.
pub fn richardson_over_grids(
    domain: &DomainModel,
    count: usize,
    quantity: impl Fn(&DomainModel) -> Result<f64>,
) -> Result<Richardson> {
    let (n1, n2) = domain.shape();
    let div = 1usize << (count.max(1) - 1);
    if n1 % div != 0 || n2 % div != 0 || n1 / div < 8 {
        return Err(Error::Usage(format!("{n1}x{n2} cannot be halved {} times down to at least 8 rows", count - 1)));
    }
    let mut levels = Vec::with_capacity(count);
    for l in (0..count).rev() {
        let g = domain.with_resolution(n1 >> l, n2 >> l)?;
        levels.push((n1 >> l, quantity(&g)?));
    }
    Ok(Richardson::from_levels(levels))
}

/// Integral identity of a catalog map, extrapolated from `domain`'s grid
/// and `count − 1` coarser ones.
pub fn integral_identity_richardson(
    map: &AnalyticMap,
    domain: &DomainModel,
    target: &TargetModel,
    count: usize,
) -> Result<Richardson> {
    richardson_over_grids(domain, count, |g| integral_identity_residual(&map.sample(g, target)?))
}

/// The three sides of `Σ_{i<j}λᵢλⱼ = (S² − Σλᵢ²)/2 ≤ (n−1)/(2n)·S²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaChain {
    pub n: usize,
    pub lhs: f64,
    pub mid: f64,
    pub bound: f64,
    pub spread: f64,
    pub equality: bool,
}

pub fn lambda_chain_check(lambdas: &[f64]) -> Result<LambdaChain> {
    let n = lambdas.len();
    if n < 2 {
        return Err(Error::Usage(format!("need at least two λ values, got {n}")));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::Usage(format!("λ values must be finite and nonnegative, got {bad}")));
    }
    let mut lhs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            lhs += lambdas[i] * lambdas[j];
        }
    }
    let s: f64 = lambdas.iter().sum();
    let sq: f64 = lambdas.iter().map(|l| l * l).sum();
    let mid = 0.5 * (s * s - sq);
    let bound = (n as f64 - 1.0) / (2.0 * n as f64) * s * s;
    let max = lambdas.iter().cloned().fold(f64::MIN, f64::max);
    let min = lambdas.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max - min;
    let scale = 1.0f64.max(s * s);
    if (lhs - mid).abs() > CHAIN_TOL * scale {
        return Err(Error::Assertion(format!("Σλᵢλⱼ = {lhs} but (S² − Σλ²)/2 = {mid}")));
    }
    if mid > bound + CHAIN_TOL * scale {
        return Err(Error::Assertion(format!("(S² − Σλ²)/2 = {mid} exceeds (n−1)/(2n)·S² = {bound}")));
    }
    Ok(LambdaChain { n, lhs, mid, bound, spread, equality: spread <= CHAIN_TOL })
}

/// Both forms of the pointwise lower bound for `Q` at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchingCheck {
    pub q: f64,
    /// `|df|²(Ric_min − ((n−1)/n)·Sec_max·|df|²)`.
    pub bound: f64,
    /// `2e(Ric_min − (2(n−1)/n)·Sec_max·e)`.
    pub bound_energy_form: f64,
    pub slack: f64,
}

/// Lower bound for `Q` in terms of `|df|²`, and its energy-density form.
pub fn pinching_bound(n: usize, s: f64, ric_min: f64, sec_max: f64) -> (f64, f64) {
    let nf = n as f64;
    let e = 0.5 * s;
    let bound = s * (ric_min - (nf - 1.0) / nf * sec_max * s);
    let energy_form = 2.0 * e * (ric_min - 2.0 * (nf - 1.0) / nf * sec_max * e);
    (bound, energy_form)
}

pub fn pointwise_pinching_check(f: &DiscreteMap, node: usize, ric_min: f64, sec_max: f64) -> Result<PinchingCheck> {
    if sec_max < 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "sectional curvature on the image must be nonnegative, got sec_max = {sec_max}"
        )));
    }
    let data = PointwiseMapData::compute(f, node)?;
    let q = ricci_contraction(f.domain(), node, &data.spectrum.pullback) - target_term_invariant(f, &data);
    let (bound, bound_energy_form) = pinching_bound(f.domain().dim(), data.s(), ric_min, sec_max);
    if (bound - bound_energy_form).abs() > 1e-14 * bound.abs().max(1.0) {
        return Err(Error::Assertion(format!("pinching forms disagree: {bound} vs {bound_energy_form}")));
    }
    Ok(PinchingCheck { q, bound, bound_energy_form, slack: q - bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_map(map: AnalyticMap, n1: usize, tr: f64) -> DiscreteMap {
        let d = DomainModel::round_sphere(1.0, n1, 2 * n1).unwrap();
        map.sample(&d, &TargetModel::sphere(tr).unwrap()).unwrap()
    }

    #[test]
    fn constant_map_has_zero_bochner_data() {
        let d = DomainModel::round_sphere(1.0, 16, 32).unwrap();
        let f = AnalyticMap::Constant { point: None }.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap();
        let b = BochnerData::compute(&f).unwrap();
        for n in &b.nodes {
            assert_eq!((n.ricci_term, n.target_term, n.q, n.hess, n.lap, n.residual), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        }
        assert_eq!(b.integral_identity(), 0.0);
        let c = pointwise_pinching_check(&f, 5, 1.0, 1.0).unwrap();
        assert_eq!((c.q, c.bound, c.slack), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_sphere_terms() {
        let f = sphere_map(AnalyticMap::IdentitySphere, 64, 1.0);
        let b = BochnerData::compute(&f).unwrap();
        for n in b.nodes.iter().filter(|n| !n.flagged) {
            assert!((n.ricci_term - 2.0).abs() < 2e-3, "{}", n.ricci_term);
            assert!((n.target_term - 2.0).abs() < 4e-3, "{}", n.target_term);
            assert!(n.q.abs() < 2e-3);
        }
        let c = pointwise_pinching_check(&f, f.domain().index(32, 3), 1.0, 1.0).unwrap();
        assert!(c.q.abs() < 2e-3 && c.bound.abs() < 2e-3 && c.slack > -1e-6, "{c:?}");
    }

    #[test]
    fn radial_scaling_target_term() {
        for r in [0.5, 2.0] {
            let f = sphere_map(AnalyticMap::RadialScaling { r }, 64, r);
            let node = f.domain().index(20, 7);
            let data = PointwiseMapData::compute(&f, node).unwrap();
            assert_relative_eq!(target_term_invariant(&f, &data), 2.0 * r * r, max_relative = 2e-3);
        }
    }

    #[test]
    fn flat_targets_and_domains() {
        let torus = DomainModel::flat_torus(1.0, 1.0, 32, 32).unwrap();
        let t = TargetModel::flat_torus(vec![1.0, 1.0]).unwrap();
        let f = AnalyticMap::TorusIdentity.sample(&torus, &t).unwrap();
        let b = BochnerData::compute(&f).unwrap();
        assert!(b.nodes.iter().all(|n| n.ricci_term == 0.0 && n.target_term.abs() < 1e-12));
        let cap = AnalyticMap::Cap { amplitude: 0.3 }.sample(&torus, &TargetModel::sphere(1.0).unwrap()).unwrap();
        assert!(BochnerData::compute(&cap).unwrap().nodes.iter().all(|n| n.ricci_term == 0.0));
        // sphere domain into flat space: Q is the Ricci term, nonnegative
        let d = DomainModel::round_sphere(1.0, 16, 32).unwrap();
        let e = AnalyticMap::Cap { amplitude: 0.5 }.sample(&d, &TargetModel::euclidean(3).unwrap()).unwrap();
        for n in BochnerData::compute(&e).unwrap().nodes {
            assert_eq!(n.target_term, 0.0);
            assert!(n.q >= 0.0);
        }
    }

    #[test]
    fn target_term_paths_agree() {
        let d = DomainModel::round_sphere(1.0, 24, 48).unwrap();
        let cases = [
            AnalyticMap::Holomorphic { k: 2 }.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap(),
            AnalyticMap::Holomorphic { k: 3 }.sample(&d, &TargetModel::sphere(1.5).unwrap()).unwrap(),
            AnalyticMap::EquatorialBand { height: 0.5 }
                .sample(&DomainModel::flat_torus(1.0, 1.0, 24, 24).unwrap(), &TargetModel::ellipsoid(1.0, 1.0, 2.0).unwrap())
                .unwrap(),
        ];
        for f in &cases {
            for k in (0..f.domain().node_count()).step_by(5) {
                let data = PointwiseMapData::compute(f, k).unwrap();
                let a = target_term_invariant(f, &data);
                let b = target_term_diagonal(f, &data).unwrap();
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn lambda_chain_examples() {
        let c = lambda_chain_check(&[1.0, 1.0]).unwrap();
        assert_eq!((c.lhs, c.mid, c.bound, c.equality), (1.0, 1.0, 1.0, true));
        let c = lambda_chain_check(&[2.0, 0.0]).unwrap();
        assert_eq!((c.lhs, c.mid, c.bound, c.equality), (0.0, 0.0, 1.0, false));
        assert!(matches!(lambda_chain_check(&[1.0, -0.5]), Err(Error::Usage(_))));
        assert!(lambda_chain_check(&[1.0]).is_err());
    }

    #[test]
    fn lambda_chain_random_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 5] {
            for _ in 0..1000 {
                let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
                let c = lambda_chain_check(&l).unwrap();
                // brute-force oracle for the pair sum
                let mut pairs = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            pairs += 0.5 * l[i] * l[j];
                        }
                    }
                }
                assert!((pairs - c.lhs).abs() < 1e-12);
                assert!(c.mid <= c.bound + 1e-12);
            }
        }
    }

    #[test]
    fn pinching_forms_agree_and_hypothesis_is_checked() {
        for s in [0.0, 0.3, 2.0, 17.0] {
            let (a, b) = pinching_bound(2, s, 0.7, 1.3);
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
        let f = sphere_map(AnalyticMap::IdentitySphere, 16, 1.0);
        assert!(matches!(pointwise_pinching_check(&f, 0, 1.0, -0.1), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn holomorphic_slack_is_nonnegative() {
        let f = sphere_map(AnalyticMap::Holomorphic { k: 2 }, 32, 1.0);
        for k in 0..f.domain().node_count() {
            let c = pointwise_pinching_check(&f, k, 1.0, 1.0).unwrap();
            assert!(c.slack >= -1e-6, "{k}: {}", c.slack);
        }
    }

    #[test]
    fn richardson_removes_even_orders() {
        let f = |h: f64| 1.0 + 0.3 * h * h - 2.0 * h.powi(4);
        let r = Richardson::from_levels(vec![(8, f(0.4)), (16, f(0.2)), (32, f(0.1))]);
        assert!((r.extrapolated - 1.0).abs() < 1e-14);
        assert_eq!(r.finest, f(0.1));
    }

    #[test]
    fn residual_decays_for_identity() {
        let a = bochner_residual(&sphere_map(AnalyticMap::IdentitySphere, 32, 1.0)).unwrap();
        let b = bochner_residual(&sphere_map(AnalyticMap::IdentitySphere, 64, 1.0)).unwrap();
        let ratio = a.sup_residual / b.sup_residual;
        assert!((3.0..=5.0).contains(&ratio), "{a:?} {b:?}");
    }
}
