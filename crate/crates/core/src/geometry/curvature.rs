//! Sectional curvature of targets and its maximum over regions.
//!
//! `sec_max_over_region` maximizes over every 2-plane of `T_q M̄` at every
//! `q` in the region, not only planes tangent to some image. Constant
//! curvature targets use the closed form. Otherwise each point gets a fixed
//! number of random planes followed by alternating ascent on the
//! Grassmannian: with `X` fixed, `Y ↦ ⟨R(X,Y)Y,X⟩` is a quadratic form whose
//! maximizer over unit `Y ⊥ X` is a top eigenvector, and the roles of `X`
//! and `Y` then swap. Each swap can only increase the value.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::target::{gaussian, TargetModel};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_desc;

const DEGENERATE_PLANE: f64 = 1e-14;

/// A 2-plane at a target point with its sectional curvature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub base: Vec<f64>,
    /// Orthonormal basis of the plane, ambient coordinates.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecMaxOptions {
    pub planes: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for SecMaxOptions {
    fn default() -> Self {
        Self { planes: 512, ascent_steps: 50, seed: 0x5ec_a11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecMax {
    pub value: f64,
    pub witness: CurvatureSample,
    /// Smallest sectional value seen among all sampled planes.
    pub min_sampled: f64,
}

/// `Sec(σ) = ⟨R(X,Y)Y,X⟩ / (|X|²|Y|² − ⟨X,Y⟩²)` for the plane spanned by
/// tangent vectors `X, Y` at `q`.
pub fn sectional_curvature(target: &TargetModel, q: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    target.check_on_target(q)?;
    let m = target.ambient_dim();
    if x.len() != m || y.len() != m {
        return Err(Error::Domain(format!("plane vectors must have ambient dimension {m}")));
    }
    let p = target.projector(q);
    let x = &p * DVector::from_column_slice(x);
    let y = &p * DVector::from_column_slice(y);
    let denom = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
    let scale = x.norm_squared() * y.norm_squared();
    if denom < DEGENERATE_PLANE * scale.max(1.0) || denom <= 0.0 {
        return Err(Error::DegeneratePlane(denom));
    }
    if let Some(k) = target.constant_curvature() {
        return Ok(k);
    }
    Ok(sectional_curvature_gauss(target, q, &x, &y, denom))
}

/// Gauss-equation path, never overridden by a closed form.
pub fn sectional_curvature_gauss_path(target: &TargetModel, q: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    target.check_on_target(q)?;
    let p = target.projector(q);
    let x = &p * DVector::from_column_slice(x);
    let y = &p * DVector::from_column_slice(y);
    let denom = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
    if denom < DEGENERATE_PLANE * (x.norm_squared() * y.norm_squared()).max(1.0) || denom <= 0.0 {
        return Err(Error::DegeneratePlane(denom));
    }
    Ok(sectional_curvature_gauss(target, q, &x, &y, denom))
}

fn sectional_curvature_gauss(target: &TargetModel, q: &[f64], x: &DVector<f64>, y: &DVector<f64>, denom: f64) -> f64 {
    target.point_geometry(q).sectional_numerator(x, y) / denom
}

/// Riemann tensor of a target point in an orthonormal tangent basis,
/// `r[((a·k + b)·k + c)·k + d] = ⟨R(e_a,e_b)e_c, e_d⟩`.
struct TangentCurvature {
    k: usize,
    basis: DMatrix<f64>,
    r: Vec<f64>,
}

impl TangentCurvature {
    fn new(target: &TargetModel, q: &[f64]) -> Self {
        let geo = target.point_geometry(q);
        let basis = target.tangent_basis(q);
        let k = basis.ncols();
        let cols: Vec<DVector<f64>> = (0..k).map(|a| basis.column(a).into_owned()).collect();
        let mut sff = vec![DVector::zeros(target.ambient_dim()); k * k];
        for a in 0..k {
            for b in 0..k {
                sff[a * k + b] = geo.second_fundamental_form(&cols[a], &cols[b]);
            }
        }
        let mut r = vec![0.0; k * k * k * k];
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        r[((a * k + b) * k + c) * k + d] = sff[b * k + c].dot(&sff[a * k + d]) - sff[a * k + c].dot(&sff[b * k + d]);
                    }
                }
            }
        }
        Self { k, basis, r }
    }

    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.k + b) * self.k + c) * self.k + d
    }

    /// `⟨R(x,y)y,x⟩` for orthonormal tangent coefficient vectors.
    fn sec(&self, x: &[f64], y: &[f64]) -> f64 {
        let k = self.k;
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                let xy = x[a] * y[b];
                if xy == 0.0 {
                    continue;
                }
                for c in 0..k {
                    let xyy = xy * y[c];
                    for d in 0..k {
                        s += xyy * x[d] * self.r[self.idx(a, b, c, d)];
                    }
                }
            }
        }
        s
    }

    /// Symmetric matrix of `y ↦ ⟨R(x,y)y,x⟩`.
    fn jacobi(&self, x: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        DMatrix::from_fn(k, k, |b, c| {
            let mut s = 0.0;
            for a in 0..k {
                for d in 0..k {
                    s += x[a] * x[d] * (self.r[self.idx(a, b, c, d)] + self.r[self.idx(a, c, b, d)]);
                }
            }
            0.5 * s
        })
    }

    /// Top eigenvector of the Jacobi form of `x` restricted to `x^⊥`.
    fn best_partner(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k;
        let jx = self.jacobi(x);
        let xv = DVector::from_column_slice(x);
        let proj = DMatrix::identity(k, k) - &xv * xv.transpose();
        let shift = 10.0 * jx.amax() + 1.0;
        let restricted = &proj * jx * &proj - shift * &xv * xv.transpose();
        let (_, vecs) = symmetric_eigen_desc(&restricted);
        let mut y: Vec<f64> = vecs.column(0).iter().cloned().collect();
        orthonormalize_against(&mut y, x);
        y
    }

    fn ambient(&self, c: &[f64]) -> Vec<f64> {
        (&self.basis * DVector::from_column_slice(c)).iter().cloned().collect()
    }
}

fn orthonormalize_against(y: &mut [f64], x: &[f64]) {
    let d: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= d * xi;
    }
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for yi in y.iter_mut() {
        *yi /= n;
    }
}

/// Per-point seed that depends only on the point, so results do not depend
/// on how the region is ordered or partitioned.
fn point_seed(seed: u64, q: &[f64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in q {
        h ^= v.to_bits();
        // splitmix64 finalizer
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

struct PointResult {
    max: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    min: f64,
}

fn maximize_at_point(target: &TargetModel, q: &[f64], opts: &SecMaxOptions) -> PointResult {
    let tc = TangentCurvature::new(target, q);
    let k = tc.k;
    if k == 2 {
        // the Grassmannian of a surface is a single plane
        let (x, y) = (vec![1.0, 0.0], vec![0.0, 1.0]);
        let v = tc.sec(&x, &y);
        return PointResult { max: v, x: tc.ambient(&x), y: tc.ambient(&y), min: v };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(opts.seed, q));
    let mut best = (f64::NEG_INFINITY, vec![0.0; k], vec![0.0; k]);
    let mut min = f64::INFINITY;
    for _ in 0..opts.planes.max(1) {
        let mut x: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let mut y: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
        orthonormalize_against(&mut y, &x);
        let v = tc.sec(&x, &y);
        min = min.min(v);
        if v > best.0 {
            best = (v, x, y);
        }
    }
    let (mut val, mut x, mut y) = best;
    for _ in 0..opts.ascent_steps {
        let start = val;
        let y_new = tc.best_partner(&x);
        let v = tc.sec(&x, &y_new);
        if v > val {
            y = y_new;
            val = v;
        }
        let x_new = tc.best_partner(&y);
        let v = tc.sec(&x_new, &y);
        if v > val {
            x = x_new;
            val = v;
        }
        if val - start <= 1e-15 * val.abs().max(1.0) {
            break;
        }
    }
    PointResult { max: val, x: tc.ambient(&x), y: tc.ambient(&y), min }
}

/// Maximum sectional curvature over all 2-planes at the points of `region`.
pub fn sec_max_over_region(target: &TargetModel, region: &[Vec<f64>], opts: &SecMaxOptions) -> Result<SecMax> {
    if region.is_empty() {
        return Err(Error::Usage("sec_max_over_region needs a nonempty point set".into()));
    }
    for q in region {
        target.check_on_target(q)?;
    }
    if let Some(kc) = target.constant_curvature() {
        let q = &region[0];
        let basis = target.tangent_basis(q);
        return Ok(SecMax {
            value: kc,
            witness: CurvatureSample {
                base: q.clone(),
                x: basis.column(0).iter().cloned().collect(),
                y: basis.column(1).iter().cloned().collect(),
                value: kc,
            },
            min_sampled: kc,
        });
    }
    let results: Vec<PointResult> = region.par_iter().map(|q| maximize_at_point(target, q, opts)).collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.max > results[best].max {
            best = i;
        }
    }
    let min_sampled = results.iter().map(|r| r.min).fold(f64::INFINITY, f64::min);
    let r = &results[best];
    Ok(SecMax {
        value: r.max,
        witness: CurvatureSample { base: region[best].clone(), x: r.x.clone(), y: r.y.clone(), value: r.max },
        min_sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::target::TargetKind;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_plane(t: &TargetModel, q: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let e = t.tangent_basis(q);
        let k = e.ncols();
        let cx: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cy: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = &e * DVector::from_vec(cx);
        let y = &e * DVector::from_vec(cy);
        (x.iter().cloned().collect(), y.iter().cloned().collect())
    }

    #[test]
    fn constant_curvature_examples() {
        let s = TargetModel::sphere(2.0).unwrap();
        let q = [0.0, 2.0, 0.0];
        assert_relative_eq!(sectional_curvature(&s, &q, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 0.25);
        let e = TargetModel::euclidean(3).unwrap();
        assert_eq!(sectional_curvature(&e, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauss_path_matches_sphere_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in [0.5, 1.0, 3.0] {
            let s = TargetModel::sphere(r).unwrap();
            for q in s.quasi_uniform_sample(30, 2) {
                let (x, y) = random_plane(&s, &q, &mut rng);
                let v = sectional_curvature_gauss_path(&s, &q, &x, &y).unwrap();
                assert!((v - 1.0 / (r * r)).abs() < 1e-8, "{v}");
            }
        }
        let s3 = TargetModel::new(TargetKind::Sphere { k: 3, r: 2.0 }).unwrap();
        let q = s3.base_point();
        let (x, y) = random_plane(&s3, &q, &mut rng);
        assert!((sectional_curvature_gauss_path(&s3, &q, &x, &y).unwrap() - 0.25).abs() < 1e-8);
    }

    #[test]
    fn flat_torus_gauss_path_is_flat() {
        let t = TargetModel::flat_torus(vec![1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in t.quasi_uniform_sample(10, 3) {
            let (x, y) = random_plane(&t, &q, &mut rng);
            assert!(sectional_curvature_gauss_path(&t, &q, &x, &y).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn product_spheres_factor_and_mixed_planes() {
        let t = TargetModel::product_spheres(1.0, 2.0).unwrap();
        let q = [1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let in_first = sectional_curvature(&t, &q, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((in_first - 1.0).abs() < 1e-10);
        let in_second = sectional_curvature(&t, &q, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((in_second - 0.25).abs() < 1e-10);
        let mixed = sectional_curvature(&t, &q, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(mixed.abs() < 1e-10);
    }

    #[test]
    fn basis_invariance() {
        let t = TargetModel::product_spheres(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for q in t.quasi_uniform_sample(20, 6) {
            let (x, y) = random_plane(&t, &q, &mut rng);
            let v = sectional_curvature(&t, &q, &x, &y).unwrap();
            let (a, b, c, d) = (0.3, -1.7, 2.2, 0.4);
            let x2: Vec<f64> = (0..6).map(|i| a * x[i] + b * y[i]).collect();
            let y2: Vec<f64> = (0..6).map(|i| c * x[i] + d * y[i]).collect();
            let v2 = sectional_curvature(&t, &q, &x2, &y2).unwrap();
            assert!((v - v2).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_plane_is_an_error() {
        let t = TargetModel::ellipsoid(1.0, 1.0, 2.0).unwrap();
        let q = [1.0, 0.0, 0.0];
        let r = sectional_curvature(&t, &q, &[0.0, 1.0, 0.0], &[0.0, 2.0, 0.0]);
        assert!(matches!(r, Err(Error::DegeneratePlane(_))));
    }

    #[test]
    fn off_target_base_point_is_a_domain_error() {
        let t = TargetModel::sphere(1.0).unwrap();
        let r = sectional_curvature(&t, &[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = sec_max_over_region(&t, &[vec![0.0, 0.0, 2.0]], &SecMaxOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn sec_max_examples() {
        let s = TargetModel::sphere(2.0).unwrap();
        let q = s.quasi_uniform_sample(5, 0);
        assert_eq!(sec_max_over_region(&s, &q, &SecMaxOptions::default()).unwrap().value, 0.25);
        assert!(matches!(sec_max_over_region(&s, &[], &SecMaxOptions::default()), Err(Error::Usage(_))));
    }

    /// Dense random-plane oracle for product spheres; independent of the ascent.
    #[test]
    fn product_spheres_max_against_dense_sampling() {
        let t = TargetModel::product_spheres(1.0, 2.0).unwrap();
        let region = t.quasi_uniform_sample(16, 2);
        let got = sec_max_over_region(&t, &region, &SecMaxOptions::default()).unwrap();
        assert!((got.value - 1.0).abs() < 1e-6, "{}", got.value);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut oracle = f64::NEG_INFINITY;
        for q in &region {
            for _ in 0..4000 {
                let (x, y) = random_plane(&t, q, &mut rng);
                oracle = oracle.max(sectional_curvature_gauss_path(&t, q, &x, &y).unwrap());
            }
        }
        assert!(oracle <= got.value + 1e-9);
        assert!(oracle > 0.9);
        // witness is a genuine plane at a region point
        let w = &got.witness;
        let v = sectional_curvature_gauss_path(&t, &w.base, &w.x, &w.y).unwrap();
        assert!((v - got.value).abs() < 1e-9);
        assert!(got.min_sampled >= -1e-10);
    }

    #[test]
    fn monotone_in_region() {
        let t = TargetModel::product_spheres(1.0, 3.0).unwrap();
        let all = t.quasi_uniform_sample(40, 5);
        let opts = SecMaxOptions { planes: 16, ascent_steps: 0, seed: 3 };
        let small = sec_max_over_region(&t, &all[..10], &opts).unwrap().value;
        let big = sec_max_over_region(&t, &all, &opts).unwrap().value;
        assert!(small <= big + 1e-9);
        let mut reordered = all.clone();
        reordered.reverse();
        assert_eq!(sec_max_over_region(&t, &reordered, &opts).unwrap().value, big);
    }
}
