//! Target manifolds embedded isometrically in flat Euclidean space.
//!
//! Every catalog target is cut out by quadratic constraints
//! `F_a(x) = Σᵢ w_{a,i} xᵢ² − 1 = 0`, so the tangent projector
//! `P(x) = I − N (NᵀN)⁻¹ Nᵀ` (with `N` the constraint gradients) and its
//! derivative are available in closed form on a tube around the target.
//! The second fundamental form follows as `A(X, Y) = (D_X P) Y` and the
//! Riemann tensor from the Gauss equation
//! `⟨R(X,Y)Z,W⟩ = ⟨A(Y,Z), A(X,W)⟩ − ⟨A(X,Z), A(Y,W)⟩`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::descriptor::Descriptor;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_desc;

/// On-target tolerance used when validating inputs.
pub const ON_TARGET_TOL: f64 = 1e-8;

const CLOSEST_POINT_MAX_ITER: usize = 50;
const CLOSEST_POINT_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    Euclidean { m: usize },
    Sphere { k: usize, r: f64 },
    FlatTorusEmb { radii: Vec<f64> },
    Ellipsoid { a: f64, b: f64, c: f64 },
    ProductSpheres { r1: f64, r2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    pub kind: TargetKind,
    m: usize,
    k: usize,
    /// Diagonal weights of each quadratic constraint.
    constraints: Vec<Vec<f64>>,
}

impl TargetModel {
    pub fn new(kind: TargetKind) -> Result<Self> {
        let (m, k, constraints) = match &kind {
            TargetKind::Euclidean { m } => {
                if *m < 2 {
                    return Err(Error::Usage(format!("euclidean target needs m >= 2, got {m}")));
                }
                (*m, *m, Vec::new())
            }
            TargetKind::Sphere { k, r } => {
                check_positive("r", *r)?;
                if *k < 2 {
                    return Err(Error::Usage(format!("sphere target needs k >= 2, got {k}")));
                }
                (k + 1, *k, vec![vec![1.0 / (r * r); k + 1]])
            }
            TargetKind::FlatTorusEmb { radii } => {
                if radii.len() < 2 {
                    return Err(Error::Usage("flat torus target needs at least two circle radii".into()));
                }
                let m = 2 * radii.len();
                let mut cons = Vec::new();
                for (i, &rho) in radii.iter().enumerate() {
                    check_positive("circle radius", rho)?;
                    let mut w = vec![0.0; m];
                    w[2 * i] = 1.0 / (rho * rho);
                    w[2 * i + 1] = 1.0 / (rho * rho);
                    cons.push(w);
                }
                (m, radii.len(), cons)
            }
            TargetKind::Ellipsoid { a, b, c } => {
                for (name, v) in [("a", a), ("b", b), ("c", c)] {
                    check_positive(name, *v)?;
                }
                (3, 2, vec![vec![1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c)]])
            }
            TargetKind::ProductSpheres { r1, r2 } => {
                check_positive("r1", *r1)?;
                check_positive("r2", *r2)?;
                let w1 = 1.0 / (r1 * r1);
                let w2 = 1.0 / (r2 * r2);
                (6, 4, vec![vec![w1, w1, w1, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, w2, w2, w2]])
            }
        };
        Ok(Self { kind, m, k, constraints })
    }

    pub fn euclidean(m: usize) -> Result<Self> {
        Self::new(TargetKind::Euclidean { m })
    }

    pub fn sphere(r: f64) -> Result<Self> {
        Self::new(TargetKind::Sphere { k: 2, r })
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(TargetKind::Ellipsoid { a, b, c })
    }

    pub fn product_spheres(r1: f64, r2: f64) -> Result<Self> {
        Self::new(TargetKind::ProductSpheres { r1, r2 })
    }

    pub fn flat_torus(radii: Vec<f64>) -> Result<Self> {
        Self::new(TargetKind::FlatTorusEmb { radii })
    }

    /// Parses `euclid:m=3`, `sphere:r=2` (optionally `k=`),
    /// `torusemb:r1=1,r2=2,...`, `ellipsoid:a=1,b=1,c=2`, `prodspheres:r1=1,r2=2`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Descriptor::parse(text)?;
        let kind = match d.kind.as_str() {
            "euclid" => TargetKind::Euclidean { m: take_count(&mut d, "m", 3.0)? },
            "sphere" => TargetKind::Sphere { k: take_count(&mut d, "k", 2.0)?, r: d.take_positive("r", Some(1.0))? },
            "torusemb" => {
                let mut radii = Vec::new();
                let mut i = 1;
                while d.has(&format!("r{i}")) {
                    radii.push(d.take_positive(&format!("r{i}"), None)?);
                    i += 1;
                }
                if radii.is_empty() {
                    radii = vec![1.0, 1.0];
                }
                TargetKind::FlatTorusEmb { radii }
            }
            "ellipsoid" => TargetKind::Ellipsoid {
                a: d.take_positive("a", Some(1.0))?,
                b: d.take_positive("b", Some(1.0))?,
                c: d.take_positive("c", Some(2.0))?,
            },
            "prodspheres" => TargetKind::ProductSpheres {
                r1: d.take_positive("r1", Some(1.0))?,
                r2: d.take_positive("r2", Some(2.0))?,
            },
            other => return Err(Error::Usage(format!("unknown target kind `{other}`"))),
        };
        d.finish()?;
        Self::new(kind)
    }

    pub fn descriptor(&self) -> String {
        let d = match &self.kind {
            TargetKind::Euclidean { m } => Descriptor::new("euclid").with("m", *m as f64),
            TargetKind::Sphere { k, r } => {
                let d = Descriptor::new("sphere");
                let d = if *k == 2 { d } else { d.with("k", *k as f64) };
                d.with("r", *r)
            }
            TargetKind::FlatTorusEmb { radii } => radii
                .iter()
                .enumerate()
                .fold(Descriptor::new("torusemb"), |d, (i, r)| d.with(&format!("r{}", i + 1), *r)),
            TargetKind::Ellipsoid { a, b, c } => Descriptor::new("ellipsoid").with("a", *a).with("b", *b).with("c", *c),
            TargetKind::ProductSpheres { r1, r2 } => Descriptor::new("prodspheres").with("r1", *r1).with("r2", *r2),
        };
        d.to_string()
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.k
    }

    /// Sectional curvature when it is the same for every plane at every point.
    pub fn constant_curvature(&self) -> Option<f64> {
        match &self.kind {
            TargetKind::Euclidean { .. } | TargetKind::FlatTorusEmb { .. } => Some(0.0),
            TargetKind::Sphere { r, .. } => Some(1.0 / (r * r)),
            _ => None,
        }
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|w| w.iter().zip(x).map(|(wi, xi)| wi * xi * xi).sum::<f64>() - 1.0)
            .collect()
    }

    /// Largest absolute constraint value at `x`.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        self.constraint_values(x).iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn check_on_target(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.m {
            return Err(Error::Domain(format!("point has dimension {}, target ambient dimension is {}", q.len(), self.m)));
        }
        let res = self.constraint_residual(q);
        if res > ON_TARGET_TOL || !res.is_finite() {
            return Err(Error::Domain(format!("point off target {} (constraint residual {res:e})", self.descriptor())));
        }
        Ok(())
    }

    fn normals(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.constraints.len(), |i, a| 2.0 * self.constraints[a][i] * x[i])
    }

    /// Tangent projector `P(x)`, defined on a tube around the target.
    pub fn projector(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.m;
        match &self.kind {
            TargetKind::Euclidean { .. } => DMatrix::identity(m, m),
            TargetKind::Sphere { .. } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - x[i] * x[j] / n2)
            }
            _ => {
                let n = self.normals(x);
                let g = n.transpose() * &n;
                let ginv = g.try_inverse().unwrap_or_else(|| DMatrix::zeros(n.ncols(), n.ncols()));
                DMatrix::identity(m, m) - &n * ginv * n.transpose()
            }
        }
    }

    /// Partial derivatives `∂P/∂xᵢ` of the tangent projector.
    pub fn projector_derivatives(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let m = self.m;
        if self.constraints.is_empty() {
            return vec![DMatrix::zeros(m, m); m];
        }
        let c = self.constraints.len();
        let n = self.normals(x);
        let g = n.transpose() * &n;
        let ginv = g.try_inverse().unwrap_or_else(|| DMatrix::zeros(c, c));
        let ng = &n * &ginv; // m × c
        (0..m)
            .map(|i| {
                let dn = DMatrix::from_fn(m, c, |r, a| if r == i { 2.0 * self.constraints[a][i] } else { 0.0 });
                let dg = dn.transpose() * &n + n.transpose() * &dn;
                let t1 = &dn * ng.transpose();
                let t2 = &ng * dn.transpose();
                let t3 = &ng * dg * ng.transpose();
                -(t1 + t2 - t3)
            })
            .collect()
    }

    /// Closest-point map onto the target.
    pub fn closest_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::Domain(format!("point has dimension {}, expected {}", x.len(), self.m)));
        }
        match &self.kind {
            TargetKind::Euclidean { .. } => Ok(x.to_vec()),
            TargetKind::Sphere { r, .. } => {
                let mut y = x.to_vec();
                normalize_block(&mut y, *r)?;
                Ok(y)
            }
            TargetKind::FlatTorusEmb { radii } => {
                let mut y = x.to_vec();
                for (i, &rho) in radii.iter().enumerate() {
                    normalize_block(&mut y[2 * i..2 * i + 2], rho)?;
                }
                Ok(y)
            }
            TargetKind::ProductSpheres { r1, r2 } => {
                let mut y = x.to_vec();
                normalize_block(&mut y[0..3], *r1)?;
                normalize_block(&mut y[3..6], *r2)?;
                Ok(y)
            }
            TargetKind::Ellipsoid { a, b, c } => ellipsoid_closest_point(x, [*a, *b, *c]),
        }
    }

    /// Orthonormal basis of `T_q` as the columns of an `m × k` matrix.
    pub fn tangent_basis(&self, q: &[f64]) -> DMatrix<f64> {
        let p = self.projector(q);
        let (_, vecs) = symmetric_eigen_desc(&p);
        vecs.columns(0, self.k).into_owned()
    }

    /// A fixed reference point: the last-coordinate "north pole" for spheres
    /// and ellipsoids, angle zero on every circle factor, the origin for ℝᵐ.
    pub fn base_point(&self) -> Vec<f64> {
        let m = self.m;
        match &self.kind {
            TargetKind::Euclidean { .. } => vec![0.0; m],
            TargetKind::Sphere { r, .. } => {
                let mut q = vec![0.0; m];
                q[m - 1] = *r;
                q
            }
            TargetKind::Ellipsoid { c, .. } => vec![0.0, 0.0, *c],
            TargetKind::FlatTorusEmb { radii } => radii.iter().flat_map(|&rho| [rho, 0.0]).collect(),
            TargetKind::ProductSpheres { r1, r2 } => vec![0.0, 0.0, *r1, 0.0, 0.0, *r2],
        }
    }

    /// Deterministic quasi-uniform sample of `count` target points.
    pub fn quasi_uniform_sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.kind {
            TargetKind::Sphere { k: 2, r } => fibonacci_sphere(count).into_iter().map(|p| p.iter().map(|v| v * r).collect()).collect(),
            TargetKind::Ellipsoid { a, b, c } => fibonacci_sphere(count)
                .into_iter()
                .map(|p| vec![a * p[0], b * p[1], c * p[2]])
                .collect(),
            TargetKind::ProductSpheres { r1, r2 } => {
                let side = (count as f64).sqrt().ceil() as usize;
                let s = fibonacci_sphere(side.max(1));
                let mut out = Vec::with_capacity(count);
                'outer: for p in &s {
                    for q in &s {
                        if out.len() == count {
                            break 'outer;
                        }
                        out.push(vec![r1 * p[0], r1 * p[1], r1 * p[2], r2 * q[0], r2 * q[1], r2 * q[2]]);
                    }
                }
                out
            }
            TargetKind::Sphere { r, .. } => (0..count)
                .map(|_| {
                    let mut v: Vec<f64> = (0..self.m).map(|_| gaussian(&mut rng)).collect();
                    normalize_block(&mut v, *r).expect("nonzero gaussian sample");
                    v
                })
                .collect(),
            TargetKind::FlatTorusEmb { radii } => (0..count)
                .map(|_| {
                    radii
                        .iter()
                        .flat_map(|&rho| {
                            let t = rng.random_range(0.0..2.0 * PI);
                            [rho * t.cos(), rho * t.sin()]
                        })
                        .collect()
                })
                .collect(),
            TargetKind::Euclidean { m } => (0..count).map(|_| (0..*m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        }
    }

    /// Precomputes the extrinsic geometry needed for curvature at `q`.
    pub fn point_geometry(&self, q: &[f64]) -> PointGeometry {
        PointGeometry { projector: self.projector(q), dp: self.projector_derivatives(q) }
    }
}

/// Tangent projector and its derivatives at one point of the target.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub projector: DMatrix<f64>,
    pub dp: Vec<DMatrix<f64>>,
}

impl PointGeometry {
    /// Second fundamental form `A(X, Y) = (D_X P) Y` for tangent `X, Y`.
    pub fn second_fundamental_form(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let m = y.len();
        let mut out = DVector::zeros(m);
        for (i, dpi) in self.dp.iter().enumerate() {
            if x[i] != 0.0 {
                out.gemv(x[i], dpi, y, 1.0);
            }
        }
        out
    }

    /// `⟨R(X,Y)Z, W⟩` from the Gauss equation.
    pub fn riemann(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let a_yz = self.second_fundamental_form(y, z);
        let a_xw = self.second_fundamental_form(x, w);
        let a_xz = self.second_fundamental_form(x, z);
        let a_yw = self.second_fundamental_form(y, w);
        a_yz.dot(&a_xw) - a_xz.dot(&a_yw)
    }

    /// Unnormalized sectional numerator `⟨R(X,Y)Y, X⟩`.
    pub fn sectional_numerator(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let a_xx = self.second_fundamental_form(x, x);
        let a_yy = self.second_fundamental_form(y, y);
        let a_xy = self.second_fundamental_form(x, y);
        a_xx.dot(&a_yy) - a_xy.norm_squared()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("`{name}` must be positive, got {v}")))
    }
}

fn take_count(d: &mut Descriptor, key: &str, default: f64) -> Result<usize> {
    let v = d.take(key, Some(default))?;
    if v < 1.0 || v.fract() != 0.0 {
        return Err(Error::Usage(format!("`{key}` must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

fn normalize_block(v: &mut [f64], radius: f64) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-300 {
        return Err(Error::Domain("closest point undefined at the centre of a sphere factor".into()));
    }
    for x in v.iter_mut() {
        *x *= radius / n;
    }
    Ok(())
}

/// Closest point on `Σ xᵢ²/aᵢ² = 1` by damped Newton on the Lagrange
/// multiplier `t` of the stationarity condition `y − x + t W y = 0`,
/// i.e. `yᵢ = xᵢ aᵢ² / (aᵢ² + t)`.
fn ellipsoid_closest_point(x: &[f64], axes: [f64; 3]) -> Result<Vec<f64>> {
    let a2 = axes.map(|a| a * a);
    let lower = -a2.iter().cloned().fold(f64::INFINITY, f64::min);
    let secular = |t: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for i in 0..3 {
            let d = a2[i] + t;
            let yi = x[i] * axes[i] / d;
            f += yi * yi;
            df -= 2.0 * x[i] * x[i] * a2[i] / (d * d * d);
        }
        (f, df)
    };
    let point = |t: f64| -> Vec<f64> { (0..3).map(|i| x[i] * a2[i] / (a2[i] + t)).collect() };
    let residual = |y: &[f64]| (0..3).map(|i| y[i] * y[i] / a2[i]).sum::<f64>() - 1.0;

    if x.iter().all(|v| v.abs() < 1e-300) {
        return Err(Error::Domain("closest point undefined at the ellipsoid centre".into()));
    }
    let mut t = 0.0;
    for _ in 0..CLOSEST_POINT_MAX_ITER {
        let y = point(t);
        if residual(&y).abs() < CLOSEST_POINT_RESIDUAL {
            return Ok(y);
        }
        let (f, df) = secular(t);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let mut step = -f / df;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = t + step;
            if cand > lower && secular(cand).0.abs() < f.abs() {
                t = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let y = point(t);
    if residual(&y).abs() < CLOSEST_POINT_RESIDUAL {
        Ok(y)
    } else {
        Err(Error::Numerical(format!(
            "ellipsoid closest-point Newton did not reach residual {CLOSEST_POINT_RESIDUAL:e} in {CLOSEST_POINT_MAX_ITER} iterations"
        )))
    }
}

fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_targets() -> Vec<TargetModel> {
        vec![
            TargetModel::euclidean(3).unwrap(),
            TargetModel::sphere(2.0).unwrap(),
            TargetModel::new(TargetKind::Sphere { k: 3, r: 0.5 }).unwrap(),
            TargetModel::flat_torus(vec![1.0, 2.0]).unwrap(),
            TargetModel::ellipsoid(1.0, 1.5, 2.0).unwrap(),
            TargetModel::product_spheres(1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn projector_is_symmetric_idempotent_rank_k() {
        for t in all_targets() {
            for q in t.quasi_uniform_sample(20, 3) {
                let p = t.projector(&q);
                assert_relative_eq!(p.clone(), p.transpose(), epsilon = 1e-14);
                assert_relative_eq!(&p * &p, p.clone(), epsilon = 1e-12);
                assert_relative_eq!(p.trace(), t.intrinsic_dim() as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn closest_point_fixes_target_points_and_lands_on_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in all_targets() {
            for q in t.quasi_uniform_sample(20, 5) {
                let y = t.closest_point(&q).unwrap();
                for (a, b) in y.iter().zip(&q) {
                    assert!((a - b).abs() < 1e-12);
                }
                let x: Vec<f64> = q.iter().map(|v| v + 0.2 * rng.random_range(-1.0..1.0)).collect();
                let y = t.closest_point(&x).unwrap();
                assert!(t.constraint_residual(&y) < 1e-12, "{}", t.descriptor());
            }
        }
    }

    #[test]
    fn ellipsoid_closest_point_is_orthogonal_projection() {
        let t = TargetModel::ellipsoid(1.0, 1.0, 2.0).unwrap();
        for x in [[1.3, 0.2, 0.5], [0.1, 0.4, 1.2], [0.0, 0.0, 2.5], [0.5, -0.3, -1.0]] {
            let y = t.closest_point(&x).unwrap();
            let d: Vec<f64> = (0..3).map(|i| x[i] - y[i]).collect();
            let p = t.projector(&y);
            let tangential = &p * DVector::from_vec(d);
            assert!(tangential.norm() < 1e-10);
        }
    }

    #[test]
    fn projector_derivative_matches_finite_difference() {
        for t in all_targets() {
            let q = &t.quasi_uniform_sample(3, 11)[1];
            let dp = t.projector_derivatives(q);
            let eps = 1e-6;
            for i in 0..t.ambient_dim() {
                let mut xp = q.clone();
                let mut xm = q.clone();
                xp[i] += eps;
                xm[i] -= eps;
                let fd = (t.projector(&xp) - t.projector(&xm)) / (2.0 * eps);
                assert_relative_eq!(fd, dp[i].clone(), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        for t in all_targets() {
            let q = &t.quasi_uniform_sample(4, 1)[2];
            let e = t.tangent_basis(q);
            let gram = e.transpose() * &e;
            assert_relative_eq!(gram, DMatrix::identity(t.intrinsic_dim(), t.intrinsic_dim()), epsilon = 1e-12);
            let p = t.projector(q);
            assert_relative_eq!(&p * &e, e.clone(), epsilon = 1e-12);
        }
    }

    #[test]
    fn parse_and_describe() {
        for text in ["euclid:m=3", "sphere:r=2", "torusemb:r1=1,r2=2", "ellipsoid:a=1,b=1,c=2", "prodspheres:r1=1,r2=2", "sphere:k=3,r=1"] {
            let t = TargetModel::parse(text).unwrap();
            assert_eq!(TargetModel::parse(&t.descriptor()).unwrap(), t);
        }
        assert!(TargetModel::parse("sphere:r=0").is_err());
        assert!(TargetModel::parse("sphere:r=1,x=2").is_err());
        assert!(TargetModel::parse("hyperbolic:r=1").is_err());
    }

    #[test]
    fn off_target_points_are_rejected() {
        let t = TargetModel::sphere(1.0).unwrap();
        assert!(t.check_on_target(&[0.0, 0.0, 1.0]).is_ok());
        assert!(matches!(t.check_on_target(&[0.0, 0.0, 1.1]), Err(Error::Domain(_))));
    }
}
