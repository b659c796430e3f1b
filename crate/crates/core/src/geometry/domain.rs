//! Compact domain manifolds sampled on a structured chart grid.
//!
//! Both built-in domains are two-dimensional with diagonal metrics:
//!
//! * `FlatTorus2 { a, b }`: chart `(u, v) ∈ [0, 2π)²`, periodic in both
//!   directions, metric `diag(a², b²)`.
//! * `RoundSphere2 { r }`: chart `(θ, φ)`, `θ` staggered at `(i + ½)π/N₁` so
//!   that no node sits on a pole, `φ ∈ [0, 2π)` periodic, metric
//!   `diag(r², r² sin²θ)`.
//!
//! Across the poles the sphere grid continues by reflection: the ghost node
//! at `θ = −h/2, φ` is the physical node `θ = h/2, φ + π`. This keeps every
//! stencil central, at the price of requiring an even `N₂`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix2};

use super::descriptor::Descriptor;
use crate::error::{Error, Result};
use crate::linalg::generalized_symmetric_eigen;

/// Half-angle of the polar caps excluded from sup-norm checks on sphere grids.
pub const DEFAULT_POLE_CAP: f64 = PI / 12.0;

/// Christoffel symbols `gamma[k][i][j] = Γᵏᵢⱼ`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    FlatTorus2 { a: f64, b: f64 },
    RoundSphere2 { r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainModel {
    pub kind: DomainKind,
    n1: usize,
    n2: usize,
    pole_cap: f64,
}

impl DomainModel {
    pub fn flat_torus(a: f64, b: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Usage(format!("torus periods must be positive, got a={a}, b={b}")));
        }
        Self::new(DomainKind::FlatTorus2 { a, b }, n1, n2)
    }

    pub fn round_sphere(r: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Usage(format!("sphere radius must be positive, got {r}")));
        }
        Self::new(DomainKind::RoundSphere2 { r }, n1, n2)
    }

    pub fn new(kind: DomainKind, n1: usize, n2: usize) -> Result<Self> {
        if n1 < 4 || n2 < 4 {
            return Err(Error::Usage(format!("grid {n1}x{n2} too coarse (need at least 4 per axis)")));
        }
        if matches!(kind, DomainKind::RoundSphere2 { .. }) && n2 % 2 != 0 {
            return Err(Error::Usage(format!("sphere grids need an even longitude count, got {n2}")));
        }
        Ok(Self { kind, n1, n2, pole_cap: DEFAULT_POLE_CAP })
    }

    /// Parses `torus:a=1,b=1` or `sphere:r=2`.
    pub fn parse(text: &str, n1: usize, n2: usize) -> Result<Self> {
        let mut d = Descriptor::parse(text)?;
        let kind = match d.kind.as_str() {
            "torus" => DomainKind::FlatTorus2 {
                a: d.take_positive("a", Some(1.0))?,
                b: d.take_positive("b", Some(1.0))?,
            },
            "sphere" => DomainKind::RoundSphere2 { r: d.take_positive("r", Some(1.0))? },
            other => return Err(Error::Usage(format!("unknown domain kind `{other}`"))),
        };
        d.finish()?;
        Self::new(kind, n1, n2)
    }

    pub fn descriptor(&self) -> String {
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => Descriptor::new("torus").with("a", a).with("b", b).to_string(),
            DomainKind::RoundSphere2 { r } => Descriptor::new("sphere").with("r", r).to_string(),
        }
    }

    /// Same manifold on a different grid.
    pub fn with_resolution(&self, n1: usize, n2: usize) -> Result<Self> {
        let mut d = Self::new(self.kind, n1, n2)?;
        d.pole_cap = self.pole_cap;
        Ok(d)
    }

    pub fn with_pole_cap(mut self, cap: f64) -> Self {
        self.pole_cap = cap;
        self
    }

    pub fn pole_cap(&self) -> f64 {
        self.pole_cap
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn node_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn grid_indices(&self, node: usize) -> (usize, usize) {
        (node / self.n2, node % self.n2)
    }

    pub fn spacing(&self) -> [f64; 2] {
        match self.kind {
            DomainKind::FlatTorus2 { .. } => [TAU / self.n1 as f64, TAU / self.n2 as f64],
            DomainKind::RoundSphere2 { .. } => [PI / self.n1 as f64, TAU / self.n2 as f64],
        }
    }

    /// Largest chart spacing; the `h` of resolution-indexed tolerances.
    pub fn h(&self) -> f64 {
        let [h1, h2] = self.spacing();
        h1.max(h2)
    }

    /// Smallest physical distance between neighbouring nodes.
    pub fn min_physical_spacing(&self) -> f64 {
        let [h1, h2] = self.spacing();
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => (a * h1).min(b * h2),
            DomainKind::RoundSphere2 { r } => (r * h1).min(r * (0.5 * h1).sin() * h2),
        }
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.grid_indices(node);
        let [h1, h2] = self.spacing();
        match self.kind {
            DomainKind::FlatTorus2 { .. } => [i as f64 * h1, j as f64 * h2],
            DomainKind::RoundSphere2 { .. } => [(i as f64 + 0.5) * h1, j as f64 * h2],
        }
    }

    /// Neighbour of `node` one step along `axis` in direction `dir` (±1),
    /// wrapping periodically and reflecting across the sphere poles.
    pub fn neighbor(&self, node: usize, axis: usize, dir: isize) -> usize {
        let (i, j) = self.grid_indices(node);
        let (n1, n2) = (self.n1 as isize, self.n2 as isize);
        let (mut i, mut j) = (i as isize, j as isize);
        if axis == 0 {
            i += dir;
        } else {
            j += dir;
        }
        match self.kind {
            DomainKind::FlatTorus2 { .. } => {
                i = i.rem_euclid(n1);
            }
            DomainKind::RoundSphere2 { .. } => {
                if i < 0 {
                    i = -1 - i;
                    j += n2 / 2;
                } else if i >= n1 {
                    i = 2 * n1 - 1 - i;
                    j += n2 / 2;
                }
            }
        }
        j = j.rem_euclid(n2);
        self.index(i as usize, j as usize)
    }

    /// Node at offset `(d1, d2)`, composed from single steps.
    pub fn offset(&self, node: usize, d1: isize, d2: isize) -> usize {
        // Along the sphere reflection the longitude shift stays consistent
        // because both moves commute with the half-turn.
        let mut k = node;
        for _ in 0..d1.unsigned_abs() {
            k = self.neighbor(k, 0, d1.signum());
        }
        for _ in 0..d2.unsigned_abs() {
            k = self.neighbor(k, 1, d2.signum());
        }
        k
    }

    /// True for nodes inside the polar caps of a sphere grid; such nodes are
    /// kept in integrals but excluded from sup-norm checks.
    pub fn is_flagged(&self, node: usize) -> bool {
        match self.kind {
            DomainKind::FlatTorus2 { .. } => false,
            DomainKind::RoundSphere2 { .. } => {
                let theta = self.coords(node)[0];
                theta < self.pole_cap || theta > PI - self.pole_cap
            }
        }
    }

    pub fn check_chart(&self, p: [f64; 2]) -> Result<()> {
        let ok = match self.kind {
            DomainKind::FlatTorus2 { .. } => (0.0..TAU).contains(&p[0]) && (0.0..TAU).contains(&p[1]),
            DomainKind::RoundSphere2 { .. } => p[0] > 0.0 && p[0] < PI && (0.0..TAU).contains(&p[1]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("chart point ({}, {}) outside chart range of {}", p[0], p[1], self.descriptor())))
        }
    }

    /// Metric `g_ij(p)`; rejects points outside the chart range.
    pub fn metric_at(&self, p: [f64; 2]) -> Result<DMatrix<f64>> {
        self.check_chart(p)?;
        let g = self.metric(p);
        Ok(DMatrix::from_fn(2, 2, |i, j| g[(i, j)]))
    }

    /// Unchecked closed-form metric, valid on the analytic continuation of the chart.
    pub fn metric(&self, p: [f64; 2]) -> Matrix2<f64> {
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => Matrix2::new(a * a, 0.0, 0.0, b * b),
            DomainKind::RoundSphere2 { r } => {
                let s = p[0].sin();
                Matrix2::new(r * r, 0.0, 0.0, r * r * s * s)
            }
        }
    }

    pub fn inverse_metric(&self, p: [f64; 2]) -> Matrix2<f64> {
        let g = self.metric(p);
        Matrix2::new(1.0 / g[(0, 0)], 0.0, 0.0, 1.0 / g[(1, 1)])
    }

    pub fn sqrt_det(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => a * b,
            DomainKind::RoundSphere2 { r } => r * r * p[0].sin(),
        }
    }

    /// Quadrature weight `√det g · Δ₁ · Δ₂` of a node.
    pub fn weight(&self, node: usize) -> f64 {
        let [h1, h2] = self.spacing();
        self.sqrt_det(self.coords(node)) * h1 * h2
    }

    /// Total volume computed in closed form.
    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => a * b * TAU * TAU,
            DomainKind::RoundSphere2 { r } => 4.0 * PI * r * r,
        }
    }

    /// Flux coefficient `√det g · g^{aa}` of the Laplace–Beltrami operator
    /// (diagonal metrics only).
    pub fn flux_coefficient(&self, axis: usize, p: [f64; 2]) -> f64 {
        match self.kind {
            DomainKind::FlatTorus2 { a, b } => {
                if axis == 0 {
                    b / a
                } else {
                    a / b
                }
            }
            DomainKind::RoundSphere2 { .. } => {
                let s = p[0].sin();
                if axis == 0 {
                    s
                } else {
                    1.0 / s
                }
            }
        }
    }

    /// Closed-form Christoffel symbols.
    pub fn christoffel_at(&self, p: [f64; 2]) -> Result<Christoffel> {
        self.check_chart(p)?;
        Ok(self.christoffel(p))
    }

    pub fn christoffel(&self, p: [f64; 2]) -> Christoffel {
        let mut gamma = [[[0.0; 2]; 2]; 2];
        if let DomainKind::RoundSphere2 { .. } = self.kind {
            let (s, c) = p[0].sin_cos();
            gamma[0][1][1] = -s * c;
            gamma[1][0][1] = c / s;
            gamma[1][1][0] = c / s;
        }
        gamma
    }

    /// Christoffel symbols from central differences of the metric with step `step`.
    pub fn christoffel_fd(&self, p: [f64; 2], step: f64) -> Result<Christoffel> {
        self.check_chart(p)?;
        Ok(self.christoffel_fd_raw(p, step))
    }

    fn christoffel_fd_raw(&self, p: [f64; 2], step: f64) -> Christoffel {
        // dg[l] = ∂_l g
        let mut dg = [Matrix2::zeros(); 2];
        for (l, d) in dg.iter_mut().enumerate() {
            let mut pp = p;
            let mut pm = p;
            pp[l] += step;
            pm[l] -= step;
            *d = (self.metric(pp) - self.metric(pm)) / (2.0 * step);
        }
        let g = self.metric(p);
        let ginv = g.try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gk[i][j] = 0.5 * s;
                }
            }
        }
        gamma
    }

    /// Closed-form Ricci tensor: zero on the torus, `g / r²` on the sphere.
    pub fn ricci_at(&self, p: [f64; 2]) -> Result<DMatrix<f64>> {
        self.check_chart(p)?;
        let ric = self.ricci(p);
        Ok(DMatrix::from_fn(2, 2, |i, j| ric[(i, j)]))
    }

    pub fn ricci(&self, p: [f64; 2]) -> Matrix2<f64> {
        match self.kind {
            DomainKind::FlatTorus2 { .. } => Matrix2::zeros(),
            DomainKind::RoundSphere2 { r } => self.metric(p) / (r * r),
        }
    }

    /// Ricci tensor assembled from finite-difference Christoffel symbols and
    /// their central derivatives:
    /// `R_ij = ∂_k Γᵏᵢⱼ − ∂_j Γᵏᵢₖ + Γᵏₖₗ Γˡᵢⱼ − Γᵏⱼₗ Γˡᵢₖ`.
    pub fn ricci_fd(&self, p: [f64; 2], step: f64) -> Result<DMatrix<f64>> {
        self.check_chart(p)?;
        let gamma = self.christoffel_fd_raw(p, step);
        let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2]; // dgamma[m][k][i][j] = ∂_m Γᵏᵢⱼ
        for (m, dm) in dgamma.iter_mut().enumerate() {
            let mut pp = p;
            let mut pm = p;
            pp[m] += step;
            pm[m] -= step;
            let gp = self.christoffel_fd_raw(pp, step);
            let gm = self.christoffel_fd_raw(pm, step);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        dm[k][i][j] = (gp[k][i][j] - gm[k][i][j]) / (2.0 * step);
                    }
                }
            }
        }
        let mut ric = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += dgamma[k][k][i][j] - dgamma[j][k][i][k];
                    for l in 0..2 {
                        s += gamma[k][k][l] * gamma[l][i][j] - gamma[k][j][l] * gamma[l][i][k];
                    }
                }
                ric[(i, j)] = s;
            }
        }
        Ok(ric)
    }

    /// Smallest eigenvalue of `g⁻¹ Ric` at a node (unit-vector Ricci minimum).
    pub fn ricci_min_at(&self, node: usize) -> Result<f64> {
        let p = self.coords(node);
        let g = self.metric(p);
        let ric = self.ricci(p);
        let g = DMatrix::from_fn(2, 2, |i, j| g[(i, j)]);
        let ric = DMatrix::from_fn(2, 2, |i, j| ric[(i, j)]);
        let (vals, _) = generalized_symmetric_eigen(&ric, &g)?;
        Ok(*vals.last().expect("nonempty spectrum"))
    }

    /// Minimum Ricci curvature over a set of nodes with the witness node.
    pub fn ricci_min(&self, nodes: &[usize]) -> Result<(f64, usize)> {
        if nodes.is_empty() {
            return Err(Error::Usage("ricci_min needs a nonempty sample set".into()));
        }
        let mut best = (f64::INFINITY, nodes[0]);
        for &k in nodes {
            if k >= self.node_count() {
                return Err(Error::Usage(format!("node {k} outside grid")));
            }
            let v = self.ricci_min_at(k)?;
            if v < best.0 {
                best = (v, k);
            }
        }
        Ok(best)
    }

    pub fn all_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere(r: f64) -> DomainModel {
        DomainModel::round_sphere(r, 16, 32).unwrap()
    }

    #[test]
    fn metric_examples() {
        let t = DomainModel::flat_torus(1.0, 1.0, 8, 8).unwrap();
        assert_eq!(t.metric_at([1.0, 2.0]).unwrap(), DMatrix::identity(2, 2));
        let g = sphere(1.0).metric_at([PI / 2.0, 0.3]).unwrap();
        assert_relative_eq!(g, DMatrix::identity(2, 2), epsilon = 1e-15);
        let g = sphere(2.0).metric_at([PI / 6.0, 0.3]).unwrap();
        assert_relative_eq!(g[(0, 0)], 4.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-14);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn chart_range_is_enforced() {
        let s = sphere(1.0);
        assert!(matches!(s.metric_at([0.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(s.metric_at([1.0, 7.0]), Err(Error::Domain(_))));
        let t = DomainModel::flat_torus(1.0, 2.0, 8, 8).unwrap();
        assert!(t.metric_at([-0.1, 0.0]).is_err());
    }

    #[test]
    fn metric_is_spd_on_grid() {
        for d in [sphere(1.5), DomainModel::flat_torus(1.0, 3.0, 8, 12).unwrap()] {
            for k in d.all_nodes() {
                let g = d.metric_at(d.coords(k)).unwrap();
                assert!(g.clone().cholesky().is_some());
                assert_eq!(g[(0, 1)], g[(1, 0)]);
            }
        }
    }

    #[test]
    fn christoffel_examples() {
        let t = DomainModel::flat_torus(2.0, 3.0, 8, 8).unwrap();
        assert_eq!(t.christoffel_at([1.0, 1.0]).unwrap(), [[[0.0; 2]; 2]; 2]);
        let s = sphere(1.0);
        for theta in [0.3, 1.0, 2.5] {
            let g = s.christoffel_at([theta, 0.7]).unwrap();
            assert_relative_eq!(g[0][1][1], -theta.sin() * theta.cos(), epsilon = 1e-15);
        }
    }

    #[test]
    fn christoffel_fd_converges_at_second_order() {
        let s = sphere(1.0);
        let p = [0.9, 0.4];
        let exact = s.christoffel(p);
        let err = |h: f64| {
            let fd = s.christoffel_fd(p, h).unwrap();
            let mut e: f64 = 0.0;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        e = e.max((fd[k][i][j] - exact[k][i][j]).abs());
                    }
                }
            }
            e
        };
        let ratio = err(0.1) / err(0.05);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn ricci_examples() {
        let t = DomainModel::flat_torus(1.0, 1.0, 8, 8).unwrap();
        assert_eq!(t.ricci_at([0.5, 0.5]).unwrap(), DMatrix::zeros(2, 2));
        let s = sphere(1.0);
        let p = [1.1, 2.0];
        assert_relative_eq!(s.ricci_at(p).unwrap(), s.metric_at(p).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn ricci_fd_matches_closed_form_with_quadratic_decay() {
        let s = sphere(2.0);
        let p = [1.2, 0.3];
        let exact = s.ricci_at(p).unwrap();
        let err = |h: f64| (s.ricci_fd(p, h).unwrap() - &exact).amax();
        let (e1, e2) = (err(0.08), err(0.04));
        assert!(e1 < 1e-2, "{e1}");
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn ricci_fd_vanishes_on_torus() {
        let t = DomainModel::flat_torus(1.5, 0.5, 8, 8).unwrap();
        assert!(t.ricci_fd([1.0, 2.0], 0.1).unwrap().amax() < 1e-12);
    }

    #[test]
    fn ricci_min_examples() {
        let t = DomainModel::flat_torus(1.0, 1.0, 8, 8).unwrap();
        assert_eq!(t.ricci_min(&t.all_nodes()).unwrap().0, 0.0);
        let s = sphere(1.0);
        assert_relative_eq!(s.ricci_min(&s.all_nodes()).unwrap().0, 1.0, epsilon = 1e-12);
        let s = sphere(3.0);
        assert_relative_eq!(s.ricci_min(&s.all_nodes()).unwrap().0, 1.0 / 9.0, epsilon = 1e-12);
        assert!(matches!(s.ricci_min(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn pole_reflection_neighbours() {
        let s = DomainModel::round_sphere(1.0, 8, 16).unwrap();
        let k = s.index(0, 3);
        assert_eq!(s.neighbor(k, 0, -1), s.index(0, 11));
        let k = s.index(7, 12);
        assert_eq!(s.neighbor(k, 0, 1), s.index(7, 4));
        assert_eq!(s.neighbor(s.index(3, 0), 1, -1), s.index(3, 15));
    }

    #[test]
    fn reflected_neighbour_is_the_same_physical_point() {
        let s = DomainModel::round_sphere(1.0, 8, 16).unwrap();
        let [h1, _] = s.spacing();
        let k = s.index(0, 5);
        let ghost = s.neighbor(k, 0, -1);
        let [t, p] = s.coords(k);
        let embed = |t: f64, p: f64| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
        let [tg, pg] = s.coords(ghost);
        let want = embed(t - h1, p);
        let got = embed(tg, pg);
        for c in 0..3 {
            assert_relative_eq!(want[c], got[c], epsilon = 1e-14);
        }
    }

    #[test]
    fn quadrature_volume() {
        let s = DomainModel::round_sphere(1.0, 128, 256).unwrap();
        let vol: f64 = s.all_nodes().iter().map(|&k| s.weight(k)).sum();
        assert_relative_eq!(vol, 4.0 * PI, max_relative = 1e-4);
    }

    #[test]
    fn parse_descriptors() {
        let d = DomainModel::parse("sphere:r=2", 8, 16).unwrap();
        assert_eq!(d.kind, DomainKind::RoundSphere2 { r: 2.0 });
        let d = DomainModel::parse("torus:a=1,b=3", 8, 8).unwrap();
        assert_eq!(d.kind, DomainKind::FlatTorus2 { a: 1.0, b: 3.0 });
        assert!(DomainModel::parse("klein:r=1", 8, 8).is_err());
        assert!(DomainModel::parse("sphere:r=-1", 8, 8).is_err());
        assert!(DomainModel::parse("sphere:r=1", 8, 7).is_err());
    }
}
