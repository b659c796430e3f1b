//! Finite-difference calculus of discrete maps.
//!
//! All stencils are second-order central differences on the chart grid,
//! wrapping periodically and reflecting across sphere poles (see
//! [`DomainModel::neighbor`]). Derivatives are taken of the ambient
//! coordinates and projected to the target's tangent space at `f(p)`:
//!
//! * `df(∂ᵢ) = P · Dᵢf`
//! * `∇df(∂ᵢ,∂ⱼ) = P · (DᵢDⱼf − Γᵏᵢⱼ Dₖf)`
//! * `τ = P · Δ_g f`, the Laplace–Beltrami operator applied componentwise
//!   in conservative (flux) form.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use super::DiscreteMap;
use crate::error::{Error, Result};
use crate::geometry::DomainModel;
use crate::linalg::generalized_symmetric_eigen;

/// Eigenvalues this far below zero are rounding noise and clamp to zero.
pub const LAMBDA_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `f*ḡ = JᵀJ` in chart coordinates.
    pub pullback: DMatrix<f64>,
    /// Eigenvalues of `g⁻¹ f*ḡ`, descending, clamped at zero.
    pub lambdas: Vec<f64>,
    /// `g`-orthonormal eigenvectors as columns (the diagonalizing frame).
    pub frame: DMatrix<f64>,
    /// `S = Σλᵢ = |df|²`.
    pub s: f64,
    /// `e = S / 2`.
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    /// `components[i][j] = ∇df(∂ᵢ,∂ⱼ)`, ambient vectors tangent at `f(p)`.
    pub components: [[DVector<f64>; 2]; 2],
    /// `‖∇df‖² = gⁱᵏ gʲˡ ⟨∇df(∂ᵢ,∂ⱼ), ∇df(∂ₖ,∂ₗ)⟩`.
    pub norm2: f64,
}

/// Everything the Bochner computation needs at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseMapData {
    pub node: usize,
    pub jacobian: DMatrix<f64>,
    pub spectrum: Spectrum,
    pub tension: DVector<f64>,
    pub hessian: Hessian,
}

impl PointwiseMapData {
    pub fn compute(f: &DiscreteMap, node: usize) -> Result<Self> {
        check_node(f, node)?;
        let proj = f.target().projector(f.value(node));
        let raw = raw_first_derivatives(f, node);
        let jacobian = project_columns(&proj, &raw);
        let spectrum = spectrum_from_jacobian(f.domain(), node, &jacobian)?;
        let tension = &proj * vector_laplacian(f, node);
        let hessian = hessian_with(f, node, &proj, &raw);
        Ok(Self { node, jacobian, spectrum, tension, hessian })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.spectrum.lambdas
    }

    pub fn s(&self) -> f64 {
        self.spectrum.s
    }

    pub fn e(&self) -> f64 {
        self.spectrum.e
    }
}

fn check_node(f: &DiscreteMap, node: usize) -> Result<()> {
    if node < f.domain().node_count() {
        Ok(())
    } else {
        Err(Error::Usage(format!("node {node} outside grid of {} nodes", f.domain().node_count())))
    }
}

fn value_vec(f: &DiscreteMap, node: usize) -> DVector<f64> {
    DVector::from_column_slice(f.value(node))
}

/// Central first differences `Dᵢf` of the ambient values (unprojected).
fn raw_first_derivatives(f: &DiscreteMap, node: usize) -> [DVector<f64>; 2] {
    let d = f.domain();
    let h = d.spacing();
    [0, 1].map(|axis| {
        let plus = value_vec(f, d.neighbor(node, axis, 1));
        let minus = value_vec(f, d.neighbor(node, axis, -1));
        (plus - minus) / (2.0 * h[axis])
    })
}

fn project_columns(proj: &DMatrix<f64>, cols: &[DVector<f64>; 2]) -> DMatrix<f64> {
    let m = proj.nrows();
    let mut j = DMatrix::zeros(m, 2);
    for (a, c) in cols.iter().enumerate() {
        j.set_column(a, &(proj * c));
    }
    j
}

/// Jacobian `J` (m × 2): projected central differences of `f`.
pub fn differential(f: &DiscreteMap, node: usize) -> Result<DMatrix<f64>> {
    check_node(f, node)?;
    let proj = f.target().projector(f.value(node));
    Ok(project_columns(&proj, &raw_first_derivatives(f, node)))
}

fn spectrum_from_jacobian(domain: &DomainModel, node: usize, jacobian: &DMatrix<f64>) -> Result<Spectrum> {
    let p = domain.coords(node);
    let g = domain.metric(p);
    let g = DMatrix::from_fn(2, 2, |i, j| g[(i, j)]);
    let pullback = jacobian.transpose() * jacobian;
    let (mut lambdas, frame) = generalized_symmetric_eigen(&pullback, &g)?;
    for l in lambdas.iter_mut() {
        if *l < 0.0 && *l >= -LAMBDA_CLAMP {
            *l = 0.0;
        }
    }
    let s: f64 = lambdas.iter().sum();
    Ok(Spectrum { pullback, lambdas, frame, s, e: 0.5 * s })
}

/// Pullback metric, its spectrum relative to `g`, `S = |df|²` and `e = S/2`.
pub fn pullback_and_spectrum(f: &DiscreteMap, node: usize) -> Result<Spectrum> {
    let j = differential(f, node)?;
    spectrum_from_jacobian(f.domain(), node, &j)
}

/// `|df|² = trace_g(JᵀJ)` without an eigen-solve.
pub fn df_norm2(f: &DiscreteMap, node: usize) -> f64 {
    let proj = f.target().projector(f.value(node));
    let j = project_columns(&proj, &raw_first_derivatives(f, node));
    let ginv = f.domain().inverse_metric(f.domain().coords(node));
    trace_g(&ginv, &j)
}

fn trace_g(ginv: &Matrix2<f64>, j: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            if ginv[(a, b)] != 0.0 {
                s += ginv[(a, b)] * j.column(a).dot(&j.column(b));
            }
        }
    }
    s
}

/// `|df|²` at every node.
pub fn df_norm2_field(f: &DiscreteMap) -> Vec<f64> {
    (0..f.domain().node_count()).into_par_iter().map(|k| df_norm2(f, k)).collect()
}

/// `E(f) = ½ Σ |df|² √det g Δ₁Δ₂`.
pub fn total_energy(f: &DiscreteMap) -> f64 {
    let s = df_norm2_field(f);
    let d = f.domain();
    s.iter().enumerate().map(|(k, v)| 0.5 * v * d.weight(k)).sum()
}

/// Conservative Laplace–Beltrami stencil: `Σ_a w_a⁺ (u⁺ − u) − w_a⁻ (u − u⁻)`
/// divided by `√det g`, with `w` the flux coefficients at the half-nodes.
/// Returns the neighbour weights and `√det g`.
fn laplacian_stencil(domain: &DomainModel, node: usize) -> ([(usize, f64); 4], f64) {
    let p = domain.coords(node);
    let h = domain.spacing();
    let mut out = [(0usize, 0.0f64); 4];
    for axis in 0..2 {
        let mut pp = p;
        let mut pm = p;
        pp[axis] += 0.5 * h[axis];
        pm[axis] -= 0.5 * h[axis];
        let wp = domain.flux_coefficient(axis, pp) / (h[axis] * h[axis]);
        let wm = domain.flux_coefficient(axis, pm) / (h[axis] * h[axis]);
        out[2 * axis] = (domain.neighbor(node, axis, 1), wp);
        out[2 * axis + 1] = (domain.neighbor(node, axis, -1), wm);
    }
    (out, domain.sqrt_det(p))
}

/// Discrete Laplace–Beltrami `(1/√g) ∂ᵢ(√g gⁱʲ ∂ⱼ u)` of a scalar field at a node.
pub fn laplacian_scalar(domain: &DomainModel, field: &[f64], node: usize) -> Result<f64> {
    if field.len() != domain.node_count() {
        return Err(Error::Usage(format!("field has {} entries, grid has {} nodes", field.len(), domain.node_count())));
    }
    if node >= domain.node_count() {
        return Err(Error::Usage(format!("node {node} outside grid")));
    }
    Ok(laplacian_scalar_unchecked(domain, field, node))
}

pub(crate) fn laplacian_scalar_unchecked(domain: &DomainModel, field: &[f64], node: usize) -> f64 {
    let (stencil, norm) = laplacian_stencil(domain, node);
    let u = field[node];
    stencil.iter().map(|&(nb, w)| w * (field[nb] - u)).sum::<f64>() / norm
}

fn vector_laplacian(f: &DiscreteMap, node: usize) -> DVector<f64> {
    let (stencil, norm) = laplacian_stencil(f.domain(), node);
    let u = value_vec(f, node);
    let mut out = DVector::zeros(u.len());
    for &(nb, w) in &stencil {
        out += w * (value_vec(f, nb) - &u);
    }
    out / norm
}

/// Tension field `τ = P(f(p)) Δ_g f`.
pub fn tension_field(f: &DiscreteMap, node: usize) -> Result<DVector<f64>> {
    check_node(f, node)?;
    let proj = f.target().projector(f.value(node));
    Ok(&proj * vector_laplacian(f, node))
}

/// Tension at every node.
pub fn tension_all(f: &DiscreteMap) -> Vec<DVector<f64>> {
    (0..f.domain().node_count())
        .into_par_iter()
        .map(|k| {
            let proj = f.target().projector(f.value(k));
            &proj * vector_laplacian(f, k)
        })
        .collect()
}

/// Sup of `|τ|` over nodes outside the polar caps.
pub fn sup_tension(f: &DiscreteMap) -> f64 {
    let d = f.domain();
    tension_all(f)
        .iter()
        .enumerate()
        .filter(|(k, _)| !d.is_flagged(*k))
        .map(|(_, t)| t.norm())
        .fold(0.0, f64::max)
}

fn hessian_with(f: &DiscreteMap, node: usize, proj: &DMatrix<f64>, first: &[DVector<f64>; 2]) -> Hessian {
    let d = f.domain();
    let h = d.spacing();
    let p = d.coords(node);
    let gamma = d.christoffel(p);
    let centre = value_vec(f, node);
    let mut second: [[DVector<f64>; 2]; 2] = Default::default();
    for axis in 0..2 {
        let plus = value_vec(f, d.neighbor(node, axis, 1));
        let minus = value_vec(f, d.neighbor(node, axis, -1));
        second[axis][axis] = (plus + minus - 2.0 * &centre) / (h[axis] * h[axis]);
    }
    let pp = value_vec(f, d.offset(node, 1, 1));
    let pm = value_vec(f, d.offset(node, 1, -1));
    let mp = value_vec(f, d.offset(node, -1, 1));
    let mm = value_vec(f, d.offset(node, -1, -1));
    let mixed = (pp - pm - mp + mm) / (4.0 * h[0] * h[1]);
    second[0][1] = mixed.clone();
    second[1][0] = mixed;

    let mut components: [[DVector<f64>; 2]; 2] = Default::default();
    for i in 0..2 {
        for j in 0..2 {
            let mut v = second[i][j].clone();
            for (k, fk) in first.iter().enumerate() {
                if gamma[k][i][j] != 0.0 {
                    v -= gamma[k][i][j] * fk;
                }
            }
            components[i][j] = proj * v;
        }
    }
    let ginv = d.inverse_metric(p);
    let mut norm2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let w = ginv[(i, k)] * ginv[(j, l)];
                    if w != 0.0 {
                        norm2 += w * components[i][j].dot(&components[k][l]);
                    }
                }
            }
        }
    }
    Hessian { components, norm2 }
}

/// Second fundamental form of the map, `∇df`, and its squared norm.
pub fn hessian(f: &DiscreteMap, node: usize) -> Result<Hessian> {
    check_node(f, node)?;
    let proj = f.target().projector(f.value(node));
    let first = raw_first_derivatives(f, node);
    Ok(hessian_with(f, node, &proj, &first))
}
