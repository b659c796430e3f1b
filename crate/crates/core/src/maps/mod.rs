//! Discrete maps from a domain grid into an embedded target, with their
//! first- and second-order data.

pub mod calculus;
pub mod catalog;
pub mod io;

use crate::error::{Error, Result};
use crate::geometry::{DomainModel, TargetModel};

pub use calculus::{
    differential, hessian, laplacian_scalar, pullback_and_spectrum, tension_field, total_energy, Hessian,
    PointwiseMapData, Spectrum,
};
pub use catalog::AnalyticMap;

/// Constraint residual every stored value must satisfy.
pub const VALUE_TOL: f64 = 1e-10;

/// A map sampled on the nodes of a domain grid, with values in the ambient
/// coordinates of the target (node-major, stride `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMap {
    domain: DomainModel,
    target: TargetModel,
    values: Vec<f64>,
}

impl DiscreteMap {
    /// Wraps raw values, rejecting any that are off the target.
    pub fn new(domain: DomainModel, target: TargetModel, values: Vec<f64>) -> Result<Self> {
        let m = target.ambient_dim();
        if values.len() != domain.node_count() * m {
            return Err(Error::Usage(format!(
                "expected {} values ({} nodes x {m}), got {}",
                domain.node_count() * m,
                domain.node_count(),
                values.len()
            )));
        }
        for (node, q) in values.chunks_exact(m).enumerate() {
            let res = target.constraint_residual(q);
            if !(res <= VALUE_TOL) {
                return Err(Error::Domain(format!("value at node {node} is off target (residual {res:e})")));
            }
        }
        Ok(Self { domain, target, values })
    }

    /// Constant map at `q`.
    pub fn constant(domain: DomainModel, target: TargetModel, q: &[f64]) -> Result<Self> {
        target.check_on_target(q)?;
        let values = q.iter().cloned().cycle().take(domain.node_count() * q.len()).collect();
        Self::new(domain, target, values)
    }

    pub fn domain(&self) -> &DomainModel {
        &self.domain
    }

    pub fn target(&self) -> &TargetModel {
        &self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &[f64] {
        let m = self.target.ambient_dim();
        &self.values[node * m..(node + 1) * m]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.values.chunks_exact(self.target.ambient_dim()).map(|c| c.to_vec()).collect()
    }

    /// Replaces the values, reprojecting each onto the target.
    pub fn set_values_projected(&mut self, raw: &[f64]) -> Result<()> {
        let m = self.target.ambient_dim();
        if raw.len() != self.values.len() {
            return Err(Error::Usage("value buffer has the wrong length".into()));
        }
        let mut out = Vec::with_capacity(raw.len());
        for x in raw.chunks_exact(m) {
            out.extend(self.target.closest_point(x)?);
        }
        self.values = out;
        Ok(())
    }

    /// Replaces the values without validation; callers have already
    /// projected them.
    pub(crate) fn replace_values(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.values.len());
        self.values = values;
    }

    /// Largest constraint residual over all nodes.
    pub fn constraint_residual(&self) -> f64 {
        self.values
            .chunks_exact(self.target.ambient_dim())
            .map(|q| self.target.constraint_residual(q))
            .fold(0.0, f64::max)
    }
}
