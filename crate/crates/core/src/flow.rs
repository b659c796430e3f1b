//! Harmonic map heat flow `∂f/∂t = τ(f)` by explicit Euler steps with
//! closest-point reprojection onto the target.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::calculus::{df_norm2_field, tension_all};
use crate::maps::DiscreteMap;

/// Allowed energy increase for an accepted step.
pub const ENERGY_SLACK: f64 = 1e-10;
pub const MAX_HALVINGS: usize = 20;
/// `Δt = AUTO_DT_FACTOR · h_min² / max(1, sup|df|²)`.
pub const AUTO_DT_FACTOR: f64 = 0.2;
/// Abort once `e_max` exceeds this multiple of its initial value.
pub const CONCENTRATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowParams {
    pub dt: TimeStep,
    pub max_steps: usize,
    /// Convergence tolerance on sup|τ|.
    pub tol: f64,
    /// Collapse tolerance on the image diameter.
    pub collapse_tol: f64,
    /// A trace row is recorded every `stride` accepted steps.
    pub stride: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { dt: TimeStep::Auto, max_steps: 50_000, tol: 1e-6, collapse_tol: 1e-3, stride: 1 }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Usage(format!("time step must be positive, got {dt}")));
            }
        }
        if !(self.tol > 0.0) || !(self.collapse_tol > 0.0) {
            return Err(Error::Usage("flow tolerances must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Usage("trace stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOutcome {
    Converged,
    CollapsedToConstant,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub energy: f64,
    pub sup_tension: f64,
    pub image_diameter: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub steps: usize,
    pub dt: f64,
    pub rejections: usize,
    /// Energy before the first step and after every accepted step.
    pub energy_trace: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub final_sup_tension: f64,
    pub final_diameter: f64,
    pub outcome: FlowOutcome,
}

impl FlowSummary {
    /// Largest energy increase between consecutive accepted steps.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Snapshot of the quantities the flow monitors.
#[derive(Debug, Clone, PartialEq)]
struct State {
    energy: f64,
    e_max: f64,
    s_max: f64,
}

fn state(f: &DiscreteMap) -> State {
    let s = df_norm2_field(f);
    let d = f.domain();
    let energy = s.iter().enumerate().map(|(k, v)| 0.5 * v * d.weight(k)).sum();
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    State { energy, e_max: 0.5 * s_max, s_max }
}

/// Sup of `|τ|` over all nodes outside the polar caps.
fn sup_tension_of(f: &DiscreteMap, tension: &[nalgebra::DVector<f64>]) -> f64 {
    let d = f.domain();
    tension.iter().enumerate().filter(|(k, _)| !d.is_flagged(*k)).map(|(_, t)| t.norm()).fold(0.0, f64::max)
}

/// `Π(f + Δt·τ)` at every node.
fn euler_update(f: &DiscreteMap, tension: &[nalgebra::DVector<f64>], dt: f64) -> Result<DiscreteMap> {
    let m = f.target().ambient_dim();
    let target = f.target();
    let values: Vec<Vec<f64>> = f
        .values()
        .par_chunks_exact(m)
        .zip(tension.par_iter())
        .map(|(q, t)| {
            let x: Vec<f64> = q.iter().zip(t.iter()).map(|(a, b)| a + dt * b).collect();
            target.closest_point(&x)
        })
        .collect::<Result<_>>()?;
    let mut g = f.clone();
    g.replace_values(values.concat());
    Ok(g)
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub map: DiscreteMap,
    pub dt: f64,
    pub halvings: usize,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Explicit step `f ← Π(f + Δt·τ)`; halves `Δt` while the energy rises by
/// more than [`ENERGY_SLACK`].
pub fn flow_step(f: &DiscreteMap, dt: f64) -> Result<StepResult> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("time step must be positive, got {dt}")));
    }
    let tension = tension_all(f);
    step_with(f, &tension, dt, state(f).energy).map(|(r, _)| r)
}

fn step_with(
    f: &DiscreteMap,
    tension: &[nalgebra::DVector<f64>],
    dt: f64,
    energy: f64,
) -> Result<(StepResult, State)> {
    let mut dt_try = dt;
    for halvings in 0..=MAX_HALVINGS {
        let g = euler_update(f, tension, dt_try)?;
        let st = state(&g);
        if st.energy <= energy + ENERGY_SLACK {
            let r = StepResult { map: g, dt: dt_try, halvings, energy_before: energy, energy_after: st.energy };
            return Ok((r, st));
        }
        dt_try *= 0.5;
    }
    Err(Error::Stability(format!(
        "energy still increases after {MAX_HALVINGS} halvings of dt = {dt:e} (E = {energy:.17e})"
    )))
}

/// The automatic time step for `f`.
pub fn auto_dt(f: &DiscreteMap) -> f64 {
    let h = f.domain().min_physical_spacing();
    AUTO_DT_FACTOR * h * h / state(f).s_max.max(1.0)
}

/// Runs the flow until sup|τ| < tol, the image diameter drops below the
/// collapse tolerance, or `max_steps` accepted steps.
pub fn run_flow(f0: &DiscreteMap, params: &FlowParams) -> Result<(DiscreteMap, FlowSummary)> {
    params.validate()?;
    let dt = match params.dt {
        TimeStep::Auto => auto_dt(f0),
        TimeStep::Fixed(v) => v,
    };
    let mut f = f0.clone();
    let mut st = state(&f);
    let e_max0 = st.e_max;
    let mut energy_trace = vec![st.energy];
    let mut trace = Vec::new();
    let mut rejections = 0;
    let mut step = 0;
    loop {
        let tension = tension_all(&f);
        let sup_tau = sup_tension_of(&f, &tension);
        let diameter = image_diameter(&f);
        let done = if sup_tau < params.tol {
            Some(FlowOutcome::Converged)
        } else if diameter < params.collapse_tol {
            Some(FlowOutcome::CollapsedToConstant)
        } else if step >= params.max_steps {
            Some(FlowOutcome::MaxSteps)
        } else {
            None
        };
        if done.is_some() || step % params.stride == 0 {
            trace.push(TraceRow { step, energy: st.energy, sup_tension: sup_tau, image_diameter: diameter, e_max: st.e_max });
        }
        if let Some(outcome) = done {
            let summary = FlowSummary {
                steps: step,
                dt,
                rejections,
                energy_trace,
                trace,
                final_sup_tension: sup_tau,
                final_diameter: diameter,
                outcome,
            };
            return Ok((f, summary));
        }
        let (r, next) = step_with(&f, &tension, dt, st.energy)?;
        rejections += r.halvings;
        f = r.map;
        st = next;
        step += 1;
        energy_trace.push(st.energy);
        if e_max0 > 0.0 && st.e_max > CONCENTRATION_FACTOR * e_max0 {
            return Err(Error::Concentration(format!(
                "e_max grew from {e_max0:e} to {:e} by step {step}",
                st.e_max
            )));
        }
    }
}

/// Largest ambient distance between two node values.
///
/// Exact: points are visited in decreasing distance from the centroid and
/// the search stops once no remaining pair can beat the best found.
pub fn image_diameter(f: &DiscreteMap) -> f64 {
    let m = f.target().ambient_dim();
    let pts: Vec<&[f64]> = f.values().chunks_exact(m).collect();
    let n = pts.len() as f64;
    let centroid: Vec<f64> = (0..m).map(|c| pts.iter().map(|p| p[c]).sum::<f64>() / n).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut order: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| (dist(p, &centroid), i)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let r_max = order.first().map(|o| o.0).unwrap_or(0.0);
    let mut best: f64 = 0.0;
    for (idx, &(ri, i)) in order.iter().enumerate() {
        if ri + r_max <= best {
            break;
        }
        let local = order[idx + 1..]
            .par_iter()
            .take_any_while(|(rj, _)| ri + rj > best)
            .map(|&(_, j)| dist(pts[i], pts[j]))
            .reduce(|| 0.0, f64::max);
        best = best.max(local);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainModel, TargetModel};
    use crate::maps::{total_energy, AnalyticMap};

    fn cap(n: usize) -> DiscreteMap {
        let d = DomainModel::flat_torus(1.0, 1.0, n, n).unwrap();
        AnalyticMap::Cap { amplitude: 0.3 }.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap()
    }

    #[test]
    fn constant_map_is_a_fixed_point() {
        let d = DomainModel::flat_torus(1.0, 1.0, 16, 16).unwrap();
        let t = TargetModel::sphere(1.0).unwrap();
        let q = [0.6, 0.0, 0.8];
        let f = DiscreteMap::constant(d, t, &q).unwrap();
        let r = flow_step(&f, 0.01).unwrap();
        for (a, b) in r.map.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert_eq!(image_diameter(&f), 0.0);
    }

    #[test]
    fn identity_is_stationary() {
        // the sampled identity carries an O(h²) discrete tension, and the
        // energy drop per step is Δt·∫|τ|² with Δt ∝ h⁴
        let d = DomainModel::round_sphere(1.0, 128, 256).unwrap();
        let f = AnalyticMap::IdentitySphere.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap();
        let r = flow_step(&f, auto_dt(&f)).unwrap();
        assert!((r.energy_after - r.energy_before).abs() <= 1e-10, "{}", r.energy_after - r.energy_before);
    }

    #[test]
    fn cap_energy_decreases_on_the_first_step() {
        let f = cap(32);
        let r = flow_step(&f, auto_dt(&f)).unwrap();
        assert!(r.energy_after < r.energy_before);
        assert_eq!(r.halvings, 0);
        assert!(r.map.constraint_residual() < 1e-10);
    }

    #[test]
    fn diameter_examples() {
        let d = DomainModel::round_sphere(1.0, 32, 64).unwrap();
        let f = AnalyticMap::IdentitySphere.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap();
        let dia = image_diameter(&f);
        assert!(dia <= 2.0 && dia > 2.0 - 0.1, "{dia}");
        assert!(image_diameter(&cap(32)) <= 0.6 + 1e-12);
    }

    #[test]
    fn diameter_matches_brute_force() {
        let f = cap(16);
        let pts = f.points();
        let mut brute: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                brute = brute.max(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
            }
        }
        assert_eq!(image_diameter(&f), brute);
    }

    #[test]
    fn short_flow_is_monotone() {
        let f = cap(16);
        let params = FlowParams { max_steps: 200, stride: 50, ..FlowParams::default() };
        let (g, s) = run_flow(&f, &params).unwrap();
        assert_eq!(s.outcome, FlowOutcome::MaxSteps);
        assert_eq!(s.steps, 200);
        assert_eq!(s.energy_trace.len(), 201);
        assert!(s.max_energy_increase() <= ENERGY_SLACK);
        assert!(total_energy(&g) < total_energy(&f));
        assert_eq!(s.trace.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 50, 100, 150, 200]);
    }

    #[test]
    fn harmonic_start_converges_immediately() {
        let d = DomainModel::round_sphere(1.0, 32, 64).unwrap();
        let f = AnalyticMap::IdentitySphere.sample(&d, &TargetModel::sphere(1.0).unwrap()).unwrap();
        let params = FlowParams { tol: d.h() * d.h(), ..FlowParams::default() };
        let (_, s) = run_flow(&f, &params).unwrap();
        assert_eq!(s.outcome, FlowOutcome::Converged);
        assert_eq!(s.steps, 0);
    }

    #[test]
    fn bad_params_are_rejected() {
        let f = cap(8);
        let p = FlowParams { dt: TimeStep::Fixed(-1.0), ..FlowParams::default() };
        assert!(matches!(run_flow(&f, &p), Err(Error::Usage(_))));
        assert!(flow_step(&f, 0.0).is_err());
    }
}
