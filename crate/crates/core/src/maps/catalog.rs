//! Closed-form maps used as test data and flow initial conditions.

use std::fmt;

use super::DiscreteMap;
use crate::error::{Error, Result};
use crate::geometry::{Descriptor, DomainKind, DomainModel, TargetKind, TargetModel};

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticMap {
    /// Constant at `point`, or at the target's base point when `None`.
    Constant { point: Option<Vec<f64>> },
    /// `S²(R) → S²(R)`, the inclusion.
    IdentitySphere,
    /// `S²(R) → S²(r)`, `x ↦ (r/R) x`.
    RadialScaling { r: f64 },
    /// Stereographic `z ↦ zᵏ`, `S² → S²`.
    Holomorphic { k: u32 },
    /// Exponential map at the base point of `amplitude·(sin u₁, sin u₂)/√2`.
    /// The image lies in the geodesic ball of radius `amplitude`.
    Cap { amplitude: f64 },
    /// Torus onto the band `|z| ≤ height` of a spheroid.
    EquatorialBand { height: f64 },
    /// `T²(a,b) → S¹(a) × S¹(b)`, the standard isometric embedding.
    TorusIdentity,
}

impl AnalyticMap {
    /// Parses `constant`, `identity`, `scaling:r=2`, `holomorphic:k=2`,
    /// `cap:amplitude=0.3`, `band:height=0.05`, `torus_identity`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Descriptor::parse(text)?;
        let map = match d.kind.as_str() {
            "constant" => AnalyticMap::Constant { point: None },
            "identity" | "identity_sphere" => AnalyticMap::IdentitySphere,
            "scaling" | "radial_scaling" => AnalyticMap::RadialScaling { r: d.take_positive("r", Some(2.0))? },
            "holomorphic" => {
                let k = d.take("k", Some(2.0))?;
                if !(k >= 1.0 && k.fract() == 0.0 && k <= 16.0) {
                    return Err(Error::Usage(format!("holomorphic degree must be an integer in 1..=16, got {k}")));
                }
                AnalyticMap::Holomorphic { k: k as u32 }
            }
            "cap" => AnalyticMap::Cap { amplitude: d.take_positive("amplitude", Some(0.3))? },
            "band" => AnalyticMap::EquatorialBand { height: d.take("height", Some(0.05))?.abs() },
            "torus_identity" => AnalyticMap::TorusIdentity,
            other => return Err(Error::Usage(format!("unknown map `{other}`"))),
        };
        d.finish()?;
        Ok(map)
    }

    pub fn name(&self) -> String {
        match self {
            AnalyticMap::Constant { .. } => "constant".into(),
            AnalyticMap::IdentitySphere => "identity_sphere".into(),
            AnalyticMap::RadialScaling { r } => format!("radial_scaling({r})"),
            AnalyticMap::Holomorphic { k } => format!("holomorphic_degree_{k}"),
            AnalyticMap::Cap { amplitude } => format!("cap({amplitude})"),
            AnalyticMap::EquatorialBand { height } => format!("equatorial_band({height})"),
            AnalyticMap::TorusIdentity => "torus_identity".into(),
        }
    }

    /// Domain descriptor the map is usually sampled on.
    pub fn default_domain(&self) -> String {
        match self {
            AnalyticMap::Cap { .. } | AnalyticMap::EquatorialBand { .. } | AnalyticMap::TorusIdentity => {
                "torus:a=1,b=1".into()
            }
            _ => "sphere:r=1".into(),
        }
    }

    /// Target descriptor matching [`Self::default_domain`].
    pub fn default_target(&self) -> String {
        match self {
            AnalyticMap::RadialScaling { r } => format!("sphere:r={r}"),
            AnalyticMap::EquatorialBand { .. } => "ellipsoid:a=1,b=1,c=2".into(),
            AnalyticMap::TorusIdentity => "torusemb:r1=1,r2=1".into(),
            _ => "sphere:r=1".into(),
        }
    }

    /// True for maps known to be harmonic in closed form.
    pub fn is_harmonic(&self) -> bool {
        !matches!(self, AnalyticMap::Cap { .. } | AnalyticMap::EquatorialBand { .. })
    }

    /// Rejects domain/target pairs the evaluator is not defined for.
    pub fn check_compatible(&self, domain: &DomainModel, target: &TargetModel) -> Result<()> {
        let sphere_domain = match domain.kind {
            DomainKind::RoundSphere2 { r } => Some(r),
            DomainKind::FlatTorus2 { .. } => None,
        };
        let sphere2_target = match target.kind {
            TargetKind::Sphere { k: 2, r } => Some(r),
            _ => None,
        };
        let bad = |why: &str| Err(Error::Usage(format!("map {} {why}", self.name())));
        match self {
            AnalyticMap::Constant { point } => match point {
                Some(q) => target.check_on_target(q),
                None => Ok(()),
            },
            AnalyticMap::IdentitySphere => match (sphere_domain, sphere2_target) {
                (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * a => Ok(()),
                _ => bad("needs a sphere domain and a 2-sphere target of the same radius"),
            },
            AnalyticMap::RadialScaling { r } => match (sphere_domain, sphere2_target) {
                (Some(_), Some(b)) if (r - b).abs() <= 1e-12 * r => Ok(()),
                _ => bad("needs a sphere domain and a 2-sphere target of radius r"),
            },
            AnalyticMap::Holomorphic { .. } => match (sphere_domain, sphere2_target) {
                (Some(_), Some(_)) => Ok(()),
                _ => bad("needs a sphere domain and a 2-sphere target"),
            },
            AnalyticMap::Cap { amplitude } => match target.kind {
                TargetKind::Euclidean { m } if m >= 2 => Ok(()),
                TargetKind::Sphere { r, .. } if *amplitude < std::f64::consts::PI * r => Ok(()),
                _ => bad("needs a Euclidean target or a sphere of radius above amplitude/π"),
            },
            AnalyticMap::EquatorialBand { height } => match target.kind {
                TargetKind::Ellipsoid { c, .. } if *height < c => Ok(()),
                _ => bad("needs an ellipsoid target taller than the band"),
            },
            AnalyticMap::TorusIdentity => match (&domain.kind, &target.kind) {
                (DomainKind::FlatTorus2 { a, b }, TargetKind::FlatTorusEmb { radii })
                    if radii.len() == 2 && (radii[0] - a).abs() <= 1e-12 * a && (radii[1] - b).abs() <= 1e-12 * b =>
                {
                    Ok(())
                }
                _ => bad("needs a torus T²(a,b) domain and the target torusemb:r1=a,r2=b"),
            },
        }
    }

    /// Closed-form value at chart point `p`, on the target up to rounding.
    pub fn evaluate_raw(&self, domain: &DomainModel, target: &TargetModel, p: [f64; 2]) -> Result<Vec<f64>> {
        self.check_compatible(domain, target)?;
        Ok(self.evaluate_unchecked(domain, target, p))
    }

    fn evaluate_unchecked(&self, _domain: &DomainModel, target: &TargetModel, p: [f64; 2]) -> Vec<f64> {
        let [u, v] = p;
        match self {
            AnalyticMap::Constant { point } => point.clone().unwrap_or_else(|| target.base_point()),
            AnalyticMap::IdentitySphere | AnalyticMap::RadialScaling { .. } => {
                let r = sphere_radius(target);
                vec![r * u.sin() * v.cos(), r * u.sin() * v.sin(), r * u.cos()]
            }
            AnalyticMap::Holomorphic { k } => {
                let r = sphere_radius(target);
                let k = *k as i32;
                // |zᵏ| = tanᵏ(θ/2); invert the stereographic projection.
                let t = (0.5 * u).tan().powi(k);
                let (sin_t, cos_t) = if t <= 1.0 {
                    let d = 1.0 + t * t;
                    (2.0 * t / d, (1.0 - t * t) / d)
                } else {
                    let s = 1.0 / t;
                    let d = 1.0 + s * s;
                    (2.0 * s / d, (s * s - 1.0) / d)
                };
                let phi = k as f64 * v;
                vec![r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t]
            }
            AnalyticMap::Cap { amplitude } => {
                let x = [amplitude * u.sin() / 2f64.sqrt(), amplitude * v.sin() / 2f64.sqrt()];
                let base = target.base_point();
                match target.kind {
                    TargetKind::Sphere { r, .. } => {
                        let rho = x[0].hypot(x[1]);
                        let mut q: Vec<f64> = base.iter().map(|b| b * (rho / r).cos()).collect();
                        if rho > 0.0 {
                            let s = r * (rho / r).sin() / rho;
                            q[0] += s * x[0];
                            q[1] += s * x[1];
                        }
                        q
                    }
                    _ => {
                        let mut q = base;
                        q[0] += x[0];
                        q[1] += x[1];
                        q
                    }
                }
            }
            AnalyticMap::EquatorialBand { height } => {
                let TargetKind::Ellipsoid { a, b, c } = target.kind else { unreachable!() };
                let z = height * v.sin();
                let rho = (1.0 - (z / c).powi(2)).sqrt();
                vec![a * rho * u.cos(), b * rho * u.sin(), z]
            }
            AnalyticMap::TorusIdentity => {
                let TargetKind::FlatTorusEmb { radii } = &target.kind else { unreachable!() };
                let (ra, rb) = (radii[0], radii[1]);
                vec![ra * u.cos(), ra * u.sin(), rb * v.cos(), rb * v.sin()]
            }
        }
    }

    /// Samples the map on every node of `domain`.
    pub fn sample(&self, domain: &DomainModel, target: &TargetModel) -> Result<DiscreteMap> {
        self.check_compatible(domain, target)?;
        let mut values = Vec::with_capacity(domain.node_count() * target.ambient_dim());
        for node in 0..domain.node_count() {
            let q = self.evaluate_unchecked(domain, target, domain.coords(node));
            values.extend(q);
        }
        DiscreteMap::new(domain.clone(), target.clone(), values)
    }
}

fn sphere_radius(target: &TargetModel) -> f64 {
    match target.kind {
        TargetKind::Sphere { r, .. } => r,
        _ => unreachable!("checked by check_compatible"),
    }
}

impl fmt::Display for AnalyticMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(n: usize) -> DomainModel {
        DomainModel::round_sphere(1.0, n, 2 * n).unwrap()
    }

    #[test]
    fn parse_names() {
        assert_eq!(AnalyticMap::parse("identity").unwrap(), AnalyticMap::IdentitySphere);
        assert_eq!(AnalyticMap::parse("scaling:r=0.5").unwrap(), AnalyticMap::RadialScaling { r: 0.5 });
        assert_eq!(AnalyticMap::parse("holomorphic:k=3").unwrap(), AnalyticMap::Holomorphic { k: 3 });
        assert_eq!(AnalyticMap::parse("cap:amplitude=0.3").unwrap(), AnalyticMap::Cap { amplitude: 0.3 });
        assert!(AnalyticMap::parse("holomorphic:k=2.5").is_err());
        assert!(AnalyticMap::parse("cap:amp=1").is_err());
        assert!(AnalyticMap::parse("bogus").is_err());
    }

    #[test]
    fn every_entry_lands_on_its_default_target() {
        for text in ["constant", "identity", "scaling:r=2", "holomorphic:k=2", "holomorphic:k=3", "cap", "band", "torus_identity"] {
            let map = AnalyticMap::parse(text).unwrap();
            let d = DomainModel::parse(&map.default_domain(), 16, 32).unwrap();
            let t = TargetModel::parse(&map.default_target()).unwrap();
            let f = map.sample(&d, &t).unwrap();
            assert!(f.constraint_residual() < 1e-14, "{text}: {}", f.constraint_residual());
        }
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let torus = DomainModel::flat_torus(1.0, 1.0, 8, 8).unwrap();
        let s1 = TargetModel::sphere(1.0).unwrap();
        let s2 = TargetModel::sphere(2.0).unwrap();
        assert!(AnalyticMap::IdentitySphere.sample(&torus, &s1).is_err());
        assert!(AnalyticMap::IdentitySphere.sample(&sphere(8), &s2).is_err());
        assert!(AnalyticMap::RadialScaling { r: 2.0 }.sample(&sphere(8), &s1).is_err());
        assert!(AnalyticMap::EquatorialBand { height: 0.1 }.sample(&torus, &s1).is_err());
    }

    #[test]
    fn holomorphic_degree_one_is_the_identity() {
        let d = sphere(16);
        let t = TargetModel::sphere(1.0).unwrap();
        let a = AnalyticMap::Holomorphic { k: 1 }.sample(&d, &t).unwrap();
        let b = AnalyticMap::IdentitySphere.sample(&d, &t).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn holomorphic_wraps_k_times_around_the_equator() {
        let d = sphere(16);
        let t = TargetModel::sphere(1.0).unwrap();
        let map = AnalyticMap::Holomorphic { k: 3 };
        let q = map.evaluate_raw(&d, &t, [PI / 2.0, PI / 3.0]).unwrap();
        // equator maps to equator, angle tripled
        assert!(q[2].abs() < 1e-14);
        assert!((q[0] - PI.cos()).abs() < 1e-14);
    }

    #[test]
    fn cap_stays_in_its_geodesic_ball() {
        let d = DomainModel::flat_torus(1.0, 1.0, 32, 32).unwrap();
        let t = TargetModel::sphere(1.0).unwrap();
        let f = AnalyticMap::Cap { amplitude: 0.3 }.sample(&d, &t).unwrap();
        let north = t.base_point();
        for q in f.points() {
            let cos = q.iter().zip(&north).map(|(a, b)| a * b).sum::<f64>();
            assert!(cos.clamp(-1.0, 1.0).acos() <= 0.3 + 1e-12);
        }
    }
}
