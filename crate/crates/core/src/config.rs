//! JSON description of a Hamiltonian system.
//!
//! ```json
//! {
//!   "mass": 0.5,
//!   "hbar": 1.0,
//!   "terms": [{"coupling": 1.0, "degree": 4, "shape": "power"}],
//!   "domain": {"kind": "unbounded"}
//! }
//! ```
//!
//! `mass` and `hbar` default to `0.5` and `1`. The dimension is taken from
//! `dimension`, else from the box, else from the shapes (3 for `coulomb` and
//! `oscillator_xy`, 1 otherwise).

use serde::{Deserialize, Serialize};

use crate::dynamics::{Boundary, Domain, HamiltonianSpec, PotentialTerm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    Power,
    Coulomb,
    OscillatorXy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coupling: f64,
    #[serde(default)]
    pub degree: Option<f64>,
    pub shape: ShapeName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Unbounded,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default = "default_boundary")]
        boundary: Boundary,
    },
}

fn default_boundary() -> Boundary {
    Boundary::Dirichlet
}

fn default_mass() -> f64 {
    0.5
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    #[serde(default = "unbounded")]
    pub domain: DomainConfig,
}

fn unbounded() -> DomainConfig {
    DomainConfig::Unbounded
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<HamiltonianSpec> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            let fixed = match t.shape {
                ShapeName::Power => None,
                ShapeName::Coulomb => Some(-1.0),
                ShapeName::OscillatorXy => Some(2.0),
            };
            let term = match (t.shape, t.degree, fixed) {
                (ShapeName::Power, Some(nu), _) => PotentialTerm::power(t.coupling, nu),
                (ShapeName::Power, None, _) => {
                    return Err(Error::Config(format!(
                        "term {i}: power shape needs a degree"
                    )))
                }
                (_, Some(nu), Some(expected)) if nu != expected => {
                    return Err(Error::Config(format!(
                        "term {i}: shape {:?} has degree {expected}, config says {nu}",
                        t.shape
                    )))
                }
                (ShapeName::Coulomb, ..) => PotentialTerm::coulomb(t.coupling),
                (ShapeName::OscillatorXy, ..) => PotentialTerm::oscillator_xy(t.coupling),
            };
            terms.push(term);
        }
        let domain = match &self.domain {
            DomainConfig::Unbounded => Domain::Unbounded,
            DomainConfig::Box {
                lower,
                upper,
                boundary,
            } => Domain::Box {
                lower: lower.clone(),
                upper: upper.clone(),
                boundary: *boundary,
            },
        };
        let dimension = match (self.dimension, &domain) {
            (Some(d), _) => d,
            (None, Domain::Box { lower, .. }) => lower.len(),
            (None, Domain::Unbounded) => self
                .terms
                .iter()
                .map(|t| match t.shape {
                    ShapeName::Power => 1,
                    ShapeName::Coulomb | ShapeName::OscillatorXy => 3,
                })
                .max()
                .unwrap_or(1),
        };
        let spec = HamiltonianSpec {
            mass: self.mass,
            hbar: self.hbar,
            dimension,
            terms,
            domain,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Parses and builds a system in one step.
pub fn system_from_json(text: &str) -> Result<HamiltonianSpec> {
    SystemConfig::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_and_box() {
        let q =
            system_from_json(r#"{"mass":1,"terms":[{"coupling":1,"degree":4,"shape":"power"}]}"#)
                .unwrap();
        assert_eq!(q.dimension, 1);
        assert_eq!(q.mass, 1.0);
        assert_eq!(q.common_degree(), Some(4.0));
        let b =
            system_from_json(r#"{"domain":{"kind":"box","lower":[0,0],"upper":[3,4]}}"#).unwrap();
        assert_eq!(b.dimension, 2);
        assert_eq!(b.mass, 0.5);
        assert!(b.domain.is_bounded());
    }

    #[test]
    fn diamagnetic_kepler_is_three_dimensional() {
        let s = system_from_json(
            r#"{"terms":[{"coupling":1,"shape":"coulomb"},{"coupling":0.1,"shape":"oscillator_xy"}]}"#,
        )
        .unwrap();
        assert_eq!(s.dimension, 3);
        assert_eq!(s.terms[0].degree, Some(-1.0));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            r#"{"mass":1,"colour":"red"}"#,
            r#"{"terms":[{"coupling":1,"shape":"power"}]}"#,
            r#"{"terms":[{"coupling":1,"shape":"coulomb","degree":2}]}"#,
            r#"{"terms":[{"coupling":1,"shape":"cubic"}]}"#,
            r#"{"mass":-1}"#,
            r#"{"domain":{"kind":"box","lower":[1],"upper":[0]}}"#,
            r#"{"mass":1"#,
        ] {
            assert!(
                matches!(system_from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }
}
