//! Scaling transformations of periodic orbits.
//!
//! Three families map an orbit of one system onto an orbit of a rescaled
//! system:
//!
//! | kind        | x      | p       | t          | E        | couplings            |
//! |-------------|--------|---------|------------|----------|----------------------|
//! | coupling    | x      | αp      | t/α        | α²E      | α²λ                  |
//! | homogeneous | α²x    | α^ν p   | α^(2−ν) t  | α^(2ν)E  | unchanged            |
//! | mixed       | α²x    | α^ν₁ p  | α^(2−ν₁) t | α^(2ν₁)E | α^(2(ν₁−νⱼ)) λⱼ      |
//!
//! The transformed orbit is built from the stored trace by rescaling
//! samples, never by searching again, and is then checked against the
//! equations of motion of the rescaled system.
//!
//! Also here: the characteristic length `Λ = S/√(2m|E|)`, the virial
//! identity for homogeneous potentials, coupling-to-length transmutation
//! and the level-loci tables built from it.

use serde::Serialize;

use crate::dynamics::{
    eom_residual, Domain, HamiltonianSpec, PhaseState, PotentialTerm, Shape, Trajectory,
};
use crate::error::{domain, Error, Result};
use crate::orbits::{closure_residual, trace_invariants, PeriodicOrbit, Well};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    Coupling,
    Homogeneous,
    Mixed,
}

/// Multipliers applied to each quantity by one transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFactors {
    pub position: f64,
    pub momentum: f64,
    pub time: f64,
    pub energy: f64,
}

impl ScalingFactors {
    /// `S = ∮p·dx` picks up the product of position and momentum factors.
    pub fn action(&self) -> f64 {
        self.position * self.momentum
    }
}

#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub alpha: f64,
    pub kind: ScalingKind,
    pub factors: ScalingFactors,
    pub source_energy: f64,
    pub source_couplings: Vec<f64>,
    pub new_energy: f64,
    pub new_couplings: Vec<f64>,
    /// Scaling law applied to the source orbit's period.
    pub predicted_period: f64,
    pub predicted_action: f64,
    /// Integrals over the transformed trace.
    pub measured_period: f64,
    pub measured_action: f64,
    /// Relative deviation of the transformed-trace integrals from the law
    /// applied to the same integrals over the source trace.
    pub period_residual: f64,
    pub action_residual: f64,
    /// Discrete equations-of-motion residual of the transformed trace under
    /// the rescaled Hamiltonian.
    pub eom_residual: f64,
    /// `|H'(first sample) − E'| / |E'|`.
    pub energy_residual: f64,
    pub transformed: PeriodicOrbit,
}

impl ScalingResult {
    /// `λⱼ'/λⱼ`; for the diamagnetic term this is `Γ²`.
    pub fn coupling_ratio(&self, index: usize) -> Option<f64> {
        let old = *self.source_couplings.get(index)?;
        Some(self.new_couplings.get(index)? / old)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    Ok(())
}

fn scale_domain(domain: &Domain, factor: f64) -> Domain {
    match domain {
        Domain::Unbounded => Domain::Unbounded,
        Domain::Box {
            lower,
            upper,
            boundary,
        } => Domain::Box {
            lower: lower.iter().map(|c| c * factor).collect(),
            upper: upper.iter().map(|c| c * factor).collect(),
            boundary: *boundary,
        },
    }
}

fn transform(
    orbit: &PeriodicOrbit,
    new_spec: HamiltonianSpec,
    factors: ScalingFactors,
    kind: ScalingKind,
    alpha: f64,
) -> Result<ScalingResult> {
    let src = &orbit.trace;
    let samples: Vec<PhaseState> = src
        .samples
        .iter()
        .map(|s| PhaseState {
            x: s.x.iter().map(|c| c * factors.position).collect(),
            p: s.p.iter().map(|c| c * factors.momentum).collect(),
            t: s.t * factors.time,
        })
        .collect();
    let first = samples
        .first()
        .ok_or_else(|| Error::Numeric("orbit has an empty trace".into()))?;
    let trace_energy = new_spec.hamiltonian(&first.x, &first.p);
    let energy_drift = samples
        .iter()
        .map(|s| (new_spec.hamiltonian(&s.x, &s.p) - trace_energy).abs())
        .fold(0.0, f64::max);
    let trace = Trajectory {
        samples,
        tau: None,
        dt: src.dt * factors.time,
        energy: trace_energy,
        energy_drift,
        reflections: src.reflections.clone(),
    };

    let new_energy = factors.energy * orbit.energy;
    let predicted_period = factors.time * orbit.period;
    let predicted_action = factors.action() * orbit.action;

    let before = trace_invariants(&orbit.spec, src);
    let after = trace_invariants(&new_spec, &trace);
    let relative = |measured: f64, expected: f64| {
        (measured - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
    };
    let period_residual = relative(after.period, factors.time * before.period);
    let action_residual = relative(after.action, factors.action() * before.action);
    let eom = eom_residual(&new_spec, &trace)?.max();
    let energy_residual = relative(trace_energy, new_energy);

    let transformed = PeriodicOrbit {
        energy: new_energy,
        period: predicted_period,
        action: predicted_action,
        arclength: factors.position * orbit.arclength,
        time_action: predicted_action - new_energy * predicted_period,
        closure_residual: closure_residual(&trace),
        well: orbit.well.map(|w| Well {
            lower: w.lower * factors.position,
            upper: w.upper * factors.position,
            ..w
        }),
        trace,
        spec: new_spec,
    };
    Ok(ScalingResult {
        alpha,
        kind,
        factors,
        source_energy: orbit.energy,
        source_couplings: orbit.spec.couplings(),
        new_energy,
        new_couplings: transformed.spec.couplings(),
        predicted_period,
        predicted_action,
        measured_period: after.period,
        measured_action: after.action,
        period_residual,
        action_residual,
        eom_residual: eom,
        energy_residual,
        transformed,
    })
}

/// `λ → α²λ`, `E → α²E`: the same path traversed `α` times faster.
pub fn scale_coupling(orbit: &PeriodicOrbit, alpha: f64) -> Result<ScalingResult> {
    check_alpha(alpha)?;
    let mut spec = orbit.spec.clone();
    let a2 = alpha * alpha;
    for term in &mut spec.terms {
        term.coupling *= a2;
    }
    let factors = ScalingFactors {
        position: 1.0,
        momentum: alpha,
        time: 1.0 / alpha,
        energy: a2,
    };
    transform(orbit, spec, factors, ScalingKind::Coupling, alpha)
}

fn check_degree(nu: f64) -> Result<()> {
    if nu == 0.0 || nu == -2.0 {
        return Err(Error::SingularExponent(nu));
    }
    Ok(())
}

fn dilation_factors(alpha: f64, nu: f64) -> ScalingFactors {
    ScalingFactors {
        position: alpha * alpha,
        momentum: alpha.powf(nu),
        time: alpha.powf(2.0 - nu),
        energy: alpha.powf(2.0 * nu),
    }
}

/// Dilation `x → α²x` of an orbit in a potential of a single degree `ν`.
pub fn scale_homogeneous(orbit: &PeriodicOrbit, alpha: f64) -> Result<ScalingResult> {
    check_alpha(alpha)?;
    let nu = orbit.spec.common_degree().ok_or_else(|| {
        Error::WrongKind("homogeneous scaling needs all terms to share one declared degree".into())
    })?;
    check_degree(nu)?;
    let factors = dilation_factors(alpha, nu);
    let mut spec = orbit.spec.clone();
    spec.domain = scale_domain(&spec.domain, factors.position);
    transform(orbit, spec, factors, ScalingKind::Homogeneous, alpha)
}

/// Dilation anchored on term `anchor`: its coupling is held fixed and every
/// other homogeneous term is rescaled by `α^(2(ν₁−νⱼ))`.
///
/// A term without a declared degree is rejected unless `deform` is set, in
/// which case its profile becomes `α^(2ν₁) V(α⁻² x)` with the coupling kept.
pub fn scale_mixed_deformed(
    orbit: &PeriodicOrbit,
    alpha: f64,
    anchor: usize,
    deform: bool,
) -> Result<ScalingResult> {
    check_alpha(alpha)?;
    let terms = &orbit.spec.terms;
    let anchor_term = terms.get(anchor).ok_or_else(|| {
        Error::Domain(format!(
            "anchor index {anchor} out of range ({} terms)",
            terms.len()
        ))
    })?;
    let nu1 = anchor_term
        .degree
        .ok_or_else(|| Error::WrongKind("the anchor term must be homogeneous".into()))?;
    check_degree(nu1)?;

    let mut spec = orbit.spec.clone();
    for (j, term) in spec.terms.iter_mut().enumerate() {
        if j == anchor {
            continue;
        }
        match term.degree {
            Some(nu) => term.coupling *= alpha.powf(2.0 * (nu1 - nu)),
            None if deform => *term = deform_term(term, alpha, nu1),
            None => {
                return Err(Error::WrongKind(format!(
                    "term {j} has no declared degree and deformation is off"
                )))
            }
        }
    }
    let factors = dilation_factors(alpha, nu1);
    spec.domain = scale_domain(&spec.domain, factors.position);
    transform(orbit, spec, factors, ScalingKind::Mixed, alpha)
}

pub fn scale_mixed(orbit: &PeriodicOrbit, alpha: f64, anchor: usize) -> Result<ScalingResult> {
    scale_mixed_deformed(orbit, alpha, anchor, false)
}

fn deform_term(term: &PotentialTerm, alpha: f64, anchor_degree: f64) -> PotentialTerm {
    let shape = match &term.shape {
        // Composing two deformations with the same anchor multiplies their α.
        Shape::Deformed {
            inner,
            alpha: a0,
            anchor_degree: d0,
        } if *d0 == anchor_degree => Shape::Deformed {
            inner: inner.clone(),
            alpha: a0 * alpha,
            anchor_degree,
        },
        other => Shape::Deformed {
            inner: Box::new(other.clone()),
            alpha,
            anchor_degree,
        },
    };
    PotentialTerm {
        coupling: term.coupling,
        degree: None,
        shape,
    }
}

/// `Λ = S/√(2m|E|)`.
pub fn characteristic_length(action: f64, energy: f64, mass: f64) -> Result<f64> {
    if energy == 0.0 || !energy.is_finite() {
        return domain("characteristic length needs a nonzero finite energy");
    }
    if !(action > 0.0) {
        return domain(format!("action must be positive, got {action}"));
    }
    if !(mass > 0.0) {
        return domain(format!("mass must be positive, got {mass}"));
    }
    Ok(action / (2.0 * mass * energy.abs()).sqrt())
}

/// Closure above this is treated as an open trajectory by [`virial_residual`].
pub const PERIODIC_CLOSURE_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirialReport {
    pub degree: f64,
    /// `∫₀^T λV dt` over the trace.
    pub potential_integral: f64,
    /// `2ET/(ν+2)`.
    pub predicted: f64,
    /// `|∫λV dt − 2ET/(ν+2)| / (|E|T)`.
    pub residual: f64,
    /// `|S/2E − (T − ∫λV dt / E)| / T`.
    pub action_residual: f64,
}

/// Checks `∫₀^T λV dt = 2ET/(ν+2)` on a periodic orbit of a single-degree potential.
pub fn virial_residual(orbit: &PeriodicOrbit) -> Result<VirialReport> {
    let nu = orbit.spec.common_degree().ok_or_else(|| {
        Error::WrongKind("the virial identity needs all terms to share one declared degree".into())
    })?;
    if nu == -2.0 {
        return Err(Error::SingularExponent(nu));
    }
    if !(orbit.closure_residual <= PERIODIC_CLOSURE_LIMIT) {
        return Err(Error::NotPeriodic(orbit.closure_residual));
    }
    let measured = trace_invariants(&orbit.spec, &orbit.trace);
    let (e, t) = (orbit.trace.energy, measured.period);
    let predicted = 2.0 * e * t / (nu + 2.0);
    let scale = e.abs() * t;
    Ok(VirialReport {
        degree: nu,
        potential_integral: measured.potential_integral,
        predicted,
        residual: (measured.potential_integral - predicted).abs() / scale,
        action_residual: (orbit.action / (2.0 * e) - (t - measured.potential_integral / e)).abs()
            / t,
    })
}

/// The length `x₀ = |λ|^(−1/(ν+2))` set by a coupling in units with `ħ² = 2m`.
pub fn transmute_length(coupling: f64, degree: f64) -> Result<f64> {
    transmute_length_in_units(coupling, degree, 1.0, 0.5)
}

/// `x₀ = (ħ²/(2m|λ|))^(1/(ν+2))`, the only length built from `ħ`, `m`, `λ`.
pub fn transmute_length_in_units(coupling: f64, degree: f64, hbar: f64, mass: f64) -> Result<f64> {
    if degree == -2.0 {
        return Err(Error::SingularExponent(degree));
    }
    if coupling == 0.0 || !coupling.is_finite() {
        return domain("transmutation needs a nonzero finite coupling");
    }
    if !(hbar > 0.0 && mass > 0.0) {
        return domain("hbar and mass must be positive");
    }
    Ok((hbar * hbar / (2.0 * mass * coupling.abs())).powf(1.0 / (degree + 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LociKind {
    /// `λx²` with `ϖ = √(2λ/m)`.
    Oscillator,
    /// `−λ/r` with `λ = e²`.
    Coulomb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LociRow {
    pub coupling: f64,
    pub n: u32,
    pub energy: f64,
    pub length: f64,
    /// `E_n·x₀²`, independent of the coupling.
    pub scaled_energy: f64,
}

/// Levels against coupling strength, with the transmuted length `x₀` that
/// collapses each locus to a constant. Units `ħ = m = 1`.
///
/// Oscillator rows run over `n = 0..=n_max` and give `E_n x₀² = n + ½`;
/// Coulomb rows run over `n = 1..=n_max` and give `E_n x₀² = −1/(8n²)`.
pub fn level_loci(kind: LociKind, n_max: u32, couplings: &[f64]) -> Result<Vec<LociRow>> {
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    if let Some(bad) = couplings.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return domain(format!("couplings must be positive, got {bad}"));
    }
    let (hbar, mass) = (1.0, 1.0);
    let mut rows = Vec::new();
    for &lambda in couplings {
        match kind {
            LociKind::Oscillator => {
                let omega = (2.0 * lambda / mass).sqrt();
                let x0 = transmute_length_in_units(lambda, 2.0, hbar, mass)?;
                for n in 0..=n_max {
                    let energy = (n as f64 + 0.5) * hbar * omega;
                    rows.push(LociRow {
                        coupling: lambda,
                        n,
                        energy,
                        length: x0,
                        scaled_energy: energy * x0 * x0,
                    });
                }
            }
            LociKind::Coulomb => {
                let x0 = transmute_length_in_units(lambda, -1.0, hbar, mass)?;
                for n in 1..=n_max {
                    let n2 = (n as f64).powi(2);
                    let energy = -mass * lambda * lambda / (2.0 * hbar * hbar * n2);
                    rows.push(LociRow {
                        coupling: lambda,
                        n,
                        energy,
                        length: x0,
                        scaled_energy: energy * x0 * x0,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `Γ = ϖ/ϖ₀ = α⁻³` for mixed scaling anchored on the Coulomb term.
pub fn field_ratio(alpha: f64) -> f64 {
    alpha.powi(-3)
}

/// `E/E₀ = Γ^(2/3)` along the diamagnetic-Kepler family.
pub fn energy_ratio_from_field(gamma: f64) -> f64 {
    gamma.powf(2.0 / 3.0)
}
