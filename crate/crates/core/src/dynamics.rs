//! Hamiltonian systems of the form `H = p²/2m + Σⱼ λⱼ Vⱼ(x)`.
//!
//! Trajectories are produced by velocity Verlet (kick-drift-kick). Hard
//! walls of a box domain are handled inside the drift: the crossing fraction
//! of the step is located by bisection on the signed distance to the wall and
//! the normal momentum is reversed there, so billiard orbits stay polygonal.
//!
//! The square-root Hamiltonian `h = √H` generates the same phase-space curves
//! with a new time `τ`; at fixed energy `dτ/dt = 2√E`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};

/// Small fixed-capacity vector used for positions and momenta (d ≤ 3 inline).
pub type Vector = SmallVec<[f64; 3]>;

/// Bisection tolerance for wall crossings, as a fraction of the time step.
pub const WALL_CROSSING_TOLERANCE: f64 = 1e-13;

/// Default number of integration steps per (estimated) period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 100_000;

const MAX_BOUNCES_PER_STEP: usize = 64;
const ESCAPE_RADIUS_FACTOR: f64 = 1e6;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A user-supplied potential profile with its analytic gradient.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
}

impl CustomProfile {
    pub fn new<V, G>(name: impl Into<String>, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile")
            .field("name", &self.name)
            .finish()
    }
}

/// Dimensionless potential profile `V(x)`; the coupling lives on [`PotentialTerm`].
#[derive(Debug, Clone)]
pub enum Shape {
    /// `|x|^ν` with `|x|` the Euclidean norm.
    Power {
        exponent: f64,
    },
    /// `−1/r`.
    Coulomb,
    /// `x² + y²` (cylindrical oscillator, needs d ≥ 2).
    OscillatorXy,
    Custom(CustomProfile),
    /// `α^(2ν₁) V(α⁻² x)`: the deformation family a non-homogeneous term
    /// follows under mixed scaling anchored on a term of degree `ν₁`.
    Deformed {
        inner: Box<Shape>,
        alpha: f64,
        anchor_degree: f64,
    },
}

impl Shape {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Power { exponent } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                if *exponent == 2.0 {
                    r2
                } else {
                    r2.powf(0.5 * exponent)
                }
            }
            Shape::Coulomb => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                -1.0 / r2.sqrt()
            }
            Shape::OscillatorXy => x.iter().take(2).map(|c| c * c).sum(),
            Shape::Custom(profile) => (profile.value)(x),
            Shape::Deformed {
                inner,
                alpha,
                anchor_degree,
            } => {
                let shrink = alpha.powi(-2);
                let y: Vector = x.iter().map(|c| c * shrink).collect();
                alpha.powf(2.0 * anchor_degree) * inner.value(&y)
            }
        }
    }

    /// Writes `∇V(x)` into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Shape::Power { exponent } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                let factor = if r2 == 0.0 {
                    // |x|^ν has a kink (ν = 1) or a cusp (ν < 1) at the origin.
                    if *exponent >= 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else if *exponent == 2.0 {
                    2.0
                } else {
                    exponent * r2.powf(0.5 * exponent - 1.0)
                };
                for (o, c) in out.iter_mut().zip(x) {
                    *o = if factor.is_infinite() {
                        factor
                    } else {
                        factor * c
                    };
                }
            }
            Shape::Coulomb => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                let inv_r3 = 1.0 / (r2 * r2.sqrt());
                for (o, c) in out.iter_mut().zip(x) {
                    *o = c * inv_r3;
                }
            }
            Shape::OscillatorXy => {
                for (i, (o, c)) in out.iter_mut().zip(x).enumerate() {
                    *o = if i < 2 { 2.0 * c } else { 0.0 };
                }
            }
            Shape::Custom(profile) => (profile.gradient)(x, out),
            Shape::Deformed {
                inner,
                alpha,
                anchor_degree,
            } => {
                let shrink = alpha.powi(-2);
                let y: Vector = x.iter().map(|c| c * shrink).collect();
                inner.gradient(&y, out);
                let factor = alpha.powf(2.0 * anchor_degree - 2.0);
                out.iter_mut().for_each(|o| *o *= factor);
            }
        }
    }

    fn min_dimension(&self) -> usize {
        match self {
            Shape::OscillatorXy => 2,
            Shape::Deformed { inner, .. } => inner.min_dimension(),
            _ => 1,
        }
    }
}

/// One term `λ V(x)` of the potential.
///
/// `degree` is `Some(ν)` when the profile is declared homogeneous,
/// `V(βx) = β^ν V(x)` for `β > 0`.
#[derive(Debug, Clone)]
pub struct PotentialTerm {
    pub coupling: f64,
    pub degree: Option<f64>,
    pub shape: Shape,
}

impl PotentialTerm {
    pub fn power(coupling: f64, exponent: f64) -> Self {
        Self {
            coupling,
            degree: Some(exponent),
            shape: Shape::Power { exponent },
        }
    }

    /// `λ·(−1/r)`; for hydrogen `λ = e²`.
    pub fn coulomb(coupling: f64) -> Self {
        Self {
            coupling,
            degree: Some(-1.0),
            shape: Shape::Coulomb,
        }
    }

    /// `λ·(x² + y²)`; for the diamagnetic term `λ = mϖ²/2`.
    pub fn oscillator_xy(coupling: f64) -> Self {
        Self {
            coupling,
            degree: Some(2.0),
            shape: Shape::OscillatorXy,
        }
    }

    pub fn custom(coupling: f64, degree: Option<f64>, profile: CustomProfile) -> Self {
        Self {
            coupling,
            degree,
            shape: Shape::Custom(profile),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coupling * self.shape.value(x)
    }

    /// `|V(βx) − β^ν V(x)| / max(1, |V(x)|)`, or `None` for a term not
    /// declared homogeneous.
    pub fn homogeneity_defect(&self, x: &[f64], beta: f64) -> Option<f64> {
        let nu = self.degree?;
        let scaled: Vector = x.iter().map(|c| c * beta).collect();
        let v = self.shape.value(x);
        let vb = self.shape.value(&scaled);
        Some((vb - beta.powf(nu) * v).abs() / v.abs().max(1.0))
    }

    /// Largest relative disagreement between the analytic gradient and a
    /// central finite difference of the profile at `x`.
    pub fn gradient_defect(&self, x: &[f64]) -> f64 {
        let mut analytic = vec![0.0; x.len()];
        self.shape.gradient(x, &mut analytic);
        let scale = analytic
            .iter()
            .fold(0.0_f64, |m, g| m.max(g.abs()))
            .max(1e-300);
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let h = 1e-5 * x[i].abs().max(1e-3);
            let mut plus: Vector = x.iter().copied().collect();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (self.shape.value(&plus) - self.shape.value(&minus)) / (2.0 * h);
            worst = worst.max((fd - analytic[i]).abs() / scale);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

/// Configuration space: all of `Rᵈ`, or an axis-aligned box with hard walls.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Unbounded,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        boundary: Boundary,
    },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Unbounded => true,
            Domain::Box { lower, upper, .. } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(c, (lo, hi))| *c >= *lo && *c <= *hi),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Domain::Box { .. })
    }
}

/// Mass, Planck constant, dimension, potential terms and domain.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub mass: f64,
    pub hbar: f64,
    pub dimension: usize,
    pub terms: Vec<PotentialTerm>,
    pub domain: Domain,
}

impl HamiltonianSpec {
    pub fn new(mass: f64, hbar: f64, dimension: usize) -> Result<Self> {
        let spec = Self {
            mass,
            hbar,
            dimension,
            terms: Vec::new(),
            domain: Domain::Unbounded,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Units `ħ = 1`, `2m = 1`.
    pub fn natural(dimension: usize) -> Self {
        Self {
            mass: 0.5,
            hbar: 1.0,
            dimension,
            terms: Vec::new(),
            domain: Domain::Unbounded,
        }
    }

    pub fn with_term(mut self, term: PotentialTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn with_box(mut self, lower: Vec<f64>, upper: Vec<f64>, boundary: Boundary) -> Self {
        self.domain = Domain::Box {
            lower,
            upper,
            boundary,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return domain(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return domain(format!("hbar must be positive, got {}", self.hbar));
        }
        if self.dimension == 0 {
            return domain("dimension must be at least 1");
        }
        for term in &self.terms {
            if !term.coupling.is_finite() {
                return domain("non-finite coupling constant");
            }
            if term.shape.min_dimension() > self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: term.shape.min_dimension(),
                    found: self.dimension,
                });
            }
        }
        if let Domain::Box { lower, upper, .. } = &self.domain {
            if lower.len() != self.dimension || upper.len() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    found: lower.len().min(upper.len()),
                });
            }
            if lower.iter().zip(upper).any(|(lo, hi)| !(hi > lo)) {
                return domain("box walls must satisfy lower < upper");
            }
        }
        Ok(())
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    /// Writes `−Σ λⱼ∇Vⱼ(x)` into `out`.
    pub fn force(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut grad: Vector = SmallVec::from_elem(0.0, x.len());
        for term in &self.terms {
            term.shape.gradient(x, &mut grad);
            for (o, g) in out.iter_mut().zip(&grad) {
                *o -= term.coupling * g;
            }
        }
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        p.iter().map(|c| c * c).sum::<f64>() / (2.0 * self.mass)
    }

    pub fn hamiltonian(&self, x: &[f64], p: &[f64]) -> f64 {
        self.kinetic(p) + self.potential(x)
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coupling).collect()
    }

    /// The shared homogeneity degree of all terms, if there is one.
    pub fn common_degree(&self) -> Option<f64> {
        let first = self.terms.first()?.degree?;
        self.terms
            .iter()
            .all(|t| t.degree == Some(first))
            .then_some(first)
    }

    fn check_state(&self, state: &PhaseState) -> Result<()> {
        for len in [state.x.len(), state.p.len()] {
            if len != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    found: len,
                });
            }
        }
        if !state.is_finite() {
            return Err(Error::Numeric("non-finite phase-space state".into()));
        }
        Ok(())
    }
}

/// A point `(x, p)` in phase space at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vector,
    pub p: Vector,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: &[f64], p: &[f64], t: f64) -> Self {
        Self {
            x: x.iter().copied().collect(),
            p: p.iter().copied().collect(),
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(&self.p).all(|c| c.is_finite())
    }
}

/// Samples of one integrated trajectory at uniform spacing `dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    /// Square-root-Hamiltonian time stamps, once reparametrized.
    pub tau: Option<Vec<f64>>,
    pub dt: f64,
    /// Energy of the initial sample.
    pub energy: f64,
    /// `max |H(x, p) − E₀|` over all samples.
    pub energy_drift: f64,
    /// Indices `k` for which a wall reflection happened between samples `k` and `k + 1`.
    pub reflections: Vec<usize>,
}

impl Trajectory {
    /// `energy_drift / dt²`, the constant of the second-order drift bound.
    pub fn drift_coefficient(&self) -> f64 {
        self.energy_drift / (self.dt * self.dt)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Position at time `t` by cubic Hermite interpolation, using `p/m` as
    /// the velocity at the bracketing samples.
    pub fn position_at(&self, t: f64, mass: f64) -> Option<Vector> {
        let first = self.samples.first()?;
        let u = (t - first.t) / self.dt;
        if u < 0.0 || u > (self.samples.len() - 1) as f64 + 1e-9 {
            return None;
        }
        let k = (u.floor() as usize).min(self.samples.len().saturating_sub(2));
        let (a, b) = (&self.samples[k], self.samples.get(k + 1)?);
        let s = u - k as f64;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(
            (0..a.x.len())
                .map(|i| {
                    h00 * a.x[i]
                        + h10 * self.dt * a.p[i] / mass
                        + h01 * b.x[i]
                        + h11 * self.dt * b.p[i] / mass
                })
                .collect(),
        )
    }
}

/// `p²/2m + Σ λⱼVⱼ(x)` at `state`.
pub fn evaluate_energy(spec: &HamiltonianSpec, state: &PhaseState) -> Result<f64> {
    spec.check_state(state)?;
    Ok(spec.hamiltonian(&state.x, &state.p))
}

/// Velocity-Verlet stepper; keeps the force at the current position cached.
pub(crate) struct Verlet<'a> {
    spec: &'a HamiltonianSpec,
    dt: f64,
    force: Vector,
}

impl<'a> Verlet<'a> {
    pub(crate) fn new(spec: &'a HamiltonianSpec, dt: f64, x: &[f64]) -> Result<Self> {
        let mut force: Vector = SmallVec::from_elem(0.0, x.len());
        spec.force(x, &mut force);
        if force.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numeric(
                "non-finite force at the initial point".into(),
            ));
        }
        Ok(Self { spec, dt, force })
    }

    /// Advances `(x, p)` by one step; returns whether a wall was hit.
    pub(crate) fn step(&mut self, x: &mut Vector, p: &mut Vector) -> Result<bool> {
        let half = 0.5 * self.dt;
        for (pi, fi) in p.iter_mut().zip(&self.force) {
            *pi += half * fi;
        }
        let reflected = self.drift(x, p)?;
        self.spec.force(x, &mut self.force);
        if self.force.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite force at x = {:?}",
                x.as_slice()
            )));
        }
        for (pi, fi) in p.iter_mut().zip(&self.force) {
            *pi += half * fi;
        }
        Ok(reflected)
    }

    fn drift(&self, x: &mut Vector, p: &mut Vector) -> Result<bool> {
        let per_step = self.dt / self.spec.mass;
        let (lower, upper) = match &self.spec.domain {
            Domain::Unbounded => {
                for (xi, pi) in x.iter_mut().zip(p.iter()) {
                    *xi += per_step * pi;
                }
                return Ok(false);
            }
            Domain::Box { lower, upper, .. } => (lower, upper),
        };

        let mut remaining = 1.0;
        let mut reflected = false;
        for _ in 0..MAX_BOUNCES_PER_STEP {
            // Earliest wall crossed within the remaining fraction of the step.
            let mut earliest: Option<(f64, usize, f64)> = None;
            for axis in 0..x.len() {
                let v = per_step * p[axis];
                let end = x[axis] + remaining * v;
                let wall = if end < lower[axis] {
                    lower[axis]
                } else if end > upper[axis] {
                    upper[axis]
                } else {
                    continue;
                };
                let inward = if wall == lower[axis] { 1.0 } else { -1.0 };
                let signed_distance = |s: f64| inward * (x[axis] + s * v - wall);
                let (mut lo, mut hi) = (0.0, remaining);
                while hi - lo > WALL_CROSSING_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if signed_distance(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if earliest.is_none_or(|(s, _, _)| lo < s) {
                    earliest = Some((lo, axis, wall));
                }
            }
            let Some((s, axis, wall)) = earliest else {
                for (xi, pi) in x.iter_mut().zip(p.iter()) {
                    *xi += remaining * per_step * pi;
                }
                return Ok(reflected);
            };
            for (xi, pi) in x.iter_mut().zip(p.iter()) {
                *xi += s * per_step * pi;
            }
            x[axis] = wall;
            p[axis] = -p[axis];
            remaining -= s;
            reflected = true;
        }
        Err(Error::Numeric(
            "too many wall reflections within one step".into(),
        ))
    }
}

/// Integrates Hamilton's equations for `n_steps` steps of size `dt`.
pub fn integrate(
    spec: &HamiltonianSpec,
    state0: &PhaseState,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    spec.validate()?;
    spec.check_state(state0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    if !spec.domain.contains(&state0.x) {
        return domain("initial point lies outside the domain");
    }
    let energy = spec.hamiltonian(&state0.x, &state0.p);
    if !energy.is_finite() {
        return Err(Error::Numeric("non-finite initial energy".into()));
    }
    let norm0 = state0.x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let escape_radius = ESCAPE_RADIUS_FACTOR * (1.0 + norm0);

    let mut stepper = Verlet::new(spec, dt, &state0.x)?;
    let mut x = state0.x.clone();
    let mut p = state0.p.clone();
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(state0.clone());
    let mut reflections = Vec::new();
    let mut energy_drift: f64 = 0.0;

    for k in 0..n_steps {
        if stepper.step(&mut x, &mut p)? {
            reflections.push(k);
        }
        let t = state0.t + (k + 1) as f64 * dt;
        if !spec.domain.is_bounded() {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(r <= escape_radius) {
                return Err(Error::Escape { t });
            }
        }
        let h = spec.hamiltonian(&x, &p);
        if !h.is_finite() {
            return Err(Error::Numeric(format!("non-finite energy at t = {t}")));
        }
        energy_drift = energy_drift.max((h - energy).abs());
        samples.push(PhaseState {
            x: x.clone(),
            p: p.clone(),
            t,
        });
    }

    Ok(Trajectory {
        samples,
        tau: None,
        dt,
        energy,
        energy_drift,
        reflections,
    })
}

/// Attaches square-root-Hamiltonian time stamps `τ = 2√E·t`.
///
/// The phase-space samples are untouched, so the configuration-space trace
/// is identical to the input.
pub fn sqrt_reparametrize(traj: &Trajectory, energy: f64) -> Result<Trajectory> {
    if !(energy > 0.0 && energy.is_finite()) {
        return domain(format!(
            "square-root reparametrization needs E > 0, got {energy}"
        ));
    }
    let tolerance = traj.energy_drift + 1e-9 * energy.abs().max(1.0);
    if (traj.energy - energy).abs() > tolerance {
        return domain(format!(
            "trajectory energy {} differs from E = {energy} beyond its drift bound",
            traj.energy
        ));
    }
    let rate = 2.0 * energy.sqrt();
    let mut out = traj.clone();
    out.tau = Some(traj.samples.iter().map(|s| rate * s.t).collect());
    Ok(out)
}

/// `u = dx/dτ = ∇ₚ√H = p / (2m√H(x, p))` at every sample.
pub fn reparametrized_velocities(spec: &HamiltonianSpec, traj: &Trajectory) -> Result<Vec<Vector>> {
    traj.samples
        .iter()
        .map(|s| {
            let h = spec.hamiltonian(&s.x, &s.p);
            if !(h > 0.0) {
                return domain(format!("H = {h} is not positive at t = {}", s.t));
            }
            let factor = 1.0 / (2.0 * spec.mass * h.sqrt());
            Ok(s.p.iter().map(|c| c * factor).collect())
        })
        .collect()
}

/// Residual of the discrete Hamilton equations along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EomResidual {
    /// `max |m Δx/dt − p − dt F/2| / max|p|`.
    pub position: f64,
    /// `max |Δp/dt − (F + F')/2| / F_scale`.
    pub momentum: f64,
}

impl EomResidual {
    pub fn max(&self) -> f64 {
        self.position.max(self.momentum)
    }
}

/// Checks that the samples satisfy the velocity-Verlet form of
/// `dx/dt = p/m`, `dp/dt = −∇V` under `spec`, skipping wall-reflection steps.
///
/// A trajectory produced by [`integrate`] under the same `spec` gives a
/// residual at rounding level; a resampled trajectory passes only if the
/// resampling maps solutions to solutions.
#[allow(clippy::needless_range_loop)]
pub fn eom_residual(spec: &HamiltonianSpec, traj: &Trajectory) -> Result<EomResidual> {
    let n = traj.samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "trajectory has fewer than two samples".into(),
        ));
    }
    let d = spec.dimension;
    let dt = traj.dt;
    let forces: Vec<Vector> = traj
        .samples
        .iter()
        .map(|s| {
            let mut f: Vector = SmallVec::from_elem(0.0, d);
            spec.force(&s.x, &mut f);
            f
        })
        .collect();
    let p_scale = traj
        .samples
        .iter()
        .flat_map(|s| s.p.iter())
        .fold(0.0_f64, |m, c| m.max(c.abs()))
        .max(1e-300);
    let f_scale = forces
        .iter()
        .flat_map(|f| f.iter())
        .fold(0.0_f64, |m, c| m.max(c.abs()))
        .max(p_scale / traj.duration().max(dt));

    let mut position: f64 = 0.0;
    let mut momentum: f64 = 0.0;
    let mut bounce = traj.reflections.iter().peekable();
    for k in 0..n - 1 {
        while bounce.next_if(|&&b| b < k).is_some() {}
        if bounce.peek() == Some(&&k) {
            continue;
        }
        let (a, b) = (&traj.samples[k], &traj.samples[k + 1]);
        for i in 0..d {
            let rx = spec.mass * (b.x[i] - a.x[i]) / dt - a.p[i] - 0.5 * dt * forces[k][i];
            let rp = (b.p[i] - a.p[i]) / dt - 0.5 * (forces[k][i] + forces[k + 1][i]);
            position = position.max(rx.abs() / p_scale);
            momentum = momentum.max(rp.abs() / f_scale);
        }
    }
    Ok(EomResidual { position, momentum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator_m1() -> HamiltonianSpec {
        HamiltonianSpec::new(1.0, 1.0, 1)
            .unwrap()
            .with_term(PotentialTerm::power(0.5, 2.0))
    }

    fn quartic(mass: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(mass, 1.0, 1)
            .unwrap()
            .with_term(PotentialTerm::power(1.0, 4.0))
    }

    #[test]
    fn energy_examples() {
        let free = HamiltonianSpec::natural(1);
        let e = evaluate_energy(&free, &PhaseState::new(&[0.3], &[1.0], 0.0)).unwrap();
        assert_eq!(e, 1.0);

        let e = evaluate_energy(&oscillator_m1(), &PhaseState::new(&[1.0], &[0.0], 0.0)).unwrap();
        assert_eq!(e, 0.5);

        let e = evaluate_energy(&quartic(1.0), &PhaseState::new(&[1.0], &[0.0], 0.0)).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn energy_rejects_wrong_dimension() {
        let err = evaluate_energy(
            &oscillator_m1(),
            &PhaseState::new(&[1.0, 0.0], &[0.0, 0.0], 0.0),
        );
        assert!(matches!(
            err,
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        let n = (2.0 * PI / 1e-4).ceil() as usize;
        let dt = 2.0 * PI / n as f64;
        let traj = integrate(
            &oscillator_m1(),
            &PhaseState::new(&[1.0], &[0.0], 0.0),
            dt,
            n,
        )
        .unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.t - 2.0 * PI).abs() < 1e-12);
        assert!((last.x[0] - 1.0).abs() < 1e-6, "x = {}", last.x[0]);
        assert!(last.p[0].abs() < 1e-6, "p = {}", last.p[0]);
    }

    #[test]
    fn free_particle_moves_on_a_straight_line() {
        let spec = HamiltonianSpec::natural(1);
        let traj = integrate(&spec, &PhaseState::new(&[0.0], &[1.0], 0.0), 0.01, 500).unwrap();
        for s in &traj.samples {
            assert!((s.x[0] - 2.0 * s.t).abs() < 1e-12);
        }
        assert_eq!(traj.energy_drift, 0.0);
    }

    #[test]
    fn quartic_drift_is_small_and_second_order() {
        // One period of V = x⁴, m = 1, E = 1 is T ≈ 3.708, started at the well centre.
        let spec = quartic(1.0);
        let s0 = PhaseState::new(&[0.0], &[2f64.sqrt()], 0.0);
        let run = |dt: f64| {
            integrate(&spec, &s0, dt, (3.71 / dt) as usize)
                .unwrap()
                .energy_drift
        };
        let d1 = run(1e-4);
        let d2 = run(5e-5);
        assert!(d1 < 1e-8, "drift {d1}");
        let ratio = d1 / d2;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn walls_reflect_specularly() {
        let spec = HamiltonianSpec::natural(2).with_box(
            vec![0.0, 0.0],
            vec![3.0, 4.0],
            Boundary::Dirichlet,
        );
        let s0 = PhaseState::new(&[0.5, 0.5], &[0.7, 0.3], 0.0);
        let traj = integrate(&spec, &s0, 0.013, 20_000).unwrap();
        assert!(!traj.reflections.is_empty());
        let p0 = (0.7f64 * 0.7 + 0.3 * 0.3).sqrt();
        for s in &traj.samples {
            let p = (s.p[0] * s.p[0] + s.p[1] * s.p[1]).sqrt();
            assert!((p - p0).abs() < 1e-12);
            assert!(spec.domain.contains(&s.x));
            assert!((s.p[0].abs() - 0.7).abs() < 1e-15 && (s.p[1].abs() - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn bounce_orbit_in_interval_is_exact() {
        // 2m = 1, p = 1: speed 2, period of the bounce 2a/v = 1 for a = 1.
        let spec = HamiltonianSpec::natural(1).with_box(vec![0.0], vec![1.0], Boundary::Neumann);
        let traj = integrate(&spec, &PhaseState::new(&[0.25], &[1.0], 0.0), 1e-3, 1000).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.x[0] - 0.25).abs() < 1e-12);
        assert_eq!(last.p[0], 1.0);
        assert_eq!(traj.reflections.len(), 2);
    }

    #[test]
    fn coulomb_collision_is_a_numeric_error() {
        let spec = HamiltonianSpec::natural(1).with_term(PotentialTerm::coulomb(1.0));
        let err = integrate(&spec, &PhaseState::new(&[0.0], &[1.0], 0.0), 0.1, 3);
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    #[test]
    fn unconfined_motion_escapes() {
        let spec = HamiltonianSpec::natural(1).with_term(PotentialTerm::power(-1.0, 2.0));
        let err = integrate(&spec, &PhaseState::new(&[1.0], &[0.0], 0.0), 0.01, 10_000);
        assert!(matches!(err, Err(Error::Escape { .. })));
    }

    #[test]
    fn reparametrization_rescales_time_only() {
        let spec = HamiltonianSpec::natural(1);
        let traj = integrate(&spec, &PhaseState::new(&[0.0], &[2.0], 0.0), 0.01, 100).unwrap();
        let re = sqrt_reparametrize(&traj, 4.0).unwrap();
        let tau = re.tau.as_ref().unwrap();
        for (s, t) in re.samples.iter().zip(tau) {
            assert!((t - 4.0 * s.t).abs() < 1e-12);
        }
        assert_eq!(re.samples, traj.samples);
        for u in reparametrized_velocities(&spec, &re).unwrap() {
            assert!((u[0] * u[0] - 1.0 / (2.0 * spec.mass)).abs() < 1e-14);
        }
    }

    #[test]
    fn reparametrization_rejects_nonpositive_energy() {
        let spec = HamiltonianSpec::natural(1).with_term(PotentialTerm::coulomb(1.0));
        let traj = integrate(&spec, &PhaseState::new(&[1.0], &[0.1], 0.0), 1e-3, 10).unwrap();
        assert!(matches!(
            sqrt_reparametrize(&traj, traj.energy),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn reparametrized_speed_follows_the_potential() {
        // Oscillator with m = 1, ϖ = 1 at E = 1: x₀ = √2.
        let spec = oscillator_m1();
        let traj = integrate(
            &spec,
            &PhaseState::new(&[2f64.sqrt()], &[0.0], 0.0),
            1e-4,
            70_000,
        )
        .unwrap();
        let re = sqrt_reparametrize(&traj, 1.0).unwrap();
        let u = reparametrized_velocities(&spec, &re).unwrap();
        let mut checked = 0;
        for (s, ui) in re.samples.iter().zip(&u) {
            let v = spec.potential(&s.x);
            let expected = (1.0 - v / 1.0) / (2.0 * spec.mass);
            assert!((ui[0] * ui[0] - expected).abs() < 1e-6);
            if (v - 0.5).abs() < 1e-4 {
                assert!((ui[0] * ui[0] - 0.5 / (2.0 * spec.mass)).abs() < 2e-4);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn builtin_shapes_are_homogeneous_with_consistent_gradients() {
        let terms = [
            PotentialTerm::power(1.0, 4.0),
            PotentialTerm::power(0.3, 2.0),
            PotentialTerm::power(2.0, 1.5),
            PotentialTerm::coulomb(1.0),
            PotentialTerm::oscillator_xy(0.7),
        ];
        let points: [&[f64]; 3] = [&[0.3, -1.2, 0.8], &[1.0, 2.0, -0.5], &[-0.7, 0.1, 0.4]];
        for term in &terms {
            for x in points {
                for beta in [0.5, 2.0, 3.0] {
                    let defect = term.homogeneity_defect(x, beta).unwrap();
                    assert!(defect <= 1e-12, "{term:?} defect {defect}");
                }
                assert!(term.gradient_defect(x) < 1e-6, "{term:?}");
            }
        }
    }

    #[test]
    fn deformation_of_a_homogeneous_term_is_a_coupling_rescale() {
        let alpha = 1.7;
        let deformed = Shape::Deformed {
            inner: Box::new(Shape::OscillatorXy),
            alpha,
            anchor_degree: -1.0,
        };
        let x = [0.4, -0.9, 0.2];
        let expected = alpha.powf(2.0 * (-1.0 - 2.0)) * Shape::OscillatorXy.value(&x);
        assert!((deformed.value(&x) - expected).abs() < 1e-14 * expected.abs());
        let term = PotentialTerm {
            coupling: 1.0,
            degree: None,
            shape: deformed,
        };
        assert!(term.gradient_defect(&x) < 1e-6);
    }

    #[test]
    fn verlet_samples_satisfy_the_discrete_equations() {
        let spec = quartic(1.0);
        let traj = integrate(&spec, &PhaseState::new(&[1.0], &[0.0], 0.0), 1e-3, 4000).unwrap();
        let r = eom_residual(&spec, &traj).unwrap();
        assert!(r.max() < 1e-11, "{r:?}");
        // Under the wrong coupling the residual is O(1).
        let wrong = HamiltonianSpec::new(1.0, 1.0, 1)
            .unwrap()
            .with_term(PotentialTerm::power(2.0, 4.0));
        assert!(eom_residual(&wrong, &traj).unwrap().max() > 0.1);
    }
}
