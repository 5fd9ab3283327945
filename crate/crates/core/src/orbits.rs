//! Periodic orbits and their invariants.
//!
//! In one dimension a bound orbit at energy `E` is fixed by its two turning
//! points. Period and action are quadratures over the well,
//!
//! ```text
//! T = 2 ∫ dx / v,   v = √(2(E − V)/m)
//! S = 2 ∫ √(2m(E − V)) dx
//! ```
//!
//! evaluated with Gauss–Legendre after `x = x₋ + (x₊ − x₋) sin²θ`, which
//! cancels the inverse square root at both turning points. Walls of a box
//! domain act as turning points where `E > V`.
//!
//! Orbits in higher dimensions are obtained by integrating from a given state
//! until it returns through the section orthogonal to the initial momentum
//! ([`close_orbit`]). Rectangle billiards have an analytic catalog.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    integrate, HamiltonianSpec, PhaseState, Trajectory, Vector, Verlet, DEFAULT_STEPS_PER_PERIOD,
};
use crate::error::{domain, Error, Result};

/// Default number of Gauss–Legendre nodes for the turning-point quadratures.
pub const DEFAULT_QUADRATURE_NODES: usize = 200;

const SCAN_INTERVALS: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    pub quadrature_nodes: usize,
    /// Integration steps used to sample the one-period trace.
    pub steps_per_period: usize,
    /// Point inside the well where the turning-point search starts.
    pub search_center: f64,
    pub max_search_radius: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            search_center: 0.0,
            max_search_radius: 1e6,
        }
    }
}

/// `S`, `T`, `L_geo` and `R = S − ET` of one orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Invariants {
    pub action: f64,
    pub period: f64,
    pub arclength: f64,
    pub time_action: f64,
}

/// Integrals over the stored one-period trace (trapezoid rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceInvariants {
    pub period: f64,
    /// `∫ p·ẋ dt = ∫ p²/m dt`.
    pub action: f64,
    /// `∫ |p|/m dt`.
    pub arclength: f64,
    /// `∫ Σλⱼ Vⱼ(x(t)) dt`.
    pub potential_integral: f64,
}

/// The classically allowed interval of a 1D orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Well {
    pub lower: f64,
    pub upper: f64,
    pub lower_is_wall: bool,
    pub upper_is_wall: bool,
}

impl Well {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub spec: HamiltonianSpec,
    pub energy: f64,
    pub period: f64,
    pub action: f64,
    pub arclength: f64,
    /// `R = S − E·T`.
    pub time_action: f64,
    pub closure_residual: f64,
    /// Present for orbits found by the 1D turning-point search.
    pub well: Option<Well>,
    pub trace: Trajectory,
}

impl PeriodicOrbit {
    pub fn invariants(&self) -> Invariants {
        Invariants {
            action: self.action,
            period: self.period,
            arclength: self.arclength,
            time_action: self.time_action,
        }
    }

    pub fn trace_invariants(&self) -> TraceInvariants {
        trace_invariants(&self.spec, &self.trace)
    }

    /// Largest `|x|` reached along the trace.
    pub fn max_extent(&self) -> f64 {
        self.trace
            .samples
            .iter()
            .map(|s| s.x.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn trace_invariants(spec: &HamiltonianSpec, trace: &Trajectory) -> TraceInvariants {
    let m = spec.mass;
    let trapezoid = |f: &dyn Fn(&PhaseState) -> f64| -> f64 {
        let n = trace.samples.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = trace.samples.iter().map(f).sum();
        trace.dt * (inner - 0.5 * (f(&trace.samples[0]) + f(&trace.samples[n - 1])))
    };
    TraceInvariants {
        period: trace.duration(),
        action: trapezoid(&|s| s.p.iter().map(|c| c * c).sum::<f64>() / m),
        arclength: trapezoid(&|s| s.p.iter().map(|c| c * c).sum::<f64>().sqrt() / m),
        potential_integral: trapezoid(&|s| spec.potential(&s.x)),
    }
}

/// Phase-space distance between the first and last sample, each coordinate
/// block scaled by its largest magnitude along the trace.
pub fn closure_residual(trace: &Trajectory) -> f64 {
    let (Some(a), Some(b)) = (trace.samples.first(), trace.samples.last()) else {
        return f64::INFINITY;
    };
    let norm = |v: &Vector| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let x_scale = trace
        .samples
        .iter()
        .map(|s| norm(&s.x))
        .fold(0.0, f64::max)
        .max(1e-300);
    let p_scale = trace
        .samples
        .iter()
        .map(|s| norm(&s.p))
        .fold(0.0, f64::max)
        .max(1e-300);
    let dx: f64 =
        a.x.iter()
            .zip(&b.x)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
    let dp: f64 =
        a.p.iter()
            .zip(&b.p)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
    ((dx / x_scale).powi(2) + (dp / p_scale).powi(2)).sqrt()
}

fn require_1d(spec: &HamiltonianSpec) -> Result<()> {
    if spec.dimension != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spec.dimension,
        });
    }
    Ok(())
}

fn potential_1d(spec: &HamiltonianSpec, x: f64) -> f64 {
    spec.potential(&[x])
}

fn slope_1d(spec: &HamiltonianSpec, x: f64) -> f64 {
    let mut f = [0.0];
    spec.force(&[x], &mut f);
    -f[0]
}

/// Root of `E − V` in `[a, b]` with `E − V(a) ≤ 0 < E − V(b)` or the reverse.
fn refine_turning_point(spec: &HamiltonianSpec, energy: f64, mut a: f64, mut b: f64) -> f64 {
    let g = |x: f64| energy - potential_1d(spec, x);
    let ga = g(a);
    // Bisection to a small bracket, then safeguarded Newton.
    let width = (b - a).abs();
    while (b - a).abs() > 1e-6 * width {
        let mid = 0.5 * (a + b);
        if (g(mid) > 0.0) == (ga > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..50 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx > 0.0) == (ga > 0.0) {
            a = x;
        } else {
            b = x;
        }
        let slope = -slope_1d(spec, x);
        let mut next = x - gx / slope;
        if !next.is_finite() || next <= a.min(b) || next >= a.max(b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(width) {
            return next;
        }
        x = next;
    }
    x
}

/// Locates the classically allowed interval of a 1D system at energy `E`.
pub fn find_well(spec: &HamiltonianSpec, energy: f64, options: &OrbitOptions) -> Result<Well> {
    spec.validate()?;
    require_1d(spec)?;
    if !energy.is_finite() {
        return domain("energy must be finite");
    }
    let g = |x: f64| energy - potential_1d(spec, x);

    let (lo, hi, walls) = match &spec.domain {
        crate::dynamics::Domain::Box { lower, upper, .. } => (lower[0], upper[0], true),
        crate::dynamics::Domain::Unbounded => {
            let c = options.search_center;
            let mut radius: f64 = 1.0;
            loop {
                if g(c - radius) < 0.0 && g(c + radius) < 0.0 {
                    break (c - radius, c + radius, false);
                }
                radius *= 2.0;
                if radius > options.max_search_radius {
                    return Err(Error::OrbitStructure(format!(
                        "no turning points within {} of x = {c} at E = {energy}",
                        options.max_search_radius
                    )));
                }
            }
        }
    };

    let step = (hi - lo) / SCAN_INTERVALS as f64;
    let grid: Vec<f64> = (0..=SCAN_INTERVALS).map(|i| lo + i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric(
            "potential is not finite on the search interval".into(),
        ));
    }

    // Maximal runs of classically allowed grid points.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (start, *v > 0.0) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, SCAN_INTERVALS));
    }

    let g_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = energy.abs().max(g_max.abs()).max(f64::MIN_POSITIVE);
    match runs.len() {
        0 if g_max > -1e-9 * scale => {
            return Err(Error::Degeneracy(format!(
                "E = {energy} sits at a potential minimum"
            )))
        }
        0 => {
            return Err(Error::OrbitStructure(format!(
                "no classically allowed region at E = {energy}"
            )))
        }
        1 => {}
        n => {
            // Allowed runs that touch across a gap: E at a barrier top.
            for pair in runs.windows(2) {
                let gap = &values[pair[0].1 + 1..pair[1].0];
                let top = gap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if top > -1e-9 * scale {
                    return Err(Error::Degeneracy(format!(
                        "E = {energy} coincides with a potential maximum near x = {}",
                        grid[pair[0].1 + 1]
                    )));
                }
            }
            return Err(Error::OrbitStructure(format!(
                "{} turning points in the search interval at E = {energy}",
                2 * n
            )));
        }
    }
    let (first, last) = runs[0];
    let depth = values[first..=last].iter().copied().fold(0.0, f64::max);

    // Interior near-zeros of E − V inside the run: energy at a barrier top.
    for i in first + 1..last {
        let v = values[i];
        if v <= values[i - 1] && v <= values[i + 1] && v < 1e-9 * depth {
            return Err(Error::Degeneracy(format!(
                "E = {energy} coincides with a potential maximum near x = {}",
                grid[i]
            )));
        }
    }

    let lower_is_wall = walls && first == 0;
    let upper_is_wall = walls && last == SCAN_INTERVALS;
    let lower = if lower_is_wall {
        lo
    } else {
        refine_turning_point(spec, energy, grid[first - 1], grid[first])
    };
    let upper = if upper_is_wall {
        hi
    } else {
        refine_turning_point(spec, energy, grid[last], grid[last + 1])
    };
    let width = upper - lower;
    if !(width > 1e-9 * (hi - lo)) {
        return Err(Error::Degeneracy(format!(
            "E = {energy} sits at a potential minimum"
        )));
    }
    for (x, is_wall) in [(lower, lower_is_wall), (upper, upper_is_wall)] {
        if !is_wall && slope_1d(spec, x).abs() * width < 1e-8 * depth {
            return Err(Error::Degeneracy(format!(
                "turning point x = {x} is a double root (separatrix)"
            )));
        }
    }
    Ok(Well {
        lower,
        upper,
        lower_is_wall,
        upper_is_wall,
    })
}

fn quadrature_rule(nodes: usize) -> Result<GaussLegendre> {
    let n = NonZeroUsize::new(nodes)
        .ok_or_else(|| Error::Domain("quadrature needs at least one node".into()))?;
    Ok(GaussLegendre::new(n))
}

/// Period and action of the 1D orbit at `E` by turning-point quadrature.
pub fn quadrature_invariants(
    spec: &HamiltonianSpec,
    energy: f64,
    options: &OrbitOptions,
) -> Result<(Well, Invariants)> {
    let well = find_well(spec, energy, options)?;
    let rule = quadrature_rule(options.quadrature_nodes)?;
    let m = spec.mass;
    let width = well.width();
    let near = quadrature_rule(16)?;
    let mut bad = None;
    // Close to a turning point E − V(x) loses its leading digits to
    // cancellation; there it is rebuilt as ∫V' from the turning point.
    let mut kinetic = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let (d_lo, d_hi) = (width * s * s, width * c * c);
        let k = if !well.lower_is_wall && d_lo < width / 16.0 {
            -near.integrate(0.0, d_lo, |u| slope_1d(spec, well.lower + u))
        } else if !well.upper_is_wall && d_hi < width / 16.0 {
            near.integrate(0.0, d_hi, |u| slope_1d(spec, well.upper - u))
        } else {
            energy - potential_1d(spec, well.lower + d_lo)
        };
        if !(k > 0.0) {
            bad = Some(well.lower + d_lo);
        }
        (2.0 * width * s * c, k.max(f64::MIN_POSITIVE))
    };
    let period = 2.0
        * rule.integrate(0.0, FRAC_PI_2, |th| {
            let (jac, k) = kinetic(th);
            jac * (m / (2.0 * k)).sqrt()
        });
    let action = 2.0
        * rule.integrate(0.0, FRAC_PI_2, |th| {
            let (jac, k) = kinetic(th);
            jac * (2.0 * m * k).sqrt()
        });
    if let Some(x) = bad {
        return Err(Error::Numeric(format!(
            "E − V is not positive at quadrature node x = {x}"
        )));
    }
    Ok((
        well,
        Invariants {
            action,
            period,
            arclength: 2.0 * width,
            time_action: action - energy * period,
        },
    ))
}

/// The periodic orbit of a 1D system at energy `E` with default options.
pub fn find_orbit_1d(spec: &HamiltonianSpec, energy: f64) -> Result<PeriodicOrbit> {
    find_orbit_1d_with(spec, energy, &OrbitOptions::default())
}

pub fn find_orbit_1d_with(
    spec: &HamiltonianSpec,
    energy: f64,
    options: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    let (well, inv) = quadrature_invariants(spec, energy, options)?;
    if options.steps_per_period == 0 {
        return domain("steps_per_period must be positive");
    }
    let start = 0.5 * (well.lower + well.upper);
    let p = (2.0 * spec.mass * (energy - potential_1d(spec, start))).sqrt();
    let dt = inv.period / options.steps_per_period as f64;
    let trace = integrate(
        spec,
        &PhaseState::new(&[start], &[p], 0.0),
        dt,
        options.steps_per_period,
    )?;
    Ok(PeriodicOrbit {
        spec: spec.clone(),
        energy,
        period: inv.period,
        action: inv.action,
        arclength: inv.arclength,
        time_action: inv.time_action,
        closure_residual: closure_residual(&trace),
        well: Some(well),
        trace,
    })
}

/// Integrates from `state0` until the trajectory returns through the plane
/// through `x₀` orthogonal to `p₀`, then resamples exactly one period.
///
/// The invariants of the returned orbit come from the trace. Fails with
/// [`Error::NotPeriodic`] when no return close to `x₀` happens within
/// `max_time`.
pub fn close_orbit(
    spec: &HamiltonianSpec,
    state0: &PhaseState,
    dt: f64,
    max_time: f64,
) -> Result<PeriodicOrbit> {
    let energy = crate::dynamics::evaluate_energy(spec, state0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let p_norm = state0.p.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(p_norm > 0.0) {
        return domain("closing an orbit needs a nonzero initial momentum");
    }
    let normal: Vector = state0.p.iter().map(|c| c / p_norm).collect();
    let section = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&state0.x)
            .zip(&normal)
            .map(|((a, b), n)| (a - b) * n)
            .sum()
    };
    let distance = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&state0.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let mut stepper = Verlet::new(spec, dt, &state0.x)?;
    let (mut x, mut p) = (state0.x.clone(), state0.p.clone());
    let mut extent: f64 = 0.0;
    let mut best = f64::INFINITY;
    let mut period = None;
    let max_steps = (max_time / dt).ceil() as usize;
    for k in 0..max_steps {
        let (x_prev, p_prev) = (x.clone(), p.clone());
        let reflected = stepper.step(&mut x, &mut p)?;
        extent = extent.max(distance(&x));
        let (g0, g1) = (section(&x_prev), section(&x));
        if !(g0 < 0.0 && g1 >= 0.0) {
            continue;
        }
        // Crossing fraction by bisection on a cubic Hermite (linear across a wall hit).
        let m = spec.mass;
        let at = |s: f64| -> Vector {
            if reflected {
                return x_prev
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| a + s * (b - a))
                    .collect();
            }
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            (0..x.len())
                .map(|i| {
                    h00 * x_prev[i] + h10 * dt * p_prev[i] / m + h01 * x[i] + h11 * dt * p[i] / m
                })
                .collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if section(&at(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let miss = distance(&at(s));
        best = best.min(miss / extent.max(f64::MIN_POSITIVE));
        if miss <= 1e-3 * extent {
            period = Some((k as f64 + s) * dt);
            break;
        }
    }
    let period = period.ok_or(Error::NotPeriodic(best))?;

    let n_steps = ((period / dt).round() as usize).max(1);
    let trace = integrate(spec, state0, period / n_steps as f64, n_steps)?;
    let measured = trace_invariants(spec, &trace);
    Ok(PeriodicOrbit {
        spec: spec.clone(),
        energy,
        period,
        action: measured.action,
        arclength: measured.arclength,
        time_action: measured.action - energy * period,
        closure_residual: closure_residual(&trace),
        well: None,
        trace,
    })
}

/// Returns the stored invariants after re-checking `R = S − E·T`.
pub fn orbit_invariants(orbit: &PeriodicOrbit) -> Result<Invariants> {
    let inv = orbit.invariants();
    let scale = inv
        .action
        .abs()
        .max((orbit.energy * inv.period).abs())
        .max(f64::MIN_POSITIVE);
    let defect = (inv.action - orbit.energy * inv.period - inv.time_action).abs();
    if defect > 1e-12 * scale {
        return Err(Error::Numeric(format!(
            "stored R differs from S − E·T by {defect:e}"
        )));
    }
    Ok(inv)
}

/// Central-difference `dS/dE` compared with the period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DsDeReport {
    pub ds_de: f64,
    pub period: f64,
    /// `|dS/dE − T| / T`.
    pub residual: f64,
}

/// Checks the action–period relation on the family of 1D orbits around `E`.
pub fn ds_de_check(spec: &HamiltonianSpec, energy: f64, delta: f64) -> Result<DsDeReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return domain(format!("delta must be positive, got {delta}"));
    }
    let options = OrbitOptions::default();
    let (well, center) = quadrature_invariants(spec, energy, &options)?;
    let sides: Vec<Result<(Well, Invariants)>> = [energy - delta, energy + delta]
        .par_iter()
        .map(|&e| quadrature_invariants(spec, e, &options))
        .collect();
    let mut actions = [0.0; 2];
    for (slot, (side, e)) in actions
        .iter_mut()
        .zip(sides.into_iter().zip([energy - delta, energy + delta]))
    {
        let (w, inv) = side.map_err(|err| Error::Family(format!("at E = {e}: {err}")))?;
        let shift = (w.lower - well.lower)
            .abs()
            .max((w.upper - well.upper).abs());
        if shift > 0.1 * well.width() {
            return Err(Error::Family(format!(
                "turning points jump by {shift} between E = {energy} and E = {e}"
            )));
        }
        *slot = inv.action;
    }
    let ds_de = (actions[1] - actions[0]) / (2.0 * delta);
    Ok(DsDeReport {
        ds_de,
        period: center.period,
        residual: (ds_de - center.period).abs() / center.period,
    })
}

/// A family of periodic billiard orbits with energy-independent length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub label: String,
    pub length: f64,
    /// Bounce counts `(p, q)` along the two sides.
    pub winding: (u32, u32),
    /// Number of traversals of the underlying primitive orbit.
    pub repetition: u32,
}

impl CatalogEntry {
    /// `S(E) = √(2mE)·L`.
    pub fn action(&self, energy: f64, mass: f64) -> f64 {
        (2.0 * mass * energy).sqrt() * self.length
    }

    /// `T(E) = √(m/2E)·L`.
    pub fn period(&self, energy: f64, mass: f64) -> f64 {
        (mass / (2.0 * energy)).sqrt() * self.length
    }

    pub fn invariants(&self, energy: f64, mass: f64) -> Invariants {
        let action = self.action(energy, mass);
        let period = self.period(energy, mass);
        Invariants {
            action,
            period,
            arclength: self.length,
            time_action: action - energy * period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCatalog {
    pub mass: f64,
    pub entries: Vec<CatalogEntry>,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Periodic-orbit lengths of an interval `[0, a]` (`b = None`) or of an
/// `a × b` rectangle, for winding numbers up to `n_max`, sorted by length.
pub fn rectangle_orbit_lengths(
    a: f64,
    b: Option<f64>,
    n_max: u32,
    mass: f64,
) -> Result<OrbitCatalog> {
    if !(a > 0.0 && a.is_finite()) || b.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
        return domain("billiard side lengths must be positive");
    }
    if !(mass > 0.0) {
        return domain("mass must be positive");
    }
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    let mut entries = Vec::new();
    match b {
        None => {
            for k in 1..=n_max {
                entries.push(CatalogEntry {
                    label: format!("k={k}"),
                    length: 2.0 * a * k as f64,
                    winding: (k, 0),
                    repetition: k,
                });
            }
        }
        Some(b) => {
            for p in 0..=n_max {
                for q in 0..=n_max {
                    if p == 0 && q == 0 {
                        continue;
                    }
                    let (pa, qb) = (p as f64 * a, q as f64 * b);
                    entries.push(CatalogEntry {
                        label: format!("({p},{q})"),
                        length: 2.0 * pa.hypot(qb),
                        winding: (p, q),
                        repetition: gcd(p, q),
                    });
                }
            }
        }
    }
    entries.sort_by(|x, y| {
        x.length
            .total_cmp(&y.length)
            .then_with(|| x.label.cmp(&y.label))
    });
    Ok(OrbitCatalog { mass, entries })
}
