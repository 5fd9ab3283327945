//! Quantum spectra: closed forms and a finite-difference solver in 1D.
//!
//! The finite-difference Hamiltonian on `grid_n` intervals of width `h` with
//! Dirichlet ends is the symmetric tridiagonal matrix
//!
//! ```text
//! dᵢ = ħ²/(m h²) + V(xᵢ),   eᵢ = −ħ²/(2m h²)
//! ```
//!
//! whose lowest eigenvalues are isolated by Sturm-sequence bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Boundary, Domain, HamiltonianSpec};
use crate::error::{domain, Error, Result};
use crate::orbits::{quadrature_invariants, OrbitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Ascending; strictly so in 1D, repeated for degenerate 2D box levels.
    pub levels: Vec<f64>,
    /// Quantum number of the first level.
    pub first_index: u32,
    pub solver: Solver,
    pub hbar: f64,
    pub mass: f64,
    /// Number of grid intervals (finite difference only).
    pub grid_points: Option<usize>,
    /// Per-level error estimate from the half-resolution solve.
    pub est_error: Option<Vec<f64>>,
    pub interval: Option<(f64, f64)>,
}

impl SpectrumResult {
    pub fn count(&self) -> usize {
        self.levels.len()
    }

    /// Number of levels strictly below `energy`.
    pub fn counting_function(&self, energy: f64) -> usize {
        self.levels.partition_point(|&e| e < energy)
    }

    /// Levels `lo..hi` (zero-based, clamped) as a new spectrum.
    pub fn window(&self, lo: usize, hi: usize) -> SpectrumResult {
        let hi = hi.min(self.levels.len());
        let lo = lo.min(hi);
        SpectrumResult {
            levels: self.levels[lo..hi].to_vec(),
            first_index: self.first_index + lo as u32,
            est_error: self.est_error.as_ref().map(|e| e[lo..hi].to_vec()),
            ..self.clone()
        }
    }
}

/// Closed-form spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticKind {
    /// `π²ħ²/2m·(p²/a² + q²/b²)`, or `π²ħ²n²/(2ma²)` without `width`.
    Box { length: f64, width: Option<f64> },
    /// `(n + ½)ħϖ`, `n ≥ 0`.
    Oscillator { omega: f64 },
    /// `−m e⁴/(2ħ²n²)`, `n ≥ 1`, one entry per principal quantum number.
    Coulomb { charge_squared: f64 },
}

pub fn analytic_spectrum(
    kind: AnalyticKind,
    mass: f64,
    hbar: f64,
    count: usize,
) -> Result<SpectrumResult> {
    if count == 0 {
        return domain("count must be at least 1");
    }
    if !(mass > 0.0 && hbar > 0.0) {
        return domain("mass and hbar must be positive");
    }
    let positive = |v: f64, what: &str| -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            domain(format!("{what} must be positive, got {v}"))
        }
    };
    let first_index = match kind {
        AnalyticKind::Oscillator { .. } => 0,
        _ => 1,
    };
    let levels = match kind {
        AnalyticKind::Box {
            length,
            width: None,
        } => {
            positive(length, "box length")?;
            let unit = std::f64::consts::PI.powi(2) * hbar * hbar / (2.0 * mass * length * length);
            (1..=count).map(|n| unit * (n * n) as f64).collect()
        }
        AnalyticKind::Box {
            length,
            width: Some(width),
        } => {
            positive(length, "box length")?;
            positive(width, "box width")?;
            rectangle_levels(length, width, mass, hbar, count)
        }
        AnalyticKind::Oscillator { omega } => {
            positive(omega, "omega")?;
            (0..count)
                .map(|n| (n as f64 + 0.5) * hbar * omega)
                .collect()
        }
        AnalyticKind::Coulomb { charge_squared } => {
            positive(charge_squared, "e²")?;
            let ryd = mass * charge_squared * charge_squared / (2.0 * hbar * hbar);
            (1..=count).map(|n| -ryd / (n * n) as f64).collect()
        }
    };
    Ok(SpectrumResult {
        levels,
        first_index,
        solver: Solver::Analytic,
        hbar,
        mass,
        grid_points: None,
        est_error: None,
        interval: None,
    })
}

fn rectangle_levels(a: f64, b: f64, mass: f64, hbar: f64, count: usize) -> Vec<f64> {
    let unit = std::f64::consts::PI.powi(2) * hbar * hbar / (2.0 * mass);
    // Lattice points under p²/a² + q²/b² ≤ ε number about πabε/4.
    let mut bound =
        6.0 * count as f64 / (std::f64::consts::PI * a * b) + 1.0 / (a * a) + 1.0 / (b * b);
    loop {
        let mut levels = Vec::new();
        let p_max = (bound.sqrt() * a).floor() as u64;
        for p in 1..=p_max {
            let rest = bound - (p * p) as f64 / (a * a);
            if rest <= 0.0 {
                break;
            }
            let q_max = (rest.sqrt() * b).floor() as u64;
            for q in 1..=q_max {
                levels.push((p * p) as f64 / (a * a) + (q * q) as f64 / (b * b));
            }
        }
        if levels.len() >= count {
            levels.sort_by(f64::total_cmp);
            levels.truncate(count);
            return levels.into_iter().map(|e| unit * e).collect();
        }
        bound *= 2.0;
    }
}

/// `N(E) = ⌊a√(2mE)/(πħ)⌋` for the 1D Dirichlet box.
pub fn box_counting_function(length: f64, mass: f64, hbar: f64, energy: f64) -> usize {
    if energy <= 0.0 {
        return 0;
    }
    (length * (2.0 * mass * energy).sqrt() / (std::f64::consts::PI * hbar)).floor() as usize
}

struct Tridiagonal {
    diag: Vec<f64>,
    off_sq: f64,
    off: f64,
}

impl Tridiagonal {
    /// Number of eigenvalues below `x` (Sturm sequence sign count).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in self.diag.iter().enumerate() {
            q = if i == 0 {
                d - x
            } else {
                d - x - self.off_sq / q
            };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// The `k`-th eigenvalue (zero-based) by bisection.
    fn eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
}

fn fd_levels(
    spec: &HamiltonianSpec,
    lo: f64,
    hi: f64,
    grid_n: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let h = (hi - lo) / grid_n as f64;
    let kinetic = spec.hbar * spec.hbar / (spec.mass * h * h);
    let mut diag = Vec::with_capacity(grid_n - 1);
    for i in 1..grid_n {
        let x = lo + i as f64 * h;
        let v = spec.potential(&[x]);
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "potential is singular at grid point x = {x}"
            )));
        }
        diag.push(kinetic + v);
    }
    let off = -0.5 * kinetic;
    let matrix = Tridiagonal {
        diag,
        off_sq: off * off,
        off,
    };
    let (g_lo, g_hi) = matrix.gershgorin();
    let levels: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|k| matrix.eigenvalue(k, g_lo, g_hi))
        .collect();
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Numeric(
            "finite-difference levels are not strictly increasing".into(),
        ));
    }
    Ok(levels)
}

/// Lowest `count` levels of a 1D system on `[lo, hi]` with Dirichlet ends.
///
/// `est_error` is half the change from the solve on `grid_n/2` intervals,
/// which bounds the error of a second-order scheme in its asymptotic range.
pub fn fd_spectrum_1d(
    spec: &HamiltonianSpec,
    interval: (f64, f64),
    grid_n: usize,
    count: usize,
) -> Result<SpectrumResult> {
    spec.validate()?;
    if spec.dimension != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spec.dimension,
        });
    }
    if let Domain::Box {
        boundary: Boundary::Neumann,
        ..
    } = spec.domain
    {
        return domain("the finite-difference solver supports Dirichlet boundaries only");
    }
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return domain(format!("invalid interval [{lo}, {hi}]"));
    }
    if count == 0 {
        return domain("count must be at least 1");
    }
    if grid_n < 8 * count {
        return Err(Error::Resolution(format!(
            "{count} levels need at least {} grid intervals, got {grid_n}",
            8 * count
        )));
    }
    let (fine, coarse) = rayon::join(
        || fd_levels(spec, lo, hi, grid_n, count),
        || fd_levels(spec, lo, hi, grid_n / 2, count),
    );
    let (fine, coarse) = (fine?, coarse?);
    let est_error = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| 0.5 * (f - c).abs())
        .collect();
    Ok(SpectrumResult {
        levels: fine,
        first_index: 0,
        solver: Solver::FiniteDifference,
        hbar: spec.hbar,
        mass: spec.mass,
        grid_points: Some(grid_n),
        est_error: Some(est_error),
        interval: Some(interval),
    })
}

/// Truncation interval for an unbounded 1D potential: symmetric about
/// `center`, wide enough that `V` at both edges is at least ten times a
/// semiclassical estimate of the highest requested level.
pub fn truncation_interval(
    spec: &HamiltonianSpec,
    center: f64,
    count: usize,
) -> Result<(f64, f64)> {
    if let Domain::Box { lower, upper, .. } = &spec.domain {
        return Ok((lower[0], upper[0]));
    }
    let options = OrbitOptions {
        search_center: center,
        ..Default::default()
    };
    let target = 2.0 * std::f64::consts::PI * spec.hbar * count as f64;
    let action = |e: f64| quadrature_invariants(spec, e, &options).map(|(_, inv)| inv.action);
    let floor = spec.potential(&[center]);
    let mut gap: f64 = 1.0;
    while action(floor + gap)? < target {
        gap *= 2.0;
        if gap > 1e12 {
            return Err(Error::Numeric("level estimate does not converge".into()));
        }
    }
    let (mut a, mut b) = (floor, floor + gap);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if action(mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let threshold = 10.0 * b.abs().max(1.0);
    let mut radius: f64 = 1.0;
    while spec.potential(&[center - radius]) < threshold
        || spec.potential(&[center + radius]) < threshold
    {
        radius *= 1.1;
        if radius > 1e8 {
            return Err(Error::OrbitStructure(
                "potential does not confine the requested levels".into(),
            ));
        }
    }
    Ok((center - radius, center + radius))
}

/// [`fd_spectrum_1d`] on the box walls or on [`truncation_interval`].
pub fn fd_spectrum_1d_auto(
    spec: &HamiltonianSpec,
    grid_n: usize,
    count: usize,
) -> Result<SpectrumResult> {
    let interval = truncation_interval(spec, 0.0, count)?;
    fd_spectrum_1d(spec, interval, grid_n, count)
}
