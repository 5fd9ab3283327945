//! Oscillatory density of states and its recurrence spectrum.
//!
//! Levels are mapped to a scaled variable `s`, broadened by a Gaussian of
//! width `σ` in `s`, stripped of a least-squares polynomial trend, windowed
//! and Fourier transformed. The conjugate axis is `f = 2πj/(N h)`, so an
//! oscillation `cos(f₀ s)` peaks at `f₀`. In the `ω = √E` variable with
//! `ħ = 1, 2m = 1` a billiard orbit of length `L` appears at `f = L`.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::orbits::{OrbitCatalog, PeriodicOrbit};
use crate::qspec::SpectrumResult;

/// Fewest levels accepted by [`oscillatory_dos`].
pub const MIN_LEVELS: usize = 50;
/// Peaks must exceed this multiple of the median amplitude.
pub const PEAK_THRESHOLD: f64 = 5.0;
/// Bins below this index hold the detrend residue and are never peaks.
pub const FIRST_PEAK_BIN: usize = 3;
/// A peak must be the largest amplitude within this many bins.
pub const PEAK_GUARD_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaledVariableMap {
    /// `s = √E`.
    Omega,
    /// `s = |E/E₀|^((ν+2)/2ν)`; frequencies are quoted relative to `E₀`.
    Homogeneous {
        degree: f64,
        reference_energy: f64,
    },
    /// `s = Γ^(−1/3)` with `Γ = (E/E₀)^(3/2)`, i.e. `s = (E/E₀)^(−1/2)`.
    GammaField {
        reference_energy: f64,
    },
    RawEnergy,
}

impl ScaledVariableMap {
    pub fn name(&self) -> &'static str {
        match self {
            ScaledVariableMap::Omega => "omega",
            ScaledVariableMap::Homogeneous { .. } => "homogeneous",
            ScaledVariableMap::GammaField { .. } => "gamma_field",
            ScaledVariableMap::RawEnergy => "raw_energy",
        }
    }
}

pub fn map_variable(energy: f64, map: &ScaledVariableMap) -> Result<f64> {
    if !energy.is_finite() {
        return domain("energy must be finite");
    }
    match *map {
        ScaledVariableMap::Omega => {
            if energy <= 0.0 {
                return domain(format!("omega map needs E > 0, got {energy}"));
            }
            Ok(energy.sqrt())
        }
        ScaledVariableMap::Homogeneous {
            degree,
            reference_energy,
        } => {
            if degree == 0.0 || degree == -2.0 || !degree.is_finite() {
                return Err(Error::Map(format!(
                    "degree {degree} gives no monotone scaled variable"
                )));
            }
            let ratio = energy / reference_energy;
            if !(ratio > 0.0) {
                return domain(format!(
                    "homogeneous map needs E·E₀ > 0, got E = {energy}, E₀ = {reference_energy}"
                ));
            }
            Ok(ratio.powf((degree + 2.0) / (2.0 * degree)))
        }
        ScaledVariableMap::GammaField { reference_energy } => {
            let ratio = energy / reference_energy;
            if !(ratio > 0.0) {
                return domain(format!("gamma-field map needs E/E₀ > 0, got {ratio}"));
            }
            Ok(gamma_to_scaled(ratio.powf(1.5)))
        }
        ScaledVariableMap::RawEnergy => Ok(energy),
    }
}

/// `Γ^(−1/3)`.
pub fn gamma_to_scaled(gamma: f64) -> f64 {
    gamma.cbrt().recip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Interpolated location on the conjugate axis.
    pub frequency: f64,
    pub amplitude: f64,
    /// Index of the local-maximum bin.
    pub bin: usize,
    /// Phase of the transform at the peak bin, referred to `s = 0`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrencePeaks {
    pub map: ScaledVariableMap,
    pub sigma: f64,
    pub s_grid: Vec<f64>,
    pub delta_rho: Vec<f64>,
    /// Conjugate axis and amplitude spectrum, filled by [`recurrence_spectrum`].
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl RecurrencePeaks {
    pub fn s_range(&self) -> f64 {
        match (self.s_grid.first(), self.s_grid.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Spacing of the conjugate axis, `2π/(N h)`.
    pub fn bin_width(&self) -> f64 {
        match self.frequencies.get(1) {
            Some(f) => *f,
            None => f64::NAN,
        }
    }

    pub fn dominant(&self) -> Option<&Peak> {
        self.peaks
            .iter()
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }

    /// The strongest peak within `tol` of `frequency`.
    pub fn strongest_near(&self, frequency: f64, tol: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .filter(|p| (p.frequency - frequency).abs() <= tol)
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }

    /// `Σ δρ² h`.
    pub fn power(&self) -> f64 {
        let h = if self.s_grid.len() > 1 {
            self.s_grid[1] - self.s_grid[0]
        } else {
            0.0
        };
        self.delta_rho.iter().map(|v| v * v).sum::<f64>() * h
    }
}

/// Mapped levels in ascending order of `s`; fails when the map is not
/// monotone over the spectrum.
pub fn map_levels(spectrum: &SpectrumResult, map: &ScaledVariableMap) -> Result<Vec<f64>> {
    let mut s = spectrum
        .levels
        .iter()
        .map(|&e| map_variable(e, map))
        .collect::<Result<Vec<f64>>>()?;
    let rising = s.windows(2).all(|w| w[1] >= w[0]);
    let falling = s.windows(2).all(|w| w[1] <= w[0]);
    if !(rising || falling) {
        return Err(Error::Map(format!(
            "{} map is not monotone over the spectrum",
            map.name()
        )));
    }
    if falling && !rising {
        s.reverse();
    }
    Ok(s)
}

/// Mean spacing of the mapped levels.
pub fn mean_spacing(spectrum: &SpectrumResult, map: &ScaledVariableMap) -> Result<f64> {
    let s = map_levels(spectrum, map)?;
    if s.len() < 2 {
        return Err(Error::InsufficientData("need at least two levels".into()));
    }
    Ok((s[s.len() - 1] - s[0]) / (s.len() - 1) as f64)
}

fn legendre_basis(t: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = t;
    }
    for k in 2..=degree {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Least-squares polynomial of the given degree evaluated on the grid.
fn polynomial_fit(s: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let to_unit = |x: f64| 2.0 * (x - lo) / (hi - lo) - 1.0;
    let cols = degree + 1;
    let mut a = DMatrix::<f64>::zeros(s.len(), cols);
    let mut row = vec![0.0; cols];
    for (i, &x) in s.iter().enumerate() {
        legendre_basis(to_unit(x), degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let b = DVector::from_column_slice(y);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numeric(format!("detrend fit failed: {e}")))?;
    Ok((a * coef).iter().copied().collect())
}

/// Smoothed, detrended density of the mapped levels on `grid_n` uniform
/// points spanning the mapped spectrum.
///
/// `sigma` is the Gaussian width in `s`; the grid step must not exceed `σ/2`.
pub fn oscillatory_dos(
    spectrum: &SpectrumResult,
    map: &ScaledVariableMap,
    sigma: f64,
    detrend_degree: usize,
    grid_n: usize,
) -> Result<RecurrencePeaks> {
    if spectrum.levels.len() < MIN_LEVELS {
        return Err(Error::InsufficientData(format!(
            "{} levels given, at least {MIN_LEVELS} needed",
            spectrum.levels.len()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let levels = map_levels(spectrum, map)?;
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    if !(hi > lo) {
        return Err(Error::InsufficientData(
            "mapped levels span no interval".into(),
        ));
    }
    if grid_n < 2 * (detrend_degree + 1) {
        return domain(format!("grid_n = {grid_n} is too small"));
    }
    let h = (hi - lo) / (grid_n - 1) as f64;
    if h > 0.5 * sigma {
        return Err(Error::Resolution(format!(
            "grid step {h:e} exceeds sigma/2 = {:e}; raise grid_n",
            0.5 * sigma
        )));
    }
    let s_grid: Vec<f64> = (0..grid_n).map(|j| lo + j as f64 * h).collect();
    let mut rho = vec![0.0; grid_n];
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let reach = 8.0 * sigma;
    for &level in &levels {
        let first = (((level - reach - lo) / h).ceil().max(0.0)) as usize;
        let last = ((((level + reach - lo) / h).floor()) as usize).min(grid_n - 1);
        for j in first..=last {
            let z = (s_grid[j] - level) / sigma;
            rho[j] += norm * (-0.5 * z * z).exp();
        }
    }
    let trend = polynomial_fit(&s_grid, &rho, detrend_degree)?;
    let delta_rho = rho.iter().zip(&trend).map(|(r, t)| r - t).collect();
    Ok(RecurrencePeaks {
        map: *map,
        sigma,
        s_grid,
        delta_rho,
        frequencies: Vec::new(),
        amplitudes: Vec::new(),
        peaks: Vec::new(),
    })
}

/// Fourier transform of the windowed `δρ` with peaks extracted.
pub fn recurrence_spectrum(osc: &RecurrencePeaks, window: Window) -> Result<RecurrencePeaks> {
    recurrence_spectrum_for(osc, window, None)
}

/// As [`recurrence_spectrum`], failing with a resolution error when the
/// `s` range is shorter than one period `2π/f` of `expected_fundamental`.
pub fn recurrence_spectrum_for(
    osc: &RecurrencePeaks,
    window: Window,
    expected_fundamental: Option<f64>,
) -> Result<RecurrencePeaks> {
    let n = osc.delta_rho.len();
    if n < 2 * FIRST_PEAK_BIN + 2 || osc.s_grid.len() != n {
        return Err(Error::InsufficientData("delta_rho is not populated".into()));
    }
    let range = osc.s_range();
    if let Some(f) = expected_fundamental {
        if range * f < 2.0 * std::f64::consts::PI {
            return Err(Error::Resolution(format!(
                "s range {range} is shorter than one period 2π/{f} of the expected fundamental"
            )));
        }
    }
    let h = osc.s_grid[1] - osc.s_grid[0];
    let weights: Vec<f64> = (0..n)
        .map(|j| match window {
            Window::Rect => 1.0,
            Window::Hann => {
                let phase = 2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64;
                0.5 * (1.0 - phase.cos())
            }
        })
        .collect();
    let gain = weights.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex<f64>> = osc
        .delta_rho
        .iter()
        .zip(&weights)
        .map(|(v, w)| Complex::new(v * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let half = n / 2;
    let df = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let frequencies: Vec<f64> = (0..=half).map(|j| j as f64 * df).collect();
    let amplitudes: Vec<f64> = buffer[..=half]
        .iter()
        .map(|c| c.norm() * h / gain)
        .collect();

    let mut sorted: Vec<f64> = amplitudes[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let threshold = PEAK_THRESHOLD * median;

    let s0 = osc.s_grid[0];
    let mut peaks = Vec::new();
    for j in FIRST_PEAK_BIN.max(PEAK_GUARD_BINS)..half.saturating_sub(PEAK_GUARD_BINS) {
        let a = amplitudes[j];
        if !(a > threshold) {
            continue;
        }
        let neighbourhood = &amplitudes[j - PEAK_GUARD_BINS..=j + PEAK_GUARD_BINS];
        let is_max = neighbourhood.iter().enumerate().all(|(i, &b)| {
            i == PEAK_GUARD_BINS || if i < PEAK_GUARD_BINS { b < a } else { b <= a }
        });
        if !is_max {
            continue;
        }
        let (l0, lm, lp) = (a.ln(), amplitudes[j - 1].ln(), amplitudes[j + 1].ln());
        let curvature = lm - 2.0 * l0 + lp;
        let delta = if curvature < 0.0 {
            (0.5 * (lm - lp) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let frequency = (j as f64 + delta) * df;
        let raw_phase = buffer[j].arg() - frequencies[j] * s0;
        peaks.push(Peak {
            frequency,
            amplitude: (l0 - 0.25 * (lm - lp) * delta).exp(),
            bin: j,
            phase: raw_phase.sin().atan2(raw_phase.cos()),
        });
    }
    Ok(RecurrencePeaks {
        frequencies,
        amplitudes,
        peaks,
        ..osc.clone()
    })
}

/// A frequency predicted for one orbit family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub frequency: f64,
}

/// Billiard predictions in the `ω` variable: `f = √(2m)·L/ħ`.
pub fn catalog_predictions(catalog: &OrbitCatalog, hbar: f64) -> Vec<Prediction> {
    catalog
        .entries
        .iter()
        .map(|e| Prediction {
            label: e.label.clone(),
            frequency: (2.0 * catalog.mass).sqrt() * e.length / hbar,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRow {
    pub frequency: f64,
    pub amplitude: f64,
    pub label: Option<String>,
    pub predicted: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub tolerance: f64,
    pub rows: Vec<MatchRow>,
}

impl MatchReport {
    pub fn matched(&self) -> impl Iterator<Item = &MatchRow> {
        self.rows.iter().filter(|r| r.label.is_some())
    }

    /// The strongest peak assigned to `label`.
    pub fn best_for(&self, label: &str) -> Option<&MatchRow> {
        self.matched()
            .filter(|r| r.label.as_deref() == Some(label))
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }
}

/// Assigns each peak to the nearest prediction within the absolute
/// tolerance `tol`; peaks with none in reach stay unmatched.
pub fn match_orbits(peaks: &[Peak], predictions: &[Prediction], tol: f64) -> MatchReport {
    let rows = peaks
        .iter()
        .map(|peak| {
            let nearest = predictions
                .iter()
                .map(|p| (p, (p.frequency - peak.frequency).abs()))
                .filter(|(_, d)| *d <= tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match nearest {
                Some((p, d)) => MatchRow {
                    frequency: peak.frequency,
                    amplitude: peak.amplitude,
                    label: Some(p.label.clone()),
                    predicted: Some(p.frequency),
                    rel_error: Some(d / p.frequency.abs()),
                },
                None => MatchRow {
                    frequency: peak.frequency,
                    amplitude: peak.amplitude,
                    label: None,
                    predicted: None,
                    rel_error: None,
                },
            }
        })
        .collect();
    MatchReport {
        tolerance: tol,
        rows,
    }
}

/// `P_E = 2πħ/T`, the local period of the level density in energy.
pub fn local_energy_period(orbit: &PeriodicOrbit) -> Result<f64> {
    energy_period(orbit.period, orbit.spec.hbar)
}

pub fn energy_period(period: f64, hbar: f64) -> Result<f64> {
    if !(period > 0.0) {
        return domain(format!("period must be positive, got {period}"));
    }
    Ok(2.0 * std::f64::consts::PI * hbar / period)
}
