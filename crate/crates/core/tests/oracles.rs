//! Checks against values computed by independent means.

use std::f64::consts::PI;

use statrs::function::beta::beta;

use orbitscale::dynamics::{HamiltonianSpec, PhaseState, PotentialTerm};
use orbitscale::orbits::{close_orbit, find_orbit_1d};
use orbitscale::oscillations::{map_levels, ScaledVariableMap};
use orbitscale::qspec::{analytic_spectrum, fd_spectrum_1d, AnalyticKind};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Double-exponential quadrature of `f(x, 1 − x)` over `[0, 1]`.
fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, h: f64) -> f64 {
    let mut sum = 0.0;
    let n = (4.0 / h) as i64;
    for k in -n..=n {
        let t = k as f64 * h;
        let s = 0.5 * PI * t.sinh();
        let e = (-2.0 * s).exp();
        let (x, y) = (1.0 / (1.0 + e), e / (1.0 + e));
        // dx/dt = π cosh t · e / (1 + e)².
        let w = PI * t.cosh() * e / ((1.0 + e) * (1.0 + e));
        if x > 0.0 && y > 0.0 && w > 0.0 {
            sum += w * f(x, y);
        }
    }
    sum * h
}

#[test]
fn quartic_period_against_beta_function_and_tanh_sinh() {
    // m = 1, V = x⁴, E = 1: T = 2√2 ∫₀¹ dx/√(1 − x⁴) = (√2/2)·B(1/4, 1/2).
    let closed = 0.5 * 2f64.sqrt() * beta(0.25, 0.5);
    let integral = tanh_sinh(
        |x, y| 1.0 / (y * (1.0 + x) * (1.0 + x * x)).sqrt(),
        1.0 / 64.0,
    );
    let numeric = 2.0 * 2f64.sqrt() * integral;
    assert!(rel(numeric, closed) < 1e-12, "{numeric} {closed}");

    let spec = HamiltonianSpec::new(1.0, 1.0, 1)
        .unwrap()
        .with_term(PotentialTerm::power(1.0, 4.0));
    let o = find_orbit_1d(&spec, 1.0).unwrap();
    assert!(rel(o.period, closed) < 1e-8, "{} {closed}", o.period);
}

/// Lowest Dirichlet eigenvalue of `−ψ'' + x⁴ψ` on `[−L, L]` by Numerov
/// shooting; bisection on the node count of the shot solution.
fn numerov_ground_state(half_width: f64, n: usize) -> f64 {
    let h = 2.0 * half_width / n as f64;
    let nodes_below = |e: f64| -> usize {
        let q = |x: f64| e - x.powi(4);
        let c = h * h / 12.0;
        let (mut x, mut prev, mut cur) = (-half_width, 0.0_f64, 1e-12_f64);
        let mut nodes = 0;
        for _ in 1..n {
            let (xp, xn) = (x, x + h);
            let x_next = xn + h;
            let next = (2.0 * (1.0 - 5.0 * c * q(xn)) * cur - (1.0 + c * q(xp)) * prev)
                / (1.0 + c * q(x_next));
            if next.signum() != cur.signum() {
                nodes += 1;
            }
            prev = cur;
            cur = next;
            x = xn;
        }
        nodes
    };
    let (mut lo, mut hi) = (0.5, 2.0);
    assert_eq!(nodes_below(lo), 0);
    assert!(nodes_below(hi) >= 1);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if nodes_below(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn quartic_ground_state_against_numerov_shooting() {
    let oracle = numerov_ground_state(6.0, 40_000);
    assert!((oracle - 1.060_362_090_5).abs() < 1e-8, "{oracle}");
    // ħ = 1, m = ½: H = p² + x⁴.
    let spec = HamiltonianSpec::natural(1).with_term(PotentialTerm::power(1.0, 4.0));
    let fd = fd_spectrum_1d(&spec, (-6.0, 6.0), 8000, 3).unwrap();
    assert!(
        (fd.levels[0] - oracle).abs() < 1e-5,
        "{} {oracle}",
        fd.levels[0]
    );
}

#[test]
fn oscillator_ground_state_on_a_truncated_grid() {
    let spec = HamiltonianSpec::new(1.0, 1.0, 1)
        .unwrap()
        .with_term(PotentialTerm::power(0.5, 2.0));
    let fd = fd_spectrum_1d(&spec, (-12.0, 12.0), 6000, 5).unwrap();
    assert!((fd.levels[0] - 0.5).abs() < 1e-5, "{}", fd.levels[0]);
}

#[test]
fn coulomb_levels_obey_bohr_sommerfeld() {
    // S(E) = 2πe²√(m/2|E|) for every Kepler ellipse, and S(E_n) = 2πnħ.
    let (mass, hbar, e2) = (0.5, 1.0, 1.0);
    let action = |e: f64| 2.0 * PI * e2 * (mass / (2.0 * e.abs())).sqrt();
    let levels = analytic_spectrum(
        AnalyticKind::Coulomb { charge_squared: e2 },
        mass,
        hbar,
        200,
    )
    .unwrap();
    for (k, e) in levels.levels.iter().enumerate() {
        let n = (levels.first_index as usize + k) as f64;
        assert!(rel(action(*e), 2.0 * PI * n * hbar) < 1e-14);
    }
    // s = |E/E₀|^(−1/2) with E₀ = −1 puts the levels at s = 2n: a comb of spacing 2.
    let s = map_levels(
        &levels,
        &ScaledVariableMap::Homogeneous {
            degree: -1.0,
            reference_energy: -1.0,
        },
    )
    .unwrap();
    for w in s.windows(2) {
        assert!((w[1] - w[0] - 2.0).abs() < 1e-9);
    }

    let spec = HamiltonianSpec::natural(3).with_term(PotentialTerm::coulomb(e2));
    for py in [0.6, 0.75, 0.9] {
        let o = close_orbit(
            &spec,
            &PhaseState::new(&[1.0, 0.0, 0.0], &[0.0, py, 0.0], 0.0),
            1e-4,
            100.0,
        )
        .unwrap();
        assert!(
            rel(o.action, action(o.energy)) < 1e-6,
            "p = {py}: {} {}",
            o.action,
            action(o.energy)
        );
    }
}
