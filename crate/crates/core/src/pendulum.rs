//! The integrable two-mode reduction.
//!
//! With the three conserved actions normalized to one, the remaining degree of
//! freedom `(psi, K)` obeys a pendulum with Hamiltonian
//! `H(psi, K) = 2K(1-K) cos psi`:
//!
//! ```text
//! psi' = -2(1 - 2K) cos psi
//! K'   = -2K(1 - K) sin psi
//! ```
//!
//! Starting from `(0, gamma)` the orbit reaches `(0, 1 - gamma)` after the
//! half-period `T_gamma` and closes after `2 T_gamma`. Time here is the slow
//! time `eps^2 t` of the full system.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    /// Unwrapped angle in radians.
    pub psi: f64,
    pub k: f64,
}

impl PendulumState {
    pub const fn new(psi: f64, k: f64) -> Self {
        Self { psi, k }
    }

    /// Angle reduced to `(-pi, pi]`.
    pub fn wrapped_psi(&self) -> f64 {
        wrap_angle(self.psi)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// `2K(1-K) cos psi`.
pub fn h_star(s: PendulumState) -> f64 {
    2.0 * s.k * (1.0 - s.k) * s.psi.cos()
}

/// `(dpsi/dtau, dK/dtau)`.
pub fn vector_field(s: PendulumState) -> (f64, f64) {
    let (sin, cos) = s.psi.sin_cos();
    (-2.0 * (1.0 - 2.0 * s.k) * cos, -2.0 * s.k * (1.0 - s.k) * sin)
}

fn rk4_step(s: PendulumState, dt: f64) -> PendulumState {
    let shift = |s: PendulumState, d: (f64, f64), h: f64| PendulumState::new(s.psi + h * d.0, s.k + h * d.1);
    let k1 = vector_field(s);
    let k2 = vector_field(shift(s, k1, 0.5 * dt));
    let k3 = vector_field(shift(s, k2, 0.5 * dt));
    let k4 = vector_field(shift(s, k3, dt));
    PendulumState::new(
        s.psi + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.k + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Fixed-step classical Runge-Kutta; returns `n + 1` states including `s0`.
pub fn integrate(s0: PendulumState, dt: f64, n: usize) -> Vec<PendulumState> {
    assert!(dt > 0.0, "step must be positive");
    let mut out = Vec::with_capacity(n + 1);
    let mut s = s0;
    out.push(s);
    for _ in 0..n {
        s = rk4_step(s, dt);
        out.push(s);
    }
    out
}

/// State after advancing `s0` by `t` using steps no longer than `max_step`.
pub fn advance(s0: PendulumState, t: f64, max_step: f64) -> PendulumState {
    if t <= 0.0 {
        return s0;
    }
    let n = (t / max_step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    (0..n).fold(s0, |s, _| rk4_step(s, h))
}

/// States at the nondecreasing `times`, integrating from `s0` at time zero.
pub fn sample_at(s0: PendulumState, times: &[f64], max_step: f64) -> Vec<PendulumState> {
    let mut out = Vec::with_capacity(times.len());
    let mut s = s0;
    let mut now = 0.0;
    for &t in times {
        assert!(t >= now, "sample times must be nondecreasing");
        s = advance(s, t - now, max_step);
        now = t;
        out.push(s);
    }
    out
}

/// Half-period of the orbit through `(0, gamma)` and its energy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub gamma: f64,
    /// Travel time from `(0, gamma)` to `(0, 1 - gamma)`.
    #[serde(rename = "T_gamma")]
    pub t_gamma: f64,
    pub h: f64,
    pub quadrature_error_estimate: f64,
}

const PERIOD_TOL: f64 = 1e-11;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    let gap = 0.5 - gamma;
    if gap < 1e-12 {
        return Err(Error::DegenerateOrbit { gamma, gap });
    }
    Ok(())
}

/// `T_gamma = 2 int_gamma^{1/2} dK / sqrt((2K(1-K))^2 - h^2)` with
/// `h = 2 gamma (1 - gamma)`.
///
/// With `K = gamma + (1/2 - gamma) sin^2 theta` and the factorization
/// `(2K(1-K))^2 - h^2 = 2(K - gamma)(1 - gamma - K)(2K(1-K) + h)` the
/// integrand becomes `2 cos theta / sqrt(2 (1 + cos^2 theta)(2K(1-K) + h))`,
/// smooth on `[0, pi/2]`.
pub fn period(gamma: f64) -> Result<PeriodResult> {
    check_gamma(gamma)?;
    let h = 2.0 * gamma * (1.0 - gamma);
    let span = 0.5 - gamma;
    let integrand = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let k = gamma + span * sin * sin;
        2.0 * cos / (2.0 * (1.0 + cos * cos) * (2.0 * k * (1.0 - k) + h)).sqrt()
    };
    let q = quadrature::integrate(integrand, 0.0, FRAC_PI_2, PERIOD_TOL, 10_000)?;
    Ok(PeriodResult {
        gamma,
        t_gamma: 2.0 * q.value,
        h,
        quadrature_error_estimate: 2.0 * q.error_estimate,
    })
}

/// Time from `(0, gamma)` to the first return of `psi` to zero (where `K`
/// peaks at `1 - gamma`), by Runge-Kutta with step `dt` and a bisection on the
/// final partial step.
pub fn half_period_by_integration(gamma: f64, dt: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let mut s = PendulumState::new(0.0, gamma);
    let mut t = 0.0;
    // psi leaves zero downwards and comes back upwards at the turning point
    let limit = 1e4;
    let mut left_zero = false;
    while t < limit {
        let next = rk4_step(s, dt);
        if next.psi < 0.0 {
            left_zero = true;
        }
        if left_zero && s.psi < 0.0 && next.psi >= 0.0 {
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(s, mid).psi < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(t + 0.5 * (lo + hi));
        }
        s = next;
        t += dt;
    }
    Err(Error::DiagnosticUnavailable(format!(
        "no turning point found before tau = {limit}"
    )))
}

/// Full reduced Hamiltonian in the coordinates `(psi0, K0, K1, K2, K3)` for
/// internal modes `p`, `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedHamiltonian {
    pub p: i64,
    pub q: i64,
}

impl ReducedHamiltonian {
    pub fn new(p: i64, q: i64) -> Self {
        Self { p, q }
    }

    /// `p^2 (K1 + K2 - K3) + q^2 K3 + K1 K2 + 2 sqrt(R) cos psi0` with
    /// `R = K0 (K3 - K0)(K2 - K3 + K0)(K1 - K0)`.
    pub fn value(&self, psi0: f64, k0: f64, k1: f64, k2: f64, k3: f64) -> Result<f64> {
        let factors = [
            ("K0", k0),
            ("K3 - K0", k3 - k0),
            ("K2 - K3 + K0", k2 - k3 + k0),
            ("K1 - K0", k1 - k0),
        ];
        let radicand: f64 = factors.iter().map(|f| f.1).product();
        if radicand < 0.0 {
            let negative: Vec<&str> = factors.iter().filter(|f| f.1 < 0.0).map(|f| f.0).collect();
            return Err(Error::Domain(format!(
                "negative radicand {radicand:e}; negative factor(s): {}",
                negative.join(", ")
            )));
        }
        let (p2, q2) = ((self.p * self.p) as f64, (self.q * self.q) as f64);
        Ok(p2 * (k1 + k2 - k3) + q2 * k3 + k1 * k2 + 2.0 * radicand.sqrt() * psi0.cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn h_star_examples() {
        let g = 0.3;
        assert!((h_star(PendulumState::new(0.0, g)) - 2.0 * g * (1.0 - g)).abs() < 1e-16);
        assert!(h_star(PendulumState::new(PI / 2.0, 0.37)).abs() < 1e-16);
        assert_eq!(h_star(PendulumState::new(0.0, 0.5)), 0.5);
    }

    #[test]
    fn vector_field_examples() {
        assert_eq!(vector_field(PendulumState::new(0.0, 0.5)), (0.0, 0.0));
        let g = 0.2;
        let (dpsi, dk) = vector_field(PendulumState::new(0.0, g));
        assert!((dpsi + 2.0 * (1.0 - 2.0 * g)).abs() < 1e-15);
        assert_eq!(dk, 0.0);
        for psi in [-2.0, 0.3, 1.7] {
            assert_eq!(vector_field(PendulumState::new(psi, 0.0)).1, 0.0);
        }
    }

    #[test]
    fn fixed_point_stays_put() {
        let traj = integrate(PendulumState::new(0.0, 0.5), 0.01, 500);
        assert!(traj.iter().all(|s| *s == PendulumState::new(0.0, 0.5)));
    }

    #[test]
    fn boundary_lines_are_invariant() {
        for k in [0.0, 1.0] {
            let traj = integrate(PendulumState::new(1.0, k), 0.01, 200);
            assert!(traj.iter().all(|s| s.k == k));
        }
    }

    #[test]
    fn orbit_hits_mirror_point_and_closes() {
        let gamma = 0.1;
        let t = period(gamma).unwrap().t_gamma;
        let s0 = PendulumState::new(0.0, gamma);
        let half = advance(s0, t, 1e-4);
        assert!(half.wrapped_psi().abs() < 1e-4);
        assert!((half.k - (1.0 - gamma)).abs() < 1e-4);
        let full = advance(s0, 2.0 * t, 1e-4);
        assert!(full.wrapped_psi().abs() < 1e-4);
        assert!((full.k - gamma).abs() < 1e-4);
    }

    #[test]
    fn period_matches_travel_time() {
        let t = period(0.25).unwrap();
        let ode = half_period_by_integration(0.25, 1e-3).unwrap();
        assert!((t.t_gamma - ode).abs() < 1e-6, "{} vs {ode}", t.t_gamma);
        assert!(t.quadrature_error_estimate <= 1e-9);
        assert_eq!(t.h, 2.0 * 0.25 * 0.75);
    }

    #[test]
    fn period_agrees_with_full_interval_substitution() {
        // Second route: integrate over [gamma, 1 - gamma] with
        // K = gamma + (1 - 2 gamma) sin^2 theta, where the integrand reduces
        // to sqrt(2) / sqrt(2K(1-K) + h).
        for gamma in [1e-4, 0.01, 0.1, 0.3, 0.49] {
            let h = 2.0 * gamma * (1.0 - gamma);
            let f = |th: f64| {
                let k = gamma + (1.0 - 2.0 * gamma) * th.sin().powi(2);
                2f64.sqrt() / (2.0 * k * (1.0 - k) + h).sqrt()
            };
            let other = quadrature::integrate(f, 0.0, PI / 2.0, 1e-12, 10_000).unwrap().value;
            let t = period(gamma).unwrap().t_gamma;
            assert!((t - other).abs() < 1e-9 * t, "gamma {gamma}: {t} vs {other}");
        }
    }

    #[test]
    fn period_decreases_with_gamma() {
        let ts: Vec<f64> = [0.05, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&g| period(g).unwrap().t_gamma)
            .collect();
        assert!(ts.windows(2).all(|w| w[0] > w[1]), "{ts:?}");
    }

    #[test]
    fn period_grows_logarithmically() {
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&g: &f64| period(g).unwrap().t_gamma / g.ln().abs())
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 3.0, "{ratios:?}");
    }

    #[test]
    fn period_domain_errors() {
        for g in [0.0, -0.1, 0.5, 0.7, f64::NAN] {
            assert!(matches!(period(g), Err(Error::Domain(_))), "{g}");
        }
        assert!(matches!(period(0.5 - 1e-13), Err(Error::DegenerateOrbit { .. })));
    }

    #[test]
    fn energy_is_conserved_over_a_period() {
        let gamma = 0.1;
        let t = period(gamma).unwrap().t_gamma;
        let dt = 1e-4;
        let n = (2.0 * t / dt).ceil() as usize;
        let s0 = PendulumState::new(0.0, gamma);
        let h0 = h_star(s0);
        let drift = integrate(s0, dt, n)
            .iter()
            .map(|s| (h_star(*s) - h0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{drift:e}");
    }

    #[test]
    fn turning_point_symmetry() {
        let gamma = 0.1;
        let t = period(gamma).unwrap().t_gamma;
        let s0 = PendulumState::new(0.0, gamma);
        for off in [0.1, 0.5, 1.0, 2.0] {
            let before = advance(s0, t - off, 1e-4);
            let after = advance(s0, t + off, 1e-4);
            assert!((before.k - after.k).abs() < 1e-6);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let s0 = PendulumState::new(0.0, 0.1);
        let t_end = 2.0;
        let reference = advance(s0, t_end, 1e-4);
        let err = |dt: f64| {
            let s = advance(s0, t_end, dt);
            ((s.psi - reference.psi).powi(2) + (s.k - reference.k).powi(2)).sqrt()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn reduced_hamiltonian_collapses_on_unit_actions() {
        let h = ReducedHamiltonian::new(1, 3);
        let (k, psi) = (0.3, 0.7);
        let full = h.value(psi, k, 1.0, 1.0, 1.0).unwrap();
        let expected = (1.0 + 9.0) + 1.0 + 2.0 * k * (1.0 - k) * psi.cos();
        assert!((full - expected).abs() < 1e-14);
    }

    #[test]
    fn reduced_hamiltonian_edge_cases() {
        let h = ReducedHamiltonian::new(0, 2);
        let a = h.value(0.0, 0.0, 0.8, 0.9, 0.5).unwrap();
        let b = h.value(2.0, 0.0, 0.8, 0.9, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            h.value(0.4, 0.2, 0.8, 0.9, 0.5).unwrap(),
            h.value(-0.4, 0.2, 0.8, 0.9, 0.5).unwrap()
        );
        let err = h.value(0.0, 0.6, 0.5, 1.0, 1.0).unwrap_err().to_string();
        assert!(err.contains("K1 - K0"), "{err}");
    }
}
