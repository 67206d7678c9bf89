//! Property suites behind `beating validate`. Each check reports the measured
//! value next to its threshold.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cnls::{self, Flow, FieldState, SimConfig, SplitStep, StepObserver};
use crate::error::Result;
use crate::linear::{self, InflationParams, LinearPropagator, LockstepLinear};
use crate::par::{self, Execution};
use crate::pendulum::{self, PendulumState};
use crate::resonance;
use crate::spectral::{self, ModeVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: &str, name: &str, passed: bool, detail: String) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Resonance,
    Pendulum,
    Splitting,
    Beat,
    Inflate,
    Sign,
    /// resonance, pendulum and splitting
    Quick,
    All,
}

impl Suite {
    fn parts(self) -> Vec<Suite> {
        use Suite::*;
        match self {
            Quick => vec![Resonance, Pendulum, Splitting],
            All => vec![Resonance, Pendulum, Splitting, Beat, Inflate, Sign],
            s => vec![s],
        }
    }
}

pub fn run_suite(suite: Suite, exec: Execution) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for part in suite.parts() {
        out.extend(match part {
            Suite::Resonance => resonance_checks(exec)?,
            Suite::Pendulum => pendulum_checks(exec)?,
            Suite::Splitting => splitting_checks()?,
            Suite::Beat => beat_checks()?,
            Suite::Inflate => inflation_checks()?,
            Suite::Sign => sign_checks()?,
            Suite::Quick | Suite::All => unreachable!("expanded above"),
        });
    }
    Ok(out)
}

pub fn resonance_checks(exec: Execution) -> Result<Vec<Check>> {
    let s = "resonance";
    let eq = resonance::three_way_set_equality(6, exec)?;
    let mut out = vec![Check::new(
        s,
        "three-way set equality at J = 6",
        eq.equal,
        format!(
            "enumerated {}, literal {}, characterization {}",
            eq.enumerated, eq.literal, eq.characterized
        ),
    )];
    let scans: Vec<i64> = (1..=6)
        .map(|r| resonance::small_divisor_scan_with(r, resonance::DEFAULT_BUDGET, exec).map(|d| d.min_nonzero_divisor))
        .collect::<Result<_>>()?;
    out.push(Check::new(
        s,
        "no small divisors off the resonant set, J = 1..6",
        scans.iter().all(|&d| d >= 1),
        format!("min |divisor| per J: {scans:?}"),
    ));
    let batch = resonance::z4_identity_batch(1, 100, 8, 8, exec)?;
    let failures = batch.iter().filter(|c| !c.passes()).count();
    let worst = batch
        .iter()
        .map(|c| (Complex64::new(c.direct_re, c.direct_im) - c.closed).norm() / (1.0 + c.closed.abs()))
        .fold(0.0, f64::max);
    out.push(Check::new(
        s,
        "Z4 direct sum equals closed form on 100 seeded pairs",
        failures == 0,
        format!("{failures} failures, worst relative gap {worst:e}"),
    ));
    Ok(out)
}

pub fn pendulum_checks(exec: Execution) -> Result<Vec<Check>> {
    let s = "pendulum";
    let mut out = Vec::new();
    let gammas = [0.05, 0.1, 0.25];
    let rows = par::map_ordered(exec, &gammas, |&g| -> Result<(f64, f64, f64, f64)> {
        let t = pendulum::period(g)?.t_gamma;
        let travel = pendulum::half_period_by_integration(g, 1e-4)?;
        let end = pendulum::advance(PendulumState::new(0.0, g), 2.0 * t, 1e-4);
        let closure = (end.wrapped_psi().abs()).max((end.k - g).abs());
        Ok((g, t, travel, closure))
    });
    for row in rows {
        let (g, t, travel, closure) = row?;
        let rel = (t - travel).abs() / t;
        out.push(Check::new(
            s,
            &format!("quadrature period matches ODE travel time, gamma = {g}"),
            rel <= 1e-5,
            format!("T = {t}, travel = {travel}, relative gap {rel:e}"),
        ));
        out.push(Check::new(
            s,
            &format!("orbit closes after 2T, gamma = {g}"),
            closure <= 1e-4,
            format!("distance {closure:e}"),
        ));
    }
    let traj = pendulum::integrate(PendulumState::new(0.0, 0.1), 1e-4, 100_000);
    let h0 = pendulum::h_star(traj[0]);
    let drift = traj.iter().map(|&p| (pendulum::h_star(p) - h0).abs()).fold(0.0, f64::max);
    out.push(Check::new(s, "energy drift at dt = 1e-4", drift <= 1e-8, format!("{drift:e}")));
    let logs = [1e-1, 1e-2, 1e-3, 1e-4];
    let ratios: Vec<f64> = logs
        .iter()
        .map(|&g| pendulum::period(g).map(|p| p.t_gamma / g.ln().abs()))
        .collect::<Result<_>>()?;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Check::new(
        s,
        "T/|ln gamma| bounded over gamma = 1e-1..1e-4",
        max / min <= 3.0,
        format!("ratios {ratios:?}, spread {}", max / min),
    ));
    Ok(out)
}

/// `|x(dt) - x(dt/2)| / |x(dt/2) - x(dt/4)|` for a second-order method is
/// close to 4.
fn richardson<F: Fn(f64) -> Vec<Complex64>>(solve: F, dt: f64) -> f64 {
    let a = solve(dt);
    let b = solve(dt / 2.0);
    let c = solve(dt / 4.0);
    let d = |x: &[Complex64], y: &[Complex64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
    };
    d(&a, &b) / d(&b, &c)
}

/// Step-halving ratio of the nonlinear integrator on two-mode data.
pub fn nonlinear_richardson(dt: f64) -> Result<f64> {
    let s0 = cnls::build_initial_data(1, 3, 0.3, 32)?;
    let (eps, t) = (1.0, 1.0);
    let solve = |h: f64| {
        let mut stepper = SplitStep::new(32, 512, h, eps, 1).expect("valid sizes");
        let mut s = s0.clone();
        for _ in 0..(t / h).round() as usize {
            stepper.step(&mut s);
        }
        [s.u.coeffs(), s.v.coeffs()].concat()
    };
    Ok(richardson(solve, dt))
}

/// Smooth travelling potential used to exercise the linear integrator.
pub fn test_potential(t: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|i| {
            let x = spectral::grid_point(i, grid);
            -(2.0 + (x - t).cos() + 0.5 * (2.0 * x + 3.0 * t).sin())
        })
        .collect()
}

/// Step-halving ratio of the linear integrator, potential sampled at step
/// midpoints.
pub fn linear_richardson(dt: f64) -> Result<f64> {
    let w0 = cnls::build_initial_data(1, 3, 0.3, 32)?.u;
    let t = 1.0;
    let solve = |h: f64| {
        let mut prop = LinearPropagator::new(32, 512, h).expect("valid sizes");
        let mut w: ModeVector = w0.clone();
        for k in 0..(t / h).round() as usize {
            prop.step(&mut w, &test_potential((k as f64 + 0.5) * h, 512));
        }
        w.coeffs().to_vec()
    };
    Ok(richardson(solve, dt))
}

pub fn splitting_checks() -> Result<Vec<Check>> {
    let s = "splitting";
    let nl = nonlinear_richardson(0.02)?;
    let li = linear_richardson(0.02)?;
    Ok(vec![
        Check::new(s, "nonlinear step-halving ratio 4 +- 25%", (nl - 4.0).abs() <= 1.0, format!("{nl}")),
        Check::new(s, "linear step-halving ratio 4 +- 25%", (li - 4.0).abs() <= 1.0, format!("{li}")),
    ])
}

/// The desk beating run: `p = 0, q = 2, gamma = 0.1, eps = 0.01, N = 32,
/// dt = 5e-3` over two half-periods.
pub fn desk_beat_config() -> SimConfig {
    SimConfig {
        p: 0,
        q: 2,
        gamma: 0.1,
        epsilon: 0.01,
        truncation: 32,
        dt: Some(5e-3),
        sample_stride: 1000,
        ..SimConfig::default()
    }
}

pub fn beat_checks() -> Result<Vec<Check>> {
    let s = "beat";
    let cfg = desk_beat_config();
    let initial = cnls::initial_state(&cfg)?;
    let mut lock = LockstepLinear::new(&cfg, &initial, u64::MAX)?;
    let traj = cnls::run_observed(&cfg, None, &mut lock)?;
    let rep = cnls::analyze(&traj)?;
    let e2 = cfg.epsilon * cfg.epsilon;
    let k = rep.max_k_drift.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        Check::new(s, "|u_q|^2 follows the pendulum within 0.05", rep.max_uq_deviation <= 0.05, format!("{:e}", rep.max_uq_deviation)),
        Check::new(s, "|u_q|^2 >= 0.85 at T/eps^2", rep.uq_sq_at_exchange >= 0.85, format!("{}", rep.uq_sq_at_exchange)),
        Check::new(s, "mass drift <= 1e-10", rep.max_mass_drift <= 1e-10, format!("{:e}", rep.max_mass_drift)),
        Check::new(s, "momentum drift <= 1e-10", rep.max_momentum_drift <= 1e-10, format!("{:e}", rep.max_momentum_drift)),
        Check::new(s, "energy drift <= 1e-6", rep.max_energy_drift <= 1e-6, format!("{:e}", rep.max_energy_drift)),
        Check::new(s, "external action <= 10 eps^2", rep.max_external_action <= 10.0 * e2, format!("{:e}", rep.max_external_action)),
        Check::new(s, "K1, K2, K3 drift <= 10 eps^2", k <= 10.0 * e2, format!("{:?}", rep.max_k_drift)),
        Check::new(s, "Sobolev formula residual <= 10 eps", rep.max_sobolev_residual <= 10.0 * cfg.epsilon, format!("{:e}", rep.max_sobolev_residual)),
        Check::new(s, "exchange pairing gap <= 1e-3", rep.max_pairing_gap <= 1e-3, format!("{:e}", rep.max_pairing_gap)),
        Check::new(s, "linear run with the same potential reproduces u", lock.max_deviation <= 1e-10, format!("{:e}", lock.max_deviation)),
    ])
}

pub fn inflation_checks() -> Result<Vec<Check>> {
    let s = "inflate";
    let rep = linear::inflation_experiment(&InflationParams::default())?;
    let far = linear::asymptotic_scaling(30, 1.0, 1.0, InflationParams::default().budget_steps);
    Ok(vec![
        Check::new(
            s,
            "growth ratio >= 0.9 predicted",
            rep.growth_ratio >= 0.9 * rep.predicted_ratio,
            format!("{} vs {}", rep.growth_ratio, rep.predicted_ratio),
        ),
        Check::new(s, "L2 drift <= 1e-10", rep.l2_drift <= 1e-10, format!("{:e}", rep.l2_drift)),
        Check::new(
            s,
            "Gevrey seminorm of V within 2x over the run",
            rep.gevrey_variation <= 2.0,
            format!("B = {}, variation {}", rep.gevrey_rate, rep.gevrey_variation),
        ),
        Check::new(s, "asymptotic scaling at q = 30 reported infeasible", !far.feasible, far.reason),
    ])
}

/// Stops a run once `|u_q|^2` reaches 1/2.
struct HalfCrossing {
    q: i64,
    time: Option<f64>,
}

impl StepObserver for HalfCrossing {
    fn on_step(&mut self, _: u64, state: &FieldState, _: &SplitStep) -> Result<Flow> {
        if state.u.action(self.q) >= 0.5 {
            self.time = Some(state.time);
            return Ok(Flow::Stop);
        }
        Ok(Flow::Continue)
    }
}

/// First time `|u_q|^2 >= 1/2` within the configured span.
pub fn first_half_crossing(cfg: &SimConfig) -> Result<Option<f64>> {
    let mut obs = HalfCrossing { q: cfg.q, time: None };
    cnls::run_observed(cfg, None, &mut obs)?;
    Ok(obs.time)
}

pub fn sign_config() -> SimConfig {
    SimConfig {
        p: -1,
        q: 1,
        sigma: -1,
        gamma: 0.1,
        epsilon: 0.01,
        sample_stride: 10_000,
        ..SimConfig::default()
    }
}

pub fn sign_checks() -> Result<Vec<Check>> {
    let cfg = sign_config();
    let limit = cfg.final_time()?;
    let crossing = first_half_crossing(&cfg)?;
    Ok(vec![Check::new(
        "sign",
        "sigma = -1, q = -p: |u_q|^2 crosses 1/2",
        crossing.is_some_and(|t| t <= limit),
        match crossing {
            Some(t) => format!("at t = {t} (limit {limit})"),
            None => format!("no crossing before {limit}"),
        },
    )])
}

/// Exit status for a finished suite: 0 if every check passed, 1 otherwise.
pub fn exit_code(checks: &[Check]) -> i32 {
    if checks.iter().all(|c| c.passed) {
        0
    } else {
        1
    }
}
