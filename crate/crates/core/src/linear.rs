//! Linear Schrodinger equation `i w_t + w_xx + V(t, x) w = 0` with a real
//! potential built from a beating solution, `V = -eps^2 |v|^2`.
//!
//! The nonlinear `u` solves exactly this equation, so driving the linear
//! integrator with the potential the nonlinear run used reproduces `u`. The
//! same construction transfers the `H^s` growth of `u` to a linear flow with a
//! bounded, smooth potential.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cnls::{self, Flow, SimConfig, SplitStep, StepObserver, Trajectory};
use crate::error::{Error, Result};
use crate::pendulum;
use crate::spectral::{self, ModeVector, SobolevWeight, SpectralTransform};
use crate::splitting;

/// Potential samples `V(t_k, x_i)` for every step `k` of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTrajectory {
    pub dt: f64,
    pub grid: usize,
    pub values: Vec<Vec<f64>>,
}

impl PotentialTrajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rebuild `-eps^2 |v|^2` on the grid from a full-resolution recording.
pub fn record_potential(traj: &Trajectory) -> Result<PotentialTrajectory> {
    let rec = traj.recording.as_ref().ok_or(Error::Resolution { stride: 0 })?;
    if rec.stride != 1 {
        return Err(Error::Resolution { stride: rec.stride });
    }
    let eps2 = traj.config.epsilon * traj.config.epsilon;
    let mut transform = SpectralTransform::new(traj.config.truncation, traj.grid)?;
    let mut grid = vec![Complex64::new(0.0, 0.0); traj.grid];
    let values = rec
        .v
        .iter()
        .map(|v| {
            transform.modes_to_grid(v.coeffs(), &mut grid);
            grid.iter().map(|&w| cnls::potential_value(eps2, w)).collect()
        })
        .collect();
    Ok(PotentialTrajectory {
        dt: traj.dt,
        grid: traj.grid,
        values,
    })
}

/// Strang integrator for the linear equation with cached transforms.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    transform: SpectralTransform,
    half_free: Vec<Complex64>,
    grid: Vec<Complex64>,
    scratch: Vec<Complex64>,
    dt: f64,
}

impl LinearPropagator {
    pub fn new(truncation: usize, grid: usize, dt: f64) -> Result<Self> {
        Ok(Self {
            transform: SpectralTransform::new(truncation, grid)?,
            half_free: splitting::half_free_increments(truncation, dt),
            grid: vec![Complex64::new(0.0, 0.0); grid],
            scratch: vec![Complex64::new(0.0, 0.0); 2 * truncation + 1],
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step under the grid potential `potential`.
    ///
    /// # Panics
    /// If `potential` or `w` do not match the propagator's grid and truncation.
    pub fn step(&mut self, w: &mut ModeVector, potential: &[f64]) {
        assert_eq!(potential.len(), self.grid.len(), "potential grid size mismatch");
        assert_eq!(w.truncation(), self.transform.truncation(), "truncation mismatch");
        splitting::apply_free(w.coeffs_mut(), &self.half_free);
        self.transform.modes_to_grid(w.coeffs(), &mut self.grid);
        splitting::potential_increment(&mut self.grid, potential, self.dt);
        splitting::add_increment(&mut self.transform, &mut self.grid, &mut self.scratch, w.coeffs_mut());
        splitting::apply_free(w.coeffs_mut(), &self.half_free);
    }
}

/// Single free-standing linear step.
pub fn linear_step(w: &ModeVector, potential: &[f64], dt: f64) -> Result<ModeVector> {
    let mut prop = LinearPropagator::new(w.truncation(), potential.len(), dt)?;
    let mut out = w.clone();
    prop.step(&mut out, potential);
    Ok(out)
}

fn l2_distance(a: &ModeVector, b: &ModeVector) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Integrate the initial `u` of `traj` under `pot` and return the largest
/// `L^2` distance to the recorded `u` over all steps.
pub fn consistency_check(traj: &Trajectory, pot: &PotentialTrajectory) -> Result<f64> {
    let rec = traj.recording.as_ref().ok_or(Error::Resolution { stride: 0 })?;
    if rec.stride != 1 {
        return Err(Error::Resolution { stride: rec.stride });
    }
    if pot.dt != traj.dt || pot.grid != traj.grid {
        return Err(Error::Config(format!(
            "potential recorded with dt = {}, M = {} but run used dt = {}, M = {}",
            pot.dt, pot.grid, traj.dt, traj.grid
        )));
    }
    if pot.len() != rec.u.len() {
        return Err(Error::Config(format!(
            "potential has {} steps, run recorded {}",
            pot.len(),
            rec.u.len()
        )));
    }
    let mut prop = LinearPropagator::new(traj.config.truncation, pot.grid, pot.dt)?;
    let mut w = traj.initial.u.clone();
    let mut worst = 0.0f64;
    for (values, u) in pot.values.iter().zip(&rec.u) {
        prop.step(&mut w, values);
        worst = worst.max(l2_distance(&w, u));
    }
    Ok(worst)
}

/// Diagnostics of the linear solution at a sampled step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSample {
    pub step: u64,
    pub time: f64,
    pub hs_norm: f64,
    pub l2_norm: f64,
    /// Fourier coefficients of the potential used by this step (of the
    /// initial potential at step 0).
    pub potential: ModeVector,
}

/// Runs the linear equation alongside a nonlinear run, fed with the potential
/// of each nonlinear step as it is produced, so nothing is stored per step.
#[derive(Debug)]
pub struct LockstepLinear {
    propagator: LinearPropagator,
    potential_transform: SpectralTransform,
    potential_grid: Vec<Complex64>,
    w: ModeVector,
    initial_l2: f64,
    order: f64,
    sample_stride: u64,
    pub max_deviation: f64,
    pub max_l2_drift: f64,
    pub samples: Vec<LinearSample>,
}

impl LockstepLinear {
    /// Start from the nonlinear run's initial state; `sample_stride` controls
    /// how often `H^s` norms and potential spectra are kept.
    pub fn new(cfg: &SimConfig, initial: &cnls::FieldState, sample_stride: u64) -> Result<Self> {
        let n = cfg.truncation;
        let m = cfg.grid_size();
        let mut me = Self {
            propagator: LinearPropagator::new(n, m, cfg.time_step())?,
            potential_transform: SpectralTransform::new(2 * n, m)?,
            potential_grid: vec![Complex64::new(0.0, 0.0); m],
            w: initial.u.clone(),
            initial_l2: initial.u.mass().sqrt(),
            order: cfg.sobolev_order,
            sample_stride: sample_stride.max(1),
            max_deviation: 0.0,
            max_l2_drift: 0.0,
            samples: Vec::new(),
        };
        let eps2 = cfg.epsilon * cfg.epsilon;
        let mut transform = SpectralTransform::new(n, m)?;
        let mut vg = vec![Complex64::new(0.0, 0.0); m];
        transform.modes_to_grid(initial.v.coeffs(), &mut vg);
        let v0: Vec<f64> = vg.iter().map(|&w| cnls::potential_value(eps2, w)).collect();
        me.push_sample(0, 0.0, &v0);
        Ok(me)
    }

    pub fn solution(&self) -> &ModeVector {
        &self.w
    }

    fn push_sample(&mut self, step: u64, time: f64, potential: &[f64]) {
        for (g, &v) in self.potential_grid.iter_mut().zip(potential) {
            *g = Complex64::new(v, 0.0);
        }
        let mut modes = ModeVector::zeros(self.potential_transform.truncation());
        self.potential_transform
            .grid_to_modes(&mut self.potential_grid, modes.coeffs_mut());
        self.samples.push(LinearSample {
            step,
            time,
            hs_norm: spectral::sobolev_norm(&self.w, self.order, SobolevWeight::Inhomogeneous),
            l2_norm: self.w.mass().sqrt(),
            potential: modes,
        });
    }
}

impl StepObserver for LockstepLinear {
    fn on_step(&mut self, step: u64, state: &cnls::FieldState, stepper: &SplitStep) -> Result<Flow> {
        self.propagator.step(&mut self.w, stepper.potential());
        self.max_deviation = self.max_deviation.max(l2_distance(&self.w, &state.u));
        let drift = (self.w.mass().sqrt() - self.initial_l2).abs() / self.initial_l2;
        self.max_l2_drift = self.max_l2_drift.max(drift);
        if step.is_multiple_of(self.sample_stride) {
            self.push_sample(step, state.time, stepper.potential());
        }
        Ok(Flow::Continue)
    }
}

/// Parameters of a norm-inflation experiment; `p` is always 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflationParams {
    pub q: i64,
    pub s: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Defaults to one exchange time `T_gamma / eps^2`.
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    /// Truncation; defaults to `max(32, 2q)`.
    #[serde(rename = "N")]
    pub truncation: Option<usize>,
    /// Decay rate `B` of the Gevrey seminorm; fitted from the data when absent.
    pub gevrey_rate: Option<f64>,
    /// Largest step count considered feasible for the asymptotic-scaling verdict.
    pub budget_steps: u64,
    /// Number of sampled times (approximately).
    pub samples: u64,
}

impl Default for InflationParams {
    fn default() -> Self {
        Self {
            q: 4,
            s: 1.0,
            alpha: 1.0,
            gamma: 0.05,
            epsilon: 0.01,
            t_end: None,
            dt: None,
            truncation: None,
            gevrey_rate: None,
            budget_steps: 100_000_000,
            samples: 1000,
        }
    }
}

impl InflationParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.q < 1 {
            bad.push(format!("q must be at least 1, got {}", self.q));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            bad.push(format!("s must be nonnegative, got {}", self.s));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            bad.push(format!("alpha must be at least 1, got {}", self.alpha));
        }
        if self.samples == 0 {
            bad.push("samples must be at least 1".into());
        }
        if let Some(b) = self.gevrey_rate {
            if !(b >= 0.0 && b.is_finite()) {
                bad.push(format!("gevrey_rate must be nonnegative, got {b}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            p: 0,
            q: self.q,
            gamma: self.gamma,
            epsilon: self.epsilon,
            truncation: self.truncation.unwrap_or((2 * self.q.unsigned_abs() as usize).max(32)),
            grid: None,
            dt: self.dt,
            t_end: None,
            sample_stride: 1,
            sigma: 1,
            seed: 0,
            perturbation: 0.0,
            sobolev_order: self.s,
        };
        let t_end = match self.t_end {
            Some(t) => t,
            None => cfg.reduced_half_period()? / (self.epsilon * self.epsilon),
        };
        let steps = (t_end / cfg.time_step()).round() as u64;
        Ok(SimConfig {
            t_end: Some(t_end),
            sample_stride: (steps / self.samples).max(1),
            ..cfg
        })
    }
}

/// `sqrt(((1+q^2)^s (1-g) + g) / ((1+q^2)^s g + (1-g)))`: the inhomogeneous
/// `H^s` ratio after the actions on modes 0 and q are exchanged.
pub fn predicted_ratio(q: i64, s: f64, gamma: f64) -> f64 {
    let w = (1.0 + (q * q) as f64).powf(s);
    ((w * (1.0 - gamma) + gamma) / (w * gamma + (1.0 - gamma))).sqrt()
}

/// Parameters the asymptotic construction would use, and whether running it
/// fits in the step budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticScaling {
    /// `e^{-q^{1/alpha} / 2}`
    pub epsilon: f64,
    /// `q^{-2s}`
    pub gamma: f64,
    pub t_gamma: Option<f64>,
    /// `T_gamma / eps^2`
    pub t_q: Option<f64>,
    pub dt: f64,
    pub required_steps: Option<f64>,
    pub budget_steps: u64,
    pub feasible: bool,
    pub reason: String,
}

pub fn asymptotic_scaling(q: i64, s: f64, alpha: f64, budget_steps: u64) -> AsymptoticScaling {
    let qa = (q as f64).powf(1.0 / alpha);
    let epsilon = (-0.5 * qa).exp();
    let gamma = (q as f64).powf(-2.0 * s);
    let dt = cnls::default_dt(epsilon);
    match pendulum::period(gamma) {
        Ok(per) => {
            let t_q = per.t_gamma / (epsilon * epsilon);
            let required = (t_q / dt).ceil();
            let feasible = required <= budget_steps as f64;
            let reason = if feasible {
                format!("{required:.3e} steps fit the budget of {budget_steps}")
            } else {
                format!("T_q = {t_q:.3e} needs {required:.3e} steps at dt = {dt}, budget is {budget_steps}")
            };
            AsymptoticScaling {
                epsilon,
                gamma,
                t_gamma: Some(per.t_gamma),
                t_q: Some(t_q),
                dt,
                required_steps: Some(required),
                budget_steps,
                feasible,
                reason,
            }
        }
        Err(e) => AsymptoticScaling {
            epsilon,
            gamma,
            t_gamma: None,
            t_q: None,
            dt,
            required_steps: None,
            budget_steps,
            feasible: false,
            reason: format!("no beating orbit at gamma = {gamma}: {e}"),
        },
    }
}

/// How the Gevrey decay rate was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GevreyRateRule {
    Configured,
    /// Median over sampled times of the tail-fit rate of the potential
    /// spectrum with the carrier modes `0, +-q` excluded, clamped at 0.
    MedianTailFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationPoint {
    pub t: f64,
    pub hs_norm: f64,
    pub l2_norm: f64,
    pub gevrey: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub q: i64,
    pub s: f64,
    pub alpha: f64,
    pub p: i64,
    pub gamma: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub steps: u64,
    pub t_run: f64,
    pub growth_ratio: f64,
    pub predicted_ratio: f64,
    pub l2_drift: f64,
    /// Largest `L^2` distance between the linear solution and the nonlinear `u`.
    pub consistency_deviation: f64,
    pub gevrey_rate: f64,
    pub gevrey_rate_rule: GevreyRateRule,
    /// Sup over sampled times of the seminorm of `V(t)` at `gevrey_rate`.
    pub gevrey_bound_series: f64,
    pub gevrey_min: f64,
    /// Max over min of the sampled seminorms.
    pub gevrey_variation: f64,
    /// Rate `ln(1/eps^2) / q^{1/alpha}` at which the carrier term of `V` has
    /// unit weight, and the max/min variation it gives (reported only).
    pub scaled_rate: f64,
    pub scaled_rate_variation: f64,
    pub asymptotic_scaling: AsymptoticScaling,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<InflationPoint>,
}

impl InflationReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,hs_norm,l2_norm,gevrey_V")?;
        for p in &self.series {
            writeln!(w, "{},{},{},{}", p.t, p.hs_norm, p.l2_norm, p.gevrey)?;
        }
        Ok(())
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Seminorms of the sampled potentials at rate `b`, with (max, min).
fn seminorm_series(samples: &[LinearSample], alpha: f64, b: f64) -> (Vec<f64>, f64, f64) {
    let series: Vec<f64> = samples
        .iter()
        .map(|s| spectral::gevrey_seminorm(&s.potential, alpha, b))
        .collect();
    let max = series.iter().copied().fold(0.0, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    (series, max, min)
}

/// Run the beating solution with `p = 0`, feed its potential to the linear
/// equation, and measure the `H^s` growth and the size of the potential.
pub fn inflation_experiment(params: &InflationParams) -> Result<InflationReport> {
    params.validate()?;
    let cfg = params.sim_config()?;
    let initial = cnls::initial_state(&cfg)?;
    let mut linear = LockstepLinear::new(&cfg, &initial, cfg.sample_stride)?;
    let traj = cnls::run_observed(&cfg, None, &mut linear)?;
    if linear.samples.last().map(|s| s.step) != Some(traj.steps) {
        // make sure the final time is sampled
        let pot = linear.samples.last().map(|s| s.potential.clone());
        if let Some(pot) = pot {
            linear.samples.push(LinearSample {
                step: traj.steps,
                time: traj.last.time,
                hs_norm: spectral::sobolev_norm(linear.solution(), cfg.sobolev_order, SobolevWeight::Inhomogeneous),
                l2_norm: linear.solution().mass().sqrt(),
                potential: pot,
            });
        }
    }

    let carrier = [0, params.q, -params.q];
    let (rate, rule) = match params.gevrey_rate {
        Some(b) => (b, GevreyRateRule::Configured),
        None => {
            let fitted: Vec<f64> = linear
                .samples
                .iter()
                .filter_map(|s| spectral::tail_decay_fit(&s.potential, &carrier).ok())
                .map(|f| f.rate)
                .collect();
            let b = median(fitted).ok_or_else(|| {
                Error::DiagnosticUnavailable("no sampled potential admits a tail fit".into())
            })?;
            (b.max(0.0), GevreyRateRule::MedianTailFit)
        }
    };
    let (series, gmax, gmin) = seminorm_series(&linear.samples, params.alpha, rate);
    let scaled_rate = (1.0 / (params.epsilon * params.epsilon)).ln() / (params.q as f64).powf(1.0 / params.alpha);
    let (_, smax, smin) = seminorm_series(&linear.samples, params.alpha, scaled_rate);

    let first = &linear.samples[0];
    let last = linear.samples.last().expect("initial sample present");
    let points = linear
        .samples
        .iter()
        .zip(series)
        .map(|(s, g)| InflationPoint {
            t: s.time,
            hs_norm: s.hs_norm,
            l2_norm: s.l2_norm,
            gevrey: g,
        })
        .collect();
    Ok(InflationReport {
        q: params.q,
        s: params.s,
        alpha: params.alpha,
        p: 0,
        gamma: params.gamma,
        epsilon: params.epsilon,
        dt: traj.dt,
        steps: traj.steps,
        t_run: traj.last.time,
        growth_ratio: last.hs_norm / first.hs_norm,
        predicted_ratio: predicted_ratio(params.q, params.s, params.gamma),
        l2_drift: linear.max_l2_drift,
        consistency_deviation: linear.max_deviation,
        gevrey_rate: rate,
        gevrey_rate_rule: rule,
        gevrey_bound_series: gmax,
        gevrey_min: gmin,
        gevrey_variation: gmax / gmin,
        scaled_rate,
        scaled_rate_variation: smax / smin,
        asymptotic_scaling: asymptotic_scaling(params.q, params.s, params.alpha, params.budget_steps),
        warnings: traj.warnings,
        series: points,
    })
}
