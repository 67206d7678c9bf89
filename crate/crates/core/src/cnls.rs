//! Strang split-step Fourier integration of the coupled cubic system
//!
//! ```text
//! i u_t + u_xx = eps^2 |v|^2 u
//! i v_t + v_xx = sigma eps^2 |u|^2 v
//! ```
//!
//! on the circle, started from two-mode data on the internal modes `p`, `q`.
//! Each step is a half free step, an exact phase rotation on the grid (both
//! moduli frozen at entry, which the rotation leaves invariant), and another
//! half free step. Mass of each field is preserved by every substep.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pendulum::{self, PendulumState};
use crate::spectral::{self, ModeVector, SobolevWeight, SpectralTransform, TailFit};
use crate::splitting;

/// Parameters of one nonlinear run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub p: i64,
    pub q: i64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Truncation `N`: modes `-N..=N` are retained.
    #[serde(rename = "N")]
    pub truncation: usize,
    /// Grid size `M`; defaults to `4(2N+1)` rounded up to a power of two.
    #[serde(rename = "M")]
    pub grid: Option<usize>,
    /// Time step; defaults to `min(5e-3, 1e-4 / eps^2)`.
    pub dt: Option<f64>,
    /// Final time; defaults to two half-periods of the reduced orbit,
    /// `2 T_gamma / eps^2`.
    pub t_end: Option<f64>,
    pub sample_stride: u64,
    pub sigma: i32,
    /// Seed for the external-mode perturbation; 0 disables it.
    pub seed: u64,
    /// External modes get moduli uniform in `[0, perturbation * eps^2)` when
    /// `seed != 0`.
    pub perturbation: f64,
    /// Sobolev order `s` for the recorded norms.
    pub sobolev_order: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 0,
            q: 2,
            gamma: 0.1,
            epsilon: 0.01,
            truncation: 32,
            grid: None,
            dt: None,
            t_end: None,
            sample_stride: 200,
            sigma: 1,
            seed: 0,
            perturbation: 1.0,
            sobolev_order: 1.0,
        }
    }
}

pub fn default_dt(epsilon: f64) -> f64 {
    5e-3f64.min(1e-4 / (epsilon * epsilon))
}

impl SimConfig {
    pub fn grid_size(&self) -> usize {
        self.grid.unwrap_or_else(|| spectral::default_grid_size(self.truncation))
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(self.epsilon))
    }

    /// Half-period `T_gamma` of the reduced orbit (slow time).
    pub fn reduced_half_period(&self) -> Result<f64> {
        Ok(pendulum::period(self.gamma)?.t_gamma)
    }

    pub fn final_time(&self) -> Result<f64> {
        match self.t_end {
            Some(t) => Ok(t),
            None => Ok(2.0 * self.reduced_half_period()? / (self.epsilon * self.epsilon)),
        }
    }

    pub fn step_count(&self) -> Result<u64> {
        Ok((self.final_time()? / self.time_step()).round() as u64)
    }

    /// Check every invariant; returns the non-fatal warnings on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        if self.p == self.q {
            bad.push(format!("p and q must differ (both {})", self.p));
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            bad.push(format!("gamma must lie in (0, 1/2), got {}", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bad.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        let needed_n = 2 * self.p.unsigned_abs().max(self.q.unsigned_abs()) as usize;
        if self.truncation < needed_n {
            bad.push(format!(
                "N = {} too small: need N >= 2 max(|p|, |q|) = {needed_n}",
                self.truncation
            ));
        }
        let needed_m = 4 * (2 * self.truncation + 1);
        if self.grid_size() < needed_m {
            bad.push(format!(
                "M = {} too small: need M >= 4(2N+1) = {needed_m}",
                self.grid_size()
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bad.push(format!("dt must be positive, got {dt}"));
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                bad.push(format!("t_end must be nonnegative, got {t}"));
            }
        }
        if self.sample_stride == 0 {
            bad.push("sample_stride must be at least 1".into());
        }
        if self.sigma != 1 && self.sigma != -1 {
            bad.push(format!("sigma must be +1 or -1, got {}", self.sigma));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            bad.push(format!("perturbation must be nonnegative, got {}", self.perturbation));
        }
        if !(self.sobolev_order >= 0.0 && self.sobolev_order.is_finite()) {
            bad.push(format!("sobolev_order must be nonnegative, got {}", self.sobolev_order));
        }
        if !bad.is_empty() {
            return Err(Error::Config(bad.join("; ")));
        }
        let mut warnings = Vec::new();
        if self.epsilon >= self.gamma * self.gamma {
            warnings.push(format!(
                "epsilon = {} >= gamma^2 = {}: outside the sufficient regime eps < gamma^2",
                self.epsilon,
                self.gamma * self.gamma
            ));
        }
        Ok(warnings)
    }
}

/// The pair `(u, v)` at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub u: ModeVector,
    pub v: ModeVector,
    pub time: f64,
}

impl FieldState {
    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// `u = sqrt(1-g) e^{ipx} + sqrt(g) e^{iqx}`, `v = sqrt(g) e^{ipx} + sqrt(1-g) e^{iqx}`.
pub fn build_initial_data(p: i64, q: i64, gamma: f64, truncation: usize) -> Result<FieldState> {
    if p == q {
        return Err(Error::Domain(format!("internal modes must differ (both {p})")));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    if p.unsigned_abs().max(q.unsigned_abs()) as usize > truncation {
        return Err(Error::Domain(format!("modes {p}, {q} exceed truncation {truncation}")));
    }
    let big = Complex64::new((1.0 - gamma).sqrt(), 0.0);
    let small = Complex64::new(gamma.sqrt(), 0.0);
    let mut u = ModeVector::zeros(truncation);
    let mut v = ModeVector::zeros(truncation);
    u.set(p, big);
    u.set(q, small);
    v.set(p, small);
    v.set(q, big);
    Ok(FieldState { u, v, time: 0.0 })
}

/// With opposite signs the two fields gain on the same mode together, so
/// `|u_q|^2 - |v_q|^2` is invariant and the mirrored data can move at most
/// `gamma` of mass. Giving `v` the same split as `u` puts the data on the
/// exchanging orbit instead.
pub fn mirror_for_opposite_sign(s: &mut FieldState, p: i64, q: i64) {
    let (a, b) = (s.v.get(p), s.v.get(q));
    s.v.set(p, b);
    s.v.set(q, a);
}

/// Put seeded noise of modulus below `amplitude` on every external mode.
pub fn perturb_external_modes(s: &mut FieldState, p: i64, q: i64, seed: u64, amplitude: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for field in [&mut s.u, &mut s.v] {
        let n = field.truncation() as i64;
        for j in -n..=n {
            if j == p || j == q {
                continue;
            }
            let r = amplitude * rng.gen::<f64>();
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            field.set(j, Complex64::from_polar(r, phase));
        }
    }
}

/// One Strang step for the coupled system, with cached transforms.
#[derive(Debug, Clone)]
pub struct SplitStep {
    transform: SpectralTransform,
    half_free: Vec<Complex64>,
    dt: f64,
    eps2: f64,
    sigma_eps2: f64,
    grid_u: Vec<Complex64>,
    grid_v: Vec<Complex64>,
    potential_u: Vec<f64>,
    potential_v: Vec<f64>,
    entry_v: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SplitStep {
    pub fn new(truncation: usize, grid: usize, dt: f64, epsilon: f64, sigma: i32) -> Result<Self> {
        let transform = SpectralTransform::new(truncation, grid)?;
        let eps2 = epsilon * epsilon;
        Ok(Self {
            transform,
            half_free: splitting::half_free_increments(truncation, dt),
            dt,
            eps2,
            sigma_eps2: sigma as f64 * eps2,
            grid_u: vec![Complex64::new(0.0, 0.0); grid],
            grid_v: vec![Complex64::new(0.0, 0.0); grid],
            potential_u: vec![0.0; grid],
            potential_v: vec![0.0; grid],
            entry_v: vec![Complex64::new(0.0, 0.0); 2 * truncation + 1],
            scratch: vec![Complex64::new(0.0, 0.0); 2 * truncation + 1],
        })
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::new(cfg.truncation, cfg.grid_size(), cfg.time_step(), cfg.epsilon, cfg.sigma)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn truncation(&self) -> usize {
        self.transform.truncation()
    }

    pub fn grid_size(&self) -> usize {
        self.transform.size()
    }

    /// Advance by one step; `time` is advanced by `dt`.
    pub fn step(&mut self, s: &mut FieldState) {
        splitting::apply_free(s.u.coeffs_mut(), &self.half_free);
        splitting::apply_free(s.v.coeffs_mut(), &self.half_free);
        self.entry_v.copy_from_slice(s.v.coeffs());

        self.transform.modes_to_grid(s.u.coeffs(), &mut self.grid_u);
        self.transform.modes_to_grid(s.v.coeffs(), &mut self.grid_v);
        for i in 0..self.grid_u.len() {
            self.potential_u[i] = potential_value(self.eps2, self.grid_v[i]);
            self.potential_v[i] = potential_value(self.sigma_eps2, self.grid_u[i]);
        }
        splitting::potential_increment(&mut self.grid_u, &self.potential_u, self.dt);
        splitting::potential_increment(&mut self.grid_v, &self.potential_v, self.dt);
        splitting::add_increment(&mut self.transform, &mut self.grid_u, &mut self.scratch, s.u.coeffs_mut());
        splitting::add_increment(&mut self.transform, &mut self.grid_v, &mut self.scratch, s.v.coeffs_mut());

        splitting::apply_free(s.u.coeffs_mut(), &self.half_free);
        splitting::apply_free(s.v.coeffs_mut(), &self.half_free);
        s.time += self.dt;
    }

    /// Potential `-eps^2 |v|^2` that rotated `u` during the last step, on the
    /// grid, evaluated at entry of the nonlinear substep.
    pub fn potential(&self) -> &[f64] {
        &self.potential_u
    }

    /// Coefficients of `v` at entry of the last nonlinear substep.
    pub fn entry_v(&self) -> &[Complex64] {
        &self.entry_v
    }
}

/// `-(coupling |w|^2)`; the single formula used for every potential value.
#[inline]
pub(crate) fn potential_value(coupling: f64, w: Complex64) -> f64 {
    -(coupling * w.norm_sqr())
}

/// One free-standing Strang step.
pub fn strang_step(s: &FieldState, dt: f64, epsilon: f64, sigma: i32) -> Result<FieldState> {
    let n = s.u.truncation();
    if s.v.truncation() != n {
        return Err(Error::Domain("u and v must share a truncation".into()));
    }
    let mut stepper = SplitStep::new(n, spectral::default_grid_size(n), dt, epsilon, sigma)?;
    let mut out = s.clone();
    stepper.step(&mut out);
    Ok(out)
}

/// Mass, momentum and energy of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedQuantities {
    pub mass_u: f64,
    pub mass_v: f64,
    pub momentum: f64,
    pub energy: f64,
}

/// Conserved quantities for the `sigma = +1` system.
pub fn conserved_quantities(s: &FieldState, epsilon: f64) -> ConservedQuantities {
    conserved_quantities_signed(s, epsilon, 1)
}

/// Momentum is `sum_j j (|u_j|^2 + sigma |v_j|^2)` and energy is
/// `sum_j j^2 (|u_j|^2 + sigma |v_j|^2) + eps^2 (1/M) sum_i |u_i|^2 |v_i|^2`;
/// both are conserved by the flow for either sign.
pub fn conserved_quantities_signed(s: &FieldState, epsilon: f64, sigma: i32) -> ConservedQuantities {
    let n = s.u.truncation();
    let mut transform = SpectralTransform::new(n, spectral::default_grid_size(n))
        .expect("default grid always fits");
    Diagnostics::quantities(&mut transform, s, epsilon, sigma)
}

/// Action coordinates of the two-mode reduction, extracted from a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoordinates {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// `arg u_q - arg u_p + arg v_p - arg v_q`; `None` when any of the four
    /// internal actions is below `1e-12`.
    pub psi0: Option<f64>,
    pub external_action: f64,
}

const ANGLE_FLOOR: f64 = 1e-12;

/// `K0 = I_q`, `K1 = I_p + I_q`, `K2 = J_p + J_q`, `K3 = I_q + J_q`.
/// The angle is reported in `(-pi, pi]`; [`PhaseUnwrapper`] makes it
/// continuous across a run.
pub fn extract_reduced(s: &FieldState, p: i64, q: i64) -> ReducedCoordinates {
    let (up, uq, vp, vq) = (s.u.get(p), s.u.get(q), s.v.get(p), s.v.get(q));
    let (ip, iq, jp, jq) = (up.norm_sqr(), uq.norm_sqr(), vp.norm_sqr(), vq.norm_sqr());
    let psi0 = (ip.min(iq).min(jp).min(jq) >= ANGLE_FLOOR).then(|| (uq * up.conj() * vp * vq.conj()).arg());
    let external_action = s
        .u
        .iter()
        .chain(s.v.iter())
        .filter(|(j, _)| *j != p && *j != q)
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>();
    ReducedCoordinates {
        k0: iq,
        k1: ip + iq,
        k2: jp + jq,
        k3: iq + jq,
        psi0,
        external_action,
    }
}

/// Keeps a sequence of wrapped angles continuous.
#[derive(Debug, Clone, Default)]
pub struct PhaseUnwrapper {
    last: Option<f64>,
}

impl PhaseUnwrapper {
    pub fn unwrap(&mut self, raw: Option<f64>) -> Option<f64> {
        let raw = raw?;
        let value = match self.last {
            None => raw,
            Some(prev) => prev + pendulum::wrap_angle(raw - prev),
        };
        self.last = Some(value);
        Some(value)
    }
}

/// Diagnostics recorded every `sample_stride` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub time: f64,
    pub u_p_sq: f64,
    pub u_q_sq: f64,
    pub v_p_sq: f64,
    pub v_q_sq: f64,
    pub conserved: ConservedQuantities,
    pub reduced: ReducedCoordinates,
    /// `sum_j |j|^{2s} |u_j|^2`
    pub u_hdot_s_sq: f64,
    /// `sqrt(sum_j (1 + j^2)^s |u_j|^2)`
    pub u_h_s: f64,
    pub tail: Option<TailFit>,
}

/// Column order of the time-series CSV.
pub const CSV_COLUMNS: [&str; 21] = [
    "step",
    "t",
    "u_p_sq",
    "u_q_sq",
    "v_p_sq",
    "v_q_sq",
    "mass_u",
    "mass_v",
    "momentum",
    "energy",
    "K0",
    "K1",
    "K2",
    "K3",
    "psi0",
    "external_action",
    "u_hdot_s_sq",
    "u_h_s",
    "tail_C",
    "tail_rho",
    "tail_points",
];

impl Sample {
    fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let c = &self.conserved;
        let r = &self.reduced;
        [
            self.step.to_string(),
            self.time.to_string(),
            self.u_p_sq.to_string(),
            self.u_q_sq.to_string(),
            self.v_p_sq.to_string(),
            self.v_q_sq.to_string(),
            c.mass_u.to_string(),
            c.mass_v.to_string(),
            c.momentum.to_string(),
            c.energy.to_string(),
            r.k0.to_string(),
            r.k1.to_string(),
            r.k2.to_string(),
            r.k3.to_string(),
            opt(r.psi0),
            r.external_action.to_string(),
            self.u_hdot_s_sq.to_string(),
            self.u_h_s.to_string(),
            opt(self.tail.map(|t| t.amplitude)),
            opt(self.tail.map(|t| t.rate)),
            self.tail.map(|t| t.points.to_string()).unwrap_or_default(),
        ]
        .join(",")
    }
}

/// Full-resolution record of a run: for each recorded step, `v` at entry of
/// the nonlinear substep and `u` after the step. Entry `k` belongs to step
/// `1 + k * stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryRecording {
    pub stride: u64,
    pub v: Vec<ModeVector>,
    pub u: Vec<ModeVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SimConfig,
    pub warnings: Vec<String>,
    pub steps: u64,
    pub dt: f64,
    pub grid: usize,
    pub initial: FieldState,
    pub last: FieldState,
    pub samples: Vec<Sample>,
    pub recording: Option<EntryRecording>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for s in &self.samples {
            writeln!(w, "{}", s.csv_row())?;
        }
        Ok(())
    }
}

/// What a [`StepObserver`] wants after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Hook called after every step with the new state and the integrator that
/// produced it (whose [`SplitStep::potential`] is the potential just used).
pub trait StepObserver {
    fn on_step(&mut self, step: u64, state: &FieldState, stepper: &SplitStep) -> Result<Flow>;
}

pub struct NoObserver;

impl StepObserver for NoObserver {
    fn on_step(&mut self, _: u64, _: &FieldState, _: &SplitStep) -> Result<Flow> {
        Ok(Flow::Continue)
    }
}

/// Cached-transform diagnostics.
struct Diagnostics {
    transform: SpectralTransform,
    grid_u: Vec<Complex64>,
    grid_v: Vec<Complex64>,
}

impl Diagnostics {
    fn new(truncation: usize, grid: usize) -> Result<Self> {
        Ok(Self {
            transform: SpectralTransform::new(truncation, grid)?,
            grid_u: vec![Complex64::new(0.0, 0.0); grid],
            grid_v: vec![Complex64::new(0.0, 0.0); grid],
        })
    }

    fn quantities(
        transform: &mut SpectralTransform,
        s: &FieldState,
        epsilon: f64,
        sigma: i32,
    ) -> ConservedQuantities {
        let mut gu = vec![Complex64::new(0.0, 0.0); transform.size()];
        let mut gv = gu.clone();
        Self::quantities_into(transform, &mut gu, &mut gv, s, epsilon, sigma)
    }

    fn quantities_into(
        transform: &mut SpectralTransform,
        gu: &mut [Complex64],
        gv: &mut [Complex64],
        s: &FieldState,
        epsilon: f64,
        sigma: i32,
    ) -> ConservedQuantities {
        let mut mass_u = 0.0;
        let mut mass_v = 0.0;
        let mut momentum = 0.0;
        let mut quadratic = 0.0;
        for ((j, a), (_, b)) in s.u.iter().zip(s.v.iter()) {
            let (i_j, j_j) = (a.norm_sqr(), b.norm_sqr());
            let jf = j as f64;
            mass_u += i_j;
            mass_v += j_j;
            momentum += jf * (i_j + sigma as f64 * j_j);
            quadratic += jf * jf * (i_j + sigma as f64 * j_j);
        }
        transform.modes_to_grid(s.u.coeffs(), gu);
        transform.modes_to_grid(s.v.coeffs(), gv);
        let quartic = gu
            .iter()
            .zip(gv.iter())
            .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
            .sum::<f64>()
            / gu.len() as f64;
        ConservedQuantities {
            mass_u,
            mass_v,
            momentum,
            energy: quadratic + epsilon * epsilon * quartic,
        }
    }

    fn sample(&mut self, cfg: &SimConfig, step: u64, s: &FieldState, unwrap: &mut PhaseUnwrapper) -> Sample {
        let conserved = Self::quantities_into(
            &mut self.transform,
            &mut self.grid_u,
            &mut self.grid_v,
            s,
            cfg.epsilon,
            cfg.sigma,
        );
        let mut reduced = extract_reduced(s, cfg.p, cfg.q);
        reduced.psi0 = unwrap.unwrap(reduced.psi0);
        let order = cfg.sobolev_order;
        Sample {
            step,
            time: s.time,
            u_p_sq: s.u.action(cfg.p),
            u_q_sq: s.u.action(cfg.q),
            v_p_sq: s.v.action(cfg.p),
            v_q_sq: s.v.action(cfg.q),
            conserved,
            reduced,
            u_hdot_s_sq: spectral::sobolev_norm_sq(&s.u, order, SobolevWeight::Homogeneous),
            u_h_s: spectral::sobolev_norm(&s.u, order, SobolevWeight::Inhomogeneous),
            tail: spectral::tail_decay_fit(&s.u, &[cfg.p, cfg.q]).ok(),
        }
    }
}

/// Initial state for a configuration, including the optional perturbation.
pub fn initial_state(cfg: &SimConfig) -> Result<FieldState> {
    let mut s = build_initial_data(cfg.p, cfg.q, cfg.gamma, cfg.truncation)?;
    if cfg.sigma < 0 {
        mirror_for_opposite_sign(&mut s, cfg.p, cfg.q);
    }
    if cfg.seed != 0 && cfg.perturbation > 0.0 {
        let amp = cfg.perturbation * cfg.epsilon * cfg.epsilon;
        perturb_external_modes(&mut s, cfg.p, cfg.q, cfg.seed, amp);
    }
    Ok(s)
}

/// Run with diagnostics only.
pub fn run(cfg: &SimConfig) -> Result<Trajectory> {
    run_observed(cfg, None, &mut NoObserver)
}

/// Run, optionally keeping `v` at entry of every `record_stride`-th nonlinear
/// substep, and calling `observer` after each step.
pub fn run_observed(
    cfg: &SimConfig,
    record_stride: Option<u64>,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    let warnings = cfg.validate()?;
    let steps = cfg.step_count()?;
    let dt = cfg.time_step();
    let mut stepper = SplitStep::from_config(cfg)?;
    let mut diag = Diagnostics::new(cfg.truncation, cfg.grid_size())?;
    let mut unwrap = PhaseUnwrapper::default();

    let initial = initial_state(cfg)?;
    let mut state = initial.clone();
    let mut samples = vec![diag.sample(cfg, 0, &state, &mut unwrap)];
    let mut recording = record_stride.map(|stride| EntryRecording {
        stride: stride.max(1),
        v: Vec::new(),
        u: Vec::new(),
    });

    let mut taken = 0;
    for step in 1..=steps {
        stepper.step(&mut state);
        state.time = step as f64 * dt;
        taken = step;
        if !state.is_finite() {
            return Err(Error::BlowUp { step });
        }
        if let Some(rec) = recording.as_mut() {
            if (step - 1) % rec.stride == 0 {
                rec.v.push(ModeVector::from_coeffs(stepper.entry_v().to_vec())?);
                rec.u.push(state.u.clone());
            }
        }
        let flow = observer.on_step(step, &state, &stepper)?;
        if step % cfg.sample_stride == 0 || step == steps || flow == Flow::Stop {
            samples.push(diag.sample(cfg, step, &state, &mut unwrap));
        }
        if flow == Flow::Stop {
            break;
        }
    }

    Ok(Trajectory {
        config: cfg.clone(),
        warnings,
        steps: taken,
        dt,
        grid: cfg.grid_size(),
        initial,
        last: state,
        samples,
        recording,
    })
}

/// Summary of a run against the reduced-pendulum prediction and the
/// conservation laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatReport {
    pub t_gamma: f64,
    /// Physical time `T_gamma / eps^2` of the predicted first exchange.
    pub exchange_time: f64,
    pub max_uq_deviation: f64,
    pub uq_sq_at_exchange: f64,
    pub max_mass_drift: f64,
    pub max_momentum_drift: f64,
    pub max_energy_drift: f64,
    pub max_external_action: f64,
    pub max_k_drift: [f64; 3],
    pub max_sobolev_residual: f64,
    pub max_pairing_gap: f64,
    /// First sampled time with `|u_q|^2 >= 1/2`.
    pub first_half_crossing: Option<f64>,
}

fn relative_drift(now: f64, start: f64) -> f64 {
    (now - start).abs() / start.abs().max(f64::MIN_POSITIVE)
}

/// Compare a trajectory with the reduced pendulum started at `(0, gamma)`.
pub fn analyze(traj: &Trajectory) -> Result<BeatReport> {
    let cfg = &traj.config;
    let eps2 = cfg.epsilon * cfg.epsilon;
    let t_gamma = cfg.reduced_half_period()?;
    let exchange_time = t_gamma / eps2;
    let slow_times: Vec<f64> = traj.samples.iter().map(|s| eps2 * s.time).collect();
    let predicted = pendulum::sample_at(PendulumState::new(0.0, cfg.gamma), &slow_times, 1e-3);

    let first = traj.samples.first().expect("at least the initial sample");
    let c0 = first.conserved;
    let r0 = first.reduced;
    let s = cfg.sobolev_order;
    let (ps, qs) = ((cfg.p.abs() as f64).powf(2.0 * s), (cfg.q.abs() as f64).powf(2.0 * s));
    let momentum_scale = c0.momentum.abs().max(1.0);

    let mut rep = BeatReport {
        t_gamma,
        exchange_time,
        max_uq_deviation: 0.0,
        uq_sq_at_exchange: f64::NAN,
        max_mass_drift: 0.0,
        max_momentum_drift: 0.0,
        max_energy_drift: 0.0,
        max_external_action: 0.0,
        max_k_drift: [0.0; 3],
        max_sobolev_residual: 0.0,
        max_pairing_gap: 0.0,
        first_half_crossing: None,
    };
    let mut nearest = f64::INFINITY;
    for (sample, pred) in traj.samples.iter().zip(&predicted) {
        let c = sample.conserved;
        let r = sample.reduced;
        rep.max_uq_deviation = rep.max_uq_deviation.max((sample.u_q_sq - pred.k).abs());
        if (sample.time - exchange_time).abs() < nearest {
            nearest = (sample.time - exchange_time).abs();
            rep.uq_sq_at_exchange = sample.u_q_sq;
        }
        rep.max_mass_drift = rep
            .max_mass_drift
            .max(relative_drift(c.mass_u, c0.mass_u))
            .max(relative_drift(c.mass_v, c0.mass_v));
        rep.max_momentum_drift = rep
            .max_momentum_drift
            .max((c.momentum - c0.momentum).abs() / momentum_scale);
        rep.max_energy_drift = rep.max_energy_drift.max(relative_drift(c.energy, c0.energy));
        rep.max_external_action = rep.max_external_action.max(r.external_action);
        for (slot, (now, start)) in rep
            .max_k_drift
            .iter_mut()
            .zip([(r.k1, r0.k1), (r.k2, r0.k2), (r.k3, r0.k3)])
        {
            *slot = slot.max((now - start).abs());
        }
        let formula = (qs - ps) * pred.k + ps;
        rep.max_sobolev_residual = rep.max_sobolev_residual.max((sample.u_hdot_s_sq - formula).abs());
        rep.max_pairing_gap = rep
            .max_pairing_gap
            .max((sample.u_q_sq - sample.v_p_sq).abs())
            .max((sample.u_p_sq - sample.v_q_sq).abs());
        if rep.first_half_crossing.is_none() && sample.u_q_sq >= 0.5 {
            rep.first_half_crossing = Some(sample.time);
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_data_examples() {
        let g = 0.1;
        let s = build_initial_data(0, 2, g, 8).unwrap();
        assert!((s.u.mass() - 1.0).abs() < 1e-15);
        assert!((s.v.mass() - 1.0).abs() < 1e-15);
        assert!((s.u.action(2) - g).abs() < 1e-16);
        assert!((s.v.action(0) - g).abs() < 1e-16);
        let r = extract_reduced(&s, 0, 2);
        assert!((r.k0 - g).abs() < 1e-16);
        for k in [r.k1, r.k2, r.k3] {
            assert!((k - 1.0).abs() < 1e-15);
        }
        assert_eq!(r.psi0, Some(0.0));
        assert_eq!(r.external_action, 0.0);
        assert!(build_initial_data(1, 1, g, 8).is_err());
        assert!(build_initial_data(0, 2, 0.5, 8).is_err());
    }

    #[test]
    fn gauge_and_phase_checks() {
        let s = build_initial_data(-1, 3, 0.2, 6).unwrap();
        let theta = 0.9;
        let rot = Complex64::cis(theta);
        let mut both = s.clone();
        both.u.set(3, s.u.get(3) * rot);
        both.v.set(3, s.v.get(3) * rot);
        let r = extract_reduced(&both, -1, 3);
        let r0 = extract_reduced(&s, -1, 3);
        assert!((r.psi0.unwrap() - r0.psi0.unwrap()).abs() < 1e-15);
        assert!((r.k0 - r0.k0).abs() < 1e-16 && (r.k3 - r0.k3).abs() < 1e-15);

        let mut only_u = s.clone();
        only_u.u.set(3, s.u.get(3) * rot);
        assert!((extract_reduced(&only_u, -1, 3).psi0.unwrap() - theta).abs() < 1e-15);
    }

    #[test]
    fn angle_undefined_when_a_mode_is_empty() {
        let mut s = build_initial_data(0, 2, 0.2, 4).unwrap();
        s.v.set(0, c(0.0, 0.0));
        assert_eq!(extract_reduced(&s, 0, 2).psi0, None);
    }

    #[test]
    fn unwrapper_removes_jumps() {
        let mut w = PhaseUnwrapper::default();
        let raw = [3.0, -3.1, -2.9, 3.0, 2.9];
        let out: Vec<f64> = raw.iter().map(|&r| w.unwrap(Some(r)).unwrap()).collect();
        assert!(out.windows(2).all(|p| (p[1] - p[0]).abs() < 1.0));
        assert_eq!(w.unwrap(None), None);
    }

    #[test]
    fn zero_coupling_is_free_flow() {
        let s = build_initial_data(1, -3, 0.3, 6).unwrap();
        let mut s = s;
        s.u.set(2, c(0.1, -0.2));
        let dt = 0.37;
        let next = strang_step(&s, dt, 0.0, 1).unwrap();
        for (j, a) in s.u.iter() {
            let expected = a * Complex64::cis(-((j * j) as f64) * dt);
            assert!((next.u.get(j) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn shared_single_mode_is_exact() {
        // With both fields on one mode the moduli are constant in x and the
        // solution is u(t) = a e^{-i p^2 t} e^{-i eps^2 |b|^2 t} e^{ipx}.
        let (p, a, b, eps, dt) = (3, c(0.6, 0.3), c(-0.2, 0.5), 0.4, 0.05);
        let mut s = FieldState {
            u: ModeVector::single(6, p, a),
            v: ModeVector::single(6, p, b),
            time: 0.0,
        };
        let mut stepper = SplitStep::new(6, 64, dt, eps, 1).unwrap();
        let steps = 40;
        for _ in 0..steps {
            stepper.step(&mut s);
        }
        let t = steps as f64 * dt;
        let e2 = eps * eps;
        let u_exact = a * Complex64::cis(-((p * p) as f64) * t - e2 * b.norm_sqr() * t);
        let v_exact = b * Complex64::cis(-((p * p) as f64) * t - e2 * a.norm_sqr() * t);
        assert!((s.u.get(p) - u_exact).norm() < 1e-13);
        assert!((s.v.get(p) - v_exact).norm() < 1e-13);
        assert!((s.time - t).abs() < 1e-12);
    }

    fn generic_state() -> FieldState {
        let mut s = build_initial_data(0, 1, 0.3, 8).unwrap();
        s.u.set(-1, c(0.2, 0.1));
        s.v.set(2, c(-0.1, 0.25));
        s
    }

    fn evolve(s0: &FieldState, dt: f64, t: f64, eps: f64, sigma: i32) -> FieldState {
        let mut stepper = SplitStep::new(8, 128, dt, eps, sigma).unwrap();
        let mut s = s0.clone();
        for _ in 0..(t / dt).round() as usize {
            stepper.step(&mut s);
        }
        s
    }

    fn distance(a: &FieldState, b: &FieldState) -> f64 {
        let d = |x: &ModeVector, y: &ModeVector| -> f64 {
            x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| (p - q).norm_sqr()).sum()
        };
        (d(&a.u, &b.u) + d(&a.v, &b.v)).sqrt()
    }

    #[test]
    fn second_order_convergence() {
        let s0 = generic_state();
        let (eps, t) = (1.5, 1.0);
        let reference = evolve(&s0, 1e-4, t, eps, 1);
        let e1 = distance(&evolve(&s0, 0.02, t, eps, 1), &reference);
        let e2 = distance(&evolve(&s0, 0.01, t, eps, 1), &reference);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() <= 1.0, "ratio {ratio}");
    }

    #[test]
    fn mass_and_momentum_are_conserved_when_resolved() {
        // the spectrum stays far inside the truncation, so nothing is lost
        // when the grid product is projected back onto |j| <= N
        let mut s = build_initial_data(0, 1, 0.3, 32).unwrap();
        s.u.set(-1, c(0.2, 0.1));
        s.v.set(2, c(-0.1, 0.25));
        let q0 = conserved_quantities(&s, 0.5);
        let mut stepper = SplitStep::new(32, 512, 0.01, 0.5, 1).unwrap();
        for _ in 0..400 {
            stepper.step(&mut s);
        }
        let q = conserved_quantities(&s, 0.5);
        assert!((q.mass_u / q0.mass_u - 1.0).abs() < 1e-13);
        assert!((q.mass_v / q0.mass_v - 1.0).abs() < 1e-13);
        assert!((q.momentum - q0.momentum).abs() < 1e-12);
        assert!((q.energy / q0.energy - 1.0).abs() < 1e-4);
    }

    #[test]
    fn conserved_quantities_on_initial_data() {
        let (p, q, g, eps) = (-1, 3, 0.2, 0.3);
        let s = build_initial_data(p, q, g, 8).unwrap();
        let cq = conserved_quantities(&s, eps);
        assert!((cq.momentum - (p + q) as f64).abs() < 1e-14);
        // independent real-space quadrature of |u|^2 |v|^2 at a different size
        let n = 200;
        let quartic: f64 = (0..n)
            .map(|i| {
                let x = std::f64::consts::TAU * i as f64 / n as f64;
                let u: Complex64 = s.u.iter().map(|(j, cj)| cj * Complex64::cis(j as f64 * x)).sum();
                let v: Complex64 = s.v.iter().map(|(j, cj)| cj * Complex64::cis(j as f64 * x)).sum();
                u.norm_sqr() * v.norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        let quadratic = ((p * p + q * q) as f64) * 1.0;
        assert!((cq.energy - quadratic - eps * eps * quartic).abs() < 1e-13);
    }

    #[test]
    fn signed_energy_is_conserved() {
        let s0 = generic_state();
        let e0 = conserved_quantities_signed(&s0, 1.2, -1).energy;
        let s = evolve(&s0, 0.005, 2.0, 1.2, -1);
        let e = conserved_quantities_signed(&s, 1.2, -1).energy;
        assert!((e - e0).abs() < 1e-3 * e0.abs().max(1.0), "{e} vs {e0}");
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig {
            epsilon: 1e-3,
            ..SimConfig::default()
        };
        assert!(ok.validate().unwrap().is_empty());
        let bad = SimConfig {
            gamma: 0.6,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = SimConfig {
            q: 0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            grid: Some(100),
            ..SimConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("4(2N+1)"));
        let bad = SimConfig {
            truncation: 3,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            sigma: 0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());

        let mut warn = SimConfig {
            gamma: 0.05,
            epsilon: 0.01,
            ..SimConfig::default()
        };
        assert_eq!(warn.validate().unwrap().len(), 1);
        warn.epsilon = 0.001;
        assert!(warn.validate().unwrap().is_empty());
    }

    #[test]
    fn default_step_rule() {
        assert_eq!(default_dt(0.01), 5e-3);
        assert!((default_dt(1.0) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn short_run_records_and_samples() {
        let cfg = SimConfig {
            truncation: 8,
            epsilon: 0.3,
            gamma: 0.2,
            dt: Some(0.01),
            t_end: Some(1.0),
            sample_stride: 10,
            ..SimConfig::default()
        };
        let traj = run_observed(&cfg, Some(1), &mut NoObserver).unwrap();
        assert_eq!(traj.steps, 100);
        assert_eq!(traj.samples.len(), 11);
        assert_eq!(traj.recording.as_ref().unwrap().v.len(), 100);
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert_eq!(text.lines().next().unwrap().split(',').count(), CSV_COLUMNS.len());
        let again = run(&cfg).unwrap();
        assert_eq!(again.samples, traj.samples);
    }

    #[test]
    fn perturbation_is_seeded_and_small() {
        let cfg = SimConfig {
            truncation: 8,
            seed: 42,
            perturbation: 2.0,
            ..SimConfig::default()
        };
        let a = initial_state(&cfg).unwrap();
        let b = initial_state(&cfg).unwrap();
        assert_eq!(a, b);
        let bound = 2.0 * cfg.epsilon * cfg.epsilon;
        for (j, c) in a.u.iter().chain(a.v.iter()) {
            if j != cfg.p && j != cfg.q {
                assert!(c.norm() < bound && c.norm() > 0.0);
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let mut cfg = SimConfig {
            truncation: 4,
            dt: Some(0.01),
            t_end: Some(0.05),
            ..SimConfig::default()
        };
        cfg.epsilon = 1e200;
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1 }), "{err}");
    }

    #[test]
    fn opposite_sign_data_exchange_fully() {
        let mut cfg = SimConfig {
            p: -1,
            q: 1,
            sigma: -1,
            epsilon: 0.1,
            truncation: 8,
            sample_stride: 50,
            ..SimConfig::default()
        };
        let s = initial_state(&cfg).unwrap();
        assert_eq!(s.v.get(-1), s.u.get(-1));
        assert_eq!(s.v.get(1), s.u.get(1));
        let peak = |cfg: &SimConfig| {
            run(cfg)
                .unwrap()
                .samples
                .iter()
                .map(|x| x.u_q_sq)
                .fold(0.0, f64::max)
        };
        assert!(peak(&cfg) > 0.85);
        // mirrored data with opposite signs can only gain gamma
        cfg.sigma = 1;
        let mirrored = initial_state(&cfg).unwrap();
        cfg.sigma = -1;
        let mut stepper = SplitStep::from_config(&cfg).unwrap();
        let mut st = mirrored;
        let mut top = 0.0f64;
        for _ in 0..cfg.step_count().unwrap() {
            stepper.step(&mut st);
            top = top.max(st.u.action(1));
        }
        assert!(top <= 2.0 * cfg.gamma + 1e-3, "{top}");
    }
}
