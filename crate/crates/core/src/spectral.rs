//! Truncated Fourier representation of periodic fields on the circle.
//!
//! A field is `u(x) = sum_{|j| <= N} c_j e^{ijx}` with the coefficients stored
//! in a [`ModeVector`]. With this normalization the mean of `|u|^2` over the
//! circle, `(1/2pi) int |u|^2 dx`, equals `sum_j |c_j|^2`, which is what every
//! mass/action diagnostic in the crate refers to.
//!
//! Grid transforms go through `rustfft`. [`SpectralTransform`] caches the
//! plans and scratch buffers for hot loops; [`to_grid`] and [`from_grid`] are
//! the allocating one-shot versions.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Complex Fourier coefficients `c_j` for `-N <= j <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    truncation: usize,
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn zeros(truncation: usize) -> Self {
        Self {
            truncation,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * truncation + 1],
        }
    }

    /// Build from coefficients ordered `j = -N..=N`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "mode vector needs an odd number of coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(j) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Domain(format!("coefficient at position {j} is not finite")));
        }
        Ok(Self {
            truncation: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn from_fn(truncation: usize, f: impl FnMut(i64) -> Complex64) -> Self {
        let n = truncation as i64;
        Self {
            truncation,
            coeffs: (-n..=n).map(f).collect(),
        }
    }

    /// A vector with a single nonzero coefficient at index `j`.
    pub fn single(truncation: usize, j: i64, amplitude: Complex64) -> Self {
        let mut m = Self::zeros(truncation);
        m.set(j, amplitude);
        m
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients ordered `j = -N..=N`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn contains(&self, j: i64) -> bool {
        j.unsigned_abs() as usize <= self.truncation
    }

    /// Coefficient at index `j`; zero outside the truncation range.
    pub fn get(&self, j: i64) -> Complex64 {
        if self.contains(j) {
            self.coeffs[(j + self.truncation as i64) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Set the coefficient at index `j`.
    ///
    /// # Panics
    /// If `|j| > N`.
    pub fn set(&mut self, j: i64, value: Complex64) {
        assert!(self.contains(j), "index {j} outside truncation {}", self.truncation);
        let n = self.truncation as i64;
        self.coeffs[(j + n) as usize] = value;
    }

    /// `(j, c_j)` pairs in increasing `j`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.truncation as i64;
        self.coeffs.iter().enumerate().map(move |(k, c)| (k as i64 - n, *c))
    }

    /// Action `|c_j|^2`.
    pub fn action(&self, j: i64) -> f64 {
        self.get(j).norm_sqr()
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Smallest `K` with `c_j = 0` for all `|j| > K`.
    pub fn support_radius(&self) -> usize {
        self.iter()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(j, _)| j.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Same coefficients re-embedded at a different truncation; modes beyond
    /// the new range are dropped.
    pub fn resized(&self, truncation: usize) -> Self {
        Self::from_fn(truncation, |j| self.get(j))
    }
}

#[derive(Serialize, Deserialize)]
struct ModeVectorRepr {
    truncation: usize,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for ModeVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModeVectorRepr {
            truncation: self.truncation,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModeVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ModeVectorRepr::deserialize(deserializer)?;
        if repr.coeffs.len() != 2 * repr.truncation + 1 {
            return Err(D::Error::custom(format!(
                "truncation {} requires {} coefficients, found {}",
                repr.truncation,
                2 * repr.truncation + 1,
                repr.coeffs.len()
            )));
        }
        let coeffs = repr.coeffs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        ModeVector::from_coeffs(coeffs).map_err(D::Error::custom)
    }
}

/// Samples at the equispaced points `x_i = 2 pi i / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    samples: Vec<Complex64>,
}

impl GridField {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn from_fn(size: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            samples: (0..size).map(|i| f(grid_point(i, size))).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// `(1/M) sum_i |u(x_i)|^2`, the grid quadrature of the normalized mass.
    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

pub fn grid_point(i: usize, size: usize) -> f64 {
    std::f64::consts::TAU * i as f64 / size as f64
}

/// Default grid size: `4(2N+1)` rounded up to a power of two, so the cubic
/// products formed on the grid do not alias into the retained band.
pub fn default_grid_size(truncation: usize) -> usize {
    (4 * (2 * truncation + 1)).next_power_of_two()
}

/// Cached FFT plans and scratch for repeated transforms at fixed `(N, M)`.
pub struct SpectralTransform {
    truncation: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("truncation", &self.truncation)
            .field("size", &self.size)
            .finish()
    }
}

impl Clone for SpectralTransform {
    fn clone(&self) -> Self {
        Self {
            truncation: self.truncation,
            size: self.size,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: self.scratch.clone(),
        }
    }
}

impl SpectralTransform {
    /// Plans for truncation `N` on a grid of `M` points; requires `M >= 2N+2`.
    pub fn new(truncation: usize, size: usize) -> Result<Self> {
        let required = 2 * truncation + 2;
        if size < required {
            return Err(Error::Sizing {
                grid: size,
                truncation,
                required,
            });
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            truncation,
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Evaluate `sum_j c_j e^{ijx_i}` into `grid` (length `M`).
    pub fn modes_to_grid(&mut self, coeffs: &[Complex64], grid: &mut [Complex64]) {
        debug_assert_eq!(coeffs.len(), 2 * self.truncation + 1);
        debug_assert_eq!(grid.len(), self.size);
        grid.fill(Complex64::new(0.0, 0.0));
        let n = self.truncation as i64;
        let m = self.size as i64;
        for (k, c) in coeffs.iter().enumerate() {
            let j = k as i64 - n;
            grid[j.rem_euclid(m) as usize] = *c;
        }
        self.inverse.process_with_scratch(grid, &mut self.scratch);
    }

    /// Discrete Fourier coefficients of `grid`, restricted to `[-N, N]`.
    /// `grid` is overwritten.
    pub fn grid_to_modes(&mut self, grid: &mut [Complex64], coeffs: &mut [Complex64]) {
        debug_assert_eq!(coeffs.len(), 2 * self.truncation + 1);
        debug_assert_eq!(grid.len(), self.size);
        self.forward.process_with_scratch(grid, &mut self.scratch);
        let n = self.truncation as i64;
        let m = self.size as i64;
        let scale = 1.0 / self.size as f64;
        for (k, c) in coeffs.iter_mut().enumerate() {
            let j = k as i64 - n;
            *c = grid[j.rem_euclid(m) as usize] * scale;
        }
    }

    pub fn to_grid(&mut self, m: &ModeVector) -> GridField {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.size];
        self.modes_to_grid(m.coeffs(), &mut grid);
        GridField::new(grid)
    }

    pub fn from_grid(&mut self, g: &GridField) -> ModeVector {
        let mut grid = g.samples().to_vec();
        let mut out = ModeVector::zeros(self.truncation);
        self.grid_to_modes(&mut grid, out.coeffs_mut());
        out
    }
}

/// Sample `m` on a grid of `size` points.
pub fn to_grid(m: &ModeVector, size: usize) -> Result<GridField> {
    Ok(SpectralTransform::new(m.truncation(), size)?.to_grid(m))
}

/// Fourier coefficients `-N..=N` of grid samples.
pub fn from_grid(g: &GridField, truncation: usize) -> Result<ModeVector> {
    let required = 2 * truncation + 1;
    if g.size() < required {
        return Err(Error::Sizing {
            grid: g.size(),
            truncation,
            required,
        });
    }
    // The cached transform insists on 2N+2 so that to_grid is invertible;
    // the forward direction alone only needs 2N+1 points.
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(g.size());
    let mut buf = g.samples().to_vec();
    fft.process(&mut buf);
    let m = g.size() as i64;
    let scale = 1.0 / g.size() as f64;
    Ok(ModeVector::from_fn(truncation, |j| buf[j.rem_euclid(m) as usize] * scale))
}

/// Weight convention for Sobolev norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobolevWeight {
    /// `|j|^{2s}`
    Homogeneous,
    /// `(1 + j^2)^s`
    Inhomogeneous,
}

impl SobolevWeight {
    pub fn weight(self, j: i64, s: f64) -> f64 {
        let j2 = (j * j) as f64;
        match self {
            SobolevWeight::Homogeneous => {
                if s == 0.0 {
                    1.0
                } else {
                    j2.powf(s)
                }
            }
            SobolevWeight::Inhomogeneous => (1.0 + j2).powf(s),
        }
    }
}

/// `sqrt(sum_j w_j |c_j|^2)`.
pub fn sobolev_norm(m: &ModeVector, s: f64, weight: SobolevWeight) -> f64 {
    sobolev_norm_sq(m, s, weight).sqrt()
}

pub fn sobolev_norm_sq(m: &ModeVector, s: f64, weight: SobolevWeight) -> f64 {
    m.iter().map(|(j, c)| weight.weight(j, s) * c.norm_sqr()).sum()
}

/// Analytic-class norm `sum_j e^{rho|j|} (|u_j| + |v_j|)`.
pub fn ell1_rho_norm(u: &ModeVector, v: &ModeVector, rho: f64) -> f64 {
    let part = |m: &ModeVector| -> f64 {
        m.iter()
            .map(|(j, c)| (rho * j.unsigned_abs() as f64).exp() * c.norm())
            .sum()
    };
    part(u) + part(v)
}

/// Best constant `K` with `|c_j| <= K e^{-B|j|^{1/alpha}}` over the stored range.
pub fn gevrey_seminorm(m: &ModeVector, alpha: f64, decay: f64) -> f64 {
    m.iter()
        .map(|(j, c)| c.norm() * (decay * (j.unsigned_abs() as f64).powf(1.0 / alpha)).exp())
        .fold(0.0, f64::max)
}

/// Result of a log-linear fit `|c_j| ~ C e^{-rho|j|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub amplitude: f64,
    pub rate: f64,
    pub points: usize,
}

const TAIL_FLOOR: f64 = 1e-300;

/// Least-squares fit of `ln|c_j|` against `|j|` over the indices not in
/// `excluded` whose modulus exceeds `1e-300`.
pub fn tail_decay_fit(m: &ModeVector, excluded: &[i64]) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = m
        .iter()
        .filter(|(j, _)| !excluded.contains(j))
        .filter(|(_, c)| c.norm() > TAIL_FLOOR)
        .map(|(j, c)| (j.unsigned_abs() as f64, c.norm().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::DiagnosticUnavailable(format!(
            "tail fit needs at least 4 usable modes, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DiagnosticUnavailable(
            "tail fit needs at least two distinct |j| values".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(TailFit {
        amplitude: intercept.exp(),
        rate: -slope,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_modes(n: usize, seed: u64) -> ModeVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModeVector::from_fn(n, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn single_mode_samples_basis_function() {
        let m = ModeVector::single(3, 1, c(1.0, 0.0));
        let g = to_grid(&m, 8).unwrap();
        for (i, s) in g.samples().iter().enumerate() {
            let x = grid_point(i, 8);
            assert!((s - Complex64::from_polar(1.0, x)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_vector_gives_zero_samples() {
        let g = to_grid(&ModeVector::zeros(4), 16).unwrap();
        assert!(g.samples().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let err = to_grid(&ModeVector::zeros(4), 9).unwrap_err();
        assert!(matches!(err, Error::Sizing { required: 10, .. }));
        assert!(from_grid(&GridField::new(vec![c(0.0, 0.0); 8]), 4).is_err());
        assert!(from_grid(&GridField::new(vec![c(0.0, 0.0); 9]), 4).is_ok());
    }

    #[test]
    fn constant_and_pure_harmonic_fields() {
        let g = GridField::from_fn(12, |_| c(0.3, -0.7));
        let m = from_grid(&g, 5).unwrap();
        assert!((m.get(0) - c(0.3, -0.7)).norm() < 1e-15);
        assert!(m.iter().filter(|(j, _)| *j != 0).all(|(_, v)| v.norm() < 1e-15));

        let g = GridField::from_fn(6, |x| Complex64::from_polar(1.0, 2.0 * x));
        let m = from_grid(&g, 2).unwrap();
        assert!((m.get(2) - c(1.0, 0.0)).norm() < 1e-14);
        assert!(m.iter().filter(|(j, _)| *j != 2).all(|(_, v)| v.norm() < 1e-14));
    }

    #[test]
    fn round_trip_and_parseval_against_direct_sum() {
        let m = random_modes(7, 11);
        let size = 20;
        // Direct O(NM) evaluation as the independent transform.
        let direct = GridField::from_fn(size, |x| {
            m.iter().map(|(j, cj)| cj * Complex64::from_polar(1.0, j as f64 * x)).sum()
        });
        let fast = to_grid(&m, size).unwrap();
        for (a, b) in direct.samples().iter().zip(fast.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = from_grid(&fast, 7).unwrap();
        for ((_, a), (_, b)) in m.iter().zip(back.iter()) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
        assert!((m.mass() - direct.mean_square()).abs() <= 1e-12 * m.mass());
    }

    #[test]
    fn sobolev_examples() {
        let m = ModeVector::single(6, 5, c(1.0, 0.0));
        assert!((sobolev_norm(&m, 1.0, SobolevWeight::Homogeneous) - 5.0).abs() < 1e-15);
        let m = ModeVector::single(6, 0, c(1.0, 0.0));
        for s in [0.0, 0.5, 3.0] {
            assert_eq!(sobolev_norm(&m, s, SobolevWeight::Inhomogeneous), 1.0);
        }
        let (gamma, q, s) = (0.2_f64, 3_i64, 1.5_f64);
        let mut m = ModeVector::zeros(4);
        m.set(0, c((1.0 - gamma).sqrt(), 0.0));
        m.set(q, c(gamma.sqrt(), 0.0));
        let expected = ((q as f64).powf(2.0 * s) * gamma).sqrt();
        assert!((sobolev_norm(&m, s, SobolevWeight::Homogeneous) - expected).abs() < 1e-13);
    }

    #[test]
    fn sobolev_order_zero_is_root_mass() {
        let m = random_modes(9, 3);
        for w in [SobolevWeight::Homogeneous, SobolevWeight::Inhomogeneous] {
            assert!((sobolev_norm(&m, 0.0, w) - m.mass().sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn ell1_rho_examples() {
        let u = ModeVector::single(2, 0, c(1.0, 0.0));
        assert_eq!(ell1_rho_norm(&u, &ModeVector::zeros(2), 3.0), 1.0);
        let u = ModeVector::single(2, 1, c(1.0, 0.0));
        assert!((ell1_rho_norm(&u, &u, 1.0) - 2.0 * std::f64::consts::E).abs() < 1e-14);

        let (u, v) = (random_modes(5, 1), random_modes(5, 2));
        let mut oracle = 0.0;
        for j in -5i64..=5 {
            let w = (0.7 * j.abs() as f64).exp();
            oracle += w * u.get(j).norm();
            oracle += w * v.get(j).norm();
        }
        assert!((ell1_rho_norm(&u, &v, 0.7) - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn gevrey_examples() {
        let m = ModeVector::from_fn(10, |j| c((-(j.abs() as f64)).exp(), 0.0));
        assert!((gevrey_seminorm(&m, 1.0, 1.0) - 1.0).abs() < 1e-14);
        let m = ModeVector::single(3, 0, c(0.0, -2.5));
        assert_eq!(gevrey_seminorm(&m, 2.0, 4.0), 2.5);
        let m = ModeVector::from_fn(10, |j| c((-2.0 * j.abs() as f64).exp(), 0.0));
        assert_eq!(gevrey_seminorm(&m, 1.0, 1.0), 1.0);
    }

    #[test]
    fn tail_fit_recovers_planted_rates() {
        let m = ModeVector::from_fn(12, |j| c((-0.5 * j.abs() as f64).exp(), 0.0));
        let fit = tail_decay_fit(&m, &[]).unwrap();
        assert!((fit.amplitude - 1.0).abs() < 1e-10);
        assert!((fit.rate - 0.5).abs() < 1e-10);

        let mut m = ModeVector::from_fn(12, |j| Complex64::from_polar(3.0 * (-0.7 * j.abs() as f64).exp(), j as f64));
        let fit = tail_decay_fit(&m, &[]).unwrap();
        assert!((fit.amplitude - 3.0).abs() < 1e-10);
        assert!((fit.rate - 0.7).abs() < 1e-10);

        // a two-mode carrier on top of the tail is ignored once excluded
        m.set(0, c(0.9, 0.0));
        m.set(2, c(0.0, 0.4));
        let fit = tail_decay_fit(&m, &[0, 2]).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-10);
        assert_eq!(fit.points, 23);
    }

    #[test]
    fn tail_fit_needs_data() {
        let m = ModeVector::single(5, 1, c(1.0, 0.0));
        assert!(matches!(tail_decay_fit(&m, &[]), Err(Error::DiagnosticUnavailable(_))));
    }

    #[test]
    fn json_layout() {
        let m = ModeVector::from_coeffs(vec![c(1.0, 2.0), c(0.0, 0.0), c(-3.0, 0.5)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"truncation":1,"coeffs":[[1.0,2.0],[0.0,0.0],[-3.0,0.5]]}"#);
        let bad = r#"{"truncation":2,"coeffs":[[1.0,2.0]]}"#;
        assert!(serde_json::from_str::<ModeVector>(bad).is_err());
    }

    #[test]
    fn default_grid_rule() {
        assert_eq!(default_grid_size(32), 512);
        assert_eq!(default_grid_size(8), 128);
        assert_eq!(default_grid_size(1), 16);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_identity(seed in 0u64..10_000, n in 1usize..16, extra in 2usize..40) {
            let m = random_modes(n, seed);
            let size = 2 * n + extra;
            let back = from_grid(&to_grid(&m, size).unwrap(), n).unwrap();
            for ((_, a), (_, b)) in m.iter().zip(back.iter()) {
                proptest::prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }

        #[test]
        fn gevrey_monotone_in_decay(seed in 0u64..10_000, b in 0.0f64..3.0, db in 0.0f64..2.0, alpha in 1.0f64..4.0) {
            let m = random_modes(6, seed);
            proptest::prop_assert!(gevrey_seminorm(&m, alpha, b) <= gevrey_seminorm(&m, alpha, b + db));
        }

        #[test]
        fn json_round_trip(seed in 0u64..10_000, n in 0usize..10) {
            let m = random_modes(n, seed);
            let back: ModeVector = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            proptest::prop_assert_eq!(back, m);
        }
    }
}
