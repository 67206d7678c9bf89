//! Substeps shared by the nonlinear and linear integrators. Both integrators
//! call exactly these routines, so driving the linear equation with the
//! potential seen by the nonlinear run reproduces its arithmetic.
//!
//! Every rotation `c <- c e^{i theta}` is applied as `c <- c + c (e^{i theta} - 1)`
//! with the increment formed accurately, and the grid rotation only sends the
//! increment through the transform pair. Rounding in the transforms then acts
//! on a quantity of size `O(theta)` instead of on the state itself, which keeps
//! mass drift at roundoff level over tens of millions of steps.

use num_complex::Complex64;

use crate::spectral::SpectralTransform;

/// `e^{i x} - 1` without cancellation.
#[inline]
pub(crate) fn cis_m1(x: f64) -> Complex64 {
    let h = (0.5 * x).sin();
    Complex64::new(-2.0 * h * h, x.sin())
}

/// `e^{-i j^2 dt / 2} - 1` for `j = -N..=N`.
pub(crate) fn half_free_increments(truncation: usize, dt: f64) -> Vec<Complex64> {
    let n = truncation as i64;
    (-n..=n).map(|j| cis_m1(-((j * j) as f64) * 0.5 * dt)).collect()
}

pub(crate) fn apply_free(coeffs: &mut [Complex64], increments: &[Complex64]) {
    for (c, z) in coeffs.iter_mut().zip(increments) {
        *c += *c * z;
    }
}

/// Replace grid values `w` by the increment `w (e^{i V dt} - 1)`.
pub(crate) fn potential_increment(grid: &mut [Complex64], potential: &[f64], dt: f64) {
    for (w, v) in grid.iter_mut().zip(potential) {
        *w *= cis_m1(v * dt);
    }
}

/// Add the modes of the increment held in `grid` to `coeffs`; `grid` and
/// `scratch` are clobbered.
pub(crate) fn add_increment(
    transform: &mut SpectralTransform,
    grid: &mut [Complex64],
    scratch: &mut [Complex64],
    coeffs: &mut [Complex64],
) {
    transform.grid_to_modes(grid, scratch);
    for (c, d) in coeffs.iter_mut().zip(scratch.iter()) {
        *c += d;
    }
}
