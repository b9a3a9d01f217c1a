//! Uniform periodic grid on `[-L, L)` and complex fields sampled on it.
//!
//! Nodes are `x_j = -L + j*dx` for `j = 0..N`. With this layout the spatial
//! reflection `x -> -x` is the exact index permutation `r(j) = (N - j) mod N`
//! (node 0 at `-L` is identified with `+L` by periodicity), so `u(-x)` never
//! needs interpolation. The two fixed points of `r` are `j = 0` and `j = N/2`
//! (the origin).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GridError;

/// Smallest accepted number of grid points.
pub const MIN_POINTS: usize = 8;

/// A uniform periodic grid together with its FFT plans and reflection map.
pub struct Grid {
    num_points: usize,
    half_length: f64,
    spacing: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    reflection: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("num_points", &self.num_points)
            .field("half_length", &self.half_length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.num_points == other.num_points && self.half_length == other.half_length
    }
}

impl Grid {
    /// Builds the grid with `num_points` nodes on `[-half_length, half_length)`.
    ///
    /// `num_points` must be a power of two no smaller than [`MIN_POINTS`].
    pub fn new(num_points: usize, half_length: f64) -> Result<Arc<Self>, GridError> {
        if num_points % 2 != 0 {
            return Err(GridError::OddPoints(num_points));
        }
        if num_points < MIN_POINTS {
            return Err(GridError::TooFewPoints {
                found: num_points,
                min: MIN_POINTS,
            });
        }
        if !num_points.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(num_points));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(GridError::NonPositiveHalfLength(half_length));
        }

        let n = num_points;
        let spacing = 2.0 * half_length / n as f64;
        let nodes = (0..n).map(|j| -half_length + j as f64 * spacing).collect();
        let fundamental = std::f64::consts::PI / half_length;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * fundamental
            })
            .collect();
        let reflection = (0..n).map(|j| (n - j) % n).collect();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        Ok(Arc::new(Self {
            num_points,
            half_length,
            spacing,
            nodes,
            wavenumbers,
            reflection,
            forward,
            inverse,
        }))
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Angular wavenumbers in FFT ordering, fundamental `pi / L`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index permutation realizing `x -> -x`.
    pub fn reflection(&self) -> &[usize] {
        &self.reflection
    }

    /// Index of the node at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.num_points / 2
    }

    /// Largest resolved wavenumber magnitude, `pi N / (2L)`.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.num_points as f64 / (2.0 * self.half_length)
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse DFT in place, normalized so that `inverse(forward(f)) == f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.num_points as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Complex samples of `u(t, x_j)` on a [`Grid`] at time `t`.
///
/// Every stored sample is finite.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    samples: Vec<Complex64>,
    time: f64,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.time == other.time && self.samples == other.samples
    }
}

impl SpectralField {
    pub fn new(grid: Arc<Grid>, samples: Vec<Complex64>, time: f64) -> Result<Self, GridError> {
        if samples.len() != grid.num_points() {
            return Err(GridError::LengthMismatch {
                expected: grid.num_points(),
                found: samples.len(),
            });
        }
        if let Some(index) = first_nonfinite(&samples) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self {
            grid,
            samples,
            time,
        })
    }

    /// Wraps samples already known to be finite and of the right length.
    pub(crate) fn from_parts(grid: Arc<Grid>, samples: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(samples.len(), grid.num_points());
        Self {
            grid,
            samples,
            time,
        }
    }

    pub fn zeros(grid: Arc<Grid>, time: f64) -> Self {
        let n = grid.num_points();
        Self::from_parts(grid, vec![Complex64::new(0.0, 0.0); n], time)
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: Arc<Grid>, time: f64, f: F) -> Result<Self, GridError>
    where
        F: Fn(f64) -> Complex64,
    {
        let samples = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, samples, time)
    }

    /// Inverse-transforms `spectrum` into a field.
    pub fn from_spectrum(
        grid: Arc<Grid>,
        mut spectrum: Vec<Complex64>,
        time: f64,
    ) -> Result<Self, GridError> {
        grid.inverse(&mut spectrum);
        Self::new(grid, spectrum, time)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Value at the origin node.
    pub fn origin_value(&self) -> Complex64 {
        self.samples[self.grid.origin_index()]
    }

    /// Unnormalized DFT of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        self.grid.forward(&mut buf);
        buf
    }

    /// Samples of `conj(u(-x))`: output `j` is `conj(u[r(j)])`.
    pub fn reflect_conjugate(&self) -> Self {
        let samples = self
            .grid
            .reflection()
            .iter()
            .map(|&r| self.samples[r].conj())
            .collect();
        Self::from_parts(self.grid.clone(), samples, self.time)
    }

    /// `d^order u / dx^order` by multiplying mode `k` with `(ik)^order`.
    ///
    /// The Nyquist mode is dropped for odd orders.
    pub fn spectral_derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let n = self.grid.num_points();
        let mut spec = self.spectrum();
        for (j, (c, &k)) in spec.iter_mut().zip(self.grid.wavenumbers()).enumerate() {
            if order % 2 == 1 && j == n / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, k).powu(order);
            }
        }
        self.grid.inverse(&mut spec);
        Self::from_parts(self.grid.clone(), spec, self.time)
    }

    /// Periodic rectangle rule for `int |u|^2 dx`. Summed over mirrored
    /// pairs so that the result is bit-identical after `reflect_conjugate`.
    pub fn l2_norm_sq(&self) -> f64 {
        let s = &self.samples;
        let n = s.len();
        let half = n / 2;
        let pairs: f64 = (1..half)
            .map(|j| s[j].norm_sqr() + s[n - j].norm_sqr())
            .sum();
        (s[0].norm_sqr() + s[half].norm_sqr() + pairs) * self.grid.spacing()
    }

    /// `int |u|^2 dx` evaluated in Fourier space (Parseval).
    pub fn spectral_l2_norm_sq(&self) -> f64 {
        let n = self.grid.num_points() as f64;
        self.spectrum().iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing() / n
    }

    /// Squared `L^2` norm of the `k`-th derivative.
    pub fn sobolev_seminorm_sq(&self, k: u32) -> f64 {
        self.spectral_derivative(k).l2_norm_sq()
    }

    /// Squared `H^k` norm: sum of the seminorms of orders `0..=k`.
    pub fn sobolev_norm_sq(&self, k: u32) -> f64 {
        (0..=k).map(|m| self.sobolev_seminorm_sq(m)).sum()
    }

    /// Pointwise difference `self - other` on the same grid.
    pub fn difference(&self, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_parts(self.grid.clone(), samples, self.time))
    }

    /// `max_j |self_j - other_j|`; grids are assumed to match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max_j |u(x_j) - u(-x_j)|`, zero for even fields.
    pub fn parity_defect(&self) -> f64 {
        self.grid
            .reflection()
            .iter()
            .zip(&self.samples)
            .map(|(&r, v)| (v - self.samples[r]).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn first_nonfinite(samples: &[Complex64]) -> Option<usize> {
    samples
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn soliton(x: f64) -> f64 {
        2.0 * 2f64.sqrt() / (x.exp() + (-x).exp())
    }

    #[test]
    fn small_grid_layout() {
        let g = Grid::new(8, 4.0).unwrap();
        assert_eq!(g.nodes(), &[-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.reflection()[0], 0);
        assert_eq!(g.reflection()[1], 7);
        assert_eq!(g.reflection()[4], 4);
        assert_eq!(g.origin_index(), 4);
        assert_eq!(g.spacing() * g.num_points() as f64, 2.0 * g.half_length());
    }

    #[test]
    fn reflection_maps_nodes_to_mirror() {
        let g = Grid::new(64, 7.5).unwrap();
        for (j, &r) in g.reflection().iter().enumerate() {
            let x = g.nodes()[j];
            let xr = g.nodes()[r];
            if j == 0 {
                assert_eq!(xr, -g.half_length());
            } else {
                assert!((xr + x).abs() < 1e-13, "j={j}");
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(7, 4.0), Err(GridError::OddPoints(7))));
        assert!(matches!(Grid::new(4, 4.0), Err(GridError::TooFewPoints { .. })));
        assert!(matches!(Grid::new(1000, 4.0), Err(GridError::NotPowerOfTwo(1000))));
        assert!(Grid::new(16, 0.0).is_err());
        assert!(Grid::new(16, -1.0).is_err());
        assert!(Grid::new(16, f64::NAN).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Grid::new(16, 1.0).unwrap();
        assert!(matches!(
            SpectralField::new(g.clone(), vec![c(0.0); 15], 0.0),
            Err(GridError::LengthMismatch { .. })
        ));
        let mut s = vec![c(0.0); 16];
        s[3] = Complex64::new(f64::INFINITY, 0.0);
        assert!(matches!(
            SpectralField::new(g, s, 0.0),
            Err(GridError::NonFinite { index: 3 })
        ));
    }

    #[test]
    fn reflect_conjugate_examples() {
        let g = Grid::new(256, 20.0).unwrap();
        let even = SpectralField::from_fn(g.clone(), 0.0, |x| c(soliton(x))).unwrap();
        assert_eq!(even.reflect_conjugate(), even);

        let a = 0.3;
        let growing = SpectralField::from_fn(g.clone(), 0.0, |x| c((2.0 * a * x).exp())).unwrap();
        let r = growing.reflect_conjugate();
        for (j, v) in r.samples().iter().enumerate().skip(1) {
            let x = g.nodes()[j];
            assert!((v.re - (-2.0 * a * x).exp()).abs() < 1e-12 * v.re.max(1.0));
            assert_eq!(v.im, 0.0);
        }

        let imag = SpectralField::from_fn(g, 0.0, |x| Complex64::new(0.0, soliton(x))).unwrap();
        let r = imag.reflect_conjugate();
        for (a, b) in r.samples().iter().zip(imag.samples()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn derivative_of_fundamental_mode() {
        let l = 3.0;
        let g = Grid::new(64, l).unwrap();
        let f = SpectralField::from_fn(g.clone(), 0.0, |x| c((PI * x / l).sin())).unwrap();
        let d = f.spectral_derivative(1);
        for (v, &x) in d.samples().iter().zip(g.nodes()) {
            assert!((v - c(PI / l * (PI * x / l).cos())).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid::new(32, 2.0).unwrap();
        let f = SpectralField::from_fn(g, 0.0, |_| Complex64::new(1.5, -0.5)).unwrap();
        for order in 1..5 {
            let d = f.spectral_derivative(order);
            assert!(d.samples().iter().all(|v| v.norm() < 1e-14));
        }
    }

    #[test]
    fn soliton_second_derivative() {
        // phi = sqrt2 sech x, phi'' = sqrt2 (sech x - 2 sech^3 x)
        let g = Grid::new(4096, 40.0).unwrap();
        let f = SpectralField::from_fn(g.clone(), 0.0, |x| c(soliton(x))).unwrap();
        let d2 = f.spectral_derivative(2);
        let err = d2
            .samples()
            .iter()
            .zip(g.nodes())
            .map(|(v, &x)| {
                let s = 1.0 / x.cosh();
                (v - c(2f64.sqrt() * (s - 2.0 * s * s * s))).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err={err:e}");
    }

    #[test]
    fn soliton_mass() {
        let g = Grid::new(4096, 40.0).unwrap();
        let f = SpectralField::from_fn(g, 0.0, |x| c(soliton(x))).unwrap();
        assert!((f.l2_norm_sq() - 4.0).abs() < 1e-10);
        assert_eq!(SpectralField::zeros(f.grid().clone(), 0.0).l2_norm_sq(), 0.0);
        assert_eq!(SpectralField::zeros(f.grid().clone(), 0.0).sobolev_norm_sq(3), 0.0);
    }

    #[test]
    fn reflection_is_conjugation_in_fourier_space() {
        let g = Grid::new(128, 6.0).unwrap();
        let f = SpectralField::from_fn(g, 0.0, |x| {
            Complex64::new((-(x - 0.7).powi(2)).exp(), 0.4 * x * (-x * x).exp())
        })
        .unwrap();
        let lhs = f.reflect_conjugate().spectrum();
        let rhs = f.spectrum();
        let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b.conj()).norm() < 1e-12 * scale);
        }
    }
}
