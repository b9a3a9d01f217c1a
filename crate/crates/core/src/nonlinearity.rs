//! The cubic term `s * u(x)^2 * conj(u(-x))`, its spatial derivative, and
//! two-thirds-rule dealiasing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, SpectralField};

/// Sign of the cubic term: `+1` focusing, `-1` defocusing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    #[default]
    Focusing,
    Defocusing,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Focusing => 1.0,
            Sign::Defocusing => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sign::Focusing => "focusing",
            Sign::Defocusing => "defocusing",
        }
    }
}

/// Which point the conjugated factor is taken from.
///
/// `Nonlocal` pairs `x` with `-x`; `Local` pairs `x` with itself and yields
/// the ordinary cubic equation, used as a reference for even data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Nonlocal,
    Local,
}

impl Coupling {
    /// Index of the node whose conjugate multiplies `u_j^2`.
    #[inline]
    pub fn partner(self, grid: &Grid, j: usize) -> usize {
        match self {
            Coupling::Nonlocal => grid.reflection()[j],
            Coupling::Local => j,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Equation {
    pub sign: Sign,
    pub coupling: Coupling,
}

impl Equation {
    pub fn nonlocal(sign: Sign) -> Self {
        Self {
            sign,
            coupling: Coupling::Nonlocal,
        }
    }

    pub fn local(sign: Sign) -> Self {
        Self {
            sign,
            coupling: Coupling::Local,
        }
    }
}

/// `s * u^2(x) * conj(u(-x))` at every node, without dealiasing.
pub fn evaluate_f(f: &SpectralField, sign: Sign) -> SpectralField {
    evaluate_term(f, &Equation::nonlocal(sign))
}

/// Cubic term of `eq` at every node.
pub fn evaluate_term(f: &SpectralField, eq: &Equation) -> SpectralField {
    let grid = f.grid();
    let u = f.samples();
    let s = eq.sign.factor();
    let samples = (0..u.len())
        .map(|j| s * u[j] * u[j] * u[eq.coupling.partner(grid, j)].conj())
        .collect();
    SpectralField::from_parts(grid.clone(), samples, f.time())
}

/// `d/dx [s u^2(x) conj(u(-x))] = s (2 u u_x conj(u(-x)) - u^2 conj(u_x)(-x))`.
pub fn evaluate_f_x(f: &SpectralField, sign: Sign) -> SpectralField {
    let s = sign.factor();
    let ux = f.spectral_derivative(1);
    let u_mirror = f.reflect_conjugate();
    let ux_mirror = ux.reflect_conjugate();
    let samples = f
        .samples()
        .iter()
        .zip(ux.samples())
        .zip(u_mirror.samples().iter().zip(ux_mirror.samples()))
        .map(|((&u, &dx), (&m, &dm))| s * (2.0 * u * dx * m - u * u * dm))
        .collect();
    SpectralField::from_parts(f.grid().clone(), samples, f.time())
}

/// Zeroes spectral coefficients with `|k|` above two thirds of the largest
/// resolved wavenumber.
pub fn dealias_spectrum(grid: &Grid, spectrum: &mut [Complex64]) {
    let cutoff = 2.0 / 3.0 * grid.max_wavenumber();
    for (c, &k) in spectrum.iter_mut().zip(grid.wavenumbers()) {
        if k.abs() > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut spec = f.spectrum();
    dealias_spectrum(f.grid(), &mut spec);
    f.grid().inverse(&mut spec);
    SpectralField::from_parts(f.grid().clone(), spec, f.time())
}

/// Right-hand side of the mirrored-pair system of the nonlinear substep:
/// `a' = i s a^2 conj(b)`, `b' = i s b^2 conj(a)` with `a = u(x)`, `b = u(-x)`.
///
/// Both share `q = i s a conj(b)`: `a' = q a` and `b' = -conj(q) b`.
#[inline]
pub fn pair_ode_rhs(a: Complex64, b: Complex64, sign: Sign) -> (Complex64, Complex64) {
    let p = a * b.conj();
    let s = sign.factor();
    let q = Complex64::new(-s * p.im, s * p.re);
    (q * a, -q.conj() * b)
}
