//! Nonlocal charge and energy, their local counterparts, and norm monitors.
//!
//! For the nonlocal equation the conserved quantities are
//!
//! ```text
//! Q(u) = 1/2 int u(x) conj(u(-x)) dx
//! E(u) = 1/2 int u_x(x) d/dx[conj(u(-x))] dx - s/4 int u(x)^2 conj(u(-x))^2 dx
//! ```
//!
//! with `s = +1` focusing and `s = -1` defocusing (the defocusing convention
//! flips the quartic term so that `E` is conserved by that flow). Here
//! `d/dx[conj(u(-x))] = -conj(u_x)(-x)`, so even data recover the local
//! energy `1/2 int |u_x|^2 - s/4 int |u|^4`. Both
//! integrals are real in exact arithmetic for every field: the summand at
//! node `r(j)` is the conjugate of the summand at node `j`. The imaginary
//! parts are kept as a rounding diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::SpectralField;
use crate::nonlinearity::Sign;

/// Monitors recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    pub time: f64,
    pub charge: Complex64,
    pub energy: Complex64,
    pub sup_norm: f64,
    /// `||u||_{L^2}`
    pub l2: f64,
    /// `||u||_{H^1}`
    pub h1: f64,
}

impl InvariantSample {
    pub fn measure(f: &SpectralField, sign: Sign) -> Self {
        let ux = f.spectral_derivative(1);
        let l2_sq = f.l2_norm_sq();
        let terms = energy_terms_with_derivative(f, &ux);
        Self {
            time: f.time(),
            charge: charge_nonlocal(f),
            energy: terms.energy(sign),
            sup_norm: sup_norm(f),
            l2: l2_sq.sqrt(),
            h1: (l2_sq + ux.l2_norm_sq()).sqrt(),
        }
    }
}

/// The two integrals making up the nonlocal energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `int u_x(x) d/dx[conj(u(-x))] dx`
    pub gradient: Complex64,
    /// `int u(x)^2 conj(u(-x))^2 dx`
    pub quartic: Complex64,
}

impl EnergyTerms {
    pub fn energy(&self, sign: Sign) -> Complex64 {
        0.5 * self.gradient - 0.25 * sign.factor() * self.quartic
    }
}

fn mirrored_sum<F>(f: &SpectralField, term: F) -> Complex64
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let u = f.samples();
    let sum: Complex64 = f
        .grid()
        .reflection()
        .iter()
        .enumerate()
        .map(|(j, &r)| term(u[j], u[r].conj()))
        .sum();
    sum * f.grid().spacing()
}

/// `Q = 1/2 int u(x) conj(u(-x)) dx`.
pub fn charge_nonlocal(f: &SpectralField) -> Complex64 {
    0.5 * mirrored_sum(f, |u, m| u * m)
}

pub fn energy_terms(f: &SpectralField) -> EnergyTerms {
    energy_terms_with_derivative(f, &f.spectral_derivative(1))
}

fn energy_terms_with_derivative(f: &SpectralField, ux: &SpectralField) -> EnergyTerms {
    EnergyTerms {
        gradient: -mirrored_sum(ux, |d, m| d * m),
        quartic: mirrored_sum(f, |u, m| u * u * m * m),
    }
}

pub fn energy_nonlocal(f: &SpectralField, sign: Sign) -> Complex64 {
    energy_terms(f).energy(sign)
}

/// `1/2 int |u|^2 dx`.
pub fn charge_local(f: &SpectralField) -> f64 {
    0.5 * f.l2_norm_sq()
}

/// `1/2 int |u_x|^2 dx - s/4 int |u|^4 dx`.
pub fn energy_local(f: &SpectralField, sign: Sign) -> f64 {
    let quartic: f64 = f.samples().iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>()
        * f.grid().spacing();
    0.5 * f.sobolev_seminorm_sq(1) - 0.25 * sign.factor() * quartic
}

/// `max_j |u(x_j)|`.
pub fn sup_norm(f: &SpectralField) -> f64 {
    f.samples().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::ExactSolution;
    use crate::grid::Grid;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn soliton_field() -> SpectralField {
        let g = Grid::new(4096, 40.0).unwrap();
        ExactSolution::Soliton { omega: 1.0 }.sample(0.0, &g).unwrap()
    }

    fn one_param_field(alpha: f64) -> SpectralField {
        let g = Grid::new(8192, 40.0 / alpha).unwrap();
        ExactSolution::OneParam { alpha }.sample(0.0, &g).unwrap()
    }

    #[test]
    fn soliton_invariants() {
        // int phi^2 = 4, int phi'^2 = 4/3, int phi^4 = 16/3
        let f = soliton_field();
        let q = charge_nonlocal(&f);
        assert!((q.re - 2.0).abs() < 1e-10 && q.im.abs() < 1e-15);
        let e = energy_nonlocal(&f, Sign::Focusing);
        assert!((e.re + 2.0 / 3.0).abs() < 1e-9, "E={e}");
        assert!((charge_local(&f) - 2.0).abs() < 1e-10);
        assert!((energy_local(&f, Sign::Focusing) + 2.0 / 3.0).abs() < 1e-9);
        assert!((sup_norm(&f) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_field_invariants() {
        let z = SpectralField::zeros(Grid::new(64, 4.0).unwrap(), 0.0);
        assert_eq!(charge_nonlocal(&z), Complex64::new(0.0, 0.0));
        assert_eq!(energy_nonlocal(&z, Sign::Focusing), Complex64::new(0.0, 0.0));
        assert_eq!(charge_local(&z), 0.0);
        assert_eq!(energy_local(&z, Sign::Focusing), 0.0);
        assert_eq!(sup_norm(&z), 0.0);
    }

    #[test]
    fn one_param_invariants() {
        // 30-digit quadrature at alpha = 1/2: Q = 3 alpha = 1.5, E = -0.375
        // (gradient term 0.375, quartic term 2.25)
        let f = one_param_field(0.5);
        let q = charge_nonlocal(&f);
        assert!((q.re - 1.5).abs() < 1e-10, "Q={q}");
        assert!(q.im.abs() < 1e-14);
        let terms = energy_terms(&f);
        assert!((terms.gradient.re - 0.375).abs() < 1e-9);
        assert!((terms.quartic.re - 2.25).abs() < 1e-9);
        let e = terms.energy(Sign::Focusing);
        assert!((e.re + 0.375).abs() < 1e-9, "E={e}");
        assert!(e.im.abs() < 1e-12);

        // local charge = 1/2 ||u_0||^2 = 2 pi alpha / sqrt3
        assert!((charge_local(&f) - PI / 3f64.sqrt()).abs() < 1e-10);
        // 30-digit quadrature: 1/2 int u'^2 - 1/4 int u^4
        assert!((energy_local(&f, Sign::Focusing) + 0.453_449_841_058_554_46).abs() < 1e-9);
    }

    #[test]
    fn sup_norm_of_one_param_datum() {
        let f = one_param_field(0.5);
        let origin = 3.0 * SQRT_2 * 0.5 / 2.0;
        let s = sup_norm(&f);
        assert!(s >= origin);
        // dense sampling of the profile: max at x = -ln2 / (3 alpha)
        let dense = (0..200_001)
            .map(|i| -2.0 + 4.0 * i as f64 / 200_000.0)
            .map(|x| ExactSolution::OneParam { alpha: 0.5 }.eval(0.0, x).unwrap().norm())
            .fold(0.0, f64::max);
        assert!(s <= dense + 1e-12);
        assert!((s - dense).abs() < 1e-3);
    }

    #[test]
    fn conserved_along_exact_solution() {
        let g = Grid::new(4096, 40.0).unwrap();
        let kind = ExactSolution::TwoParam { alpha: 1.0, beta: 0.5 };
        let first = InvariantSample::measure(&kind.sample(0.0, &g).unwrap(), Sign::Focusing);
        assert!((first.charge.re - 3.0).abs() < 1e-12);
        assert!((first.energy.re + 3.0).abs() < 1e-10);
        for t in [0.2, 0.5, 0.8] {
            let s = InvariantSample::measure(&kind.sample(t, &g).unwrap(), Sign::Focusing);
            assert!((s.charge - first.charge).norm() < 1e-12);
            assert!((s.energy - first.energy).norm() < 1e-10);
            // but the local charge is not conserved
            assert!((s.l2 - first.l2).abs() > 1e-3);
        }
    }

    #[test]
    fn even_data_nonlocal_equals_local() {
        let g = Grid::new(2048, 30.0).unwrap();
        let f = ExactSolution::Soliton { omega: 2.0 }.sample(0.0, &g).unwrap();
        let q = charge_nonlocal(&f);
        let e = energy_nonlocal(&f, Sign::Focusing);
        assert!((q.re - charge_local(&f)).abs() < 1e-12 * q.re.abs());
        let el = energy_local(&f, Sign::Focusing);
        assert!((e.re - el).abs() < 1e-12 * el.abs());
    }

    #[test]
    fn measure_fills_norms() {
        let f = soliton_field();
        let s = InvariantSample::measure(&f, Sign::Focusing);
        assert!((s.l2 - 2.0).abs() < 1e-10);
        assert!((s.h1 - (4.0 + 4.0 / 3.0f64).sqrt()).abs() < 1e-10);
        assert_eq!(s.time, 0.0);
    }

    proptest! {
        #[test]
        fn charge_and_energy_are_real(
            values in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 64),
            defocusing in any::<bool>(),
        ) {
            let g = Grid::new(64, 5.0).unwrap();
            let samples = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let f = SpectralField::new(g, samples, 0.0).unwrap();
            let sign = if defocusing { Sign::Defocusing } else { Sign::Focusing };
            let q = charge_nonlocal(&f);
            let e = energy_nonlocal(&f, sign);
            prop_assert!(q.im.abs() < 1e-12 * (1.0 + q.norm()));
            prop_assert!(e.im.abs() < 1e-10 * (1.0 + e.norm()));
        }
    }
}
