//! Time stepping for `i u_t + u_xx + s u^2(x) conj(u(-x)) = 0`.
//!
//! Two schemes are available:
//!
//! * `StrangPairRk4`: half-step of the exact free propagator, a nonlinear
//!   substep, another half-step. The nonlinear substep couples each node to
//!   its mirror, so it is integrated as a system of mirrored pairs
//!   `(u(x), u(-x))` with one classical RK4 step; the two reflection fixed
//!   points (`x = 0` and the boundary node) are advanced by the exact phase
//!   rotation `a -> a exp(i s |a|^2 dt)`.
//! * `IfRk4`: integrating-factor (Lawson) RK4 in Fourier space, used as an
//!   independent cross-check.
//!
//! [`run`] integrates to a target time while watching the sup-norm; when it
//! exceeds `amplitude_threshold` times its initial value the run stops and
//! the blow-up time is extrapolated from the reciprocal amplitude.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::IntegratorError;
use crate::grid::{first_nonfinite, Grid, SpectralField};
use crate::invariants::{sup_norm, InvariantSample};
use crate::nonlinearity::{dealias_spectrum, pair_ode_rhs, Coupling, Equation, Sign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangPairRk4,
    IfRk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::StrangPairRk4 => "strang_pair_rk4",
            Scheme::IfRk4 => "if_rk4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt0: f64,
    pub adaptive: bool,
    pub dt_min: f64,
    /// Stop once `sup|u|` exceeds this multiple of its initial value.
    pub amplitude_threshold: f64,
    /// Allowed relative drift of `Re Q` on completed runs.
    pub conservation_tol: f64,
    pub dealias: bool,
    pub monitor_stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::StrangPairRk4,
            dt0: 1e-3,
            adaptive: true,
            dt_min: 1e-9,
            amplitude_threshold: 10.0,
            conservation_tol: 1e-8,
            dealias: true,
            monitor_stride: 10,
        }
    }
}

impl StepperConfig {
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt0: dt,
            adaptive: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: String| Err(IntegratorError::InvalidConfig(m));
        if !(self.dt0.is_finite() && self.dt0 > 0.0) {
            return bad(format!("dt0 must be positive, got {}", self.dt0));
        }
        if !(self.dt_min.is_finite() && self.dt_min > 0.0 && self.dt_min < self.dt0) {
            return bad(format!(
                "dt_min must satisfy 0 < dt_min < dt0, got {}",
                self.dt_min
            ));
        }
        if !(self.amplitude_threshold.is_finite() && self.amplitude_threshold > 1.0) {
            return bad(format!(
                "amplitude_threshold must exceed 1, got {}",
                self.amplitude_threshold
            ));
        }
        if !(self.conservation_tol.is_finite() && self.conservation_tol > 0.0) {
            return bad(format!(
                "conservation_tol must be positive, got {}",
                self.conservation_tol
            ));
        }
        if self.monitor_stride == 0 {
            return bad("monitor_stride must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupDetected,
    DtUnderflow,
    NonfiniteAbort,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowupDetected => "blowup_detected",
            Termination::DtUnderflow => "dt_underflow",
            Termination::NonfiniteAbort => "nonfinite_abort",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub time: f64,
    pub uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<InvariantSample>,
    pub termination: Termination,
    pub final_time: f64,
    pub blowup_estimate: Option<BlowupEstimate>,
    pub steps: usize,
    /// Sum of the accepted step sizes.
    pub elapsed: f64,
}

impl TrajectoryRecord {
    fn relative_drift(&self, value: impl Fn(&InvariantSample) -> f64) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let reference = value(first);
        let worst = self
            .samples
            .iter()
            .map(|s| (value(s) - reference).abs())
            .fold(0.0, f64::max);
        if reference != 0.0 {
            worst / reference.abs()
        } else {
            worst
        }
    }

    /// Largest relative deviation of `Re Q` from its initial value.
    pub fn charge_drift(&self) -> f64 {
        self.relative_drift(|s| s.charge.re)
    }

    /// Largest relative deviation of `Re E` from its initial value.
    pub fn energy_drift(&self) -> f64 {
        self.relative_drift(|s| s.energy.re)
    }

    /// Largest `|Im Q| / (1 + |Q|)` and `|Im E| / (1 + |E|)` over the samples.
    pub fn imaginary_defects(&self) -> (f64, f64) {
        self.samples.iter().fold((0.0f64, 0.0f64), |(q, e), s| {
            (
                q.max(s.charge.im.abs() / (1.0 + s.charge.norm())),
                e.max(s.energy.im.abs() / (1.0 + s.energy.norm())),
            )
        })
    }

    /// A completed run whose charge drift exceeds `tol`.
    pub fn conservation_violated(&self, tol: f64) -> bool {
        self.termination == Termination::Completed && self.charge_drift() >= tol
    }

    pub fn sup_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.sup_norm)
    }
}

/// Outcome of [`run`]: the monitor record and the last accepted state.
#[derive(Clone, Debug)]
pub struct Run {
    pub trajectory: TrajectoryRecord,
    pub field: SpectralField,
}

/// Exact free evolution `u_hat(k) -> exp(-i k^2 dt) u_hat(k)`.
pub fn linear_propagate(f: &SpectralField, dt: f64) -> SpectralField {
    let grid = f.grid();
    let mut spec = f.spectrum();
    for (c, &k) in spec.iter_mut().zip(grid.wavenumbers()) {
        *c *= Complex64::from_polar(1.0, -k * k * dt);
    }
    grid.inverse(&mut spec);
    SpectralField::from_parts(grid.clone(), spec, f.time() + dt)
}

/// Advances `u_t = i s u^2(x) conj(u(-x))` by `dt` (time stamp included).
pub fn nonlinear_substep(
    f: &SpectralField,
    dt: f64,
    sign: Sign,
) -> Result<SpectralField, IntegratorError> {
    let mut u = f.samples().to_vec();
    nonlinear_pairs(f.grid(), &mut u, dt, &Equation::nonlocal(sign));
    let time = f.time() + dt;
    if first_nonfinite(&u).is_some() {
        return Err(IntegratorError::NonFinite { time });
    }
    Ok(SpectralField::from_parts(f.grid().clone(), u, time))
}

fn rotate_exact(a: Complex64, dt: f64, sign: Sign) -> Complex64 {
    a * Complex64::from_polar(1.0, sign.factor() * a.norm_sqr() * dt)
}

fn rk4_pair(a: Complex64, b: Complex64, dt: f64, sign: Sign) -> (Complex64, Complex64) {
    let h = 0.5 * dt;
    let (k1a, k1b) = pair_ode_rhs(a, b, sign);
    let (k2a, k2b) = pair_ode_rhs(a + h * k1a, b + h * k1b, sign);
    let (k3a, k3b) = pair_ode_rhs(a + h * k2a, b + h * k2b, sign);
    let (k4a, k4b) = pair_ode_rhs(a + dt * k3a, b + dt * k3b, sign);
    let w = dt / 6.0;
    (
        a + w * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        b + w * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    )
}

fn nonlinear_pairs(grid: &Grid, u: &mut [Complex64], dt: f64, eq: &Equation) {
    match eq.coupling {
        Coupling::Local => {
            for a in u.iter_mut() {
                *a = rotate_exact(*a, dt, eq.sign);
            }
        }
        Coupling::Nonlocal => {
            for (j, &r) in grid.reflection().iter().enumerate() {
                if j == r {
                    u[j] = rotate_exact(u[j], dt, eq.sign);
                } else if j < r {
                    let (a, b) = rk4_pair(u[j], u[r], dt, eq.sign);
                    u[j] = a;
                    u[r] = b;
                }
            }
        }
    }
}

/// Reusable stepping state: FFT buffers and cached propagator phases.
struct Stepper {
    grid: Arc<Grid>,
    cfg: StepperConfig,
    eq: Equation,
    cached_dt: f64,
    half: Vec<Complex64>,
    spec: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: Arc<Grid>, cfg: StepperConfig, eq: Equation) -> Self {
        let n = grid.num_points();
        Self {
            grid,
            cfg,
            eq,
            cached_dt: f64::NAN,
            half: vec![Complex64::new(0.0, 0.0); n],
            spec: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// `half[j] = exp(-i k_j^2 dt / 2)`. The adaptive step changes `dt`
    /// almost every step, so the table is built from the recurrence
    /// `z^{(m+1)^2} = z^{m^2} z^{2m+1}` instead of one `sin_cos` per mode,
    /// restarting from exact values every `ANCHOR` modes.
    fn refresh_phases(&mut self, dt: f64) {
        const ANCHOR: usize = 32;
        if self.cached_dt == dt {
            return;
        }
        let n = self.grid.num_points();
        let fundamental = self.grid.wavenumbers()[1];
        let theta = -0.5 * dt * fundamental * fundamental;
        let square_step = Complex64::from_polar(1.0, 2.0 * theta);
        let (mut p, mut w) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for m in 0..=n / 2 {
            if m % ANCHOR == 0 {
                let mf = m as f64;
                p = Complex64::from_polar(1.0, theta * mf * mf);
                w = Complex64::from_polar(1.0, theta * (2.0 * mf + 1.0));
            }
            self.half[m] = p;
            if m > 0 && m < n / 2 {
                self.half[n - m] = p;
            }
            p *= w;
            w *= square_step;
        }
        self.cached_dt = dt;
    }

    /// One step in place; `u` holds physical-space samples.
    fn advance(&mut self, u: &mut Vec<Complex64>, dt: f64) {
        self.refresh_phases(dt);
        match self.cfg.scheme {
            Scheme::StrangPairRk4 => self.strang(u, dt),
            Scheme::IfRk4 => self.lawson(u, dt),
        }
    }

    fn strang(&mut self, u: &mut [Complex64], dt: f64) {
        let grid = self.grid.clone();
        grid.forward(u);
        for (c, p) in u.iter_mut().zip(&self.half) {
            *c *= p;
        }
        grid.inverse(u);
        nonlinear_pairs(&grid, u, dt, &self.eq);
        grid.forward(u);
        if self.cfg.dealias {
            dealias_spectrum(&grid, u);
        }
        for (c, p) in u.iter_mut().zip(&self.half) {
            *c *= p;
        }
        grid.inverse(u);
    }

    /// Spectrum of `i s F(u)` for a spectrum `v`, dealiased when enabled.
    fn rhs_hat(&mut self, v: &[Complex64]) -> Vec<Complex64> {
        let grid = &self.grid;
        self.spec.copy_from_slice(v);
        grid.inverse(&mut self.spec);
        let is = Complex64::new(0.0, self.eq.sign.factor());
        let u = &self.spec;
        let mut out: Vec<Complex64> = (0..u.len())
            .map(|j| is * u[j] * u[j] * u[self.eq.coupling.partner(grid, j)].conj())
            .collect();
        grid.forward(&mut out);
        if self.cfg.dealias {
            dealias_spectrum(grid, &mut out);
        }
        out
    }

    fn lawson(&mut self, u: &mut Vec<Complex64>, dt: f64) {
        let grid = self.grid.clone();
        let half = self.half.clone();
        let prop = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter().zip(&half).map(|(c, p)| c * p).collect()
        };
        let combine = |a: &[Complex64], b: &[Complex64], w: f64| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + w * y).collect()
        };

        let mut u_hat = std::mem::take(u);
        grid.forward(&mut u_hat);

        let u_half = prop(&u_hat);
        let k1 = self.rhs_hat(&u_hat);
        let k2 = self.rhs_hat(&combine(&u_half, &prop(&k1), 0.5 * dt));
        let k3 = self.rhs_hat(&combine(&u_half, &k2, 0.5 * dt));
        let u_full = prop(&u_half);
        let k4 = self.rhs_hat(&combine(&u_full, &prop(&k3), dt));

        let k1_full = prop(&prop(&k1));
        let k23_half = prop(&combine(&k2, &k3, 1.0));
        let w = dt / 6.0;
        let mut next: Vec<Complex64> = (0..u_full.len())
            .map(|j| u_full[j] + w * (k1_full[j] + 2.0 * k23_half[j] + k4[j]))
            .collect();
        grid.inverse(&mut next);
        *u = next;
    }
}

/// One step of the configured scheme.
pub fn step(
    f: &SpectralField,
    dt: f64,
    cfg: &StepperConfig,
    sign: Sign,
) -> Result<SpectralField, IntegratorError> {
    step_equation(f, dt, cfg, &Equation::nonlocal(sign))
}

pub fn step_equation(
    f: &SpectralField,
    dt: f64,
    cfg: &StepperConfig,
    eq: &Equation,
) -> Result<SpectralField, IntegratorError> {
    let mut stepper = Stepper::new(f.grid().clone(), *cfg, *eq);
    let mut u = f.samples().to_vec();
    stepper.advance(&mut u, dt);
    let time = f.time() + dt;
    if first_nonfinite(&u).is_some() {
        return Err(IntegratorError::NonFinite { time });
    }
    Ok(SpectralField::from_parts(f.grid().clone(), u, time))
}

/// `min(dt0, c / (1 + sup^2))` with `c = dt0 (1 + initial_sup^2)`.
pub fn adapt_dt(current_sup: f64, initial_sup: f64, cfg: &StepperConfig) -> f64 {
    let c = cfg.dt0 * (1.0 + initial_sup * initial_sup);
    cfg.dt0.min(c / (1.0 + current_sup * current_sup))
}

/// Integrates the nonlocal equation with the given sign.
pub fn run(
    f0: &SpectralField,
    t_end: f64,
    cfg: &StepperConfig,
    sign: Sign,
) -> Result<Run, IntegratorError> {
    run_observed(f0, t_end, cfg, &Equation::nonlocal(sign), |_| {})
}

/// Integrates `eq` from `f0` to `t_end`, calling `observer` on every
/// monitored state (initial, every `monitor_stride` steps, and final).
pub fn run_observed<O>(
    f0: &SpectralField,
    t_end: f64,
    cfg: &StepperConfig,
    eq: &Equation,
    mut observer: O,
) -> Result<Run, IntegratorError>
where
    O: FnMut(&SpectralField),
{
    cfg.validate()?;
    let t0 = f0.time();
    if !(t_end.is_finite() && t_end > t0) {
        return Err(IntegratorError::EmptyInterval { t0, t_end });
    }

    let grid = f0.grid().clone();
    let mut stepper = Stepper::new(grid.clone(), *cfg, *eq);
    let initial_sup = sup_norm(f0);
    let limit = cfg.amplitude_threshold * initial_sup;
    let end_slack = 1e-13 * t_end.abs().max(1.0);

    let mut state = f0.clone();
    let mut samples = vec![InvariantSample::measure(&state, eq.sign)];
    observer(&state);

    let mut buf = state.samples().to_vec();
    let mut current_sup = initial_sup;
    let mut steps = 0usize;
    let mut elapsed = 0.0;
    let mut last_monitored = 0usize;

    let termination = loop {
        let t = state.time();
        let remaining = t_end - t;
        if remaining <= end_slack {
            break Termination::Completed;
        }
        let dt = if cfg.adaptive {
            adapt_dt(current_sup, initial_sup, cfg)
        } else {
            cfg.dt0
        };
        if cfg.adaptive && dt < cfg.dt_min {
            break Termination::DtUnderflow;
        }
        let (h, last) = if dt >= remaining - end_slack {
            (remaining, true)
        } else {
            (dt, false)
        };

        buf.copy_from_slice(state.samples());
        stepper.advance(&mut buf, h);
        if first_nonfinite(&buf).is_some() {
            break Termination::NonfiniteAbort;
        }
        let next_time = if last { t_end } else { t + h };
        state = SpectralField::from_parts(grid.clone(), buf.clone(), next_time);
        steps += 1;
        elapsed += h;
        current_sup = sup_norm(&state);

        if initial_sup > 0.0 && current_sup > limit {
            break Termination::BlowupDetected;
        }
        if steps % cfg.monitor_stride == 0 {
            samples.push(InvariantSample::measure(&state, eq.sign));
            observer(&state);
            last_monitored = steps;
        }
    };

    if last_monitored != steps {
        samples.push(InvariantSample::measure(&state, eq.sign));
        observer(&state);
    }

    let mut trajectory = TrajectoryRecord {
        samples,
        termination,
        final_time: state.time(),
        blowup_estimate: None,
        steps,
        elapsed,
    };
    if matches!(
        termination,
        Termination::BlowupDetected | Termination::DtUnderflow
    ) {
        trajectory.blowup_estimate = estimate_blowup_time(&trajectory).ok();
    }
    Ok(Run {
        trajectory,
        field: state,
    })
}

/// Default number of tail samples used for reciprocal extrapolation.
pub const DEFAULT_TAIL: usize = 8;

/// Extrapolates the zero of `1 / sup|u|` from the trajectory tail.
pub fn estimate_blowup_time(traj: &TrajectoryRecord) -> Result<BlowupEstimate, IntegratorError> {
    if !matches!(
        traj.termination,
        Termination::BlowupDetected | Termination::DtUnderflow
    ) {
        return Err(IntegratorError::InsufficientTail(format!(
            "run terminated {}",
            traj.termination.name()
        )));
    }
    let times: Vec<f64> = traj.samples.iter().map(|s| s.time).collect();
    let sups: Vec<f64> = traj.sup_norms().collect();
    fit_reciprocal_tail(&times, &sups, DEFAULT_TAIL)
}

/// Least-squares line through `(t, 1/sup)` over the last `k` strictly growing
/// samples; the uncertainty is the shift of the estimate when refitting with
/// `k/2` samples.
pub fn fit_reciprocal_tail(
    times: &[f64],
    sups: &[f64],
    k: usize,
) -> Result<BlowupEstimate, IntegratorError> {
    let growing = sups
        .windows(2)
        .rev()
        .take_while(|w| w[1] > w[0])
        .count()
        + 1;
    let usable = growing.min(k).min(sups.len());
    if usable < 4 {
        return Err(IntegratorError::InsufficientTail(format!(
            "only {usable} monotonically growing samples at the tail"
        )));
    }
    let n = times.len();
    let full = zero_crossing(&times[n - usable..], &sups[n - usable..])?;
    let half = usable / 2;
    let refit = zero_crossing(&times[n - half..], &sups[n - half..])?;
    Ok(BlowupEstimate {
        time: full,
        uncertainty: (full - refit).abs(),
    })
}

fn zero_crossing(times: &[f64], sups: &[f64]) -> Result<f64, IntegratorError> {
    let m = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / m;
    let y: Vec<f64> = sups.iter().map(|s| 1.0 / s).collect();
    let y_mean = y.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in times.iter().zip(&y) {
        sxy += (t - t_mean) * (v - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope = sxy / sxx;
    if !(slope.is_finite() && slope < 0.0) {
        return Err(IntegratorError::InsufficientTail(
            "reciprocal amplitude is not decreasing".into(),
        ));
    }
    Ok(t_mean - y_mean / slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_table_matches_direct_evaluation() {
        let g = Grid::new(8192, 40.0).unwrap();
        let mut stepper = Stepper::new(g.clone(), StepperConfig::default(), Equation::default());
        for dt in [1e-3, 3.7e-5, 0.05] {
            stepper.refresh_phases(dt);
            for (p, &k) in stepper.half.iter().zip(g.wavenumbers()) {
                let angle = k * k * 0.5 * dt;
                let direct = Complex64::from_polar(1.0, -angle);
                // both sides carry rounding proportional to the angle
                assert!((p - direct).norm() < 1e-13 + 1e-15 * angle, "dt={dt} k={k}");
            }
        }
    }
    use crate::analytic::ExactSolution;
    use crate::invariants::InvariantSample;

    fn soliton(n: usize, l: f64) -> SpectralField {
        let g = Grid::new(n, l).unwrap();
        ExactSolution::Soliton { omega: 1.0 }.sample(0.0, &g).unwrap()
    }

    fn lumpy_complex(n: usize, l: f64) -> SpectralField {
        let g = Grid::new(n, l).unwrap();
        SpectralField::from_fn(g, 0.0, |x| {
            Complex64::new(1.6 * (-(x - 0.8).powi(2)).exp(), 0.9 * x * (-0.5 * x * x).exp())
        })
        .unwrap()
    }

    /// Closed-form pure nonlinear flow: `u -> u exp(i s p dt)`, `p = u conj(u(-x))`.
    fn exact_nonlinear_flow(f: &SpectralField, dt: f64, sign: Sign) -> Vec<Complex64> {
        let m = f.reflect_conjugate();
        f.samples()
            .iter()
            .zip(m.samples())
            .map(|(&u, &c)| u * (Complex64::i() * sign.factor() * u * c * dt).exp())
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn linear_propagation() {
        let f = lumpy_complex(256, 12.0);
        assert!(linear_propagate(&f, 0.0).max_abs_diff(&f) < 1e-15);

        let before = f.l2_norm_sq();
        let after = linear_propagate(&f, 0.37).l2_norm_sq();
        assert!((before - after).abs() < 1e-13 * before);

        let g = f.grid().clone();
        let k0 = 5.0 * std::f64::consts::PI / g.half_length();
        let wave = SpectralField::from_fn(g, 0.0, |x| Complex64::from_polar(1.0, k0 * x)).unwrap();
        let dt = 0.01;
        let moved = linear_propagate(&wave, dt);
        let phase = Complex64::from_polar(1.0, -k0 * k0 * dt);
        for (a, b) in moved.samples().iter().zip(wave.samples()) {
            assert!((a - b * phase).norm() < 1e-13);
        }
        assert_eq!(moved.time(), dt);
    }

    #[test]
    fn nonlinear_substep_on_even_data_is_local_rotation() {
        let f = soliton(512, 20.0);
        let dt = 1e-3;
        let out = nonlinear_substep(&f, dt, Sign::Focusing).unwrap();
        for (o, u) in out.samples().iter().zip(f.samples()) {
            let exact = u * Complex64::from_polar(1.0, u.norm_sqr() * dt);
            assert!((o - exact).norm() < 1e-13);
        }
        let z = SpectralField::zeros(f.grid().clone(), 0.0);
        assert_eq!(nonlinear_substep(&z, dt, Sign::Focusing).unwrap().samples(), z.samples());
    }

    #[test]
    fn nonlinear_substep_matches_exact_flow_and_is_fourth_order() {
        let f = lumpy_complex(256, 10.0);
        for sign in [Sign::Focusing, Sign::Defocusing] {
            let dt = 1e-2;
            let one = nonlinear_substep(&f, dt, sign).unwrap();
            let half = nonlinear_substep(&f, dt / 2.0, sign).unwrap();
            let two = nonlinear_substep(&half, dt / 2.0, sign).unwrap();
            let exact = exact_nonlinear_flow(&f, dt, sign);
            let e1 = max_diff(one.samples(), &exact);
            let e2 = max_diff(two.samples(), &exact);
            let ratio = e1 / e2;
            assert!(e1 < 1e-6, "e1={e1:e}");
            assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio={ratio}");
        }
    }

    #[test]
    fn both_schemes_track_the_soliton() {
        let f = soliton(1024, 40.0);
        let g = f.grid().clone();
        let exact = ExactSolution::Soliton { omega: 1.0 }.sample(1.0, &g).unwrap();
        for scheme in [Scheme::StrangPairRk4, Scheme::IfRk4] {
            let cfg = StepperConfig {
                scheme,
                ..StepperConfig::fixed(1e-3)
            };
            let out = run(&f, 1.0, &cfg, Sign::Focusing).unwrap();
            assert_eq!(out.trajectory.termination, Termination::Completed);
            assert_eq!(out.trajectory.steps, 1000);
            let err = out.field.max_abs_diff(&exact);
            assert!(err < 1e-6, "{scheme:?} err={err:e}");
        }
    }

    #[test]
    fn tiny_step_is_continuous() {
        let f = soliton(1024, 40.0);
        let cfg = StepperConfig::default();
        let out = step(&f, 1e-8, &cfg, Sign::Focusing).unwrap();
        assert!(out.max_abs_diff(&f) < 1e-7);
        assert_eq!(out.time(), 1e-8);
    }

    #[test]
    fn adapt_dt_formula() {
        let cfg = StepperConfig::default();
        assert_eq!(adapt_dt(1.0, 1.0, &cfg), cfg.dt0);
        let dt = adapt_dt(3.0, 1.0, &cfg);
        assert!((dt - cfg.dt0 / 5.0).abs() < 1e-18);
        assert!(adapt_dt(1e8, 1.0, &cfg) < cfg.dt_min);
        assert_eq!(adapt_dt(0.5, 1.0, &cfg), cfg.dt0);
    }

    #[test]
    fn config_validation() {
        assert!(StepperConfig::default().validate().is_ok());
        let bad = [
            StepperConfig { dt0: 0.0, ..Default::default() },
            StepperConfig { dt_min: 1.0, ..Default::default() },
            StepperConfig { amplitude_threshold: 1.0, ..Default::default() },
            StepperConfig { monitor_stride: 0, ..Default::default() },
            StepperConfig { conservation_tol: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn zero_field_run() {
        let g = Grid::new(128, 10.0).unwrap();
        let z = SpectralField::zeros(g, 0.0);
        let out = run(&z, 0.5, &StepperConfig::default(), Sign::Focusing).unwrap();
        assert_eq!(out.trajectory.termination, Termination::Completed);
        assert!(out.field.samples().iter().all(|v| v.norm() == 0.0));
        for s in &out.trajectory.samples {
            assert_eq!(s.sup_norm, 0.0);
            assert_eq!(s.charge, Complex64::new(0.0, 0.0));
        }
        assert!(estimate_blowup_time(&out.trajectory).is_err());
    }

    #[test]
    fn soliton_run_conserves_charge() {
        let f = soliton(1024, 40.0);
        let out = run(&f, 5.0, &StepperConfig::default(), Sign::Focusing).unwrap();
        let tr = &out.trajectory;
        assert_eq!(tr.termination, Termination::Completed);
        assert_eq!(tr.final_time, 5.0);
        assert!(tr.charge_drift() < 1e-8, "drift={:e}", tr.charge_drift());
        assert!(!tr.conservation_violated(1e-8));
        assert!((tr.elapsed - 5.0).abs() < 1e-12);
        assert!(tr.samples.windows(2).all(|w| w[1].time > w[0].time));
        let (qi, ei) = tr.imaginary_defects();
        assert!(qi < 1e-10 && ei < 1e-10);
    }

    #[test]
    fn evenness_is_preserved() {
        // complex even datum: soliton with a phase chirp
        let g = Grid::new(512, 25.0).unwrap();
        let f = SpectralField::from_fn(g, 0.0, |x| {
            Complex64::from_polar(1.2 / x.cosh(), 0.3 * x * x / (1.0 + x * x))
        })
        .unwrap();
        assert!(f.parity_defect() < 1e-15);
        let out = run(&f, 1.0, &StepperConfig::default(), Sign::Focusing).unwrap();
        assert!(out.field.parity_defect() < 1e-10, "{:e}", out.field.parity_defect());
    }

    #[test]
    fn time_stamps_accumulate_accepted_steps() {
        let f = lumpy_complex(256, 12.0);
        let out = run(&f, 0.7, &StepperConfig::default(), Sign::Focusing).unwrap();
        let tr = &out.trajectory;
        assert!((tr.final_time - (f.time() + tr.elapsed)).abs() < 1e-12);
        assert_eq!(out.field.time(), tr.final_time);
    }

    #[test]
    fn run_is_deterministic() {
        let f = lumpy_complex(256, 12.0);
        let cfg = StepperConfig::default();
        let a = run(&f, 0.3, &cfg, Sign::Focusing).unwrap();
        let b = run(&f, 0.3, &cfg, Sign::Focusing).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.field, b.field);
    }

    #[test]
    fn rejects_empty_interval() {
        let f = soliton(64, 10.0);
        assert!(matches!(
            run(&f, 0.0, &StepperConfig::default(), Sign::Focusing),
            Err(IntegratorError::EmptyInterval { .. })
        ));
    }

    fn synthetic(termination: Termination, times: &[f64], sups: &[f64]) -> TrajectoryRecord {
        let samples = times
            .iter()
            .zip(sups)
            .map(|(&time, &sup_norm)| InvariantSample {
                time,
                charge: Complex64::new(1.0, 0.0),
                energy: Complex64::new(1.0, 0.0),
                sup_norm,
                l2: 1.0,
                h1: 1.0,
            })
            .collect();
        TrajectoryRecord {
            samples,
            termination,
            final_time: *times.last().unwrap(),
            blowup_estimate: None,
            steps: times.len(),
            elapsed: 0.0,
        }
    }

    #[test]
    fn reciprocal_extrapolation_of_exact_pole() {
        let times: Vec<f64> = (0..=40).map(|i| 1.5 + 0.01 * i as f64).collect();
        let sups: Vec<f64> = times.iter().map(|t| 1.0 / (2.0 - t)).collect();
        let tr = synthetic(Termination::BlowupDetected, &times, &sups);
        let est = estimate_blowup_time(&tr).unwrap();
        assert!((est.time - 2.0).abs() < 1e-6);
        assert!(est.uncertainty < 1e-6);
    }

    #[test]
    fn extrapolation_preconditions() {
        let times = [0.0, 0.1, 0.2, 0.3, 0.4];
        let tr = synthetic(Termination::Completed, &times, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            estimate_blowup_time(&tr),
            Err(IntegratorError::InsufficientTail(_))
        ));
        let tr = synthetic(Termination::BlowupDetected, &times, &[5.0, 4.0, 3.0, 3.5, 4.0]);
        assert!(estimate_blowup_time(&tr).is_err());
    }

    #[test]
    fn dt_underflow_terminates() {
        let g = Grid::new(1024, 40.0).unwrap();
        let f = ExactSolution::OneParam { alpha: 1.0 }.sample(0.0, &g).unwrap();
        let cfg = StepperConfig {
            amplitude_threshold: 1e6,
            dt_min: 2e-4,
            ..StepperConfig::default()
        };
        let out = run(&f, 2.0, &cfg, Sign::Focusing).unwrap();
        assert_eq!(out.trajectory.termination, Termination::DtUnderflow);
        assert!(out.trajectory.final_time < std::f64::consts::PI / 3.0);
    }
}
