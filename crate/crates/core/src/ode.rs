//! Embedded Runge–Kutta 4(5) integration with Dormand–Prince coefficients,
//! and the parametric ODE models used as approximation targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// An autonomous-or-not initial value problem with a scalar quantity of
/// interest read off the state at `t_end`.
pub trait OdeProblem {
    fn state_dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    fn initial_state(&self) -> Vec<f64>;
    fn t_end(&self) -> f64;
    fn qoi(&self, y_end: &[f64]) -> f64;
    /// Parameters reported with integration failures.
    fn params(&self) -> Vec<f64>;
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// fifth-order weights (also row 7 of the tableau, FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t = 0` to `t_end` and returns the final
/// state.
///
/// Steps whose scaled error norm exceeds one are rejected and retried with
/// half the step; accepted steps grow the step by the usual
/// `0.9 · err^{-1/5}` factor, clamped to `[0.2, 5]`.
pub fn dopri45<F>(rhs: F, y0: &[f64], t_end: f64, opts: &OdeOptions) -> std::result::Result<(Vec<f64>, OdeStats), String>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err("tolerances must be positive".into());
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok((y, stats));
    }
    let dir = t_end.signum();
    let span = t_end.abs();

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(0.0, &y, &mut k1);
    stats.rhs_evals += 1;

    // initial step from the first derivative scale
    let scale0: f64 = (0..n)
        .map(|i| {
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs();
            (k1[i] / sc).powi(2)
        })
        .sum::<f64>()
        / n.max(1) as f64;
    let mut h = if scale0 > 0.0 {
        (0.01 / scale0.sqrt()).min(span)
    } else {
        (1e-3 * span).max(1e-6).min(span)
    };
    h = h.max(1e-10 * span);

    let mut t = 0.0f64;
    loop {
        let remaining = span - t * dir;
        if remaining <= 1e-14 * span {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(format!("step cap {} exceeded at t = {t}", opts.max_steps));
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        if hs.abs() < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(format!("step size underflow ({:e}) at t = {t}", hs.abs()));
        }

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(t + hs, &y_new, &mut k7);
        stats.rhs_evals += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();

        if err <= 1.0 && err.is_finite() {
            debug_assert!(err <= 1.0);
            stats.accepted += 1;
            t = if last { t_end } else { t + hs };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                h *= factor;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(format!("non-finite state at t = {t}"));
            }
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
            h *= 0.5;
        }
    }
    Ok((y, stats))
}

/// Solves `problem` and applies its quantity of interest at `t_end`.
pub fn integrate_ode<P: OdeProblem + ?Sized>(problem: &P, opts: &OdeOptions) -> Result<f64> {
    let (y, _) = dopri45(|t, y, dy| problem.rhs(t, y, dy), &problem.initial_state(), problem.t_end(), opts)
        .map_err(|reason| Error::Integration {
            params: problem.params(),
            reason,
        })?;
    Ok(problem.qoi(&y))
}

/// Surface coverage model `ρ' = α(1−ρ) − γρ − κ(1−ρ)²ρ`, `ρ(0) = 0.9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceModel {
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub rho0: f64,
    pub t_end: f64,
}

impl SurfaceModel {
    /// `α = 0.1 + exp(0.05 ξ₁)`, `γ = 0.001 + 0.01 exp(0.05 ξ₂)`, `κ = 10`.
    pub fn from_xi(xi: &[f64]) -> Self {
        Self {
            alpha: 0.1 + (0.05 * xi[0]).exp(),
            gamma: 0.001 + 0.01 * (0.05 * xi[1]).exp(),
            kappa: 10.0,
            rho0: 0.9,
            t_end: 4.0,
        }
    }
}

impl OdeProblem for SurfaceModel {
    fn state_dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let r = y[0];
        dy[0] = self.alpha * (1.0 - r) - self.gamma * r - self.kappa * (1.0 - r).powi(2) * r;
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.rho0]
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn qoi(&self, y: &[f64]) -> f64 {
        y[0]
    }
    fn params(&self) -> Vec<f64> {
        vec![self.alpha, self.gamma, self.kappa]
    }
}

/// Duffing oscillator `ρ'' + 2χρ' + ω(ρ − ερ³) = 0`, `ρ(0) = 1`, `ρ'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingModel {
    pub epsilon: f64,
    pub omega: f64,
    pub chi: f64,
    pub t_end: f64,
}

impl DuffingModel {
    /// `ε = exp(−0.1 ξ₁²)`, `ω = exp(−0.1 ξ₂²)`, `χ = exp(−0.1 ξ₃²)`.
    pub fn from_xi(xi: &[f64]) -> Self {
        Self {
            epsilon: (-0.1 * xi[0] * xi[0]).exp(),
            omega: (-0.1 * xi[1] * xi[1]).exp(),
            chi: (-0.1 * xi[2] * xi[2]).exp(),
            t_end: 4.0,
        }
    }
}

impl OdeProblem for DuffingModel {
    fn state_dim(&self) -> usize {
        2
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (r, v) = (y[0], y[1]);
        dy[0] = v;
        dy[1] = -2.0 * self.chi * v - self.omega * (r - self.epsilon * r * r * r);
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn qoi(&self, y: &[f64]) -> f64 {
        y[0]
    }
    fn params(&self) -> Vec<f64> {
        vec![self.epsilon, self.omega, self.chi]
    }
}

/// Forced damped oscillator `u'' + γu' + ku = g cos(ωt)`, `u(0) = u₀`,
/// `u'(0) = u₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicModel {
    pub gamma: f64,
    pub k: f64,
    pub g: f64,
    pub omega: f64,
    pub u0: f64,
    pub u1: f64,
    pub t_end: f64,
}

impl HarmonicModel {
    /// `ξ = (γ, k, g, ω, u₀, u₁)`, QoI at `t = 20`.
    pub fn from_xi(xi: &[f64]) -> Self {
        Self {
            gamma: xi[0],
            k: xi[1],
            g: xi[2],
            omega: xi[3],
            u0: xi[4],
            u1: xi[5],
            t_end: 20.0,
        }
    }
}

impl OdeProblem for HarmonicModel {
    fn state_dim(&self) -> usize {
        2
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = self.g * (self.omega * t).cos() - self.gamma * y[1] - self.k * y[0];
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.u0, self.u1]
    }
    fn t_end(&self) -> f64 {
        self.t_end
    }
    fn qoi(&self, y: &[f64]) -> f64 {
        y[0]
    }
    fn params(&self) -> Vec<f64> {
        vec![self.gamma, self.k, self.g, self.omega, self.u0, self.u1]
    }
}
