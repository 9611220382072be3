//! The perturbed planar system, its integrator, the stroboscopic map, and
//! the action-angle chart.
//!
//! In the normalized variables (y = -phi_p(x'/omega)) the equation becomes
//!
//! ```text
//! x' = -omega*phi_q(y)
//! y' = omega*(a1*phi_p(x+) - b1*phi_p(x-)) + omega^{1-p}*(f(x) - e(t))
//! ```
//!
//! with Hamiltonian
//! H = omega/q*|y|^q + omega/p*(a1|x+|^p + b1|x-|^p) + omega^{1-p}(F(x) - e(t)x).
//! The chart x = (d r)^{1/p} v(theta), y = (d r)^{1/q} u(theta) conjugates
//! the unperturbed flow to theta' = omega, r' = 0.

use crate::jumping::{odd_pow, JumpingParams};
use crate::roots;
use crate::{Error, Result};
use std::f64::consts::PI;

/// One cosine term of the periodic forcing e(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    /// Harmonic index relative to the fundamental period 2*pi_p.
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// The perturbation pair: power-law f(x) = beta*sign(x)*|x|^gamma and the
/// trigonometric polynomial e(t) = sum c_k cos(2 pi k t/(2 pi_p) + phi_k).
///
/// beta = 0 is the unperturbed baseline f == 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    beta: f64,
    gamma: f64,
    harmonics: Vec<Harmonic>,
}

impl ForcingSpec {
    pub fn new(beta: f64, gamma: f64, harmonics: Vec<Harmonic>) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Parameter(format!(
                "amplitude beta must be finite and >= 0, got {beta}"
            )));
        }
        if beta > 0.0 && !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Parameter(format!(
                "growth exponent gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Parameter(format!("invalid gamma {gamma}")));
        }
        for h in &harmonics {
            if !(h.amplitude.is_finite() && h.phase.is_finite()) {
                return Err(Error::Parameter("non-finite harmonic coefficient".into()));
            }
        }
        Ok(Self {
            beta,
            gamma,
            harmonics,
        })
    }

    /// The unperturbed baseline: f == 0, e == 0.
    pub fn zero() -> Self {
        Self {
            beta: 0.0,
            gamma: 0.5,
            harmonics: Vec::new(),
        }
    }

    pub fn power_law(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(beta, gamma, Vec::new())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }
    pub fn is_zero(&self) -> bool {
        self.beta == 0.0 && self.harmonics.is_empty()
    }

    /// f(x) = beta * sign(x) * |x|^gamma.
    pub fn f(&self, x: f64) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        self.beta * odd_pow(x, self.gamma)
    }

    /// f'(x) = beta * gamma * |x|^{gamma-1} (x != 0).
    pub fn f_deriv(&self, x: f64) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        self.beta * self.gamma * x.abs().powf(self.gamma - 1.0)
    }

    /// F(x) = ∫_0^x f = beta |x|^{gamma+1} / (gamma+1), F(0) = 0.
    pub fn potential(&self, x: f64) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        self.beta * x.abs().powf(self.gamma + 1.0) / (self.gamma + 1.0)
    }

    /// e(t) for the period 2*pi_p.
    pub fn e(&self, t: f64, pi_p: f64) -> f64 {
        let base = PI / pi_p; // 2*pi / (2*pi_p)
        self.harmonics
            .iter()
            .map(|h| h.amplitude * (h.k as f64 * base * t + h.phase).cos())
            .sum()
    }
}

/// Cartesian state (x, y) at time t; y is the conjugate momentum
/// y = -phi_p(x'/omega), so x' = -omega*phi_q(y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    /// |x| + |x'|, the amplitude measured in the original variables.
    pub fn amplitude(&self, params: &JumpingParams) -> f64 {
        self.x.abs() + xprime(params, self.y).abs()
    }
}

/// Action-angle coordinates; theta is reduced mod 2*pi_p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub r: f64,
    pub theta: f64,
}

/// x' recovered from the conjugate momentum.
pub fn xprime(params: &JumpingParams, y: f64) -> f64 {
    -params.omega() * odd_pow(y, params.q() - 1.0)
}

/// Right-hand side of the normalized system.
pub fn vector_field(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    state: &PhaseState,
) -> (f64, f64) {
    let p = params.p();
    let dx = -params.omega() * odd_pow(state.y, params.q() - 1.0);
    let restoring = if state.x >= 0.0 {
        params.a1() * state.x.powf(p - 1.0)
    } else {
        -params.b1() * (-state.x).powf(p - 1.0)
    };
    let dy = params.omega() * restoring
        + params.omega_1mp() * (forcing.f(state.x) - forcing.e(state.t, params.pi_p()));
    (dx, dy)
}

/// Hamiltonian in Cartesian variables (time enters through e(t)).
pub fn hamiltonian_xy(params: &JumpingParams, forcing: &ForcingSpec, state: &PhaseState) -> f64 {
    let p = params.p();
    let q = params.q();
    let stiff = if state.x >= 0.0 {
        params.a1()
    } else {
        params.b1()
    };
    params.omega() * state.y.abs().powf(q) / q
        + params.omega() * stiff * state.x.abs().powf(p) / p
        + params.omega_1mp()
            * (forcing.potential(state.x) - forcing.e(state.t, params.pi_p()) * state.x)
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with dense output and kink-crossing events
// ---------------------------------------------------------------------------

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type Vec2 = [f64; 2];

/// Per-step error budget (in tolerance units) granted to steps that touch
/// a kink line of the field; their local error cannot satisfy the
/// per-unit-time control at any step size.
const KINK_STEP_BUDGET: f64 = 0.004;

struct DenseSegment {
    t: f64,
    h: f64,
    rcont: [Vec2; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> Vec2 {
        let s = ((t - self.t) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = self.rcont[0][i]
                + s * (self.rcont[1][i]
                    + s1 * (self.rcont[2][i]
                        + s * (self.rcont[3][i] + s1 * self.rcont[4][i])));
        }
        out
    }
}

/// Result of an integration run: the final state plus the states at the
/// requested sample times.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub samples: Vec<PhaseState>,
    pub end: PhaseState,
    pub steps: usize,
    pub rejected: usize,
}

struct Stepper<'a> {
    params: &'a JumpingParams,
    forcing: &'a ForcingSpec,
    tol: f64,
    /// Error is controlled per unit time against this scale (the forcing
    /// period), so the drift over one period stays of order `tol`.
    time_scale: f64,
}

impl<'a> Stepper<'a> {
    fn field(&self, t: f64, y: &Vec2) -> Vec2 {
        let state = PhaseState::new(y[0], y[1], t);
        let (dx, dy) = vector_field(self.params, self.forcing, &state);
        [dx, dy]
    }

    /// Scaled error norm plus the roundoff floor of the same quantity.
    /// A step whose estimate sits at the floor cannot be improved by
    /// shrinking h and must be accepted.
    fn error_norm(&self, err: &Vec2, y0: &Vec2, y1: &Vec2) -> (f64, f64) {
        let mut acc = 0.0;
        let mut floor = 0.0;
        for i in 0..2 {
            let mag = y0[i].abs().max(y1[i].abs());
            let sc = self.tol + self.tol * mag;
            acc += (err[i] / sc).powi(2);
            floor += (50.0 * f64::EPSILON * mag / sc).powi(2);
        }
        ((acc / 2.0).sqrt(), (floor / 2.0).sqrt())
    }

    /// One embedded step from (t, y) with size h. Returns the new state,
    /// the error norm, and the dense-output segment.
    fn step(&self, t: f64, y: &Vec2, h: f64, k1: &Vec2) -> (Vec2, f64, DenseSegment, Vec2) {
        let k2 = {
            let arg = [y[0] + h * A21 * k1[0], y[1] + h * A21 * k1[1]];
            self.field(t + C2 * h, &arg)
        };
        let k3 = {
            let arg = [
                y[0] + h * (A31 * k1[0] + A32 * k2[0]),
                y[1] + h * (A31 * k1[1] + A32 * k2[1]),
            ];
            self.field(t + C3 * h, &arg)
        };
        let k4 = {
            let arg = [
                y[0] + h * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
                y[1] + h * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]),
            ];
            self.field(t + C4 * h, &arg)
        };
        let k5 = {
            let arg = [
                y[0] + h * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
                y[1] + h * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
            ];
            self.field(t + C5 * h, &arg)
        };
        let k6 = {
            let arg = [
                y[0] + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
                y[1] + h * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
            ];
            self.field(t + h, &arg)
        };
        let y1 = [
            y[0] + h * (B1 * k1[0] + B3 * k3[0] + B4 * k4[0] + B5 * k5[0] + B6 * k6[0]),
            y[1] + h * (B1 * k1[1] + B3 * k3[1] + B4 * k4[1] + B5 * k5[1] + B6 * k6[1]),
        ];
        let k7 = self.field(t + h, &y1);

        let err = [
            h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0]),
            h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1]),
        ];
        let (err_norm, err_floor) = self.error_norm(&err, y, &y1);
        // saturate at the roundoff floor; the caller applies the
        // error-per-unit-time scaling
        let err_norm = if err_norm <= err_floor { 0.0 } else { err_norm };

        let mut rcont = [[0.0; 2]; 5];
        for i in 0..2 {
            let ydiff = y1[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            rcont[0][i] = y[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k7[i] - bspl;
            rcont[4][i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        (
            y1,
            err_norm,
            DenseSegment {
                t,
                h,
                rcont,
            },
            k7,
        )
    }

    fn initial_step(&self, t0: f64, y0: &Vec2, f0: &Vec2, span: f64) -> f64 {
        let sc = |y: &Vec2, i: usize| self.tol + self.tol * y[i].abs();
        let d0 = ((y0[0] / sc(y0, 0)).powi(2) + (y0[1] / sc(y0, 1)).powi(2)).sqrt();
        let d1 = ((f0[0] / sc(y0, 0)).powi(2) + (f0[1] / sc(y0, 1)).powi(2)).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = [y0[0] + h0 * f0[0], y0[1] + h0 * f0[1]];
        let f1 = self.field(t0 + h0, &y1);
        let d2 = (((f1[0] - f0[0]) / sc(y0, 0)).powi(2) + ((f1[1] - f0[1]) / sc(y0, 1)).powi(2))
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }
}

/// Locate the first root of component `idx` of the dense segment on (0, 1].
fn crossing_fraction(seg: &DenseSegment, idx: usize, lo_val: f64, hi_val: f64) -> f64 {
    debug_assert!(lo_val * hi_val < 0.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut flo = lo_val;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let v = seg.eval(seg.t + mid * seg.h)[idx];
        if v == 0.0 {
            return mid;
        }
        if v.signum() == flo.signum() {
            lo = mid;
            flo = v;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integrate from `state0` to time `t1` with dense output at the sorted
/// `sample_times`. For the unperturbed system the Hamiltonian drift over a
/// period stays below ~10x the tolerance.
pub fn integrate(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    state0: &PhaseState,
    t1: f64,
    tol: f64,
    sample_times: &[f64],
) -> Result<Orbit> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(state0.x.is_finite() && state0.y.is_finite() && state0.t.is_finite() && t1.is_finite()) {
        return Err(Error::Parameter("non-finite integration input".into()));
    }
    let t0 = state0.t;
    if t1 < t0 {
        return Err(Error::Parameter(format!(
            "backward integration not supported: t1 = {t1} < t0 = {t0}"
        )));
    }
    let stepper = Stepper {
        params,
        forcing,
        // internal safety margin so the per-period drift honors ~10*tol
        tol: 0.4 * tol,
        time_scale: params.two_pi_p(),
    };

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0usize;
    let mut record_until = |t_reached: f64, seg: Option<&DenseSegment>, samples: &mut Vec<PhaseState>| {
        while next_sample < sample_times.len() && sample_times[next_sample] <= t_reached {
            let ts = sample_times[next_sample];
            let v = match seg {
                Some(seg) if ts >= seg.t => seg.eval(ts),
                _ => [state0.x, state0.y],
            };
            samples.push(PhaseState::new(v[0], v[1], ts));
            next_sample += 1;
        }
    };

    if t1 == t0 {
        record_until(t0, None, &mut samples);
        return Ok(Orbit {
            samples,
            end: *state0,
            steps: 0,
            rejected: 0,
        });
    }

    let mut t = t0;
    let mut t_comp = 0.0f64; // Kahan compensation for the time accumulator
    let mut y = [state0.x, state0.y];
    let mut k1 = stepper.field(t, &y);
    let mut h = stepper.initial_step(t0, &y, &k1, t1 - t0);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let h_min_scale = 1e-14;

    record_until(t0, None, &mut samples);

    while t < t1 {
        let h_min = h_min_scale * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        let mut h_try = h.min(t1 - t);
        let clamped = h_try < h;

        let (y_new, err_raw, seg, k7) = stepper.step(t, &y, h_try, &k1);
        let err = err_raw * stepper.time_scale / h_try;
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::Integration {
                t,
                reason: "step budget exhausted".into(),
            });
        }
        // a step that straddles or hugs a kink line (x = 0 or y = 0) cannot
        // meet the per-unit-time budget: its local error is O(h^{1+holder}).
        // Such steps get a bounded per-step budget instead; the injections
        // stay within the drift contract because only O(log) of them occur
        // per crossing.
        let kink_near = (0..2).any(|i| {
            let range = (y_new[i] - y[i]).abs();
            y[i].abs().min(y_new[i].abs()) <= 0.5 * range
        });
        let accept = err <= 1.0 || (kink_near && err_raw <= KINK_STEP_BUDGET);
        if !accept {
            rejected += 1;
            h = h_try * (0.9 * err.powf(-0.25)).clamp(0.01, 1.0);
            continue;
        }

        // split the step at the first kink crossing (x = 0 or y = 0) so no
        // accepted step straddles a low-regularity line of the field
        let mut theta_cross = f64::INFINITY;
        for idx in 0..2 {
            if y[idx] != 0.0 && y_new[idx] != 0.0 && y[idx].signum() != y_new[idx].signum() {
                let th = crossing_fraction(&seg, idx, y[idx], y_new[idx]);
                if th < theta_cross {
                    theta_cross = th;
                }
            }
        }
        if theta_cross.is_finite() && theta_cross > 1e-3 && theta_cross < 0.999 {
            let h_cut = h_try * theta_cross;
            if h_cut > h_min {
                let (y_cut, err_cut, seg_cut, k7_cut) = stepper.step(t, &y, h_cut, &k1);
                if err_cut * stepper.time_scale / h_cut <= 1.0
                    || err_cut <= KINK_STEP_BUDGET
                {
                    let t_new = kahan_add(&mut t_comp, t, h_cut);
                    record_until(t_new, Some(&seg_cut), &mut samples);
                    t = t_new;
                    y = y_cut;
                    k1 = k7_cut;
                    // resume with the remainder of the step budget
                    h = (h_try - h_cut).max(h_min);
                    continue;
                }
            }
        }

        let t_new = if clamped {
            t_comp = 0.0;
            t1
        } else {
            kahan_add(&mut t_comp, t, h_try)
        };
        record_until(t_new, Some(&seg), &mut samples);
        t = t_new;
        y = y_new;
        k1 = k7;
        h_try *= if err <= 1.0 {
            if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.25)).clamp(0.2, 5.0)
            }
        } else {
            // relaxed kink acceptance: grow cautiously
            2.0
        };
        h = h_try;
    }

    let end = PhaseState::new(y[0], y[1], t1);
    Ok(Orbit {
        samples,
        end,
        steps,
        rejected,
    })
}

fn kahan_add(comp: &mut f64, t: f64, h: f64) -> f64 {
    let y = h - *comp;
    let s = t + y;
    *comp = (s - t) - y;
    s
}

// ---------------------------------------------------------------------------
// Action-angle chart
// ---------------------------------------------------------------------------

/// Map (x, y) to action-angle coordinates. The action comes from the first
/// integral of the auxiliary orbit; the angle from a safeguarded Newton
/// solve along the orbit, driven by whichever of v or u is better
/// conditioned on the located branch.
pub fn to_action_angle(params: &JumpingParams, x: f64, y: f64) -> Result<ActionAngle> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Domain("non-finite phase point".into()));
    }
    let p = params.p();
    let q = params.q();
    let d = params.d();

    // the scaled pair (x,y) -> (v,u) satisfies the orbit's first integral
    // exactly when r is this energy-like quantity
    let r = params.energy_like(x, y);
    if r <= 0.0 {
        return Err(Error::Domain(
            "action-angle chart excludes the origin".into(),
        ));
    }
    let v_target = x / (d * r).powf(1.0 / p);
    let u_target = y / (d * r).powf(1.0 / q);

    let pi_p = params.pi_p();
    let two_pi_p = params.two_pi_p();
    let junction = params.junction();

    let theta = if u_target == 0.0 {
        if v_target > 0.0 {
            0.0
        } else {
            pi_p
        }
    } else if v_target == 0.0 {
        if u_target < 0.0 {
            junction
        } else {
            two_pi_p - junction
        }
    } else {
        let (lo, hi) = match (v_target > 0.0, u_target > 0.0) {
            (true, false) => (0.0, junction),
            (false, false) => (junction, pi_p),
            (false, true) => (pi_p, two_pi_p - junction),
            (true, true) => (two_pi_p - junction, two_pi_p),
        };
        solve_branch_theta(params, lo, hi, v_target, u_target)?
    };
    Ok(ActionAngle {
        r,
        theta: theta.rem_euclid(two_pi_p),
    })
}

/// Newton with bisection safeguard for the orbit phase on a branch segment
/// where both v and u are strictly monotone.
fn solve_branch_theta(
    params: &JumpingParams,
    lo: f64,
    hi: f64,
    v_target: f64,
    u_target: f64,
) -> Result<f64> {
    let mid = 0.5 * (lo + hi);
    let v_mid = params.aux_v(mid);
    // near the segment end where v is extremal, v' vanishes: drive the
    // solve with u there, with v elsewhere
    let use_u = v_target.abs() > v_mid.abs();

    let g = |theta: f64| -> (f64, f64) {
        let (v, u) = params.aux_pair(theta);
        if use_u {
            let du = -params.a1() * odd_pow(v.max(0.0), params.p() - 1.0)
                + params.b1() * odd_pow((-v).max(0.0), params.p() - 1.0);
            (u - u_target, du)
        } else {
            (v - v_target, odd_pow(u, params.q() - 1.0))
        }
    };

    let (glo, _) = g(lo);
    let (ghi, _) = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        // the target sits within rounding of a segment endpoint
        return Ok(if glo.abs() <= ghi.abs() { lo } else { hi });
    }
    roots::newton_bracketed(g, lo, hi, mid, 1e-12, 0.0)
}

/// Map action-angle coordinates back to (x, y).
pub fn from_action_angle(params: &JumpingParams, aa: &ActionAngle) -> Result<(f64, f64)> {
    if !(aa.r > 0.0 && aa.r.is_finite()) {
        return Err(Error::Domain(format!("action must be positive, got {}", aa.r)));
    }
    let d = params.d();
    let (v, u) = params.aux_pair(aa.theta);
    Ok((
        (d * aa.r).powf(1.0 / params.p()) * v,
        (d * aa.r).powf(1.0 / params.q()) * u,
    ))
}

/// Finite-difference determinant of the chart Jacobian d(x,y)/d(r,theta).
///
/// The chart is area preserving; the determinant is -1 with this ordering
/// of coordinates (the auxiliary orbit runs clockwise), so callers check
/// |det|. Valid away from the singular set.
pub fn chart_jacobian_fd(params: &JumpingParams, aa: &ActionAngle, rel_step: f64) -> Result<f64> {
    let dr = rel_step * aa.r;
    let dth = rel_step * params.pi_p();
    let eval = |r: f64, theta: f64| from_action_angle(params, &ActionAngle { r, theta });
    let (xp, yp) = eval(aa.r + dr, aa.theta)?;
    let (xm, ym) = eval(aa.r - dr, aa.theta)?;
    let (xtp, ytp) = eval(aa.r, aa.theta + dth)?;
    let (xtm, ytm) = eval(aa.r, aa.theta - dth)?;
    let dx_dr = (xp - xm) / (2.0 * dr);
    let dy_dr = (yp - ym) / (2.0 * dr);
    let dx_dth = (xtp - xtm) / (2.0 * dth);
    let dy_dth = (ytp - ytm) / (2.0 * dth);
    Ok(dx_dr * dy_dth - dx_dth * dy_dr)
}

/// Hamiltonian in action-angle variables (paper form):
/// h = omega r + omega^{1-p} F(x_hat) - omega^{1-p} x_hat e(t)
/// with x_hat = (d r)^{1/p} v(theta).
pub fn hamiltonian_h(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    aa: &ActionAngle,
    t: f64,
) -> f64 {
    let x_hat = (params.d() * aa.r).powf(1.0 / params.p()) * params.aux_v(aa.theta);
    params.omega() * aa.r
        + params.omega_1mp() * (forcing.potential(x_hat) - x_hat * forcing.e(t, params.pi_p()))
}

/// Invert h(r, theta, t) = h for the action r.
///
/// Monotone for h large (d h/d r >= omega/2); the bracket starts at
/// [h/(2 omega), 2 h/omega] and expands geometrically.
pub fn solve_r_of_h(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    h: f64,
    t: f64,
    theta: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Inversion(format!("level h must be positive, got {h}")));
    }
    let omega = params.omega();
    let p = params.p();
    let d = params.d();
    let v = params.aux_v(theta);
    let e_t = forcing.e(t, params.pi_p());

    let g = |r: f64| -> (f64, f64) {
        let x_hat = (d * r).powf(1.0 / p) * v;
        let val = omega * r + params.omega_1mp() * (forcing.potential(x_hat) - x_hat * e_t) - h;
        // d x_hat / d r = x_hat / (p r)
        let dval = omega + params.omega_1mp() * (forcing.f(x_hat) - e_t) * x_hat / (p * r);
        (val, dval)
    };

    let mut lo = h / (2.0 * omega);
    let mut hi = 2.0 * h / omega;
    let mut expansions = 0;
    while g(lo).0 > 0.0 {
        lo *= 0.5;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Inversion(format!(
                "no lower bracket for h = {h} at theta = {theta}"
            )));
        }
    }
    while g(hi).0 < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Inversion(format!(
                "no upper bracket for h = {h} at theta = {theta}"
            )));
        }
    }

    let r = roots::newton_bracketed(g, lo, hi, h / omega, 1e-13 * (h / omega).max(1.0), 1e-13 * h.max(1.0))?;
    let (_, slope) = g(r);
    if slope < 0.5 * omega {
        return Err(Error::Inversion(format!(
            "monotonicity margin violated at r = {r}: dh/dr = {slope} < omega/2"
        )));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Stroboscopic (Poincare) map
// ---------------------------------------------------------------------------

/// One iterate of the time-2*pi_p map in both coordinate systems.
#[derive(Debug, Clone, Copy)]
pub struct PoincareIterate {
    pub state: PhaseState,
    pub action: ActionAngle,
}

/// Ordered iterates of the stroboscopic map with a continuous angle lift
/// and a sampled amplitude record.
///
/// The chart angle runs clockwise along the flow (theta' = -omega for the
/// unperturbed system), so the lift decreases by 2*pi_p*omega per iterate.
#[derive(Debug, Clone)]
pub struct PoincareSection {
    /// Iterates at times t0 + k*2*pi_p, k = 0..=n.
    pub iterates: Vec<PoincareIterate>,
    /// Lifted angle at each iterate (theta unwrapped along the flow).
    pub theta_lift: Vec<f64>,
    /// Per-period maximum of |x| + |x'| over the sub-period samples.
    pub amplitude: Vec<f64>,
}

impl PoincareSection {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }
}

/// Sub-period angle samples per iterate used to unwrap the lift; doubled on
/// demand until every sub-increment is below pi_p.
const LIFT_SAMPLES: usize = 16;
const LIFT_SAMPLES_MAX: usize = 4096;

/// Iterate the time-2*pi_p map n times from `state0` (its t is the section
/// time), recording action-angle data and a continuous theta lift.
pub fn poincare_map(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    state0: &PhaseState,
    n: usize,
    tol: f64,
) -> Result<PoincareSection> {
    if n == 0 {
        return Err(Error::Parameter("need at least one map iterate".into()));
    }
    let period = params.two_pi_p();
    let t0 = state0.t;

    let aa0 = to_action_angle(params, state0.x, state0.y)?;
    let mut iterates = vec![PoincareIterate {
        state: *state0,
        action: aa0,
    }];
    let mut theta_lift = vec![aa0.theta];
    let mut amplitude = Vec::with_capacity(n);

    let mut current = *state0;
    let mut lift = aa0.theta;
    for k in 0..n {
        let t_start = t0 + period * k as f64;
        let t_end = t0 + period * (k + 1) as f64;
        current.t = t_start;

        let mut m = LIFT_SAMPLES;
        let (next, amp, dlift) = loop {
            let sample_times: Vec<f64> = (1..=m)
                .map(|j| {
                    if j == m {
                        // keep the last sample exactly on the section time
                        t_end
                    } else {
                        t_start + period * j as f64 / m as f64
                    }
                })
                .collect();
            let orbit = integrate(params, forcing, &current, t_end, tol, &sample_times)?;

            let mut prev_theta = to_action_angle(params, current.x, current.y)?.theta;
            let mut acc = 0.0;
            let mut amp = current.amplitude(params);
            let mut ok = true;
            for s in &orbit.samples {
                let aa = to_action_angle(params, s.x, s.y)?;
                // nearest-branch increment in (-pi_p, pi_p]
                let inc = (aa.theta - prev_theta + params.pi_p()).rem_euclid(period)
                    - params.pi_p();
                if inc.abs() >= 0.5 * params.pi_p() {
                    ok = false;
                    break;
                }
                acc += inc;
                prev_theta = aa.theta;
                amp = amp.max(s.amplitude(params));
            }
            if ok {
                break (orbit.end, amp, acc);
            }
            m *= 2;
            if m > LIFT_SAMPLES_MAX {
                return Err(Error::Analysis(format!(
                    "angle unwrap ambiguity persists at iterate {k} with {} sub-samples",
                    m / 2
                )));
            }
        };

        lift += dlift;
        current = next;
        let aa = to_action_angle(params, current.x, current.y)?;
        iterates.push(PoincareIterate {
            state: current,
            action: aa,
        });
        theta_lift.push(lift);
        amplitude.push(amp);
    }

    Ok(PoincareSection {
        iterates,
        theta_lift,
        amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> JumpingParams {
        JumpingParams::derive(8.0, 1.0, 3.0).unwrap()
    }

    fn reference_forcing() -> ForcingSpec {
        ForcingSpec::new(
            1.0,
            0.4,
            vec![Harmonic {
                k: 1,
                amplitude: 0.5,
                phase: 0.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn forcing_validation() {
        assert!(ForcingSpec::power_law(1.0, 1.2).is_err());
        assert!(ForcingSpec::power_law(-1.0, 0.4).is_err());
        assert!(ForcingSpec::power_law(0.0, 0.4).is_ok());
    }

    #[test]
    fn field_vanishes_at_origin_without_forcing() {
        let params = reference();
        let (dx, dy) = vector_field(
            &params,
            &ForcingSpec::zero(),
            &PhaseState::new(0.0, 0.0, 0.3),
        );
        assert_eq!((dx, dy), (0.0, 0.0));
    }

    #[test]
    fn field_reduces_to_linear_core() {
        // p = 2, a1 = b1 = 1: x' = -omega y, y' = omega x
        let params = JumpingParams::from_normalized(2.0, 1.5, 1.0, 1.0).unwrap();
        let st = PhaseState::new(0.7, -0.3, 0.0);
        let (dx, dy) = vector_field(&params, &ForcingSpec::zero(), &st);
        assert!((dx - 1.5 * 0.3).abs() < 1e-14);
        assert!((dy - 1.5 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn field_is_tangent_to_energy_levels() {
        let params = reference();
        let forcing = ForcingSpec::zero();
        for i in 0..50 {
            let theta = params.two_pi_p() * (i as f64 + 0.3) / 50.0;
            let (x, y) =
                from_action_angle(&params, &ActionAngle { r: 2.0, theta }).unwrap();
            let st = PhaseState::new(x, y, 0.0);
            let (dx, dy) = vector_field(&params, &forcing, &st);
            // dH = H_x dx + H_y dy must vanish along the field
            let eps = 1e-6;
            let hx = (hamiltonian_xy(&params, &forcing, &PhaseState::new(x + eps, y, 0.0))
                - hamiltonian_xy(&params, &forcing, &PhaseState::new(x - eps, y, 0.0)))
                / (2.0 * eps);
            let hy = (hamiltonian_xy(&params, &forcing, &PhaseState::new(x, y + eps, 0.0))
                - hamiltonian_xy(&params, &forcing, &PhaseState::new(x, y - eps, 0.0)))
                / (2.0 * eps);
            let dh = hx * dx + hy * dy;
            let scale = (hx * dx).abs() + (hy * dy).abs() + 1e-12;
            assert!(dh.abs() / scale < 1e-6, "dH/dt = {dh:.3e}");
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let params = reference();
        let orbit = integrate(
            &params,
            &ForcingSpec::zero(),
            &PhaseState::new(0.0, 0.0, 0.0),
            params.two_pi_p(),
            1e-10,
            &[],
        )
        .unwrap();
        assert_eq!(orbit.end.x, 0.0);
        assert_eq!(orbit.end.y, 0.0);
    }

    #[test]
    fn unperturbed_orbit_closes() {
        let params = reference();
        let forcing = ForcingSpec::zero();
        let (x0, y0) = from_action_angle(
            &params,
            &ActionAngle {
                r: 1.0,
                theta: 0.7,
            },
        )
        .unwrap();
        // the orbit's period in t is 2*pi_p / omega
        let period = params.two_pi_p() / params.omega();
        let orbit = integrate(
            &params,
            &forcing,
            &PhaseState::new(x0, y0, 0.0),
            period,
            1e-11,
            &[],
        )
        .unwrap();
        assert!(
            (orbit.end.x - x0).abs() < 1e-7 && (orbit.end.y - y0).abs() < 1e-7,
            "closed orbit failed: dx = {:.3e}, dy = {:.3e}",
            orbit.end.x - x0,
            orbit.end.y - y0
        );
    }

    #[test]
    fn hamiltonian_conserved_ten_periods() {
        let params = reference();
        let forcing = ForcingSpec::zero();
        let (x0, y0) = from_action_angle(
            &params,
            &ActionAngle {
                r: 1.3,
                theta: 2.1,
            },
        )
        .unwrap();
        let st0 = PhaseState::new(x0, y0, 0.0);
        let h0 = hamiltonian_xy(&params, &forcing, &st0);
        let orbit = integrate(
            &params,
            &forcing,
            &st0,
            10.0 * params.two_pi_p(),
            1e-10,
            &[],
        )
        .unwrap();
        let h1 = hamiltonian_xy(&params, &forcing, &orbit.end);
        assert!(
            ((h1 - h0) / h0).abs() < 1e-8,
            "energy drift {:.3e}",
            (h1 - h0) / h0
        );
    }

    #[test]
    fn hamiltonian_drift_tracks_tolerance() {
        let params = reference();
        let forcing = ForcingSpec::zero();
        let (x0, y0) = from_action_angle(
            &params,
            &ActionAngle {
                r: 1.0,
                theta: 0.4,
            },
        )
        .unwrap();
        for tol in [1e-7, 1e-9] {
            let st0 = PhaseState::new(x0, y0, 0.0);
            let h0 = hamiltonian_xy(&params, &forcing, &st0);
            let orbit =
                integrate(&params, &forcing, &st0, params.two_pi_p(), tol, &[]).unwrap();
            let h1 = hamiltonian_xy(&params, &forcing, &orbit.end);
            assert!(
                ((h1 - h0) / h0.abs().max(1.0)).abs() < 10.0 * tol,
                "tol {tol:.0e}: drift {:.3e}",
                (h1 - h0) / h0
            );
        }
    }

    #[test]
    fn chart_round_trip() {
        let params = reference();
        for i in 0..200 {
            let r = 0.1 + 9000.0 * (i as f64 / 199.0).powi(3);
            let theta = params.two_pi_p() * ((i as f64 * 0.61803) % 1.0);
            let (x, y) = from_action_angle(&params, &ActionAngle { r, theta }).unwrap();
            let back = to_action_angle(&params, x, y).unwrap();
            let dr = ((back.r - r) / r).abs();
            let mut dth = (back.theta - theta).abs();
            dth = dth.min(params.two_pi_p() - dth);
            assert!(
                dr < 1e-9 && dth < 1e-9,
                "round trip failed at r = {r}, theta = {theta}: dr = {dr:.3e}, dth = {dth:.3e}"
            );
        }
    }

    #[test]
    fn chart_axis_points() {
        let params = reference();
        let r = 2.5;
        let x = (params.d() * r).powf(1.0 / params.p())
            * (params.p() - 1.0).powf(1.0 / params.p());
        let aa = to_action_angle(&params, x, 0.0).unwrap();
        assert!((aa.r - r).abs() / r < 1e-12);
        assert!(aa.theta.abs() < 1e-12);
        assert!(to_action_angle(&params, 0.0, 0.0).is_err());
    }

    #[test]
    fn chart_matches_polar_in_symmetric_case() {
        let params = JumpingParams::from_normalized(2.0, 1.0, 1.0, 1.0).unwrap();
        // v = cos, u = -sin, d = 2: x = sqrt(2r) cos(theta), y = -sqrt(2r) sin(theta)
        let aa = ActionAngle { r: 2.0, theta: 1.1 };
        let (x, y) = from_action_angle(&params, &aa).unwrap();
        assert!((x - 2.0 * 1.1f64.cos()).abs() < 1e-10);
        assert!((y + 2.0 * 1.1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn chart_jacobian_is_unimodular() {
        let params = reference();
        for i in 0..60 {
            let theta = params.two_pi_p() * (i as f64 + 0.5) / 60.0;
            if params.aux_v(theta).abs() < 0.1 {
                continue;
            }
            let det = chart_jacobian_fd(
                &params,
                &ActionAngle { r: 3.0, theta },
                1e-5,
            )
            .unwrap();
            assert!(
                (det.abs() - 1.0).abs() < 1e-5,
                "theta = {theta}: |det| = {}",
                det.abs()
            );
        }
    }

    #[test]
    fn theta_periodicity_in_chart() {
        let params = reference();
        let aa = ActionAngle { r: 4.0, theta: 1.0 };
        let shifted = ActionAngle {
            r: 4.0,
            theta: 1.0 + params.two_pi_p(),
        };
        let a = from_action_angle(&params, &aa).unwrap();
        let b = from_action_angle(&params, &shifted).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_h_unperturbed_is_omega_r() {
        let params = reference();
        let aa = ActionAngle { r: 7.0, theta: 2.0 };
        let h = hamiltonian_h(&params, &ForcingSpec::zero(), &aa, 0.0);
        assert!((h - params.omega() * 7.0).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_consistency_between_charts() {
        let params = reference();
        let forcing = reference_forcing();
        for i in 0..40 {
            let r = 1.0 + i as f64;
            let theta = params.two_pi_p() * ((i as f64 * 0.37) % 1.0);
            let t = 0.7;
            let aa = ActionAngle { r, theta };
            let (x, y) = from_action_angle(&params, &aa).unwrap();
            let h_aa = hamiltonian_h(&params, &forcing, &aa, t);
            let h_xy = hamiltonian_xy(&params, &forcing, &PhaseState::new(x, y, t));
            assert!(
                ((h_aa - h_xy) / h_xy.abs().max(1.0)).abs() < 1e-9,
                "r = {r}: {h_aa} vs {h_xy}"
            );
        }
    }

    #[test]
    fn solve_r_unperturbed_is_linear() {
        let params = reference();
        let r = solve_r_of_h(&params, &ForcingSpec::zero(), 12.0, 0.0, 1.0).unwrap();
        assert!((r - 12.0 / params.omega()).abs() < 1e-10);
    }

    #[test]
    fn solve_r_round_trip() {
        let params = reference();
        let forcing = reference_forcing();
        for i in 0..30 {
            let r = 100.0 * (1.0 + i as f64);
            let theta = params.two_pi_p() * ((i as f64 * 0.23 + 0.05) % 1.0);
            let t = 1.3;
            let h = hamiltonian_h(&params, &forcing, &ActionAngle { r, theta }, t);
            let r_back = solve_r_of_h(&params, &forcing, h, t, theta).unwrap();
            assert!(
                ((r_back - r) / r).abs() < 1e-8,
                "r = {r}: recovered {r_back}"
            );
        }
    }

    #[test]
    fn poincare_rejects_zero_iterates() {
        let params = reference();
        assert!(poincare_map(
            &params,
            &ForcingSpec::zero(),
            &PhaseState::new(1.0, 0.0, 0.0),
            0,
            1e-9
        )
        .is_err());
    }

    #[test]
    fn poincare_unperturbed_invariants() {
        let params = reference();
        let forcing = ForcingSpec::zero();
        let (x0, y0) = from_action_angle(
            &params,
            &ActionAngle {
                r: 1.0,
                theta: 0.3,
            },
        )
        .unwrap();
        let n = 100;
        let section = poincare_map(
            &params,
            &forcing,
            &PhaseState::new(x0, y0, 0.0),
            n,
            1e-11,
        )
        .unwrap();
        let r0 = section.iterates[0].action.r;
        let mut max_drift: f64 = 0.0;
        for it in &section.iterates {
            max_drift = max_drift.max((it.action.r - r0).abs());
        }
        assert!(max_drift < 1e-7, "action drift {max_drift:.3e}");

        // theta retreats by 2*pi_p*omega per iterate (clockwise chart)
        let expected = -params.two_pi_p() * params.omega();
        for k in 0..n {
            let adv = section.theta_lift[k + 1] - section.theta_lift[k];
            assert!(
                (adv - expected).abs() < 1e-7,
                "iterate {k}: advance {adv} vs {expected}"
            );
        }
    }
}
