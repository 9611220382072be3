//! Generalized p-trigonometric functions.
//!
//! `sin_p` solves the initial value problem
//!
//! ```text
//! (phi_p(C'))' + phi_p(C) = 0,   C(0) = 0, C'(0) = 1,
//! ```
//!
//! is 2*pi_p-periodic with pi_p = 2*pi*(p-1)^{1/p} / (p*sin(pi/p)), and on
//! the quarter period [0, pi_p/2] is the inverse of the phase integral
//! t = ∫_0^x (1 - s^p/(p-1))^{-1/p} ds. The first integral
//! (p-1)|C'|^p + |C|^p = p-1 supplies the derivative.
//!
//! Evaluation inverts the phase integral after the substitution
//! u = 1 - z^q (with s = (p-1)^{1/p} u), which removes the integrable
//! endpoint singularity exactly: the integrand becomes
//! q * [(1-u^p)/(1-u)]^{-1/p}, analytic on [0, 1]. [`SinpTable`] caches the
//! inverse on a uniform grid for bulk evaluation; the free functions invert
//! per call.

use crate::quad;
use crate::roots;
use crate::{Error, Result};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Conjugate exponent pair with 1/p + 1/q = 1, restricted to p >= 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplaceExponents {
    p: f64,
    q: f64,
}

impl PLaplaceExponents {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 2.0 {
            return Err(Error::Domain(format!("exponent p = {p} must satisfy p >= 2")));
        }
        Ok(Self { p, q: p / (p - 1.0) })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Peak value of sin_p: (p-1)^{1/p}.
    pub fn peak(&self) -> f64 {
        (self.p - 1.0).powf(1.0 / self.p)
    }
}

/// The odd power map phi_p(s) = |s|^{p-2} s.
pub fn phi(p: f64, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("phi argument {s} is not finite")));
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::Domain(format!("phi exponent p = {p} must satisfy p >= 1")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(s.signum() * s.abs().powf(p - 1.0))
}

/// Inverse of [`phi`]; by conjugacy phi_p^{-1} = phi_q with 1/p + 1/q = 1.
pub fn phi_inv(p: f64, s: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!(
            "phi_inv exponent p = {p} must satisfy p > 1"
        )));
    }
    phi(p / (p - 1.0), s)
}

/// Half period of sin_p (closed form).
pub fn pi_p(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("pi_p requires p > 1, got {p}")));
    }
    Ok(2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin()))
}

/// Half period by direct quadrature of 2*∫_0^{(p-1)^{1/p}} (1-s^p/(p-1))^{-1/p} ds,
/// splitting at the singular endpoint and closing with a series tail.
///
/// Independent of both the closed form and the substitution used by the
/// evaluation path, so it serves as an oracle for either.
pub fn pi_p_quadrature(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("pi_p_quadrature requires p > 1, got {p}")));
    }
    let m = (p - 1.0).powf(1.0 / p);
    Ok(2.0 * m * (unit_phase_direct(p, 1.0)?))
}

/// ∫_0^x (1 - s^p/(p-1))^{-1/p} ds by the split-and-tail route (oracle).
pub fn phase_integral_quadrature(p: f64, x: f64) -> Result<f64> {
    let exps = PLaplaceExponents::new(p)?;
    let m = exps.peak();
    if !(0.0..=m * (1.0 + 1e-12)).contains(&x) {
        return Err(Error::Domain(format!(
            "phase integral argument {x} outside [0, {m}]"
        )));
    }
    Ok(m * unit_phase_direct(p, (x / m).min(1.0))?)
}

const TAIL_EPS: f64 = 1e-5;

/// ∫_0^xt (1-u^p)^{-1/p} du for xt in [0, 1]: adaptive quadrature up to
/// 1 - TAIL_EPS, then a three-term expansion of the singular tail.
fn unit_phase_direct(p: f64, xt: f64) -> Result<f64> {
    let integrand = |u: f64| (1.0 - u.powf(p)).max(0.0).powf(-1.0 / p);
    let cut = 1.0 - TAIL_EPS;
    if xt <= cut {
        return quad::integrate(integrand, 0.0, xt, 1e-13, 1e-12);
    }
    let body = quad::integrate(integrand, 0.0, cut, 1e-13, 1e-12)?;
    Ok(body + singular_tail(p, TAIL_EPS) - singular_tail(p, 1.0 - xt))
}

/// ∫_{1-w}^1 (1-u^p)^{-1/p} du for small w, from the expansion
/// 1-(1-w)^p = p*w*(1 + b1*w + b2*w^2 + ...).
fn singular_tail(p: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let inv_p = 1.0 / p;
    let c1 = (p - 1.0) / (2.0 * p);
    let c2 = -(p - 1.0) * (p - 2.0) / (6.0 * p) + (1.0 + p) * (p - 1.0).powi(2) / (8.0 * p * p);
    p.powf(-inv_p)
        * (w.powf(1.0 - inv_p) / (1.0 - inv_p)
            + c1 * w.powf(2.0 - inv_p) / (2.0 - inv_p)
            + c2 * w.powf(3.0 - inv_p) / (3.0 - inv_p))
}

/// Quarter-period inversion engine in the desingularized variable.
///
/// With s = (p-1)^{1/p} u and u = 1 - z^q, the phase distance from the peak
/// is T(z) = m*q*∫_0^z g(1-ζ^q)^{-1/p} dζ with g(u) = (1-u^p)/(1-u),
/// analytic on [0, 1] and T(1) = pi_p/2.
#[derive(Debug, Clone)]
pub(crate) struct Quarter {
    p: f64,
    q: f64,
    m: f64,
    pub(crate) quarter: f64,
    t_slope: f64, // T'(0) = m*q*p^{-1/p}, used for Newton seeds
}

impl Quarter {
    pub(crate) fn new(p: f64) -> Result<Self> {
        let exps = PLaplaceExponents::new(p)?;
        let quarter = pi_p(p)? / 2.0;
        let m = exps.peak();
        let q = exps.q();
        Ok(Self {
            p,
            q,
            m,
            quarter,
            t_slope: m * q * p.powf(-1.0 / p),
        })
    }

    /// g(1 - z^q)^{-1/p}, stable over the whole of [0, 1].
    fn g_pow(&self, z: f64) -> f64 {
        let s = z.powf(self.q).min(1.0);
        let g = if s < 1e-280 {
            self.p
        } else {
            -f64::exp_m1(self.p * f64::ln_1p(-s)) / s
        };
        g.powf(-1.0 / self.p)
    }

    /// Phase distance from the peak: T(z).
    fn tail_phase(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        let v = quad::integrate(|zeta| self.g_pow(zeta), 0.0, z.min(1.0), 5e-14, 1e-13)?;
        Ok(self.m * self.q * v)
    }

    /// Solve T(z) = tau for z in [0, 1].
    pub(crate) fn invert_z(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if tau >= self.quarter {
            return Ok(1.0);
        }
        let seed = (tau / self.t_slope).clamp(0.0, 1.0);
        let z = roots::newton_bracketed(
            |z| {
                let t = self
                    .tail_phase(z)
                    .expect("tail phase quadrature is analytic on [0,1]");
                (t - tau, self.m * self.q * self.g_pow(z))
            },
            0.0,
            1.0,
            seed,
            1e-15,
            0.0,
        )?;
        Ok(z.clamp(0.0, 1.0))
    }

    /// sin_p value and derivative on the quarter period from t in [0, pi_p/2].
    pub(crate) fn value_deriv(&self, t: f64) -> Result<(f64, f64)> {
        let z = self.invert_z(self.quarter - t)?;
        Ok((self.value_from_z(z), self.deriv_from_z(z)))
    }

    pub(crate) fn value_from_z(&self, z: f64) -> f64 {
        if z >= 1.0 {
            return 0.0;
        }
        self.m * (1.0 - z.powf(self.q))
    }

    /// C' = (1 - (x/m)^p)^{1/p} computed directly from z; satisfies the
    /// first integral identically.
    pub(crate) fn deriv_from_z(&self, z: f64) -> f64 {
        let s = z.powf(self.q).min(1.0);
        if s == 0.0 {
            return 0.0;
        }
        (-f64::exp_m1(self.p * f64::ln_1p(-s))).powf(1.0 / self.p)
    }
}

/// Fold an argument into the quarter period using the symmetries
/// sin_p(pi_p - t) = sin_p(t) and sin_p(2 pi_p - t) = -sin_p(t).
/// Returns (quarter argument, value sign, derivative sign).
fn fold(t: f64, pi_p: f64) -> (f64, f64, f64) {
    let two = 2.0 * pi_p;
    let tm = t.rem_euclid(two);
    let half = 0.5 * pi_p;
    if tm <= half {
        (tm, 1.0, 1.0)
    } else if tm <= pi_p {
        (pi_p - tm, 1.0, -1.0)
    } else if tm <= pi_p + half {
        (tm - pi_p, -1.0, -1.0)
    } else {
        (two - tm, -1.0, 1.0)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("argument t = {t} is not finite")));
    }
    Ok(())
}

/// sin_p(t), evaluated by inverting the phase integral (exact path).
pub fn sinp(p: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let quarter = Quarter::new(p)?;
    let (tq, sv, _) = fold(t, 2.0 * quarter.quarter);
    let (x, _) = quarter.value_deriv(tq)?;
    Ok(sv * x)
}

/// sin_p'(t) from the first integral (p-1)|C'|^p + |C|^p = p-1.
pub fn sinp_deriv(p: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let quarter = Quarter::new(p)?;
    let (tq, _, sd) = fold(t, 2.0 * quarter.quarter);
    let (_, d) = quarter.value_deriv(tq)?;
    Ok(sd * d)
}

/// I_p = ∫_0^{pi_p/2} sin_p t dt in Beta-function closed form:
/// (p-1)^{2/p} / p * B(2/p, 1 - 1/p).
pub fn ip_constant(p: f64) -> Result<f64> {
    let exps = PLaplaceExponents::new(p)?;
    let _ = exps;
    let a = 2.0 / p;
    let b = 1.0 - 1.0 / p;
    let beta = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
    Ok((p - 1.0).powf(2.0 / p) / p * beta)
}

/// I_p by adaptive quadrature of the exact sin_p (oracle route).
pub fn ip_quadrature(p: f64) -> Result<f64> {
    let quarter = Quarter::new(p)?;
    let end = quarter.quarter;
    quad::integrate(
        |t| {
            quarter
                .value_deriv(t.clamp(0.0, end))
                .map(|(x, _)| x)
                .expect("quarter-period inversion cannot fail for t in range")
        },
        0.0,
        end,
        1e-11,
        1e-11,
    )
}

/// Precomputed quarter-period inverse for fast 2*pi_p-periodic evaluation.
///
/// The engine stores the analytic inverse z(tau) of the desingularized
/// phase on a uniform grid with exact derivatives and evaluates by cubic
/// Hermite interpolation; `values`/`derivs` expose the corresponding
/// sin_p data on an ascending t-grid.
#[derive(Debug, Clone)]
pub struct SinpTable {
    quarter_engine: Quarter,
    pi_p: f64,
    step: f64,
    z: Vec<f64>,
    z_deriv: Vec<f64>,
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

/// Default node count; sufficient for ~1e-12 interpolation error at p <= 8.
pub const DEFAULT_TABLE_NODES: usize = 1024;

impl SinpTable {
    pub fn new(p: f64, node_count: usize) -> Result<Self> {
        if node_count < 16 {
            return Err(Error::Parameter(format!(
                "table needs at least 16 nodes, got {node_count}"
            )));
        }
        let engine = Quarter::new(p)?;
        let quarter = engine.quarter;
        let n = node_count;
        let step = quarter / (n - 1) as f64;

        let mut z = Vec::with_capacity(n);
        let mut z_deriv = Vec::with_capacity(n);
        for i in 0..n {
            let tau = step * i as f64;
            let mut zi = engine.invert_z(tau.min(quarter))?;
            if i == 0 {
                zi = 0.0;
            }
            if i == n - 1 {
                zi = 1.0;
            }
            z.push(zi);
            // dz/dtau = 1 / T'(z)
            z_deriv.push(1.0 / (engine.m * engine.q * engine.g_pow(zi)));
        }

        let mut nodes = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        for j in 0..n {
            let i = n - 1 - j;
            nodes.push(quarter - step * i as f64);
            values.push(engine.value_from_z(z[i]));
            derivs.push(engine.deriv_from_z(z[i]));
        }
        // snap the grid endpoints exactly
        nodes[0] = 0.0;
        nodes[n - 1] = quarter;

        Ok(Self {
            pi_p: 2.0 * quarter,
            quarter_engine: engine,
            step,
            z,
            z_deriv,
            nodes,
            values,
            derivs,
        })
    }

    pub fn with_default_resolution(p: f64) -> Result<Self> {
        Self::new(p, DEFAULT_TABLE_NODES)
    }

    pub fn p(&self) -> f64 {
        self.quarter_engine.p
    }

    pub fn pi_p(&self) -> f64 {
        self.pi_p
    }

    /// Ascending t-grid on [0, pi_p/2].
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// sin_p at the grid nodes (0 up to (p-1)^{1/p}).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// sin_p' at the grid nodes (1 down to 0).
    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    /// Interpolated z(tau) for tau = pi_p/2 - t_quarter.
    fn z_at(&self, tau: f64) -> f64 {
        let quarter = self.quarter_engine.quarter;
        let tau = tau.clamp(0.0, quarter);
        let n = self.z.len();
        let mut i = (tau / self.step) as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        let s = (tau - self.step * i as f64) / self.step;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let z = h00 * self.z[i]
            + self.step * h10 * self.z_deriv[i]
            + h01 * self.z[i + 1]
            + self.step * h11 * self.z_deriv[i + 1];
        z.clamp(0.0, 1.0)
    }

    /// sin_p(t) over the full periodic extension.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_pair(t).0
    }

    /// sin_p'(t) over the full periodic extension.
    pub fn eval_deriv(&self, t: f64) -> f64 {
        self.eval_pair(t).1
    }

    /// (sin_p(t), sin_p'(t)) sharing one inverse lookup.
    pub fn eval_pair(&self, t: f64) -> (f64, f64) {
        let (tq, sv, sd) = fold(t, self.pi_p);
        let z = self.z_at(self.quarter_engine.quarter - tq);
        (
            sv * self.quarter_engine.value_from_z(z),
            sd * self.quarter_engine.deriv_from_z(z),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

    #[test]
    fn phi_examples() {
        assert_eq!(phi(2.0, -3.5).unwrap(), -3.5);
        assert_eq!(phi(3.0, -2.0).unwrap(), -4.0);
        assert!((phi(4.0, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert!(phi(2.0, f64::NAN).is_err());
        assert!(phi(0.5, 1.0).is_err());
    }

    #[test]
    fn phi_inv_examples() {
        assert_eq!(phi_inv(2.0, 7.0).unwrap(), 7.0);
        assert!((phi_inv(3.0, -4.0).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_round_trip_p_2_5() {
        for i in 0..100 {
            let s = -10.0 + 20.0 * (i as f64 + 0.5) / 100.0;
            let r = phi(2.5, phi_inv(2.5, s).unwrap()).unwrap();
            assert!(
                (r - s).abs() <= 1e-12 * s.abs().max(1.0),
                "round trip failed at s = {s}: {r}"
            );
        }
    }

    #[test]
    fn pi_p_reduces_to_pi() {
        assert!((pi_p(2.0).unwrap() - PI).abs() < 1e-14);
    }

    #[test]
    fn pi_p_closed_form_at_4() {
        let expected = 2.0 * PI * 3.0f64.powf(0.25) / (4.0 * (PI / 4.0).sin());
        assert!((pi_p(4.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn pi_p_matches_quadrature_oracle() {
        for p in PS {
            let closed = pi_p(p).unwrap();
            let quadr = pi_p_quadrature(p).unwrap();
            assert!(
                ((closed - quadr) / closed).abs() < 1e-9,
                "p = {p}: closed {closed} vs quadrature {quadr}"
            );
        }
    }

    #[test]
    fn sinp_special_points() {
        for p in PS {
            let peak = (p - 1.0).powf(1.0 / p);
            let quarter = pi_p(p).unwrap() / 2.0;
            assert_eq!(sinp(p, 0.0).unwrap(), 0.0);
            assert!((sinp(p, quarter).unwrap() - peak).abs() < 1e-13);
            assert!((sinp_deriv(p, 0.0).unwrap() - 1.0).abs() < 1e-13);
            assert!(sinp_deriv(p, quarter).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn sinp_reduces_to_sine() {
        assert!((sinp(2.0, PI / 6.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((sinp_deriv(2.0, PI / 3.0).unwrap() - 0.5).abs() < 1e-12);
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = 2.0 * PI * i as f64 / 999.0;
            worst = worst.max((sinp(2.0, t).unwrap() - t.sin()).abs());
        }
        assert!(worst < 1e-9, "max |sin_2 - sin| = {worst:.3e}");
    }

    #[test]
    fn first_integral_on_grid() {
        for p in PS {
            let two_pi = 2.0 * pi_p(p).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..1000 {
                let t = two_pi * i as f64 / 999.0;
                let c = sinp(p, t).unwrap();
                let d = sinp_deriv(p, t).unwrap();
                let res = (p - 1.0) * d.abs().powf(p) + c.abs().powf(p) - (p - 1.0);
                worst = worst.max(res.abs());
            }
            assert!(worst < 1e-10, "p = {p}: first integral residual {worst:.3e}");
        }
    }

    #[test]
    fn implicit_integral_round_trip() {
        for p in PS {
            let quarter = pi_p(p).unwrap() / 2.0;
            for i in 0..40 {
                let t = quarter * i as f64 / 39.0;
                let x = sinp(p, t).unwrap();
                let back = phase_integral_quadrature(p, x).unwrap();
                assert!(
                    (back - t).abs() < 1e-9,
                    "p = {p}, t = {t}: phase integral returned {back}"
                );
            }
        }
    }

    #[test]
    fn symmetries_and_periodicity() {
        for p in PS {
            let pip = pi_p(p).unwrap();
            for i in 0..200 {
                let t = pip * i as f64 / 199.0;
                let a = sinp(p, pip - t).unwrap();
                let b = sinp(p, t).unwrap();
                assert!((a - b).abs() < 1e-12, "reflection failed at p={p}, t={t}");
                let c = sinp(p, 2.0 * pip - t).unwrap();
                assert!((c + b).abs() < 1e-12, "odd reflection failed at p={p}, t={t}");
                let d = sinp(p, t + 2.0 * pip).unwrap();
                assert!((d - b).abs() < 1e-12, "periodicity failed at p={p}, t={t}");
            }
        }
    }

    #[test]
    fn ip_constant_examples() {
        assert!((ip_constant(2.0).unwrap() - 1.0).abs() < 1e-12);
        for p in [2.0, 2.5, 3.0, 4.0] {
            let closed = ip_constant(p).unwrap();
            let quadr = ip_quadrature(p).unwrap();
            assert!(
                (closed - quadr).abs() < 1e-8,
                "p = {p}: I_p closed {closed} vs quadrature {quadr}"
            );
        }
    }

    #[test]
    fn table_matches_exact_path() {
        for p in PS {
            let table = SinpTable::with_default_resolution(p).unwrap();
            let two_pi = table.pi_p() * 2.0;
            let mut worst_v: f64 = 0.0;
            let mut worst_d: f64 = 0.0;
            for i in 0..500 {
                let t = two_pi * (i as f64 + 0.31) / 500.0;
                worst_v = worst_v.max((table.eval(t) - sinp(p, t).unwrap()).abs());
                worst_d = worst_d.max((table.eval_deriv(t) - sinp_deriv(p, t).unwrap()).abs());
            }
            assert!(worst_v < 1e-11, "p = {p}: table value error {worst_v:.3e}");
            assert!(worst_d < 1e-9, "p = {p}: table deriv error {worst_d:.3e}");
        }
    }

    #[test]
    fn table_contract() {
        for p in PS {
            let table = SinpTable::new(p, 256).unwrap();
            let vals = table.values();
            let ders = table.derivs();
            let peak = (p - 1.0).powf(1.0 / p);
            assert_eq!(vals[0], 0.0);
            assert!((vals[vals.len() - 1] - peak).abs() < 1e-13);
            assert!((ders[0] - 1.0).abs() < 1e-13);
            assert!(ders[ders.len() - 1].abs() < 1e-13);
            for w in vals.windows(2) {
                assert!(w[1] > w[0] - 1e-15, "values must increase");
            }
            for w in ders.windows(2) {
                assert!(w[1] < w[0] + 1e-15, "derivs must decrease");
            }
            for i in 0..vals.len() {
                let res =
                    (p - 1.0) * ders[i].abs().powf(p) + vals[i].abs().powf(p) - (p - 1.0);
                assert!(res.abs() < 1e-10, "node first integral residual {res:.3e}");
            }
        }
    }

    #[test]
    fn table_rejects_tiny_node_count() {
        assert!(SinpTable::new(3.0, 4).is_err());
    }
}
