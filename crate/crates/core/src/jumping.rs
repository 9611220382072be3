//! Jumping-nonlinearity coefficients and the closed-form auxiliary orbit.
//!
//! The unperturbed normalized system
//!
//! ```text
//! x' = phi_q(y),   y' = -a1*phi_p(x+) + b1*phi_p(x-)
//! ```
//!
//! has a distinguished 2*pi_p-periodic solution (v, u) through
//! ((p-1)^{1/p}, 0), pieced together from two rescaled sin_p arcs with the
//! first integral |u|^q/q + (a1|v+|^p + b1|v-|^p)/p = a1/q. Action-angle
//! coordinates are built on this orbit.

use crate::ptrig::{self, PLaplaceExponents, SinpTable};
use crate::quad;
use crate::{Error, Result};
use std::sync::Arc;

/// Coefficients of the jumping oscillator together with the derived
/// normalization and a shared sin_p table for orbit evaluation.
#[derive(Debug, Clone)]
pub struct JumpingParams {
    a: f64,
    b: f64,
    exps: PLaplaceExponents,
    omega: f64,
    a1: f64,
    b1: f64,
    d: f64,
    pi_p: f64,
    junction: f64, // first zero of v: pi_p / (2 a1^{1/p})
    a1_root: f64,  // a1^{1/p}
    b1_root: f64,  // b1^{1/p}
    amp_ratio: f64, // (a1/b1)^{1/p}
    a1_pow_cq: f64, // a1^{1/q} = a1^{(p-1)/p}
    omega_1mp: f64, // omega^{1-p}
    table: Arc<SinpTable>,
}

/// Normalization identity residual tolerated at construction.
const NORMALIZATION_TOL: f64 = 1e-10;

impl JumpingParams {
    /// Derive the normalized coefficients from the equation parameters:
    /// omega = 2/(a^{-1/p} + b^{-1/p}), a = omega^p a1, b = omega^p b1,
    /// d = q/a1.
    pub fn derive(a: f64, b: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(Error::Parameter(format!(
                "stiffness coefficients must be positive, got a = {a}, b = {b}"
            )));
        }
        if a == b {
            return Err(Error::Parameter(
                "jumping nonlinearity requires a != b".into(),
            ));
        }
        let exps = PLaplaceExponents::new(p)?;
        let omega = 2.0 / (a.powf(-1.0 / p) + b.powf(-1.0 / p));
        let omega_p = omega.powf(p);
        Self::build(a, b, exps, omega, a / omega_p, b / omega_p)
    }

    /// Construct directly from normalized coefficients satisfying
    /// a1^{-1/p} + b1^{-1/p} = 2. Unlike [`JumpingParams::derive`] this
    /// admits the symmetric case a1 = b1 (useful as a baseline).
    pub fn from_normalized(p: f64, omega: f64, a1: f64, b1: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Parameter(format!("omega must be positive, got {omega}")));
        }
        if a1 <= 0.0 || b1 <= 0.0 {
            return Err(Error::Parameter(format!(
                "normalized coefficients must be positive, got a1 = {a1}, b1 = {b1}"
            )));
        }
        let exps = PLaplaceExponents::new(p)?;
        let omega_p = omega.powf(p);
        Self::build(omega_p * a1, omega_p * b1, exps, omega, a1, b1)
    }

    fn build(
        a: f64,
        b: f64,
        exps: PLaplaceExponents,
        omega: f64,
        a1: f64,
        b1: f64,
    ) -> Result<Self> {
        let p = exps.p();
        let norm = a1.powf(-1.0 / p) + b1.powf(-1.0 / p);
        if (norm - 2.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Parameter(format!(
                "normalization identity a1^(-1/p) + b1^(-1/p) = 2 violated: got {norm}"
            )));
        }
        let table = Arc::new(SinpTable::with_default_resolution(p)?);
        let pi_p = table.pi_p();
        let a1_root = a1.powf(1.0 / p);
        Ok(Self {
            a,
            b,
            exps,
            omega,
            a1,
            b1,
            d: exps.q() / a1,
            pi_p,
            junction: pi_p / (2.0 * a1_root),
            a1_root,
            b1_root: b1.powf(1.0 / p),
            amp_ratio: (a1 / b1).powf(1.0 / p),
            a1_pow_cq: a1.powf(1.0 / exps.q()),
            omega_1mp: omega.powf(1.0 - p),
            table,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn p(&self) -> f64 {
        self.exps.p()
    }
    pub fn q(&self) -> f64 {
        self.exps.q()
    }
    pub fn exponents(&self) -> PLaplaceExponents {
        self.exps
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn b1(&self) -> f64 {
        self.b1
    }
    /// Action scale d = q / a1.
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn pi_p(&self) -> f64 {
        self.pi_p
    }
    pub fn two_pi_p(&self) -> f64 {
        2.0 * self.pi_p
    }
    /// omega^{1-p}, the perturbation scale in the normalized system.
    pub fn omega_1mp(&self) -> f64 {
        self.omega_1mp
    }
    pub fn sinp_table(&self) -> &SinpTable {
        &self.table
    }

    /// First zero of v in [0, pi_p]: pi_p / (2 a1^{1/p}).
    pub fn junction(&self) -> f64 {
        self.junction
    }

    /// Zeros of v(theta) on [0, 2 pi_p): the singular set of the chart.
    pub fn singular_thetas(&self) -> [f64; 2] {
        [self.junction, self.two_pi_p() - self.junction]
    }

    /// Distance from theta to the nearest zero of v, on the circle.
    pub fn distance_to_singular(&self, theta: f64) -> f64 {
        let two = self.two_pi_p();
        let th = theta.rem_euclid(two);
        self.singular_thetas()
            .iter()
            .map(|&z| {
                let d = (th - z).abs();
                d.min(two - d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// The auxiliary orbit value v(t).
    pub fn aux_v(&self, t: f64) -> f64 {
        self.aux_pair(t).0
    }

    /// u(t) = phi_p(v'(t)).
    pub fn aux_u(&self, t: f64) -> f64 {
        self.aux_pair(t).1
    }

    /// (v(t), u(t)) with one table lookup.
    ///
    /// The first branch is sin_p(a1^{1/p} t + pi_p/2) on [0, junction];
    /// the second is -(a1/b1)^{1/p} sin_p(b1^{1/p} (t - junction)) up to
    /// pi_p; [pi_p, 2 pi_p] is filled by v(2 pi_p - t) = v(t), which flips
    /// the sign of u. Junction times evaluate by the left branch.
    pub fn aux_pair(&self, t: f64) -> (f64, f64) {
        let p = self.p();
        let two = self.two_pi_p();
        let tm = t.rem_euclid(two);
        let (tr, refl) = if tm <= self.pi_p {
            (tm, 1.0)
        } else {
            (two - tm, -1.0)
        };
        let (v, u) = if tr <= self.junction {
            let (c, cd) = self.table.eval_pair(self.a1_root * tr + 0.5 * self.pi_p);
            (c, self.a1_pow_cq * odd_pow(cd, p - 1.0))
        } else {
            let (c, cd) = self.table.eval_pair(self.b1_root * (tr - self.junction));
            (-self.amp_ratio * c, -self.a1_pow_cq * odd_pow(cd, p - 1.0))
        };
        (v, refl * u)
    }

    /// v'(t), recovered through the conjugate power: v' = phi_q(u).
    pub fn aux_v_deriv(&self, t: f64) -> f64 {
        odd_pow(self.aux_pair(t).1, self.q() - 1.0)
    }

    /// Left side of the first integral at (v(t), u(t)); identically a1/q.
    pub fn aux_energy(&self, t: f64) -> f64 {
        let (v, u) = self.aux_pair(t);
        self.energy_like(v, u)
    }

    /// |y|^q/q + (a1|x+|^p + b1|x-|^p)/p for an arbitrary phase point.
    ///
    /// Under the action-angle scaling this quantity equals the action r.
    pub fn energy_like(&self, x: f64, y: f64) -> f64 {
        let p = self.p();
        let q = self.q();
        let stiff = if x >= 0.0 { self.a1 } else { self.b1 };
        y.abs().powf(q) / q + stiff * x.abs().powf(p) / p
    }

    /// Energy level of the auxiliary orbit: a1/q.
    pub fn aux_energy_level(&self) -> f64 {
        self.a1 / self.q()
    }

    /// Closed forms of the two half-arc integrals of v:
    /// ∫_0^{junction} v dt = I_p / a1^{1/p} and
    /// ∫_{junction}^{pi_p} v dt = -a1^{1/p} I_p / b1^{2/p}.
    pub fn aux_integrals(&self) -> Result<(f64, f64)> {
        let p = self.p();
        let ip = ptrig::ip_constant(p)?;
        Ok((
            ip / self.a1_root,
            -self.a1_root * ip / self.b1.powf(2.0 / p),
        ))
    }

    /// The same two integrals by adaptive quadrature of v (oracle route).
    pub fn aux_integrals_quadrature(&self) -> Result<(f64, f64)> {
        let first = quad::integrate(|t| self.aux_v(t), 0.0, self.junction, 1e-11, 1e-11)?;
        let second = quad::integrate(|t| self.aux_v(t), self.junction, self.pi_p, 1e-11, 1e-11)?;
        Ok((first, second))
    }
}

/// sign(s) |s|^e with odd symmetry; 0 maps to 0.
pub(crate) fn odd_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> JumpingParams {
        JumpingParams::derive(8.0, 1.0, 3.0).unwrap()
    }

    #[test]
    fn derive_p2_example() {
        let params = JumpingParams::derive(4.0, 1.0, 2.0).unwrap();
        assert!((params.omega() - 4.0 / 3.0).abs() < 1e-14);
        assert!((params.a1() - 2.25).abs() < 1e-14);
        assert!((params.b1() - 0.5625).abs() < 1e-14);
        assert!((params.d() - 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn equal_coefficients_rejected() {
        assert!(JumpingParams::derive(4.0, 4.0, 2.0).is_err());
        assert!(JumpingParams::derive(-1.0, 4.0, 2.0).is_err());
    }

    #[test]
    fn normalization_identity() {
        let params = reference();
        let p = params.p();
        let norm = params.a1().powf(-1.0 / p) + params.b1().powf(-1.0 / p);
        assert!((norm - 2.0).abs() < 1e-12);
        assert!((params.a1() * params.omega().powf(p) - params.a()).abs() < 1e-12);
    }

    #[test]
    fn aux_initial_point_and_junction() {
        let params = reference();
        let peak = (params.p() - 1.0).powf(1.0 / params.p());
        assert!((params.aux_v(0.0) - peak).abs() < 1e-12);
        assert!(params.aux_u(0.0).abs() < 1e-12);
        assert!(params.aux_v(params.junction()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_case_collapses_to_shifted_sinp() {
        let params = JumpingParams::from_normalized(2.0, 1.0, 1.0, 1.0).unwrap();
        for i in 0..50 {
            let t = params.two_pi_p() * i as f64 / 49.0;
            assert!((params.aux_v(t) - t.cos()).abs() < 1e-10);
            assert!((params.aux_u(t) + t.sin()).abs() < 1e-10);
        }
        // phi_2(cos(pi)) = -1 at t = pi/2
        assert!((params.aux_u(std::f64::consts::PI / 2.0) + 1.0).abs() < 1e-10);
    }

    #[test]
    fn energy_is_constant() {
        for params in [
            reference(),
            JumpingParams::derive(4.0, 1.0, 2.0).unwrap(),
            JumpingParams::derive(5.0, 2.0, 2.5).unwrap(),
        ] {
            let level = params.aux_energy_level();
            let mut worst: f64 = 0.0;
            for i in 0..1000 {
                let t = params.two_pi_p() * (i as f64 + 0.13) / 1000.0;
                worst = worst.max((params.aux_energy(t) - level).abs());
            }
            assert!(worst < 1e-8, "energy drift {worst:.3e}");
        }
    }

    #[test]
    fn orbit_periodicity_and_reflection() {
        let params = reference();
        let two = params.two_pi_p();
        for i in 0..200 {
            let t = two * (i as f64 + 0.4) / 200.0;
            let (v0, u0) = params.aux_pair(t);
            let (v1, u1) = params.aux_pair(t + two);
            assert!((v0 - v1).abs() < 1e-10 && (u0 - u1).abs() < 1e-10);
            assert!((params.aux_v(two - t) - v0).abs() < 1e-12);
        }
    }

    #[test]
    fn orbit_satisfies_auxiliary_system() {
        // five-point central differences away from the branch junctions
        let params = reference();
        let two = params.two_pi_p();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..400 {
            let t = two * (i as f64 + 0.5) / 400.0;
            if [params.junction(), params.pi_p(), two - params.junction(), 0.0, two]
                .iter()
                .any(|&j| (t - j).abs() < 0.02)
            {
                continue;
            }
            let stencil = |f: &dyn Fn(f64) -> f64| {
                (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
            };
            let (v, u) = params.aux_pair(t);
            let dv = stencil(&|s| params.aux_v(s));
            let du = stencil(&|s| params.aux_u(s));
            let rhs_v = odd_pow(u, params.q() - 1.0);
            let rhs_u = -params.a1() * odd_pow(v.max(0.0), params.p() - 1.0)
                + params.b1() * odd_pow((-v).max(0.0), params.p() - 1.0);
            worst = worst.max((dv - rhs_v).abs().max((du - rhs_u).abs()));
        }
        assert!(worst < 1e-7, "ODE residual {worst:.3e}");
    }

    #[test]
    fn arc_integrals_match_quadrature() {
        for params in [
            JumpingParams::derive(4.0, 1.0, 2.0).unwrap(),
            reference(),
            JumpingParams::derive(5.0, 2.0, 2.5).unwrap(),
        ] {
            let (c1, c2) = params.aux_integrals().unwrap();
            let (q1, q2) = params.aux_integrals_quadrature().unwrap();
            assert!((c1 - q1).abs() < 1e-8, "first arc: {c1} vs {q1}");
            assert!((c2 - q2).abs() < 1e-8, "second arc: {c2} vs {q2}");
        }
    }

    #[test]
    fn symmetric_integrals_reduce_to_ip() {
        let params = JumpingParams::from_normalized(3.0, 1.0, 1.0, 1.0).unwrap();
        let ip = ptrig::ip_constant(3.0).unwrap();
        let (c1, c2) = params.aux_integrals().unwrap();
        assert!((c1 - ip).abs() < 1e-14);
        assert!((c2 + ip).abs() < 1e-14);
    }
}
