//! Potential scalings and the averaged potential.
//!
//! Everything here lives on top of the action-angle picture: the potential
//! F composed with the chart, the scaled perturbation g with
//! h = omega*r + r^{1/p} g, the theta-averaged potential F_bar whose
//! concavity supplies the twist, the generating function S, the standing
//! hypotheses on the forcing, and log-log scaling scans of the estimate
//! machinery.

use crate::dynamics::{self, ActionAngle, ForcingSpec};
use crate::jumping::JumpingParams;
use crate::quad;
use crate::{Error, HypothesisViolation, Result};

/// F(x) = ∫_0^x f(s) ds (closed form for the power-law family).
pub fn big_f(forcing: &ForcingSpec, x: f64) -> f64 {
    forcing.potential(x)
}

/// F(x) by adaptive quadrature of f (oracle route).
pub fn big_f_quadrature(forcing: &ForcingSpec, x: f64) -> Result<f64> {
    quad::integrate(|s| forcing.f(s), 0.0, x, 1e-12, 1e-11)
}

/// The chart argument x_hat = d^{1/p} r^{1/p} v(theta).
fn x_hat(params: &JumpingParams, r: f64, theta: f64) -> f64 {
    (params.d() * r).powf(1.0 / params.p()) * params.aux_v(theta)
}

/// h1(r, theta, t) = omega^{1-p} [F(x_hat) - x_hat e(t)], the perturbation
/// part of the action-angle Hamiltonian.
pub fn h1(params: &JumpingParams, forcing: &ForcingSpec, r: f64, theta: f64, t: f64) -> f64 {
    let xh = x_hat(params, r, theta);
    params.omega_1mp() * (forcing.potential(xh) - xh * forcing.e(t, params.pi_p()))
}

/// g(r, theta, t) = r^{-1/p} h1(r, theta, t), so that h = omega r + r^{1/p} g.
pub fn g_scaled(params: &JumpingParams, forcing: &ForcingSpec, r: f64, theta: f64, t: f64) -> f64 {
    r.powf(-1.0 / params.p()) * h1(params, forcing, r, theta, t)
}

/// Averaged potential: the theta-mean of F along the auxiliary orbit at the
/// action level r = h/omega,
/// F_bar(h) = (2 pi_p)^{-1} ∫_0^{2 pi_p} F(d^{1/p} (h/omega)^{1/p} v(theta)) dtheta.
///
/// Adaptive quadrature split at the branch junctions of v.
pub fn mean_potential(params: &JumpingParams, forcing: &ForcingSpec, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("mean potential needs h > 0, got {h}")));
    }
    let r = h / params.omega();
    let two_pi_p = params.two_pi_p();
    let breaks = breakpoints(params);
    let raw = quad::integrate_with_breakpoints(
        |theta| forcing.potential(x_hat(params, r, theta)),
        0.0,
        two_pi_p,
        &breaks,
        1e-13,
        1e-10,
    )?;
    Ok(raw / two_pi_p)
}

fn breakpoints(params: &JumpingParams) -> [f64; 3] {
    [
        params.junction(),
        params.pi_p(),
        params.two_pi_p() - params.junction(),
    ]
}

/// The averaged potential in factored form K * h^{(gamma+1)/p}, with the
/// orbit shape integral evaluated once. Supplies analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct MeanPotentialPowerLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl MeanPotentialPowerLaw {
    pub fn new(params: &JumpingParams, forcing: &ForcingSpec) -> Result<Self> {
        let p = params.p();
        let gamma = forcing.gamma();
        if forcing.beta() == 0.0 {
            return Ok(Self {
                scale: 0.0,
                exponent: (gamma + 1.0) / p,
            });
        }
        let shape = quad::integrate_with_breakpoints(
            |theta| params.aux_v(theta).abs().powf(gamma + 1.0),
            0.0,
            params.two_pi_p(),
            &breakpoints(params),
            1e-13,
            1e-11,
        )?;
        let exponent = (gamma + 1.0) / p;
        let scale = forcing.beta() / (gamma + 1.0)
            * (params.d() / params.omega()).powf(exponent)
            * shape
            / params.two_pi_p();
        Ok(Self { scale, exponent })
    }

    pub fn value(&self, h: f64) -> f64 {
        self.scale * h.powf(self.exponent)
    }

    /// k-th derivative of F_bar.
    pub fn deriv(&self, h: f64, k: usize) -> f64 {
        let mut c = self.scale;
        for j in 0..k {
            c *= self.exponent - j as f64;
        }
        c * h.powf(self.exponent - k as f64)
    }
}

/// k-th derivative of the averaged potential (k <= 2), computed from the
/// factored power-law form.
pub fn mean_potential_derivs(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    h: f64,
    k: usize,
) -> Result<f64> {
    if k > 2 {
        return Err(Error::Parameter(format!(
            "mean potential derivatives supported for k <= 2, got {k}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("need h > 0, got {h}")));
    }
    Ok(MeanPotentialPowerLaw::new(params, forcing)?.deriv(h, k))
}

/// Generating function S(h, theta) = omega^{-p} ∫_0^theta (F(..) - F_bar(h)) dv.
///
/// The integrand has zero mean over a full period, so S vanishes at both
/// theta = 0 and theta = 2 pi_p.
pub fn generating_s(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    h: f64,
    theta: f64,
) -> Result<f64> {
    if !(0.0..=params.two_pi_p() * (1.0 + 1e-12)).contains(&theta) {
        return Err(Error::Domain(format!(
            "generating function expects theta in [0, 2 pi_p], got {theta}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("need h > 0, got {h}")));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let fbar = mean_potential(params, forcing, h)?;
    let r = h / params.omega();
    let omega_mp = params.omega().powf(-params.p());
    let breaks = breakpoints(params);
    let raw = quad::integrate_with_breakpoints(
        |v| forcing.potential(x_hat(params, r, v)) - fbar,
        0.0,
        theta,
        &breaks,
        1e-12,
        1e-10,
    )?;
    Ok(omega_mp * raw)
}

/// Outcome of checking (H1)/(H2) for the power-law family against a given p.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    /// Admissible upper limit 1/(p-1) for gamma.
    pub gamma_limit: f64,
    /// Lower constant in x f(x) >= beta1 |x|^{gamma+1}.
    pub beta1: f64,
    /// Upper constant in x^2 f'(x) <= beta2 |x|^{gamma+1}.
    pub beta2: f64,
    /// Derivative-bound constant c in |x^k f^(k)(x)| <= c |x|^gamma, k <= 6.
    pub derivative_constant: f64,
    pub twist_lhs: f64,
    pub twist_rhs: f64,
    pub samples_checked: usize,
}

/// Verify (H1) and (H2) for the power-law forcing, both symbolically
/// (exact constants of the family) and on a signed logarithmic sample grid.
pub fn hypothesis_check(forcing: &ForcingSpec, p: f64) -> Result<HypothesisReport> {
    let exps = crate::ptrig::PLaplaceExponents::new(p)?;
    let q = exps.q();
    let beta = forcing.beta();
    let gamma = forcing.gamma();
    let gamma_limit = 1.0 / (p - 1.0);

    if beta == 0.0 {
        return Err(HypothesisViolation::BetaNotPositive.into());
    }
    if !(gamma > 0.0 && gamma < gamma_limit) {
        return Err(HypothesisViolation::GammaRange {
            gamma,
            limit: gamma_limit,
            p,
        }
        .into());
    }

    // exact constants for f = beta sign(x) |x|^gamma
    let beta1 = beta;
    let beta2 = beta * gamma;
    let mut derivative_constant: f64 = 0.0;
    let mut coeff = beta;
    for k in 0..=6usize {
        derivative_constant = derivative_constant.max(coeff.abs());
        coeff *= gamma - k as f64;
    }

    let twist_lhs = p * beta1;
    let twist_rhs = q * beta2;
    if !(twist_lhs > twist_rhs && twist_rhs >= 0.0) {
        return Err(HypothesisViolation::TwistInequality {
            p_beta1: twist_lhs,
            q_beta2: twist_rhs,
        }
        .into());
    }

    // numerical spot checks on x = +/- 10^u
    let mut samples_checked = 0usize;
    for i in 0..13 {
        let mag = 10f64.powf(-3.0 + 6.0 * i as f64 / 12.0);
        for x in [mag, -mag] {
            let slack = 1.0 + 1e-9;
            let lhs = x * forcing.f(x);
            let rhs = beta1 * x.abs().powf(gamma + 1.0);
            if lhs * slack < rhs {
                return Err(HypothesisViolation::Sampled {
                    name: "x f(x) >= beta1 |x|^{gamma+1}",
                    x,
                    lhs,
                    rhs,
                }
                .into());
            }
            let lhs2 = x * x * forcing.f_deriv(x);
            let rhs2 = beta2 * x.abs().powf(gamma + 1.0);
            if lhs2 > rhs2 * slack {
                return Err(HypothesisViolation::Sampled {
                    name: "x^2 f'(x) <= beta2 |x|^{gamma+1}",
                    x,
                    lhs: lhs2,
                    rhs: rhs2,
                }
                .into());
            }
            // |x^k f^(k)| = beta |prod (gamma - j)| |x|^gamma for the family
            let mut ck = beta;
            for k in 0..=6usize {
                let bound = derivative_constant * x.abs().powf(gamma) * slack;
                let val = ck.abs() * x.abs().powf(gamma);
                if val > bound {
                    return Err(HypothesisViolation::Sampled {
                        name: "|x^k f^(k)(x)| <= c |x|^gamma",
                        x,
                        lhs: val,
                        rhs: bound,
                    }
                    .into());
                }
                ck *= gamma - k as f64;
            }
            samples_checked += 1;
        }
    }

    Ok(HypothesisReport {
        p,
        q,
        gamma,
        gamma_limit,
        beta1,
        beta2,
        derivative_constant,
        twist_lhs,
        twist_rhs,
        samples_checked,
    })
}

// ---------------------------------------------------------------------------
// Scaling scans
// ---------------------------------------------------------------------------

/// A measured power-law comparison: observed magnitudes over a geometric
/// grid, the fitted log-log slope, and the exponent claimed for it.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub quantity: String,
    pub grid: Vec<f64>,
    pub observed: Vec<f64>,
    pub fitted_slope: f64,
    /// exp of the least-squares intercept.
    pub fitted_constant: f64,
    pub claimed_slope: f64,
    pub slope_tolerance: f64,
    /// Whether the claim is an upper bound on the slope (rather than its value).
    pub upper_bound: bool,
    pub pass: bool,
}

impl EstimateReport {
    fn from_measurements(
        quantity: &str,
        grid: Vec<f64>,
        observed: Vec<f64>,
        claimed_slope: f64,
        slope_tolerance: f64,
        upper_bound: bool,
    ) -> Result<Self> {
        let (fitted_slope, fitted_constant) = fit_loglog(&grid, &observed)?;
        let pass = if upper_bound {
            fitted_slope <= claimed_slope + slope_tolerance
        } else {
            (fitted_slope - claimed_slope).abs() <= slope_tolerance
        };
        Ok(Self {
            quantity: quantity.to_string(),
            grid,
            observed,
            fitted_slope,
            fitted_constant,
            claimed_slope,
            slope_tolerance,
            upper_bound,
            pass,
        })
    }
}

/// Least-squares slope and constant of ln(observed) against ln(grid).
pub fn fit_loglog(grid: &[f64], observed: &[f64]) -> Result<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .zip(observed)
        .filter(|(_, &o)| o > 0.0)
        .map(|(&g, &o)| (g.ln(), o.ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Analysis(
            "observed quantity vanished on the grid; slope undefined".into(),
        ));
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::Analysis("degenerate grid for slope fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept.exp()))
}

/// Which scaling estimate to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// |d^k/dr^k F(x_hat(r, theta))| against r; claimed -k + (gamma+1)/p.
    PotentialScaling { order: usize },
    /// |g(r, theta, t)| against r; claimed upper slope gamma/p.
    GScaling,
    /// h(r, theta, t)/r against r; claimed flat (linear comparability).
    HLinearity,
    /// |r(h,t,theta) - h/omega + omega^{-p} F(..)| against h; claimed upper
    /// slope max(gamma, 1/p).
    InversionRemainder,
    /// |d^k/dh^k r(h,t,theta)| against h; claimed upper slope -k + 1.
    InverseDerivative { order: usize },
}

impl EstimateKind {
    pub fn tag(&self) -> String {
        match self {
            EstimateKind::PotentialScaling { order } => format!("potential-scaling-k{order}"),
            EstimateKind::GScaling => "g-scaling".into(),
            EstimateKind::HLinearity => "h-linearity".into(),
            EstimateKind::InversionRemainder => "inversion-remainder".into(),
            EstimateKind::InverseDerivative { order } => format!("inverse-derivative-k{order}"),
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "potential-scaling-k0" => Some(Self::PotentialScaling { order: 0 }),
            "potential-scaling-k1" => Some(Self::PotentialScaling { order: 1 }),
            "potential-scaling-k2" => Some(Self::PotentialScaling { order: 2 }),
            "g-scaling" => Some(Self::GScaling),
            "h-linearity" => Some(Self::HLinearity),
            "inversion-remainder" => Some(Self::InversionRemainder),
            "inverse-derivative-k1" => Some(Self::InverseDerivative { order: 1 }),
            "inverse-derivative-k2" => Some(Self::InverseDerivative { order: 2 }),
            _ => None,
        }
    }
}

/// Geometric grid spanning at least three decades.
#[derive(Debug, Clone)]
pub struct ScanGrid {
    points: Vec<f64>,
}

impl ScanGrid {
    /// Dyadic grid lo, 2*lo, 4*lo, ... capped at hi (hi always included).
    pub fn dyadic(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Parameter(format!("invalid scan range [{lo}, {hi}]")));
        }
        if hi / lo < 1e3 {
            return Err(Error::Parameter(format!(
                "scan grid must span at least three decades, got [{lo}, {hi}]"
            )));
        }
        let mut points = Vec::new();
        let mut v = lo;
        while v < hi {
            points.push(v);
            v *= 2.0;
        }
        points.push(hi);
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Margin kept around the singular set when sampling angles.
pub const XI_MARGIN: f64 = 1e-3;

/// Deterministic angle samples away from the zeros of v.
pub fn theta_samples(params: &JumpingParams, count: usize) -> Vec<f64> {
    let two_pi_p = params.two_pi_p();
    (0..count)
        .map(|j| (j as f64 + 0.37) * two_pi_p / count as f64)
        .filter(|&th| params.distance_to_singular(th) > XI_MARGIN)
        .collect()
}

fn time_samples(params: &JumpingParams, count: usize) -> Vec<f64> {
    let two_pi_p = params.two_pi_p();
    (0..count)
        .map(|i| two_pi_p * i as f64 / count as f64)
        .collect()
}

/// Relative step for the central finite-difference stencils.
const FD_REL_STEP: f64 = 1e-4;

/// Five-point central derivative of order 0, 1 or 2 with relative step.
fn central_derivative<F: Fn(f64) -> Result<f64>>(f: F, x: f64, order: usize) -> Result<f64> {
    let h = FD_REL_STEP * x;
    match order {
        0 => f(x),
        1 => Ok(
            (-f(x + 2.0 * h)? + 8.0 * f(x + h)? - 8.0 * f(x - h)? + f(x - 2.0 * h)?)
                / (12.0 * h),
        ),
        2 => Ok((-f(x + 2.0 * h)? + 16.0 * f(x + h)? - 30.0 * f(x)? + 16.0 * f(x - h)?
            - f(x - 2.0 * h)?)
            / (12.0 * h * h)),
        _ => Err(Error::Parameter(format!(
            "finite differences limited to order <= 2, got {order}"
        ))),
    }
}

/// Measure one scaling estimate over the grid, taking the worst magnitude
/// over deterministic (theta, t) samples away from the singular set, and
/// fit the log-log slope.
pub fn estimate_scan(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    kind: EstimateKind,
    grid: &ScanGrid,
) -> Result<EstimateReport> {
    let thetas = theta_samples(params, 8);
    let times = time_samples(params, 4);
    let gamma = forcing.gamma();
    let p = params.p();

    let mut observed = Vec::with_capacity(grid.points().len());
    for &x in grid.points() {
        let mut worst: f64 = 0.0;
        match kind {
            EstimateKind::PotentialScaling { order } => {
                for &theta in &thetas {
                    let val = central_derivative(
                        |r| Ok(forcing.potential(x_hat(params, r, theta))),
                        x,
                        order,
                    )?;
                    worst = worst.max(val.abs());
                }
            }
            EstimateKind::GScaling => {
                for &theta in &thetas {
                    for &t in &times {
                        worst = worst.max(g_scaled(params, forcing, x, theta, t).abs());
                    }
                }
            }
            EstimateKind::HLinearity => {
                for &theta in &thetas {
                    for &t in &times {
                        let h = dynamics::hamiltonian_h(
                            params,
                            forcing,
                            &ActionAngle { r: x, theta },
                            t,
                        );
                        worst = worst.max((h / x).abs());
                    }
                }
            }
            EstimateKind::InversionRemainder => {
                for &theta in &thetas {
                    for &t in &times {
                        worst = worst.max(
                            inversion_remainder(params, forcing, x, t, theta)?.abs(),
                        );
                    }
                }
            }
            EstimateKind::InverseDerivative { order } => {
                if order == 0 || order > 2 {
                    return Err(Error::Parameter(format!(
                        "inverse-derivative scan supports k in {{1, 2}}, got {order}"
                    )));
                }
                for &theta in &thetas {
                    for &t in &times {
                        let val = central_derivative(
                            |h| dynamics::solve_r_of_h(params, forcing, h, t, theta),
                            x,
                            order,
                        )?;
                        worst = worst.max(val.abs());
                    }
                }
            }
        }
        observed.push(worst);
    }

    let (claimed, tol, upper) = match kind {
        EstimateKind::PotentialScaling { order } => (
            -(order as f64) + (gamma + 1.0) / p,
            if order >= 2 { 0.2 } else { 0.1 },
            false,
        ),
        EstimateKind::GScaling => (gamma / p, 0.1, true),
        EstimateKind::HLinearity => (0.0, 0.1, false),
        EstimateKind::InversionRemainder => (gamma.max(1.0 / p), 0.1, true),
        EstimateKind::InverseDerivative { order } => (
            -(order as f64) + 1.0,
            if order >= 2 { 0.2 } else { 0.1 },
            true,
        ),
    };

    EstimateReport::from_measurements(
        &kind.tag(),
        grid.points().to_vec(),
        observed,
        claimed,
        tol,
        upper,
    )
}

/// The aggregate remainder of the implicit inversion:
/// r(h,t,theta) - h/omega + omega^{-p} F(d^{1/p}(h/omega)^{1/p} v(theta)).
pub fn inversion_remainder(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    h: f64,
    t: f64,
    theta: f64,
) -> Result<f64> {
    let r = dynamics::solve_r_of_h(params, forcing, h, t, theta)?;
    let omega = params.omega();
    let lead = forcing.potential(x_hat(params, h / omega, theta));
    Ok(r - h / omega + omega.powf(-params.p()) * lead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Harmonic;

    fn reference() -> (JumpingParams, ForcingSpec) {
        (
            JumpingParams::derive(8.0, 1.0, 3.0).unwrap(),
            ForcingSpec::new(
                1.0,
                0.4,
                vec![Harmonic {
                    k: 1,
                    amplitude: 0.5,
                    phase: 0.0,
                }],
            )
            .unwrap(),
        )
    }

    #[test]
    fn big_f_examples() {
        let f = ForcingSpec::power_law(1.0, 0.5).unwrap();
        assert_eq!(big_f(&f, 0.0), 0.0);
        assert!((big_f(&f, 4.0) - 8.0 / 1.5).abs() < 1e-12);
        // even in x
        assert!((big_f(&f, -4.0) - big_f(&f, 4.0)).abs() < 1e-15);
        for x in [-3.0, -0.2, 0.7, 11.0] {
            let oracle = big_f_quadrature(&f, x).unwrap();
            assert!(
                (big_f(&f, x) - oracle).abs() < 1e-10,
                "x = {x}: closed {} vs quadrature {oracle}",
                big_f(&f, x)
            );
        }
    }

    #[test]
    fn g_vanishes_without_perturbation() {
        let (params, _) = reference();
        assert_eq!(
            g_scaled(&params, &ForcingSpec::zero(), 10.0, 1.0, 0.5),
            0.0
        );
    }

    #[test]
    fn g_identity_reconstructs_h() {
        let (params, forcing) = reference();
        for i in 0..30 {
            let r = 1.0 + 30.0 * i as f64;
            let theta = params.two_pi_p() * ((0.17 * i as f64) % 1.0);
            let t = 0.9;
            let g = g_scaled(&params, &forcing, r, theta, t);
            let h = dynamics::hamiltonian_h(&params, &forcing, &ActionAngle { r, theta }, t);
            let rebuilt = params.omega() * r + r.powf(1.0 / params.p()) * g;
            assert!(
                ((h - rebuilt) / h.abs().max(1.0)).abs() < 1e-10,
                "identity failed at r = {r}"
            );
        }
    }

    #[test]
    fn mean_potential_zero_forcing() {
        let (params, _) = reference();
        assert_eq!(
            mean_potential(&params, &ForcingSpec::zero(), 100.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn mean_potential_matches_factored_form() {
        let (params, forcing) = reference();
        let factored = MeanPotentialPowerLaw::new(&params, &forcing).unwrap();
        for h in [1e2, 1e3, 1e4] {
            let direct = mean_potential(&params, &forcing, h).unwrap();
            assert!(
                ((direct - factored.value(h)) / direct).abs() < 1e-8,
                "h = {h}: direct {direct} vs factored {}",
                factored.value(h)
            );
        }
    }

    #[test]
    fn mean_potential_homogeneity() {
        let (params, forcing) = reference();
        let s = (forcing.gamma() + 1.0) / params.p();
        for h in [50.0, 500.0, 5000.0] {
            let a = mean_potential(&params, &forcing, h).unwrap();
            let b = mean_potential(&params, &forcing, 2.0 * h).unwrap();
            assert!(
                (b / a - 2f64.powf(s)).abs() < 1e-8,
                "doubling ratio {} vs {}",
                b / a,
                2f64.powf(s)
            );
        }
    }

    #[test]
    fn mean_potential_deriv_signs_and_consistency() {
        let (params, forcing) = reference();
        for h in [1e2, 1e3, 1e4, 1e5] {
            let d1 = mean_potential_derivs(&params, &forcing, h, 1).unwrap();
            let d2 = mean_potential_derivs(&params, &forcing, h, 2).unwrap();
            assert!(d1 > 0.0, "F_bar' must be positive");
            assert!(d2 < 0.0, "F_bar'' must be negative");
        }
        // analytic derivative vs central differences of the quadrature path
        let h = 1e4;
        let step = 1.0;
        let fd = (mean_potential(&params, &forcing, h + step).unwrap()
            - mean_potential(&params, &forcing, h - step).unwrap())
            / (2.0 * step);
        let an = mean_potential_derivs(&params, &forcing, h, 1).unwrap();
        assert!(
            ((fd - an) / an).abs() < 1e-6,
            "derivative mismatch: fd {fd} vs analytic {an}"
        );
    }

    #[test]
    fn zero_mean_property() {
        let (params, forcing) = reference();
        for h in [100.0, 1e4] {
            let fbar = mean_potential(&params, &forcing, h).unwrap();
            let r = h / params.omega();
            let int = quad::integrate_with_breakpoints(
                |theta| forcing.potential(x_hat(&params, r, theta)) - fbar,
                0.0,
                params.two_pi_p(),
                &breakpoints(&params),
                1e-12,
                1e-12,
            )
            .unwrap();
            assert!(int.abs() < 1e-9 * fbar.max(1.0), "zero-mean residual {int:.3e}");
        }
    }

    #[test]
    fn generating_function_boundary_values() {
        let (params, forcing) = reference();
        let h = 1e3;
        assert_eq!(generating_s(&params, &forcing, h, 0.0).unwrap(), 0.0);
        let s_full = generating_s(&params, &forcing, h, params.two_pi_p()).unwrap();
        // scale of S over the period for comparison
        let s_half = generating_s(&params, &forcing, h, params.pi_p()).unwrap().abs();
        assert!(
            s_full.abs() < 1e-9 * s_half.max(1.0),
            "S(2 pi_p) = {s_full:.3e} should vanish"
        );
        assert_eq!(
            generating_s(&params, &ForcingSpec::zero(), h, 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn hypothesis_examples() {
        let ok = ForcingSpec::power_law(1.0, 0.4).unwrap();
        let report = hypothesis_check(&ok, 3.0).unwrap();
        assert!((report.beta1 - 1.0).abs() < 1e-15);
        assert!((report.beta2 - 0.4).abs() < 1e-15);
        assert!(report.twist_lhs > report.twist_rhs);

        let zero = ForcingSpec::zero();
        assert!(matches!(
            hypothesis_check(&zero, 3.0),
            Err(Error::Hypothesis(HypothesisViolation::BetaNotPositive))
        ));

        // gamma exactly at the H1 boundary 1/(p-1)
        let boundary = ForcingSpec::power_law(1.0, 0.5).unwrap();
        assert!(matches!(
            hypothesis_check(&boundary, 3.0),
            Err(Error::Hypothesis(HypothesisViolation::GammaRange { .. }))
        ));
    }

    #[test]
    fn scan_grid_validation() {
        assert!(ScanGrid::dyadic(100.0, 1000.0).is_err());
        let g = ScanGrid::dyadic(100.0, 1e5).unwrap();
        assert!(g.points().len() >= 8);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn potential_scaling_scan() {
        let (params, forcing) = reference();
        let grid = ScanGrid::dyadic(1e2, 1e5).unwrap();
        let report = estimate_scan(
            &params,
            &forcing,
            EstimateKind::PotentialScaling { order: 0 },
            &grid,
        )
        .unwrap();
        let claimed = (forcing.gamma() + 1.0) / params.p();
        assert!((report.fitted_slope - claimed).abs() < 0.1, "slope {}", report.fitted_slope);
        assert!(report.pass);
    }

    #[test]
    fn h_linearity_scan() {
        let (params, forcing) = reference();
        let grid = ScanGrid::dyadic(1e2, 1e5).unwrap();
        let report = estimate_scan(&params, &forcing, EstimateKind::HLinearity, &grid).unwrap();
        assert!(report.pass, "slope {}", report.fitted_slope);
        // the ratio h/r must hug omega
        for (i, &v) in report.observed.iter().enumerate() {
            assert!(
                (v / params.omega() - 1.0).abs() < 0.2,
                "grid point {i}: ratio {v}"
            );
        }
    }

    #[test]
    fn remainder_scan_is_subleading() {
        let (params, forcing) = reference();
        let grid = ScanGrid::dyadic(1e2, 1e5).unwrap();
        let report =
            estimate_scan(&params, &forcing, EstimateKind::InversionRemainder, &grid).unwrap();
        let cap = forcing.gamma().max(1.0 / params.p());
        assert!(
            report.fitted_slope <= cap + 0.1,
            "remainder slope {} exceeds {cap} + 0.1",
            report.fitted_slope
        );
        assert!(report.pass);
    }
}
