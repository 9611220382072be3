//! Empirical diagnostics of the stroboscopic dynamics: rotation numbers,
//! twist, invariant-curve detection, and boundedness experiments.

use crate::dynamics::{
    self, from_action_angle, poincare_map, ActionAngle, ForcingSpec, PhaseState, PoincareSection,
};
use crate::jumping::JumpingParams;
use crate::reduction::{fit_loglog, EstimateReport};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Rotation number estimate in revolutions per iterate.
#[derive(Debug, Clone, Copy)]
pub struct RotationEstimate {
    /// Fractional part of the mean angular advance per iterate, in [0, 1).
    pub value: f64,
    pub iterates: usize,
    /// Fluctuation of the Birkhoff averages over the second half of the run.
    pub residual: f64,
    pub converged: bool,
}

/// Residual below which a rotation estimate counts as converged.
pub const ROTATION_RESIDUAL_THRESHOLD: f64 = 1e-4;

/// Birkhoff-average rotation number of the time-2*pi_p map.
///
/// The angle iterates are lifted continuously along the flow (sub-period
/// sampling keeps every increment below pi_p); the estimate is the average
/// lift increment per iterate divided by 2*pi_p, reduced mod 1.
pub fn rotation_number(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    state0: &PhaseState,
    n: usize,
    tol: f64,
) -> Result<RotationEstimate> {
    if n < 100 {
        return Err(Error::Parameter(format!(
            "rotation estimate needs at least 100 iterates, got {n}"
        )));
    }
    let section = poincare_map(params, forcing, state0, n, tol)?;
    Ok(rotation_estimate_of(&section, params.two_pi_p()))
}

/// Rotation estimate from an already-computed section.
pub fn rotation_estimate_of(section: &PoincareSection, two_pi_p: f64) -> RotationEstimate {
    rotation_from_lift(&section.theta_lift, two_pi_p)
}

pub(crate) fn rotation_from_lift(lift: &[f64], two_pi_p: f64) -> RotationEstimate {
    let n = lift.len() - 1;
    let avg = |k: usize| (lift[k] - lift[0]) / k as f64;
    // revolutions are counted along the orbit's own orientation (the chart
    // angle runs clockwise), so the integrable baseline reads frac(omega)
    let value = (avg(n).abs() / two_pi_p).rem_euclid(1.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in (n / 2).max(1)..=n {
        let a = avg(k);
        lo = lo.min(a);
        hi = hi.max(a);
    }
    let residual = (hi - lo) / two_pi_p;
    RotationEstimate {
        value,
        iterates: n,
        residual,
        converged: residual < ROTATION_RESIDUAL_THRESHOLD,
    }
}

/// Options for the twist scan.
#[derive(Debug, Clone, Copy)]
pub struct TwistOptions {
    /// Initial angles averaged per action level.
    pub theta_count: usize,
    /// Map iterates averaged per initial angle.
    pub window: usize,
    pub tol: f64,
}

impl Default for TwistOptions {
    fn default() -> Self {
        Self {
            theta_count: 4,
            window: 8,
            tol: 1e-10,
        }
    }
}

/// Mean angular advance per iterate (measured along the direction of
/// motion) as a function of the action.
///
/// For the power-law forcing the advance exceeds the rigid rotation
/// 2*pi_p*omega by ~ c * r^{(gamma+1)/p - 1}, a strictly decreasing excess:
/// the twist whose sign matches the concavity of the averaged potential.
/// The report's grid/observed columns hold the action levels and the
/// excess advances; `pass` additionally requires strict monotonicity of
/// the advance across the grid.
pub fn twist_diagnostic(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    r_grid: &[f64],
    opts: &TwistOptions,
) -> Result<EstimateReport> {
    if r_grid.len() < 4 {
        return Err(Error::Parameter(format!(
            "twist scan needs at least 4 action levels, got {}",
            r_grid.len()
        )));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("twist grid must be strictly increasing".into()));
    }
    if r_grid[r_grid.len() - 1] / r_grid[0] < 1e2 {
        return Err(Error::Parameter(
            "twist grid must span at least two decades".into(),
        ));
    }

    let two_pi_p = params.two_pi_p();
    let baseline = two_pi_p * params.omega();
    let mut advances = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut acc = 0.0;
        let mut used = 0usize;
        for j in 0..opts.theta_count {
            let theta0 = (j as f64 + 0.29) * two_pi_p / opts.theta_count as f64;
            let (x, y) = from_action_angle(params, &ActionAngle { r, theta: theta0 })?;
            let section = poincare_map(
                params,
                forcing,
                &PhaseState::new(x, y, 0.0),
                opts.window,
                opts.tol,
            )?;
            let lift = &section.theta_lift;
            acc += (lift[lift.len() - 1] - lift[0]).abs() / opts.window as f64;
            used += 1;
        }
        advances.push(acc / used as f64);
    }

    let monotone = advances.windows(2).all(|w| w[1] < w[0])
        || advances.windows(2).all(|w| w[1] > w[0]);

    let excess: Vec<f64> = advances.iter().map(|a| (a - baseline).abs()).collect();
    let (fitted_slope, fitted_constant) = fit_loglog(r_grid, &excess)?;
    let claimed = (forcing.gamma() + 1.0) / params.p() - 1.0;
    let slope_ok = (fitted_slope - claimed).abs() <= 0.2;

    Ok(EstimateReport {
        quantity: "twist-advance-excess".into(),
        grid: r_grid.to_vec(),
        observed: excess,
        fitted_slope,
        fitted_constant,
        claimed_slope: claimed,
        slope_tolerance: 0.2,
        upper_bound: false,
        pass: monotone && slope_ok,
    })
}

/// A fitted invariant-curve candidate r = rho(theta).
#[derive(Debug, Clone)]
pub struct CurveFit {
    /// RMS fit residual relative to the mean action.
    pub residual: f64,
    /// Largest angular gap between sorted iterates (wrap included).
    pub max_gap: f64,
    pub mean_r: f64,
    /// Trigonometric coefficients [a0, a1, b1, a2, b2, ...].
    pub coefficients: Vec<f64>,
    period: f64,
}

impl CurveFit {
    /// Evaluate the fitted curve at an angle.
    pub fn eval(&self, theta: f64) -> f64 {
        let base = 2.0 * PI / self.period;
        let mut v = self.coefficients[0];
        let mut m = 1usize;
        while 2 * m < self.coefficients.len() + 1 && 2 * m - 1 < self.coefficients.len() {
            let arg = base * m as f64 * theta;
            v += self.coefficients[2 * m - 1] * arg.cos();
            if 2 * m < self.coefficients.len() {
                v += self.coefficients[2 * m] * arg.sin();
            }
            m += 1;
        }
        v
    }
}

/// Verdict of the invariant-curve test.
#[derive(Debug, Clone)]
pub enum CurveVerdict {
    /// The iterates fill the circle and lie on a smooth graph r = rho(theta).
    Curve(CurveFit),
    /// The orbit fails the fill or residual test (resonant island, chaotic
    /// layer, or escape).
    NoCurve { reason: String, fit: Option<CurveFit> },
}

impl CurveVerdict {
    pub fn is_curve(&self) -> bool {
        matches!(self, CurveVerdict::Curve(_))
    }

    pub fn fit(&self) -> Option<&CurveFit> {
        match self {
            CurveVerdict::Curve(fit) => Some(fit),
            CurveVerdict::NoCurve { fit, .. } => fit.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    /// Trigonometric degree of the least-squares fit.
    pub degree: usize,
    /// Relative residual below which the fit counts as a curve.
    pub residual_threshold: f64,
    /// Angular fill requirement: max gap below this multiple of 2*pi_p/n.
    pub gap_factor: f64,
    pub tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            degree: 16,
            residual_threshold: 1e-3,
            gap_factor: 10.0,
            tol: 1e-11,
        }
    }
}

/// Collect n Poincare iterates and test whether they lie on an invariant
/// curve r = rho(theta): trigonometric least squares plus a circle-fill
/// criterion.
pub fn detect_invariant_curve(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    state0: &PhaseState,
    n: usize,
    opts: &CurveOptions,
) -> Result<CurveVerdict> {
    if n < 1000 {
        return Err(Error::Parameter(format!(
            "curve detection needs at least 1000 iterates, got {n}"
        )));
    }
    let section = poincare_map(params, forcing, state0, n, opts.tol)?;
    let pts: Vec<(f64, f64)> = section
        .iterates
        .iter()
        .map(|it| (it.action.theta, it.action.r))
        .collect();
    Ok(classify_curve(params, &pts, n, opts))
}

pub(crate) fn classify_curve(
    params: &JumpingParams,
    pts: &[(f64, f64)],
    n: usize,
    opts: &CurveOptions,
) -> CurveVerdict {
    let period = params.two_pi_p();
    let mut thetas: Vec<f64> = pts.iter().map(|p| p.0.rem_euclid(period)).collect();
    thetas.sort_by(f64::total_cmp);
    let mut max_gap = period - thetas[thetas.len() - 1] + thetas[0];
    for w in thetas.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    let gap_limit = opts.gap_factor * period / n as f64;

    let fit = trig_least_squares(pts, period, opts.degree);
    let gap_ok = max_gap < gap_limit;
    let residual_ok = fit.residual < opts.residual_threshold;
    if gap_ok && residual_ok {
        CurveVerdict::Curve(CurveFit {
            max_gap,
            ..fit
        })
    } else {
        let reason = if !gap_ok {
            format!("angular gap {max_gap:.3e} exceeds {gap_limit:.3e}")
        } else {
            format!(
                "fit residual {:.3e} exceeds {:.3e}",
                fit.residual, opts.residual_threshold
            )
        };
        CurveVerdict::NoCurve {
            reason,
            fit: Some(CurveFit { max_gap, ..fit }),
        }
    }
}

fn trig_least_squares(pts: &[(f64, f64)], period: f64, degree: usize) -> CurveFit {
    let n = pts.len();
    let cols = 2 * degree + 1;
    let base = 2.0 * PI / period;
    let mut a = DMatrix::zeros(n, cols);
    let mut b = DVector::zeros(n);
    for (i, &(theta, r)) in pts.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for m in 1..=degree {
            let arg = base * m as f64 * theta;
            a[(i, 2 * m - 1)] = arg.cos();
            a[(i, 2 * m)] = arg.sin();
        }
        b[i] = r;
    }
    let svd = a.clone().svd(true, true);
    let coeffs = svd.solve(&b, 1e-12).expect("least squares solve");
    let fitted = a * &coeffs;
    let mean_r = b.iter().sum::<f64>() / n as f64;
    let rms = (b - fitted).norm() / (n as f64).sqrt();
    CurveFit {
        residual: rms / mean_r.abs().max(f64::MIN_POSITIVE),
        max_gap: 0.0,
        mean_r,
        coefficients: coeffs.iter().copied().collect(),
        period,
    }
}

/// Windowed amplitude statistics of one long orbit.
#[derive(Debug, Clone, Copy)]
pub struct BoundednessRecord {
    pub ic: PhaseState,
    /// Horizon in periods.
    pub horizon: usize,
    pub sup_norm: f64,
    pub first_half_max: f64,
    pub second_half_max: f64,
}

impl BoundednessRecord {
    /// Growth ratio between the window maxima.
    pub fn window_ratio(&self) -> f64 {
        self.second_half_max / self.first_half_max
    }
}

/// Amplitude samples per period used for the windowed maxima.
pub const BOUNDEDNESS_SAMPLES_PER_PERIOD: usize = 32;

/// Track |x| + |x'| over `horizon` periods for each initial condition and
/// record first-half/second-half maxima.
pub fn boundedness_experiment(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    ics: &[PhaseState],
    horizon: usize,
    tol: f64,
) -> Result<Vec<BoundednessRecord>> {
    if ics.is_empty() {
        return Ok(Vec::new());
    }
    if horizon < 200 {
        return Err(Error::Parameter(format!(
            "boundedness experiment needs a horizon of at least 200 periods, got {horizon}"
        )));
    }
    let samples = boundedness_sample_times(params, horizon);

    let mut out = Vec::with_capacity(ics.len());
    for ic in ics {
        out.push(boundedness_record(params, forcing, ic, horizon, tol, &samples)?);
    }
    Ok(out)
}

/// One orbit of [`boundedness_experiment`]; `samples` are the shared
/// amplitude sample times over [0, horizon * 2 pi_p].
pub fn boundedness_record(
    params: &JumpingParams,
    forcing: &ForcingSpec,
    ic: &PhaseState,
    horizon: usize,
    tol: f64,
    samples: &[f64],
) -> Result<BoundednessRecord> {
    let period = params.two_pi_p();
    let t_end = period * horizon as f64;
    let mut start = *ic;
    start.t = 0.0;
    let orbit = dynamics::integrate(params, forcing, &start, t_end, tol, samples)?;
    let mid = t_end / 2.0;
    let mut first = start.amplitude(params);
    let mut second = f64::NEG_INFINITY;
    for s in &orbit.samples {
        let a = s.amplitude(params);
        if s.t <= mid {
            first = first.max(a);
        } else {
            second = second.max(a);
        }
    }
    Ok(BoundednessRecord {
        ic: *ic,
        horizon,
        sup_norm: first.max(second),
        first_half_max: first,
        second_half_max: second,
    })
}

/// Uniform amplitude sample times for [`boundedness_record`].
pub fn boundedness_sample_times(params: &JumpingParams, horizon: usize) -> Vec<f64> {
    let t_end = params.two_pi_p() * horizon as f64;
    let n = horizon * BOUNDEDNESS_SAMPLES_PER_PERIOD;
    (1..=n).map(|j| t_end * j as f64 / n as f64).collect()
}

/// Sample initial conditions with log-uniform amplitude |x| + |x'| in
/// [amp_lo, amp_hi] and uniform angle. Deterministic for a fixed seed.
pub fn sample_initial_conditions(
    params: &JumpingParams,
    count: usize,
    amp_lo: f64,
    amp_hi: f64,
    seed: u64,
) -> Result<Vec<PhaseState>> {
    if !(amp_lo > 0.0 && amp_hi >= amp_lo) {
        return Err(Error::Parameter(format!(
            "invalid amplitude range [{amp_lo}, {amp_hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let amp = (rng.gen_range(amp_lo.ln()..=amp_hi.ln())).exp();
        let theta = rng.gen_range(0.0..params.two_pi_p());
        out.push(state_with_amplitude(params, amp, theta)?);
    }
    Ok(out)
}

/// The phase point on ray theta whose amplitude |x| + |x'| equals `amp`.
pub fn state_with_amplitude(params: &JumpingParams, amp: f64, theta: f64) -> Result<PhaseState> {
    let (v, u) = params.aux_pair(theta);
    // |x| + |x'| = (d r)^{1/p} (|v| + omega |u|^{q-1})
    let shape = v.abs() + params.omega() * u.abs().powf(params.q() - 1.0);
    let r = (amp / shape).powf(params.p()) / params.d();
    let (x, y) = from_action_angle(params, &ActionAngle { r, theta })?;
    Ok(PhaseState::new(x, y, 0.0))
}
