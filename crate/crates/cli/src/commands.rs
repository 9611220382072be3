//! Implementations of the experiment subcommands.

use crate::output::{fmt_f64, write_manifest, Csv};
use crate::scenario::{parse_scan_kinds, ValidatedScenario};
use crate::Failure;
use plaposc::analysis::{
    self, boundedness_record, boundedness_sample_times, detect_invariant_curve,
    rotation_number, sample_initial_conditions, twist_diagnostic, CurveOptions, CurveVerdict,
    TwistOptions,
};
use plaposc::dynamics::{
    self, hamiltonian_xy, poincare_map, xprime, ForcingSpec, PhaseState,
};
use plaposc::jumping::JumpingParams;
use plaposc::ptrig;
use plaposc::reduction::{self, EstimateReport, ScanGrid};
use rayon::prelude::*;
use std::path::Path;

pub struct RunContext<'a> {
    pub out: &'a Path,
    pub seed: u64,
    pub tol: f64,
    pub scenario_bytes: &'a [u8],
    pub command: &'a str,
}

impl RunContext<'_> {
    fn manifest(&self) -> Result<(), Failure> {
        write_manifest(self.out, self.command, Some(self.scenario_bytes), self.seed)
            .map_err(Failure::from)
    }
}

fn bool_str(b: bool) -> String {
    b.to_string()
}

/// Long-form check row: name, measured value, threshold, pass.
fn check_row(csv: &mut Csv, prefix: &[String], name: &str, value: f64, threshold: f64) -> bool {
    let pass = value <= threshold;
    let mut fields = prefix.to_vec();
    fields.extend([
        name.to_string(),
        fmt_f64(value),
        fmt_f64(threshold),
        bool_str(pass),
    ]);
    csv.row(&fields);
    pass
}

/// `ptrig-check`: half-period and I_p oracles, first integral, symmetry,
/// and table-versus-exact agreement for a set of exponents.
pub fn ptrig_check(v: &ValidatedScenario, ctx: &RunContext) -> Result<bool, Failure> {
    ctx.manifest()?;
    let mut exponents = vec![2.0, 2.5, 3.0, 4.0];
    if !exponents.iter().any(|&p| p == v.scenario.p) {
        exponents.push(v.scenario.p);
    }
    let mut csv = Csv::new(ctx.out.join("ptrig_check.csv"), &[
        "p", "check", "value", "threshold", "pass",
    ]);
    let mut all = true;
    for &p in &exponents {
        let prefix = vec![fmt_f64(p)];
        let pi_closed = ptrig::pi_p(p)?;
        let pi_quad = ptrig::pi_p_quadrature(p)?;
        all &= check_row(
            &mut csv,
            &prefix,
            "pi_p_closed_vs_quadrature_rel",
            ((pi_closed - pi_quad) / pi_closed).abs(),
            1e-9,
        );
        let ip_closed = ptrig::ip_constant(p)?;
        let ip_quad = ptrig::ip_quadrature(p)?;
        all &= check_row(
            &mut csv,
            &prefix,
            "ip_closed_vs_quadrature_abs",
            (ip_closed - ip_quad).abs(),
            1e-8,
        );

        let table = ptrig::SinpTable::with_default_resolution(p)?;
        let two_pi = 2.0 * pi_closed;
        let mut worst_fi: f64 = 0.0;
        let mut worst_sin: f64 = 0.0;
        let mut worst_tab: f64 = 0.0;
        for i in 0..1000 {
            let t = two_pi * i as f64 / 999.0;
            let c = ptrig::sinp(p, t)?;
            let d = ptrig::sinp_deriv(p, t)?;
            worst_fi = worst_fi
                .max(((p - 1.0) * d.abs().powf(p) + c.abs().powf(p) - (p - 1.0)).abs());
            worst_tab = worst_tab.max((table.eval(t) - c).abs());
            if p == 2.0 {
                worst_sin = worst_sin.max((c - t.sin()).abs());
            }
        }
        all &= check_row(&mut csv, &prefix, "first_integral_max", worst_fi, 1e-10);
        all &= check_row(&mut csv, &prefix, "table_vs_exact_max", worst_tab, 1e-10);
        if p == 2.0 {
            all &= check_row(&mut csv, &prefix, "p2_reduction_max", worst_sin, 1e-9);
        }
    }
    csv.write()?;
    Ok(all)
}

/// `aux-check`: auxiliary-orbit identities for the scenario parameters.
pub fn aux_check(v: &ValidatedScenario, ctx: &RunContext) -> Result<bool, Failure> {
    ctx.manifest()?;
    let params = &v.params;
    let mut csv = Csv::new(ctx.out.join("aux_check.csv"), &[
        "a", "b", "p", "check", "value", "threshold", "pass",
    ]);
    let prefix = vec![
        fmt_f64(params.a()),
        fmt_f64(params.b()),
        fmt_f64(params.p()),
    ];
    let two = params.two_pi_p();
    let level = params.aux_energy_level();
    let mut worst_energy: f64 = 0.0;
    let mut worst_reflect: f64 = 0.0;
    let mut worst_period: f64 = 0.0;
    for i in 0..1000 {
        let t = two * (i as f64 + 0.21) / 1000.0;
        worst_energy = worst_energy.max((params.aux_energy(t) - level).abs());
        worst_reflect = worst_reflect.max((params.aux_v(two - t) - params.aux_v(t)).abs());
        let (v0, u0) = params.aux_pair(t);
        let (v1, u1) = params.aux_pair(t + two);
        worst_period = worst_period.max((v1 - v0).abs().max((u1 - u0).abs()));
    }
    let mut all = true;
    all &= check_row(&mut csv, &prefix, "energy_identity_max", worst_energy, 1e-8);
    all &= check_row(&mut csv, &prefix, "reflection_max", worst_reflect, 1e-12);
    all &= check_row(&mut csv, &prefix, "periodicity_max", worst_period, 1e-10);

    let (c1, c2) = params.aux_integrals()?;
    let (q1, q2) = params.aux_integrals_quadrature()?;
    all &= check_row(&mut csv, &prefix, "arc_integral_first_abs", (c1 - q1).abs(), 1e-8);
    all &= check_row(&mut csv, &prefix, "arc_integral_second_abs", (c2 - q2).abs(), 1e-8);
    csv.write()?;
    Ok(all)
}

/// `simulate`: dump one orbit with its Hamiltonian along the way.
pub fn simulate(v: &ValidatedScenario, ctx: &RunContext) -> Result<(), Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.simulate;
    let ic = analysis::state_with_amplitude(&v.params, cfg.amp0, cfg.theta0)?;
    let t_end = v.params.two_pi_p() * cfg.periods as f64;
    let n = cfg.periods * cfg.samples_per_period;
    let times: Vec<f64> = (1..=n).map(|j| t_end * j as f64 / n as f64).collect();
    let orbit = dynamics::integrate(&v.params, &v.forcing, &ic, t_end, ctx.tol, &times)?;

    let mut csv = Csv::new(ctx.out.join("orbit.csv"), &[
        "t", "x", "y", "xprime", "hamiltonian",
    ]);
    for s in std::iter::once(&ic).chain(orbit.samples.iter()) {
        csv.row(&[
            fmt_f64(s.t),
            fmt_f64(s.x),
            fmt_f64(s.y),
            fmt_f64(xprime(&v.params, s.y)),
            fmt_f64(hamiltonian_xy(&v.params, &v.forcing, s)),
        ]);
    }
    csv.write()?;
    Ok(())
}

/// `poincare`: stroboscopic section dump in both coordinate systems.
pub fn poincare(v: &ValidatedScenario, ctx: &RunContext) -> Result<(), Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.poincare;
    let ic = analysis::state_with_amplitude(&v.params, cfg.amp0, cfg.theta0)?;
    let section = poincare_map(&v.params, &v.forcing, &ic, cfg.iterates, ctx.tol)?;

    let mut csv = Csv::new(ctx.out.join("poincare.csv"), &[
        "iter", "t", "x", "y", "r", "theta", "theta_lift", "amp_max",
    ]);
    for (k, it) in section.iterates.iter().enumerate() {
        let amp = if k == 0 {
            it.state.amplitude(&v.params)
        } else {
            section.amplitude[k - 1]
        };
        csv.row(&[
            k.to_string(),
            fmt_f64(it.state.t),
            fmt_f64(it.state.x),
            fmt_f64(it.state.y),
            fmt_f64(it.action.r),
            fmt_f64(it.action.theta),
            fmt_f64(section.theta_lift[k]),
            fmt_f64(amp),
        ]);
    }
    csv.write()?;
    Ok(())
}

/// `rotation`: Birkhoff rotation number of the section map.
pub fn rotation(v: &ValidatedScenario, ctx: &RunContext) -> Result<(), Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.rotation;
    let ic = analysis::state_with_amplitude(&v.params, cfg.amp0, cfg.theta0)?;
    let est = rotation_number(&v.params, &v.forcing, &ic, cfg.iterates, ctx.tol)?;
    let mut csv = Csv::new(ctx.out.join("rotation.csv"), &[
        "iterates", "value", "residual", "converged",
    ]);
    csv.row(&[
        est.iterates.to_string(),
        fmt_f64(est.value),
        fmt_f64(est.residual),
        bool_str(est.converged),
    ]);
    csv.write()?;
    Ok(())
}

pub fn report_rows(csv: &mut Csv, report: &EstimateReport) {
    for (x, obs) in report.grid.iter().zip(&report.observed) {
        csv.row(&[
            report.quantity.clone(),
            fmt_f64(*x),
            fmt_f64(*obs),
            fmt_f64(report.claimed_slope),
            fmt_f64(report.fitted_slope),
            fmt_f64(report.fitted_constant),
            fmt_f64(report.slope_tolerance),
            bool_str(report.upper_bound),
            bool_str(report.pass),
        ]);
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "quantity",
    "x",
    "observed",
    "claimed_slope",
    "fitted_slope",
    "fitted_constant",
    "slope_tolerance",
    "upper_bound",
    "pass",
];

/// `twist`: mean angular advance against the action level.
pub fn twist(v: &ValidatedScenario, ctx: &RunContext) -> Result<bool, Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.twist;
    let grid = log_grid(cfg.r_min, cfg.r_max, cfg.points);
    let report = twist_diagnostic(
        &v.params,
        &v.forcing,
        &grid,
        &TwistOptions {
            theta_count: cfg.theta_count,
            window: cfg.window,
            tol: ctx.tol,
        },
    )?;
    let mut csv = Csv::new(ctx.out.join("twist.csv"), &REPORT_HEADER);
    report_rows(&mut csv, &report);
    csv.write()?;
    Ok(report.pass)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// `curves`: invariant-curve verdicts over sampled initial conditions.
pub fn curves(v: &ValidatedScenario, ctx: &RunContext) -> Result<(), Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.curves;
    let ics = sample_initial_conditions(&v.params, cfg.count, cfg.amp_min, cfg.amp_max, ctx.seed)?;
    let opts = CurveOptions {
        degree: cfg.degree,
        residual_threshold: cfg.residual_threshold,
        tol: ctx.tol,
        ..CurveOptions::default()
    };
    let verdicts: Vec<Result<CurveVerdict, plaposc::Error>> = ics
        .par_iter()
        .map(|ic| detect_invariant_curve(&v.params, &v.forcing, ic, cfg.iterates, &opts))
        .collect();

    let mut csv = Csv::new(ctx.out.join("curves.csv"), &[
        "ic", "x0", "y0", "amp0", "verdict", "residual", "max_gap", "mean_r",
    ]);
    for (i, (ic, res)) in ics.iter().zip(verdicts).enumerate() {
        let verdict = res?;
        let (tag, fit) = match &verdict {
            CurveVerdict::Curve(fit) => ("curve", Some(fit)),
            CurveVerdict::NoCurve { fit, .. } => ("no-curve", fit.as_ref()),
        };
        csv.row(&[
            i.to_string(),
            fmt_f64(ic.x),
            fmt_f64(ic.y),
            fmt_f64(ic.amplitude(&v.params)),
            tag.to_string(),
            fmt_f64(fit.map_or(f64::NAN, |f| f.residual)),
            fmt_f64(fit.map_or(f64::NAN, |f| f.max_gap)),
            fmt_f64(fit.map_or(f64::NAN, |f| f.mean_r)),
        ]);
    }
    csv.write()?;
    Ok(())
}

/// `bounded`: windowed amplitude maxima over long horizons.
pub fn bounded(v: &ValidatedScenario, ctx: &RunContext) -> Result<(), Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.bounded;
    let ics = sample_initial_conditions(&v.params, cfg.ics, cfg.amp_min, cfg.amp_max, ctx.seed)?;
    let samples = boundedness_sample_times(&v.params, cfg.periods);
    let records: Vec<_> = ics
        .par_iter()
        .map(|ic| boundedness_record(&v.params, &v.forcing, ic, cfg.periods, ctx.tol, &samples))
        .collect();

    let mut csv = Csv::new(ctx.out.join("bounded.csv"), &[
        "ic", "x0", "y0", "amp0", "horizon", "first_half_max", "second_half_max", "sup_norm",
        "ratio",
    ]);
    for (i, rec) in records.into_iter().enumerate() {
        let rec = rec?;
        csv.row(&[
            i.to_string(),
            fmt_f64(rec.ic.x),
            fmt_f64(rec.ic.y),
            fmt_f64(rec.ic.amplitude(&v.params)),
            rec.horizon.to_string(),
            fmt_f64(rec.first_half_max),
            fmt_f64(rec.second_half_max),
            fmt_f64(rec.sup_norm),
            fmt_f64(rec.window_ratio()),
        ]);
    }
    csv.write()?;
    Ok(())
}

/// `scan`: log-log scaling scans of the estimate machinery.
pub fn scan(v: &ValidatedScenario, ctx: &RunContext) -> Result<bool, Failure> {
    ctx.manifest()?;
    let cfg = &v.scenario.scan;
    let kinds = parse_scan_kinds(&cfg.which)?;
    let grid = ScanGrid::dyadic(cfg.lo, cfg.hi)?;
    let mut all = true;
    for kind in kinds {
        let report = reduction::estimate_scan(&v.params, &v.forcing, kind, &grid)?;
        all &= report.pass;
        let mut csv = Csv::new(
            ctx.out.join(format!("scan_{}.csv", kind.tag())),
            &REPORT_HEADER,
        );
        report_rows(&mut csv, &report);
        csv.write()?;
    }
    Ok(all)
}

/// Helpers shared with the acceptance suite.
pub mod shared {
    use super::*;

    pub fn reference_params() -> Result<JumpingParams, Failure> {
        Ok(JumpingParams::derive(8.0, 1.0, 3.0)?)
    }

    pub fn reference_forcing() -> Result<ForcingSpec, Failure> {
        Ok(ForcingSpec::new(
            1.0,
            0.4,
            vec![plaposc::dynamics::Harmonic {
                k: 1,
                amplitude: 0.5,
                phase: 0.0,
            }],
        )?)
    }

    /// Irrational-frequency companion scenario used for circle-filling
    /// experiments (omega of the reference set is the rational 4/3).
    pub fn quasiperiodic_params() -> Result<JumpingParams, Failure> {
        Ok(JumpingParams::derive(5.0, 2.0, 2.5)?)
    }

    pub fn chart_state(params: &JumpingParams, r: f64, theta: f64) -> Result<PhaseState, Failure> {
        let (x, y) = dynamics::from_action_angle(params, &plaposc::dynamics::ActionAngle { r, theta })?;
        Ok(PhaseState::new(x, y, 0.0))
    }
}
