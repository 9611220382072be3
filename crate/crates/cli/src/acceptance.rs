//! The acceptance suite: eleven criteria exercised end to end with pinned
//! tolerances, each writing its evidence as CSV.

use crate::commands::shared::{chart_state, quasiperiodic_params, reference_forcing, reference_params};
use crate::commands::{log_grid, report_rows, REPORT_HEADER};
use crate::output::{fmt_f64, write_manifest, Csv};
use crate::Failure;
use plaposc::analysis::{
    boundedness_record, boundedness_sample_times, detect_invariant_curve, rotation_estimate_of,
    sample_initial_conditions, twist_diagnostic, CurveOptions, CurveVerdict, TwistOptions,
};
use plaposc::dynamics::{
    chart_jacobian_fd, from_action_angle, hamiltonian_h, poincare_map, solve_r_of_h, to_action_angle,
    ActionAngle, ForcingSpec,
};
use plaposc::jumping::JumpingParams;
use plaposc::ptrig;
use plaposc::reduction::{
    self, estimate_scan, fit_loglog, mean_potential, mean_potential_derivs, EstimateKind, ScanGrid,
};
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:02} [{}] {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

struct Timer(Instant, f64);

impl Timer {
    fn start(limit_s: f64) -> Self {
        Self(Instant::now(), limit_s)
    }

    /// (within budget, formatted elapsed)
    fn stop(&self) -> (bool, String) {
        let dt = self.0.elapsed().as_secs_f64();
        (dt <= self.1, format!("{dt:.1}s/{:.0}s", self.1))
    }
}

/// Run criteria 1-10, writing evidence under `out`.
pub fn run_criteria(out: &Path, seed: u64) -> Result<Vec<CriterionOutcome>, Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Numeric(e.to_string()))?;
    Ok(vec![
        c01_ptrig(out)?,
        c02_ip(out)?,
        c03_aux(out)?,
        c04_chart(out)?,
        c05_integrable_baseline(out)?,
        c06_inversion(out)?,
        c07_mean_potential(out)?,
        c08_remainder(out)?,
        c09_twist(out)?,
        c10_boundedness(out, seed)?,
    ])
}

/// Run the full suite twice with the same seed (determinism is criterion
/// 11) and write the summary.
pub fn run_full(out: &Path, seed: u64) -> Result<Vec<CriterionOutcome>, Failure> {
    write_manifest(out, "accept", None, seed)?;
    let run_a = out.join("run_a");
    let run_b = out.join("run_b");
    let mut outcomes = run_criteria(&run_a, seed)?;
    let _ = run_criteria(&run_b, seed)?;
    outcomes.push(c11_determinism(&run_a, &run_b)?);

    let mut csv = Csv::new(out.join("accept_summary.csv"), &[
        "criterion", "name", "pass", "detail",
    ]);
    for o in &outcomes {
        csv.row(&[
            o.id.to_string(),
            o.name.to_string(),
            o.pass.to_string(),
            o.detail.replace(',', ";"),
        ]);
    }
    csv.write()?;
    Ok(outcomes)
}

const PT_SET: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

fn c01_ptrig(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(10.0);
    let mut csv = Csv::new(out.join("c01_ptrig.csv"), &[
        "p", "check", "value", "threshold", "pass",
    ]);
    let mut pass = true;
    let mut worst_detail = String::new();
    for p in PT_SET {
        let pi_closed = ptrig::pi_p(p)?;
        let pi_quad = ptrig::pi_p_quadrature(p)?;
        let rel = ((pi_closed - pi_quad) / pi_closed).abs();
        let ok = rel < 1e-9;
        csv.row(&[
            fmt_f64(p),
            "pi_p_rel".into(),
            fmt_f64(rel),
            fmt_f64(1e-9),
            ok.to_string(),
        ]);
        pass &= ok;

        let two_pi = 2.0 * pi_closed;
        let mut worst_fi: f64 = 0.0;
        let mut worst_sin: f64 = 0.0;
        for i in 0..1000 {
            let t = two_pi * i as f64 / 999.0;
            let c = ptrig::sinp(p, t)?;
            let d = ptrig::sinp_deriv(p, t)?;
            worst_fi = worst_fi
                .max(((p - 1.0) * d.abs().powf(p) + c.abs().powf(p) - (p - 1.0)).abs());
            if p == 2.0 {
                worst_sin = worst_sin.max((c - t.sin()).abs());
            }
        }
        let ok = worst_fi < 1e-10;
        csv.row(&[
            fmt_f64(p),
            "first_integral_max".into(),
            fmt_f64(worst_fi),
            fmt_f64(1e-10),
            ok.to_string(),
        ]);
        pass &= ok;
        if p == 2.0 {
            let ok = worst_sin < 1e-9;
            csv.row(&[
                fmt_f64(p),
                "p2_reduction_max".into(),
                fmt_f64(worst_sin),
                fmt_f64(1e-9),
                ok.to_string(),
            ]);
            pass &= ok;
        }
        if p == 3.0 {
            worst_detail = format!("pi_3 rel {rel:.1e}, first integral {worst_fi:.1e}");
        }
    }
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 1,
        name: "p-trig identities",
        pass: pass && in_time,
        detail: format!("{worst_detail} ({elapsed})"),
    })
}

fn c02_ip(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(5.0);
    let mut csv = Csv::new(out.join("c02_ip.csv"), &[
        "p", "ip_closed", "ip_quadrature", "abs_err", "pass",
    ]);
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for p in PT_SET {
        let closed = ptrig::ip_constant(p)?;
        let quadr = ptrig::ip_quadrature(p)?;
        let err = (closed - quadr).abs();
        worst = worst.max(err);
        let ok = err < 1e-8;
        csv.row(&[
            fmt_f64(p),
            fmt_f64(closed),
            fmt_f64(quadr),
            fmt_f64(err),
            ok.to_string(),
        ]);
        pass &= ok;
    }
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 2,
        name: "I_p Beta formula vs quadrature",
        pass: pass && in_time,
        detail: format!("worst abs err {worst:.1e} ({elapsed})"),
    })
}

fn c03_aux(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(10.0);
    let mut csv = Csv::new(out.join("c03_aux.csv"), &[
        "a", "b", "p", "check", "value", "threshold", "pass",
    ]);
    let mut pass = true;
    let mut worst_energy: f64 = 0.0;
    for (a, b, p) in [(4.0, 1.0, 2.0), (8.0, 1.0, 3.0), (5.0, 2.0, 2.5)] {
        let params = JumpingParams::derive(a, b, p)?;
        let level = params.aux_energy_level();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = params.two_pi_p() * (i as f64 + 0.37) / 1000.0;
            worst = worst.max((params.aux_energy(t) - level).abs());
        }
        worst_energy = worst_energy.max(worst);
        let ok = worst < 1e-8;
        csv.row(&[
            fmt_f64(a),
            fmt_f64(b),
            fmt_f64(p),
            "energy_identity_max".into(),
            fmt_f64(worst),
            fmt_f64(1e-8),
            ok.to_string(),
        ]);
        pass &= ok;

        let (c1, c2) = params.aux_integrals()?;
        let (q1, q2) = params.aux_integrals_quadrature()?;
        for (name, err) in [
            ("arc_integral_first_abs", (c1 - q1).abs()),
            ("arc_integral_second_abs", (c2 - q2).abs()),
        ] {
            let ok = err < 1e-8;
            csv.row(&[
                fmt_f64(a),
                fmt_f64(b),
                fmt_f64(p),
                name.into(),
                fmt_f64(err),
                fmt_f64(1e-8),
                ok.to_string(),
            ]);
            pass &= ok;
        }
    }
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 3,
        name: "auxiliary orbit identities",
        pass: pass && in_time,
        detail: format!("worst energy residual {worst_energy:.1e} ({elapsed})"),
    })
}

/// Low-discrepancy point sequence (deterministic stand-in for random
/// sampling).
fn quasi_random(i: usize) -> (f64, f64) {
    let phi = 0.618_033_988_749_894_9;
    let sq2 = 0.414_213_562_373_095_1;
    (
        ((i as f64 + 0.5) * phi).fract(),
        ((i as f64 + 0.5) * sq2).fract(),
    )
}

fn c04_chart(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(30.0);
    let params = reference_params()?;
    let two_pi_p = params.two_pi_p();

    let mut worst_r: f64 = 0.0;
    let mut worst_th: f64 = 0.0;
    for i in 0..1000 {
        let (u1, u2) = quasi_random(i);
        let r = 10f64.powf(4.0 * u1); // 1 .. 1e4
        let theta = two_pi_p * u2;
        let (x, y) = from_action_angle(&params, &ActionAngle { r, theta })?;
        let back = to_action_angle(&params, x, y)?;
        worst_r = worst_r.max(((back.r - r) / r).abs());
        let mut dth = (back.theta - theta).abs();
        dth = dth.min(two_pi_p - dth);
        worst_th = worst_th.max(dth);
    }
    let round_trip_ok = worst_r < 1e-9 && worst_th < 1e-9;

    let mut worst_jac: f64 = 0.0;
    let mut collected = 0usize;
    let mut i = 0usize;
    while collected < 100 {
        let (u1, u2) = quasi_random(i + 7000);
        i += 1;
        let theta = two_pi_p * u2;
        if params.aux_v(theta).abs() <= 0.1 {
            continue;
        }
        let r = 10f64.powf(4.0 * u1);
        let det = chart_jacobian_fd(&params, &ActionAngle { r, theta }, 1e-5)?;
        worst_jac = worst_jac.max((det.abs() - 1.0).abs());
        collected += 1;
    }
    let jac_ok = worst_jac < 1e-5;

    let mut csv = Csv::new(out.join("c04_chart.csv"), &[
        "check", "value", "threshold", "pass",
    ]);
    csv.row(&[
        "round_trip_r_rel_max".into(),
        fmt_f64(worst_r),
        fmt_f64(1e-9),
        (worst_r < 1e-9).to_string(),
    ]);
    csv.row(&[
        "round_trip_theta_abs_max".into(),
        fmt_f64(worst_th),
        fmt_f64(1e-9),
        (worst_th < 1e-9).to_string(),
    ]);
    csv.row(&[
        "jacobian_det_dev_max".into(),
        fmt_f64(worst_jac),
        fmt_f64(1e-5),
        jac_ok.to_string(),
    ]);
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 4,
        name: "action-angle chart",
        pass: round_trip_ok && jac_ok && in_time,
        detail: format!(
            "round trip r {worst_r:.1e} / theta {worst_th:.1e}, |det|-1 max {worst_jac:.1e} ({elapsed})"
        ),
    })
}

fn c05_integrable_baseline(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(120.0);
    let params = reference_params()?;
    let forcing = ForcingSpec::zero();
    let ic = chart_state(&params, 1.0, 0.4)?;
    let section = poincare_map(&params, &forcing, &ic, 1000, 1e-11)?;

    let r0 = section.iterates[0].action.r;
    let mut drift: f64 = 0.0;
    for it in &section.iterates {
        drift = drift.max((it.action.r - r0).abs());
    }
    let rotation = rotation_estimate_of(&section, params.two_pi_p());
    let expected = params.omega().rem_euclid(1.0);
    let mut rot_err = (rotation.value - expected).abs();
    rot_err = rot_err.min(1.0 - rot_err);

    let drift_ok = drift < 1e-7;
    let rot_ok = rot_err < 1e-6;
    let mut csv = Csv::new(out.join("c05_baseline.csv"), &[
        "check", "value", "threshold", "pass",
    ]);
    csv.row(&[
        "r_drift_max".into(),
        fmt_f64(drift),
        fmt_f64(1e-7),
        drift_ok.to_string(),
    ]);
    csv.row(&[
        "rotation_vs_frac_omega".into(),
        fmt_f64(rot_err),
        fmt_f64(1e-6),
        rot_ok.to_string(),
    ]);
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 5,
        name: "integrable baseline",
        pass: drift_ok && rot_ok && in_time,
        detail: format!("r drift {drift:.1e}, rotation err {rot_err:.1e} ({elapsed})"),
    })
}

fn c06_inversion(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(30.0);
    let params = reference_params()?;
    let forcing = reference_forcing()?;
    let thetas = reduction::theta_samples(&params, 8);
    let times: Vec<f64> = (0..4).map(|i| params.two_pi_p() * i as f64 / 4.0).collect();

    let mut csv = Csv::new(out.join("c06_inversion.csv"), &[
        "h", "theta", "t", "residual_rel", "pass",
    ]);
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for h in [1e2, 1e3, 1e4, 1e5] {
        for &theta in &thetas {
            for &t in &times {
                let r = solve_r_of_h(&params, &forcing, h, t, theta)?;
                let back = hamiltonian_h(&params, &forcing, &ActionAngle { r, theta }, t);
                let rel = ((back - h) / h).abs();
                worst = worst.max(rel);
                let ok = rel < 1e-9;
                pass &= ok;
                csv.row(&[
                    fmt_f64(h),
                    fmt_f64(theta),
                    fmt_f64(t),
                    fmt_f64(rel),
                    ok.to_string(),
                ]);
            }
        }
    }
    csv.write()?;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 6,
        name: "implicit inversion r(h,t,theta)",
        pass: pass && in_time,
        detail: format!("worst relative residual {worst:.1e} ({elapsed})"),
    })
}

fn c07_mean_potential(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(30.0);
    let params = reference_params()?;
    let forcing = reference_forcing()?;
    let grid = ScanGrid::dyadic(1e2, 1e5)?;

    let mut csv = Csv::new(out.join("c07_mean_potential.csv"), &[
        "h", "fbar", "fbar_d1", "fbar_d2",
    ]);
    let mut values = Vec::new();
    let mut signs_ok = true;
    for &h in grid.points() {
        let f = mean_potential(&params, &forcing, h)?;
        let d1 = mean_potential_derivs(&params, &forcing, h, 1)?;
        let d2 = mean_potential_derivs(&params, &forcing, h, 2)?;
        signs_ok &= d1 > 0.0 && d2 < 0.0;
        values.push(f);
        csv.row(&[fmt_f64(h), fmt_f64(f), fmt_f64(d1), fmt_f64(d2)]);
    }
    csv.write()?;
    let (slope, _) = fit_loglog(grid.points(), &values)?;
    let claimed = (forcing.gamma() + 1.0) / params.p();
    let slope_ok = (slope - claimed).abs() < 0.05;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 7,
        name: "averaged potential signs and scaling",
        pass: signs_ok && slope_ok && in_time,
        detail: format!(
            "slope {slope:.4} vs {claimed:.4}, signs {} ({elapsed})",
            if signs_ok { "ok" } else { "violated" }
        ),
    })
}

fn c08_remainder(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(60.0);
    let params = reference_params()?;
    let forcing = reference_forcing()?;
    let grid = ScanGrid::dyadic(1e2, 1e5)?;
    let report = estimate_scan(&params, &forcing, EstimateKind::InversionRemainder, &grid)?;
    let mut csv = Csv::new(out.join("c08_remainder.csv"), &REPORT_HEADER);
    report_rows(&mut csv, &report);
    csv.write()?;
    let cap = forcing.gamma().max(1.0 / params.p()) + 0.1;
    let pass = report.fitted_slope <= cap;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 8,
        name: "inversion remainder decay",
        pass: pass && in_time,
        detail: format!("slope {:.4} <= {cap:.4} ({elapsed})", report.fitted_slope),
    })
}

fn c09_twist(out: &Path) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(300.0);
    let params = reference_params()?;
    // reference forcing with e == 0
    let forcing = ForcingSpec::power_law(1.0, 0.4)?;
    let grid = log_grid(1e2, 1e4, 9);
    let report = twist_diagnostic(
        &params,
        &forcing,
        &grid,
        &TwistOptions {
            theta_count: 4,
            window: 8,
            tol: 1e-10,
        },
    )?;
    let mut csv = Csv::new(out.join("c09_twist.csv"), &REPORT_HEADER);
    report_rows(&mut csv, &report);
    csv.write()?;

    // strict monotone decrease of the positive advance excess is the twist
    // sign forced by the concave averaged potential
    let monotone = report.observed.windows(2).all(|w| w[1] < w[0])
        && report.observed.iter().all(|&v| v > 0.0);
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 9,
        name: "twist monotonicity",
        pass: monotone && in_time,
        detail: format!(
            "excess range [{:.2e}, {:.2e}], monotone {monotone} ({elapsed})",
            report.observed[report.observed.len() - 1],
            report.observed[0]
        ),
    })
}

fn c10_boundedness(out: &Path, seed: u64) -> Result<CriterionOutcome, Failure> {
    let timer = Timer::start(1200.0);
    let params = quasiperiodic_params()?;
    let forcing = ForcingSpec::new(
        1.0,
        0.4,
        vec![plaposc::dynamics::Harmonic {
            k: 1,
            amplitude: 0.5,
            phase: 0.0,
        }],
    )?;
    reduction::hypothesis_check(&forcing, params.p())?;
    let ics = sample_initial_conditions(&params, 20, 1e2, 1e3, seed)?;
    let tol = 1e-9;

    let samples = boundedness_sample_times(&params, 500);
    let records: Vec<_> = ics
        .par_iter()
        .map(|ic| boundedness_record(&params, &forcing, ic, 500, tol, &samples))
        .collect();
    let opts = CurveOptions {
        tol,
        ..CurveOptions::default()
    };
    let verdicts: Vec<_> = ics
        .par_iter()
        .map(|ic| detect_invariant_curve(&params, &forcing, ic, 1000, &opts))
        .collect();

    let mut csv = Csv::new(out.join("c10_boundedness.csv"), &[
        "ic", "amp0", "first_half_max", "second_half_max", "ratio", "verdict", "residual",
    ]);
    let mut bounded_ok = 0usize;
    let mut curve_ok = 0usize;
    for (i, (rec, verdict)) in records.into_iter().zip(verdicts).enumerate() {
        let rec = rec?;
        let verdict = verdict?;
        let ratio = rec.window_ratio();
        if ratio <= 1.5 {
            bounded_ok += 1;
        }
        let (tag, residual) = match &verdict {
            CurveVerdict::Curve(fit) => {
                curve_ok += 1;
                ("curve", fit.residual)
            }
            CurveVerdict::NoCurve { fit, .. } => {
                ("no-curve", fit.as_ref().map_or(f64::NAN, |f| f.residual))
            }
        };
        csv.row(&[
            i.to_string(),
            fmt_f64(ics[i].amplitude(&params)),
            fmt_f64(rec.first_half_max),
            fmt_f64(rec.second_half_max),
            fmt_f64(ratio),
            tag.to_string(),
            fmt_f64(residual),
        ]);
    }
    csv.write()?;
    let n = ics.len();
    let bounded_frac = bounded_ok as f64 / n as f64;
    let curve_frac = curve_ok as f64 / n as f64;
    let pass = bounded_frac >= 0.9 && curve_frac >= 0.6;
    let (in_time, elapsed) = timer.stop();
    Ok(CriterionOutcome {
        id: 10,
        name: "boundedness and invariant curves",
        pass: pass && in_time,
        detail: format!(
            "window ratio ok {bounded_ok}/{n}, curves {curve_ok}/{n} ({elapsed})"
        ),
    })
}

fn c11_determinism(run_a: &Path, run_b: &Path) -> Result<CriterionOutcome, Failure> {
    let list = |dir: &Path| -> Result<Vec<std::path::PathBuf>, Failure> {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).map_err(|e| Failure::Numeric(e.to_string()))? {
                let path = entry.map_err(|e| Failure::Numeric(e.to_string()))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path.strip_prefix(dir).unwrap().to_path_buf());
                }
            }
        }
        files.sort();
        Ok(files)
    };
    let files_a = list(run_a)?;
    let files_b = list(run_b)?;
    let mut pass = files_a == files_b;
    let mut detail = format!("{} files compared", files_a.len());
    if !pass {
        detail = "file sets differ between runs".into();
    } else {
        for rel in &files_a {
            let a = std::fs::read(run_a.join(rel)).map_err(|e| Failure::Numeric(e.to_string()))?;
            let b = std::fs::read(run_b.join(rel)).map_err(|e| Failure::Numeric(e.to_string()))?;
            if a != b {
                pass = false;
                detail = format!("{} differs between runs", rel.display());
                break;
            }
        }
    }
    Ok(CriterionOutcome {
        id: 11,
        name: "determinism",
        pass,
        detail,
    })
}
