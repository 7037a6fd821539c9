//! Subcommand implementations.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use nbarrier::double_barrier::{
    appendix_coefficients, decompose_exact, no_reflection_budget, opaque_series_estimate,
};
use nbarrier::opaque::{eq212_residual, find_resonances, resonance_time_budget};
use nbarrier::timing::{phase_budget, phase_time, transmission_amplitude, wrap_angle};
use nbarrier::validate;
use nbarrier::{
    evaluate_wavefunction, opaque_probability, solve_exact, unitarity_defect, BarrierSystem,
    DispersionModel, Error as LibError,
};

use crate::config::{OutputFormat, RunConfig};
use crate::output::{fmt, open_writer, write_json, Cx};

/// Exit codes: 1 validation failure, 2 usage/config error, 3 numeric failure.
#[derive(Debug)]
pub enum CliError {
    Validation,
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            CliError::Validation => None,
            CliError::Usage(m) | CliError::Numeric(m) => Some(m),
        }
    }
}

fn lib_error(e: LibError) -> CliError {
    match e {
        LibError::OmegaOutOfRange { .. }
        | LibError::InvalidSystem(_)
        | LibError::InvalidArgument(_) => CliError::Usage(e.to_string()),
        _ => CliError::Numeric(e.to_string()),
    }
}

fn io_error(e: std::io::Error, path: &str) -> CliError {
    CliError::Usage(format!("cannot write output {path}: {e}"))
}

pub struct Context {
    pub config: RunConfig,
    pub fd_step: f64,
}

impl Context {
    fn setup(&self) -> Result<(BarrierSystem, DispersionModel), CliError> {
        let system = self.config.barrier_system().map_err(CliError::Usage)?;
        let model = self.config.dispersion_model().map_err(CliError::Usage)?;
        Ok((system, model))
    }
}

struct ScanRow {
    omega: f64,
    k: f64,
    chi: f64,
    t: Complex64,
    r: Complex64,
    p_t: f64,
    phase: f64,
    tau: f64,
    defect: f64,
    opaque_p: Option<f64>,
    opaque_valid: bool,
}

#[derive(Serialize)]
struct ScanRowJson {
    omega: f64,
    k: f64,
    chi: f64,
    re_t: f64,
    im_t: f64,
    re_r: f64,
    im_r: f64,
    p_t: f64,
    phi_unwrapped: f64,
    tau: f64,
    unitarity_defect: f64,
    opaque_p_t: Option<f64>,
    opaque_valid: u8,
}

pub fn cmd_scan(ctx: &Context) -> Result<(), CliError> {
    let (system, model) = ctx.setup()?;
    let scan = &ctx.config.scan;
    let step = (scan.omega_max - scan.omega_min) / (scan.steps - 1) as f64;

    let rows: Result<Vec<ScanRow>, CliError> = (0..scan.steps)
        .into_par_iter()
        .map(|i| {
            let omega = scan.omega_min + i as f64 * step;
            let w = model.eval(omega).map_err(lib_error)?;
            let sol = solve_exact(&system, &model, omega).map_err(lib_error)?;
            let amp = transmission_amplitude(&system, &model, omega).map_err(lib_error)?;
            let tau = phase_time(&system, &model, omega, Some(ctx.fd_step * omega))
                .map_err(lib_error)?
                .tau;
            let opaque_p = match opaque_probability(&system, &w) {
                Ok(p) => Some(p),
                Err(LibError::NearResonance { .. }) => None,
                Err(e) => return Err(lib_error(e)),
            };
            let opaque_valid = opaque_p.is_some() && w.chi * system.width() >= 1.0;
            Ok(ScanRow {
                omega,
                k: w.k,
                chi: w.chi,
                t: sol.transmission,
                r: sol.reflection,
                p_t: sol.transmission.norm_sqr(),
                phase: amp.arg(),
                tau,
                defect: unitarity_defect(&sol),
                opaque_p,
                opaque_valid,
            })
        })
        .collect();
    let rows = rows?;

    // continuity-tracked unwrapping along the (ordered) scan
    let mut unwrapped = Vec::with_capacity(rows.len());
    let mut previous = rows.first().map(|r| r.phase).unwrap_or(0.0);
    let mut accumulated = previous;
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            accumulated += wrap_angle(row.phase - previous);
            previous = row.phase;
        }
        unwrapped.push(accumulated);
    }

    let path = &ctx.config.output.path;
    let mut out = open_writer(path).map_err(|e| io_error(e, path))?;
    match ctx.config.output.format {
        OutputFormat::Csv => {
            write_scan_csv(&mut *out, &rows, &unwrapped).map_err(|e| io_error(e, path))?
        }
        OutputFormat::Json => {
            let json: Vec<ScanRowJson> = rows
                .iter()
                .zip(&unwrapped)
                .map(|(r, &phi)| ScanRowJson {
                    omega: r.omega,
                    k: r.k,
                    chi: r.chi,
                    re_t: r.t.re,
                    im_t: r.t.im,
                    re_r: r.r.re,
                    im_r: r.r.im,
                    p_t: r.p_t,
                    phi_unwrapped: phi,
                    tau: r.tau,
                    unitarity_defect: r.defect,
                    opaque_p_t: r.opaque_p,
                    opaque_valid: r.opaque_valid as u8,
                })
                .collect();
            #[derive(Serialize)]
            struct Doc {
                rows: Vec<ScanRowJson>,
            }
            write_json(&mut *out, &Doc { rows: json }).map_err(|e| io_error(e, path))?;
        }
    }
    out.flush().map_err(|e| io_error(e, path))?;
    Ok(())
}

fn write_scan_csv(out: &mut dyn Write, rows: &[ScanRow], unwrapped: &[f64]) -> std::io::Result<()> {
    out.write_all(
        b"omega,k,chi,re_T,im_T,re_R,im_R,P_T,phi_unwrapped,tau,unitarity_defect,opaque_P_T,opaque_valid\n",
    )?;
    for (row, &phi) in rows.iter().zip(unwrapped) {
        let opaque = row.opaque_p.map(fmt).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(row.omega),
            fmt(row.k),
            fmt(row.chi),
            fmt(row.t.re),
            fmt(row.t.im),
            fmt(row.r.re),
            fmt(row.r.im),
            fmt(row.p_t),
            fmt(phi),
            fmt(row.tau),
            fmt(row.defect),
            opaque,
            row.opaque_valid as u8
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ResonanceEntry {
    omega_res: f64,
    residual_d: f64,
    eq212_residual: f64,
    tau: f64,
    tau0: f64,
    tau_plus_tau0: f64,
}

#[derive(Serialize)]
struct ResonanceDoc {
    roots: Vec<ResonanceEntry>,
    n_independence_spread: f64,
}

pub fn cmd_resonances(ctx: &Context) -> Result<(), CliError> {
    let (system, model) = ctx.setup()?;
    let scan = &ctx.config.scan;
    let report = find_resonances(&system, &model, scan.omega_min, scan.omega_max, scan.steps)
        .map_err(lib_error)?;

    let mut roots = Vec::with_capacity(report.roots.len());
    for (&root, &residual) in report.roots.iter().zip(&report.residuals) {
        let budget = resonance_time_budget(&system, &model, root).map_err(lib_error)?;
        roots.push(ResonanceEntry {
            omega_res: root,
            residual_d: residual,
            eq212_residual: eq212_residual(&system, &model, root).map_err(lib_error)?,
            tau: budget.tau,
            tau0: budget.tau0,
            tau_plus_tau0: budget.sum,
        });
    }
    let doc = ResonanceDoc {
        roots,
        n_independence_spread: report.n_independence_spread,
    };
    let path = &ctx.config.output.path;
    let mut out = open_writer(path).map_err(|e| io_error(e, path))?;
    write_json(&mut *out, &doc).map_err(|e| io_error(e, path))?;
    out.flush().map_err(|e| io_error(e, path))?;
    Ok(())
}

#[derive(Serialize)]
struct DecomposeDoc {
    omega: f64,
    partials: PartialsJson,
    reconstruction_residual: f64,
    phase_ratio_residual: f64,
    deficit: f64,
    ors_excess: f64,
    multiple_reflection_probability: f64,
    phase_budget: BudgetJson,
    appendix: AppendixJson,
    series_estimate_residual: f64,
}

#[derive(Serialize)]
struct PartialsJson {
    r1: Cx,
    t1: Cx,
    r2: Cx,
    t2: Cx,
    s: Cx,
    r_ob: Cx,
    t_ob: Cx,
    r_q: Cx,
    t_q: Cx,
    r_r: Cx,
    t_r: Cx,
    r1_0: Cx,
    t1_0: Cx,
    r1_0_ors: Cx,
}

#[derive(Serialize)]
struct BudgetJson {
    phi1: f64,
    phi2: f64,
    phi_s: f64,
    phi0: f64,
    total: f64,
    closure_residual: f64,
    phi1_plus_phi_s: f64,
    predicted_phi1: f64,
    predicted_phi2_minus_kl: f64,
    predicted_phi_s: f64,
}

#[derive(Serialize)]
struct AppendixJson {
    a4: Cx,
    residuals: Vec<NamedResidual>,
    t_vs_product_residual: f64,
}

#[derive(Serialize)]
struct NamedResidual {
    name: &'static str,
    residual: f64,
}

pub fn cmd_decompose(ctx: &Context, omega: Option<f64>) -> Result<(), CliError> {
    if ctx.config.system.n_barriers != 2 {
        return Err(CliError::Usage(format!(
            "decompose requires an N = 2 configuration, got N = {}",
            ctx.config.system.n_barriers
        )));
    }
    let (system, model) = ctx.setup()?;
    let omega = omega.unwrap_or(0.5 * (ctx.config.scan.omega_min + ctx.config.scan.omega_max));
    let w = model.eval(omega).map_err(lib_error)?;
    let sol = solve_exact(&system, &model, omega).map_err(lib_error)?;
    let dec = decompose_exact(&sol, &system, &w).map_err(lib_error)?;

    let reconstruction_residual =
        (dec.t1 * dec.t2 * dec.s - sol.transmission).norm() / sol.transmission.norm();
    let expected_ratio = -Complex64::new(0.0, w.k * (system.period() - 2.0 * system.width())).exp();
    let phase_ratio_residual = (dec.r_q / dec.r_r - expected_ratio)
        .norm()
        .max((dec.t_q / dec.t_r - expected_ratio).norm());
    let (deficit, ors_excess) = no_reflection_budget(&w, &system).map_err(lib_error)?;
    let reflection_probability = dec.r_r.norm_sqr() + dec.t_r.norm_sqr();

    let budget = phase_budget(&system, &model, omega).map_err(lib_error)?;
    let app = appendix_coefficients(&w, &system).map_err(lib_error)?;
    let exact = [
        ("r", sol.reflection),
        ("a2", sol.barrier_coeffs[0].0),
        ("b2", sol.barrier_coeffs[0].1),
        ("a3", sol.gap_coeffs[0].0),
        ("b3", sol.gap_coeffs[0].1),
        ("a4", sol.barrier_coeffs[1].0),
        ("b4", sol.barrier_coeffs[1].1),
        ("t", sol.transmission),
    ];
    let shift = Complex64::new(0.0, -w.k * system.width()).exp();
    let approx = [
        app.r,
        app.a2,
        app.b2,
        app.a3,
        app.b3,
        app.a4,
        app.b4,
        app.t * shift,
    ];
    let scale = exact.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    let residuals = exact
        .iter()
        .zip(&approx)
        .map(|((name, ex), ap)| NamedResidual {
            name,
            residual: (ap - ex).norm() / ex.norm().max(1e-3 * scale),
        })
        .collect();
    let fact = nbarrier::opaque_transmission(&system, &w).map_err(lib_error)?;
    let t_vs_product_residual = (app.t - fact.product).norm() / fact.product.norm();

    let series = opaque_series_estimate(&w, &system).map_err(lib_error)?;
    let series_estimate_residual = (series - dec.s).norm() / dec.s.norm();

    let doc = DecomposeDoc {
        omega,
        partials: PartialsJson {
            r1: dec.r1.into(),
            t1: dec.t1.into(),
            r2: dec.r2.into(),
            t2: dec.t2.into(),
            s: dec.s.into(),
            r_ob: dec.r_ob.into(),
            t_ob: dec.t_ob.into(),
            r_q: dec.r_q.into(),
            t_q: dec.t_q.into(),
            r_r: dec.r_r.into(),
            t_r: dec.t_r.into(),
            r1_0: dec.r1_0.into(),
            t1_0: dec.t1_0.into(),
            r1_0_ors: dec.r1_0_ors.into(),
        },
        reconstruction_residual,
        phase_ratio_residual,
        deficit,
        ors_excess,
        multiple_reflection_probability: reflection_probability,
        phase_budget: BudgetJson {
            phi1: budget.phi1,
            phi2: budget.phi2,
            phi_s: budget.phi_s,
            phi0: budget.phi0,
            total: budget.total,
            closure_residual: budget.closure_residual,
            phi1_plus_phi_s: budget.phi1_plus_phi_s,
            predicted_phi1: budget.predicted_phi1,
            predicted_phi2_minus_kl: budget.predicted_phi2_minus_kl,
            predicted_phi_s: budget.predicted_phi_s,
        },
        appendix: AppendixJson {
            a4: app.a4.into(),
            residuals,
            t_vs_product_residual,
        },
        series_estimate_residual,
    };

    let path = &ctx.config.output.path;
    let mut out = open_writer(path).map_err(|e| io_error(e, path))?;
    write_json(&mut *out, &doc).map_err(|e| io_error(e, path))?;
    out.flush().map_err(|e| io_error(e, path))?;
    Ok(())
}

pub fn cmd_validate(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let results = validate::run_all(&ctx.config.lib_tolerances());
    let mut failures = 0usize;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        let criterion = r
            .criterion
            .map(|c| format!(" [criterion {c}]"))
            .unwrap_or_default();
        println!(
            "{tag}  {}{criterion} — {} ({:.2?})",
            r.name, r.detail, r.elapsed
        );
        if !r.passed {
            failures += 1;
        }
    }
    println!(
        "{} checks, {} failed, {:.2?} total",
        results.len(),
        failures,
        started.elapsed()
    );
    if failures > 0 {
        Err(CliError::Validation)
    } else {
        Ok(())
    }
}

pub fn cmd_wavefunction(
    ctx: &Context,
    omega: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Usage("wavefunction needs points >= 2".into()));
    }
    if x_min.is_nan() || x_max.is_nan() || x_min >= x_max {
        return Err(CliError::Usage(format!(
            "x range [{x_min}, {x_max}] is empty"
        )));
    }
    let (system, model) = ctx.setup()?;
    let sol = solve_exact(&system, &model, omega).map_err(lib_error)?;

    // uniform grid plus every region boundary inside the window
    let step = (x_max - x_min) / (points - 1) as f64;
    let mut xs: Vec<f64> = (0..points).map(|i| x_min + i as f64 * step).collect();
    for boundary in system.interfaces() {
        if boundary >= x_min && boundary <= x_max {
            xs.push(boundary);
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let path = &ctx.config.output.path;
    let mut out = open_writer(path).map_err(|e| io_error(e, path))?;
    out.write_all(b"x,re_psi,im_psi,abs_psi2\n")
        .map_err(|e| io_error(e, path))?;
    for &x in &xs {
        let psi = evaluate_wavefunction(&sol, &system, &model, x);
        writeln!(
            out,
            "{},{},{},{}",
            fmt(x),
            fmt(psi.re),
            fmt(psi.im),
            fmt(psi.norm_sqr())
        )
        .map_err(|e| io_error(e, path))?;
    }
    out.flush().map_err(|e| io_error(e, path))?;
    Ok(())
}
