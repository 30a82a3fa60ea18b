//! Subcommand implementations. Summaries are printed from the same report
//! structs that `--report` serializes.

use daempc::error::Error;
use daempc::mpc::{
    build_pipeline, entry_time, intersample_constraint_value, max_constraint_value,
    run_closed_loop_with, verify_decrease, verify_invariance, MpcConfig, MpcPipeline,
};
use daempc::numlin::matrix::{dot, Matrix};
use daempc::numlin::sym_eigvals;
use daempc::ocp::{discretize, solve_ocp, OcpStatus};
use daempc::pencil::{impulse_controllable, is_regular, is_weakly_consistent, kronecker_structure};
use daempc::regularize::{build_reduced_ode, select_route, Route};
use daempc::riccati::{certify_closed_loop, check_assumptions};

use crate::report::*;
use crate::sysfile::{load, Problem};

/// Exit codes: 0 ok, 2 structural rejection (including input validation),
/// 3 runtime/numerical failure.
pub const EXIT_STRUCTURAL: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn structural(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_STRUCTURAL,
            message: msg.into(),
        }
    }
}

fn classify(err: &Error) -> i32 {
    match err {
        Error::Pipeline { source, .. } => classify(source),
        Error::CareFailure { .. }
        | Error::OcpInfeasible { .. }
        | Error::FeasibilityLost { .. }
        | Error::ImaginaryAxisSpectrum { .. }
        | Error::ResonantLyapunov
        | Error::Singular { .. } => EXIT_RUNTIME,
        _ => EXIT_STRUCTURAL,
    }
}

fn from_core(err: Error) -> Failure {
    Failure {
        code: classify(&err),
        message: err.to_string(),
    }
}

struct Analysis {
    problem: Problem,
    route: Route<f64>,
    pencil_report: PencilReport,
    reduction_report: ReductionReport,
}

fn analyze_problem(path: &str, seed: u64) -> Result<Analysis, Failure> {
    let problem = load(path).map_err(Failure::structural)?;
    let sys = &problem.sys;

    let regular = is_regular(sys).map_err(from_core)?;
    let own = kronecker_structure(&sys.e, &sys.a).map_err(from_core)?;
    let (ee, ea) = sys.extended_pencil();
    let ext = kronecker_structure(&ee, &ea).map_err(from_core)?;
    let ic = if regular {
        Some(impulse_controllable(sys).map_err(from_core)?)
    } else {
        None
    };
    let mut warnings = own.warnings.clone();
    warnings.extend(ext.warnings.clone());

    let pencil_report = PencilReport {
        equations: sys.n_eqs(),
        states: sys.n_states(),
        inputs: sys.n_inputs(),
        regular,
        index: own.nilpotency_index,
        underdetermined_col_sizes: own.underdetermined_col_sizes.clone(),
        n_finite: own.n_finite,
        n_nilpotent: own.n_nilpotent,
        overdetermined_row_sizes: own.overdetermined_row_sizes.clone(),
        extended_underdetermined_col_sizes: ext.underdetermined_col_sizes.clone(),
        extended_n_finite: ext.n_finite,
        extended_n_nilpotent: ext.n_nilpotent,
        extended_overdetermined_row_sizes: ext.overdetermined_row_sizes.clone(),
        impulse_controllable: ic,
        warnings,
    };

    let route = select_route(sys, seed).map_err(from_core)?;
    let reduced =
        build_reduced_ode(sys, &problem.constraints, &problem.cost, &route).map_err(from_core)?;
    let assumptions = check_assumptions(&reduced).map_err(from_core)?;

    // Left-inverse form of the cost transform, for comparison with the
    // congruence actually used.
    let left_inv_cost = {
        // X^+ = [I 0 0; 0 0 I] T^{-1} selects (z1; v).
        let n = reduced.n_states;
        let m = reduced.m_inputs;
        let nh = reduced.n_hat;
        let mr = reduced.m_red;
        let mut sel = Matrix::zeros(nh + mr, n + m);
        for i in 0..nh {
            for j in 0..n + m {
                sel[(i, j)] = reduced.t_hat_total_inv[(i, j)];
            }
        }
        let r_states = n + m - mr;
        for i in 0..mr {
            for j in 0..n + m {
                sel[(nh + i, j)] = reduced.t_hat_total_inv[(r_states + i, j)];
            }
        }
        sel.matmul(&problem.cost).matmul(&reduced.lift)
    };

    let (fb_gain, zero_rows, solve_condition) = match &route {
        Route::Feedback(fr) => (Some(matrix_rows(&fr.gain)), None, None),
        Route::Unimodular(ur) => (None, Some(ur.zero_rows), Some(ur.solve_condition)),
    };

    let reduction_report = ReductionReport {
        route: reduced.route.to_string(),
        n_reduced: reduced.n_hat,
        m_reduced: reduced.m_red,
        feedback_gain: fb_gain,
        zero_rows,
        solve_condition,
        a_reduced: matrix_rows(&reduced.a_hat),
        b_reduced: matrix_rows(&reduced.b_hat),
        cost_congruence: matrix_rows(&reduced.s_hat),
        cost_left_inverse_form: matrix_rows(&left_inv_cost),
        assumptions: AssumptionsReport {
            cost_psd: assumptions.s_psd,
            stabilizable: assumptions.stabilizable,
            input_weight_pd: assumptions.r_pd,
            observable: assumptions.observable,
            rank_match: assumptions.rank_match,
            pass: assumptions.all_pass(),
            details: assumptions.details.clone(),
        },
    };

    let _ = reduced;
    Ok(Analysis {
        problem,
        route,
        pencil_report,
        reduction_report,
    })
}

fn print_analysis(report: &Report) {
    let p = report.pencil.as_ref().expect("pencil report");
    let r = report.reduction.as_ref().expect("reduction report");
    println!(
        "system: {} equations, {} states, {} inputs",
        p.equations, p.states, p.inputs
    );
    println!(
        "pencil: {}, index {}",
        if p.regular { "regular" } else { "singular" },
        p.index
    );
    println!(
        "pencil blocks: underdetermined {:?} | finite {} | nilpotent {} | overdetermined {:?}",
        p.underdetermined_col_sizes, p.n_finite, p.n_nilpotent, p.overdetermined_row_sizes
    );
    println!(
        "extended pencil blocks: underdetermined {:?} | finite {} | nilpotent {} | overdetermined {:?}",
        p.extended_underdetermined_col_sizes,
        p.extended_n_finite,
        p.extended_n_nilpotent,
        p.extended_overdetermined_row_sizes
    );
    match p.impulse_controllable {
        Some(ic) => println!("impulse controllable: {ic}"),
        None => println!("impulse controllable: n/a (singular system)"),
    }
    println!(
        "route: {}, reduced system: n_hat = {} differential states, {} inputs",
        r.route, r.n_reduced, r.m_reduced
    );
    if let Some(z) = r.zero_rows {
        println!(
            "unimodular reduction: {z} zero rows, solve condition {:.3e}",
            r.solve_condition.unwrap_or(f64::NAN)
        );
    }
    let a = &r.assumptions;
    println!(
        "assumptions: {} (cost psd {}, input weight pd {}, rank match {}, observable {}, stabilizable {})",
        if a.pass { "pass" } else { "FAIL" },
        a.cost_psd, a.input_weight_pd, a.rank_match, a.observable, a.stabilizable
    );
    println!(
        "cost transform: congruence X^T S X in use; the left-inverse form X^+ S X is in the report \
         (the two differ for rectangular lifts)"
    );
    for w in &p.warnings {
        println!("warning: {w}");
    }
}

pub fn cmd_analyze(path: &str, seed: u64, report_path: Option<&str>) -> Result<(), Failure> {
    let analysis = analyze_problem(path, seed)?;
    let mut report = Report::new(path, seed);
    report.warnings = analysis.problem.warnings.clone();
    report.pencil = Some(analysis.pencil_report);
    report.reduction = Some(analysis.reduction_report);
    print_analysis(&report);
    if let Some(rp) = report_path {
        report.write(rp).map_err(Failure::structural)?;
    }
    Ok(())
}

pub fn cmd_regularize(path: &str, seed: u64, report_path: Option<&str>) -> Result<(), Failure> {
    let analysis = analyze_problem(path, seed)?;
    let mut report = Report::new(path, seed);
    report.warnings = analysis.problem.warnings.clone();
    report.pencil = Some(analysis.pencil_report);
    report.reduction = Some(analysis.reduction_report);
    let r = report.reduction.as_ref().unwrap();
    println!("route: {}", r.route);
    println!(
        "reduced drift ({} x {}): {:?}",
        r.n_reduced, r.n_reduced, r.a_reduced
    );
    println!(
        "reduced input map ({} x {}): {:?}",
        r.n_reduced, r.m_reduced, r.b_reduced
    );
    match &analysis.route {
        Route::Feedback(fr) => {
            println!("feedback gain: {:?}", matrix_rows(&fr.gain));
            println!("draws used: {}", fr.attempts);
        }
        Route::Unimodular(ur) => {
            println!(
                "unimodular reduction: r = {}, zero rows = {}, solve condition {:.3e}",
                ur.r, ur.zero_rows, ur.solve_condition
            );
        }
    }
    println!(
        "assumptions: {}",
        if r.assumptions.pass { "pass" } else { "FAIL" }
    );
    if let Some(rp) = report_path {
        report.write(rp).map_err(Failure::structural)?;
    }
    Ok(())
}

fn build_full_pipeline(
    analysis: &Analysis,
    cfg: &MpcConfig<f64>,
) -> Result<MpcPipeline<f64>, Failure> {
    build_pipeline(
        &analysis.problem.sys,
        &analysis.problem.constraints,
        &analysis.problem.cost,
        cfg,
    )
    .map_err(from_core)
}

fn riccati_terminal_reports(
    pipe: &MpcPipeline<f64>,
) -> Result<(RiccatiReport, TerminalReport), Failure> {
    let eigs = sym_eigvals(&pipe.care.p_hat).map_err(from_core)?;
    let certified = certify_closed_loop(&pipe.reduced, &pipe.care).map_err(from_core)?;
    Ok((
        RiccatiReport {
            p_hat: matrix_rows(&pipe.care.p_hat),
            eigenvalues: eigs,
            gain: matrix_rows(&pipe.care.gain),
            residual: pipe.care.residual_norm,
            lambda_min: pipe.care.lambda_min,
            closed_loop_certified: certified,
        },
        TerminalReport {
            rho: pipe.ingredients.rho,
            lambda_min: pipe.ingredients.lambda_min,
            lambda_max: pipe.ingredients.lambda_max,
            capped: pipe.ingredients.capped,
        },
    ))
}

fn default_cfg(analysis: &Analysis, delta: Option<f64>, steps: Option<usize>) -> MpcConfig<f64> {
    let block = analysis.problem.mpc.as_ref();
    let d = delta.unwrap_or_else(|| block.map_or(0.1, |b| b.delta));
    let multiple = block.map_or(3, |b| b.horizon_multiple);
    let substeps = block.map_or(20, |b| b.substeps);
    let n_steps = steps.unwrap_or_else(|| block.map_or(50, |b| b.steps));
    let mut cfg = MpcConfig::new(d, d * multiple as f64, substeps, n_steps);
    cfg.seed = 0;
    cfg
}

pub fn cmd_ocp(
    path: &str,
    seed: u64,
    horizon: Option<f64>,
    no_terminal: bool,
    report_path: Option<&str>,
) -> Result<(), Failure> {
    let analysis = analyze_problem(path, seed)?;
    let mut cfg = default_cfg(&analysis, None, None);
    cfg.seed = seed;
    if let Some(h) = horizon {
        let mult = (h / cfg.delta).round().max(2.0);
        cfg.horizon = cfg.delta * mult;
    }
    let pipe = build_full_pipeline(&analysis, &cfg)?;
    let x0 = analysis
        .problem
        .x0
        .clone()
        .ok_or_else(|| Failure::structural("the ocp command needs x0 in the problem file"))?;
    if !is_weakly_consistent(&analysis.problem.sys, &pipe.reduced, &x0).map_err(from_core)? {
        return Err(Failure::structural("x0 is not weakly consistent"));
    }
    let z0 = pipe.reduced.initial_state(&x0);

    let grid_steps = cfg.horizon_multiple() * cfg.substeps;
    let docp = discretize(&pipe.reduced, cfg.horizon, grid_steps)
        .map_err(from_core)?
        .with_terminal(&pipe.ingredients, &pipe.care);
    let sol = solve_ocp(&docp, &z0, !no_terminal).map_err(from_core)?;
    if sol.status == OcpStatus::Infeasible {
        return Err(Failure {
            code: EXIT_RUNTIME,
            message: "optimal control problem is infeasible".into(),
        });
    }

    let membership = if no_terminal {
        None
    } else {
        let zn = &sol.z_grid[docp.n_steps];
        let quad = dot(zn, &pipe.ingredients.p_hat.matvec(zn));
        Some((quad / pipe.ingredients.rho - 1.0).max(0.0))
    };

    let (ricc, term) = riccati_terminal_reports(&pipe)?;
    let mut report = Report::new(path, seed);
    report.warnings = analysis.problem.warnings.clone();
    report.pencil = Some(analysis.pencil_report);
    report.reduction = Some(analysis.reduction_report);
    report.riccati = Some(ricc);
    report.terminal = Some(term);
    report.ocp = Some(OcpReport {
        horizon: cfg.horizon,
        grid_steps,
        with_terminal: !no_terminal,
        status: sol.status.to_string(),
        cost: sol.cost,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        first_input: sol.v_grid.first().cloned().unwrap_or_default(),
        terminal_membership_residual: membership,
    });

    let o = report.ocp.as_ref().unwrap();
    println!(
        "ocp: horizon {} over {} grid steps, terminal ingredients {}",
        o.horizon,
        o.grid_steps,
        if o.with_terminal { "on" } else { "off" }
    );
    println!("status: {} after {} iterations", o.status, o.iterations);
    println!("optimal cost: {:.12e}", o.cost);
    println!(
        "residuals: primal {:.3e}, dual {:.3e}",
        o.primal_residual, o.dual_residual
    );
    println!("first input: {:?}", o.first_input);
    if let Some(mr) = o.terminal_membership_residual {
        println!("terminal membership residual: {mr:.3e}");
    }
    if let Some(rp) = report_path {
        report.write(rp).map_err(Failure::structural)?;
    }
    Ok(())
}

fn float_cell(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cmd_mpc(
    path: &str,
    seed: u64,
    delta: Option<f64>,
    steps: Option<usize>,
    out_csv: Option<&str>,
    report_path: Option<&str>,
) -> Result<(), Failure> {
    let analysis = analyze_problem(path, seed)?;
    let mut cfg = default_cfg(&analysis, delta, steps);
    cfg.seed = seed;
    let pipe = build_full_pipeline(&analysis, &cfg)?;
    let x0 = analysis
        .problem
        .x0
        .clone()
        .ok_or_else(|| Failure::structural("the mpc command needs x0 in the problem file"))?;
    if !is_weakly_consistent(&analysis.problem.sys, &pipe.reduced, &x0).map_err(from_core)? {
        return Err(Failure::structural("x0 is not weakly consistent"));
    }

    let trace = run_closed_loop_with(&pipe, &x0, &cfg).map_err(from_core)?;
    let decrease = verify_decrease(&trace);
    let invariance = verify_invariance(&trace, &pipe.ingredients);
    let worst = max_constraint_value(&trace, &pipe.reduced);
    let h = cfg.delta / cfg.substeps as f64;
    let dense = intersample_constraint_value(&trace, &pipe.reduced, h, 10).map_err(from_core)?;

    let (ricc, term) = riccati_terminal_reports(&pipe)?;
    let entered_at = entry_time(&trace, &pipe.ingredients);
    let mut report = Report::new(path, seed);
    report.warnings = analysis.problem.warnings.clone();
    report.pencil = Some(analysis.pencil_report);
    report.reduction = Some(analysis.reduction_report);
    report.riccati = Some(ricc);
    report.terminal = Some(term);
    report.mpc = Some(MpcReport {
        delta: cfg.delta,
        horizon: cfg.horizon,
        substeps: cfg.substeps,
        steps_completed: trace.steps_completed,
        stopped_early: trace.stopped_early,
        entry_time: entered_at,
        final_vf: *trace.vf_values.last().unwrap_or(&0.0),
        max_constraint_value: worst,
        intersample_constraint_value: dense,
        decrease_ok: decrease.ok,
        invariance_ok: invariance.ok,
        statuses_optimal: trace.ocp_statuses.iter().all(|s| *s == OcpStatus::Optimal),
    });

    // CSV trace at shift resolution: state and applied input at the start
    // of each interval plus the realized interval cost and certificates.
    if let Some(csv_path) = out_csv {
        let n = analysis.problem.sys.n_states();
        let m = analysis.problem.sys.n_inputs();
        let mut text = String::from("t");
        for i in 1..=n {
            text += &format!(",x_{i}");
        }
        for i in 1..=m {
            text += &format!(",u_{i}");
        }
        text += ",stage_cost,V_f,in_terminal_region,ocp_status\n";
        for k in 0..trace.steps_completed {
            let idx = k * cfg.substeps;
            let mut row = float_cell(k as f64 * cfg.delta);
            for v in &trace.x_fine[idx] {
                row += &format!(",{}", float_cell(*v));
            }
            for v in &trace.u_fine[idx] {
                row += &format!(",{}", float_cell(*v));
            }
            row += &format!(
                ",{},{},{},{}",
                float_cell(trace.stage_costs[k]),
                float_cell(trace.vf_values[k]),
                u8::from(trace.in_region[k]),
                trace.ocp_statuses[k]
            );
            text += &row;
            text += "\n";
        }
        std::fs::write(csv_path, text)
            .map_err(|e| Failure::structural(format!("cannot write '{csv_path}': {e}")))?;
    }

    let r = report.riccati.as_ref().unwrap();
    let t = report.terminal.as_ref().unwrap();
    let m = report.mpc.as_ref().unwrap();
    println!(
        "terminal: rho = {:.12}, terminal weight eigenvalues {:?}",
        t.rho, r.eigenvalues
    );
    println!(
        "closed loop: {} steps (stopped early: {}), entry into the terminal region at t = {}",
        m.steps_completed,
        m.stopped_early,
        m.entry_time
            .map_or("never".to_string(), |t| format!("{t:.3}")),
    );
    println!(
        "final terminal cost {:.3e}; constraints: grid max {:.6}, dense max {:.6}",
        m.final_vf, m.max_constraint_value, m.intersample_constraint_value
    );
    println!(
        "certificates: decrease {}, invariance {}, all solves optimal {}",
        m.decrease_ok, m.invariance_ok, m.statuses_optimal
    );
    if let Some(rp) = report_path {
        report.write(rp).map_err(Failure::structural)?;
    }
    Ok(())
}
