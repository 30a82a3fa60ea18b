//! Receding-horizon closed loop: measure, solve the terminal-ingredient
//! OCP, implement the first piece, repeat. Monitors cover the decrease
//! condition, terminal-region invariance, and constraint satisfaction.
//!
//! The loop is nominal: the plant is the reduced ODE propagated exactly by
//! ZOH, and the measurement recovers the reduced state through the
//! initial-value selector, so plant and prediction coincide over the
//! implemented piece.

use crate::error::Error;
use crate::numlin::expm::expm;
use crate::numlin::matrix::{dot, norm2, Matrix};
use crate::ocp::{discretize, solve_ocp_warm, DiscreteOcp, OcpSolution, OcpStatus};
use crate::pencil::{is_weakly_consistent, ConstraintSet, DaeSystem};
use crate::regularize::{build_reduced_ode, select_route, ReducedOde, Route};
use crate::riccati::certify_closed_loop;
use crate::riccati::{check_assumptions, solve_care, AssumptionReport, RiccatiSolution};
use crate::scalar::{real, Scalar};
use crate::terminal::{build_terminal, in_terminal_region, vf_eval, TerminalIngredients};
use crate::Result;

#[derive(Debug, Clone)]
pub struct MpcConfig<T> {
    /// Time shift between measurements.
    pub delta: T,
    /// Prediction horizon; an integer multiple of `delta`.
    pub horizon: T,
    /// Integration substeps per shift interval (`h = delta / substeps`).
    pub substeps: usize,
    /// Number of closed-loop steps.
    pub n_steps: usize,
    /// Early stop once the terminal cost falls below this value.
    pub vf_stop: T,
    /// Seed for the randomized feedback regularization.
    pub seed: u64,
    /// Relative slack for terminal-region membership flags.
    pub region_slack: T,
}

impl<T: Scalar> MpcConfig<T> {
    pub fn new(delta: T, horizon: T, substeps: usize, n_steps: usize) -> Self {
        MpcConfig {
            delta,
            horizon,
            substeps,
            n_steps,
            vf_stop: real(1e-12),
            seed: 0,
            region_slack: crate::terminal::default_slack(),
        }
    }

    /// Number of shift intervals covered by the horizon.
    pub fn horizon_multiple(&self) -> usize {
        (self.horizon / self.delta).round().to_f64().unwrap_or(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta <= T::zero() || self.substeps == 0 || self.n_steps == 0 {
            return Err(Error::InvalidConfig {
                details: "delta, substeps and n_steps must be positive".into(),
            });
        }
        let k = self.horizon_multiple();
        let remainder = (self.horizon - real::<T>(k as f64) * self.delta).abs();
        if k < 2 || remainder > real::<T>(1e-9) * self.delta {
            return Err(Error::InvalidConfig {
                details: "horizon must be an integer multiple (>= 2) of delta".into(),
            });
        }
        Ok(())
    }
}

/// Everything the loop needs, assembled once per system.
#[derive(Debug, Clone)]
pub struct MpcPipeline<T> {
    pub route: Route<T>,
    pub reduced: ReducedOde<T>,
    pub assumptions: AssumptionReport,
    pub care: RiccatiSolution<T>,
    pub ingredients: TerminalIngredients<T>,
    pub docp: DiscreteOcp<T>,
}

pub fn build_pipeline<T: Scalar>(
    sys: &DaeSystem<T>,
    constraints: &ConstraintSet<T>,
    s_cost: &Matrix<T>,
    cfg: &MpcConfig<T>,
) -> Result<MpcPipeline<T>> {
    cfg.validate()?;
    let route = select_route(sys, cfg.seed).map_err(|e| e.at_stage("regularize"))?;
    let reduced = build_reduced_ode(sys, constraints, s_cost, &route)
        .map_err(|e| e.at_stage("regularize"))?;
    let assumptions = check_assumptions(&reduced).map_err(|e| e.at_stage("assumptions"))?;
    let care = solve_care(&reduced).map_err(|e| e.at_stage("riccati"))?;
    if !certify_closed_loop(&reduced, &care).map_err(|e| e.at_stage("riccati"))? {
        return Err(Error::CareFailure {
            details: "closed loop failed the Lyapunov certificate".into(),
        }
        .at_stage("riccati"));
    }
    let ingredients =
        build_terminal(&reduced, &care, constraints).map_err(|e| e.at_stage("terminal"))?;
    let grid_steps = cfg.horizon_multiple() * cfg.substeps;
    let docp = discretize(&reduced, cfg.horizon, grid_steps)
        .map_err(|e| e.at_stage("discretize"))?
        .with_terminal(&ingredients, &care);
    Ok(MpcPipeline {
        route,
        reduced,
        assumptions,
        care,
        ingredients,
        docp,
    })
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics<T> {
    pub status: OcpStatus,
    pub cost: T,
    pub iterations: usize,
    /// `z_N^T P z_N` of the predicted endpoint.
    pub predicted_terminal_quad: T,
}

#[derive(Debug, Clone)]
pub struct MpcStep<T> {
    /// Inputs applied over `[0, delta)`, one per substep.
    pub applied: Vec<Vec<T>>,
    pub next_z1: Vec<T>,
    /// Shift-and-extend warm start for the next solve.
    pub warm_next: Vec<Vec<T>>,
    pub diagnostics: StepDiagnostics<T>,
}

/// One receding-horizon step: solve the terminal-ingredient OCP, implement
/// the first `substeps` grid inputs, propagate the plant exactly, and
/// prepare the LQR-extended warm start.
pub fn mpc_step<T: Scalar>(
    z1: &[T],
    docp: &DiscreteOcp<T>,
    substeps: usize,
    warm: Option<&[Vec<T>]>,
) -> Result<MpcStep<T>> {
    let term = docp.terminal.as_ref().ok_or_else(|| Error::InvalidConfig {
        details: "mpc_step requires terminal ingredients on the OCP".into(),
    })?;
    let sol: OcpSolution<T> = solve_ocp_warm(docp, z1, true, warm)?;
    if sol.status == OcpStatus::Infeasible {
        return Err(Error::OcpInfeasible {
            details: format!("state {:?}", z1),
        });
    }
    let applied: Vec<Vec<T>> = sol.v_grid[..substeps].to_vec();
    let mut z = z1.to_vec();
    for v in &applied {
        z = crate::numlin::vec_add(&docp.ad.matvec(&z), &docp.bd.matvec(v));
    }

    // Warm start: shift by the applied piece, extend with the LQR law.
    let mut warm_next: Vec<Vec<T>> = sol.v_grid[substeps..].to_vec();
    let mut z_tail = sol.z_grid[docp.n_steps].clone();
    for _ in 0..substeps {
        let v: Vec<T> = term.gain.matvec(&z_tail).iter().map(|&g| -g).collect();
        z_tail = crate::numlin::vec_add(&docp.ad.matvec(&z_tail), &docp.bd.matvec(&v));
        warm_next.push(v);
    }

    let zn = &sol.z_grid[docp.n_steps];
    let predicted_terminal_quad = dot(zn, &term.p_hat.matvec(zn));
    Ok(MpcStep {
        applied,
        next_z1: z,
        warm_next,
        diagnostics: StepDiagnostics {
            status: sol.status,
            cost: sol.cost,
            iterations: sol.iterations,
            predicted_terminal_quad,
        },
    })
}

/// Sampled closed loop with per-interval certificates.
#[derive(Debug, Clone)]
pub struct ClosedLoopTrace<T> {
    /// Fine-grid times, `steps_completed * substeps + 1` entries.
    pub times_fine: Vec<T>,
    /// Reduced state at the fine grid.
    pub z1_fine: Vec<Vec<T>>,
    /// Lifted state at the fine grid (the final point is lifted with the
    /// last applied input).
    pub x_fine: Vec<Vec<T>>,
    /// Lifted input per fine interval.
    pub u_fine: Vec<Vec<T>>,
    /// Reduced input per fine interval.
    pub v_fine: Vec<Vec<T>>,
    /// Shift-interval start times `k delta`.
    pub step_times: Vec<T>,
    /// Realized stage cost over each shift interval.
    pub stage_costs: Vec<T>,
    /// Terminal cost at `k delta`, one more entry than steps.
    pub vf_values: Vec<T>,
    /// Terminal-region membership at `k delta`.
    pub in_region: Vec<bool>,
    pub ocp_statuses: Vec<OcpStatus>,
    pub ocp_costs: Vec<T>,
    pub steps_completed: usize,
    pub stopped_early: bool,
    pub substeps: usize,
    pub delta: T,
}

impl<T: Scalar> ClosedLoopTrace<T> {
    pub fn final_z1(&self) -> &[T] {
        self.z1_fine.last().expect("trace has at least one sample")
    }
}

/// Run the full pipeline and the closed loop from a weakly consistent
/// initial value.
pub fn run_closed_loop<T: Scalar>(
    sys: &DaeSystem<T>,
    constraints: &ConstraintSet<T>,
    s_cost: &Matrix<T>,
    x0: &[T],
    cfg: &MpcConfig<T>,
) -> Result<ClosedLoopTrace<T>> {
    let pipeline = build_pipeline(sys, constraints, s_cost, cfg)?;
    if !is_weakly_consistent(sys, &pipeline.reduced, x0).map_err(|e| e.at_stage("initial value"))? {
        return Err(Error::InvalidConfig {
            details: "initial value is not weakly consistent".into(),
        }
        .at_stage("initial value"));
    }
    run_closed_loop_with(&pipeline, x0, cfg)
}

pub fn run_closed_loop_with<T: Scalar>(
    pipeline: &MpcPipeline<T>,
    x0: &[T],
    cfg: &MpcConfig<T>,
) -> Result<ClosedLoopTrace<T>> {
    cfg.validate()?;
    let reduced = &pipeline.reduced;
    let ing = &pipeline.ingredients;
    let docp = &pipeline.docp;
    let substeps = cfg.substeps;
    let h = cfg.delta / real::<T>(substeps as f64);

    let mut z1 = reduced.initial_state(x0);
    let mut warm: Option<Vec<Vec<T>>> = None;

    let mut trace = ClosedLoopTrace {
        times_fine: vec![T::zero()],
        z1_fine: vec![z1.clone()],
        x_fine: Vec::new(),
        u_fine: Vec::new(),
        v_fine: Vec::new(),
        step_times: Vec::new(),
        stage_costs: Vec::new(),
        vf_values: Vec::new(),
        in_region: Vec::new(),
        ocp_statuses: Vec::new(),
        ocp_costs: Vec::new(),
        steps_completed: 0,
        stopped_early: false,
        substeps,
        delta: cfg.delta,
    };

    let vf0 = vf_eval(ing, &z1)?;
    trace.vf_values.push(vf0);
    trace
        .in_region
        .push(in_terminal_region(ing, &z1, cfg.region_slack));

    for k in 0..cfg.n_steps {
        let vf_here = *trace.vf_values.last().expect("vf recorded");
        if vf_here < cfg.vf_stop {
            trace.stopped_early = true;
            break;
        }
        trace.step_times.push(real::<T>(k as f64) * cfg.delta);

        let step = mpc_step(&z1, docp, substeps, warm.as_deref()).map_err(|e| match e {
            Error::OcpInfeasible { details } => Error::FeasibilityLost {
                step: k,
                time: (real::<T>(k as f64) * cfg.delta)
                    .to_f64()
                    .unwrap_or(f64::NAN),
                details,
            },
            other => other.at_stage("mpc loop"),
        })?;

        // Record the applied piece on the fine grid.
        let mut stage_total = T::zero();
        let mut z_local = z1.clone();
        for (j, v) in step.applied.iter().enumerate() {
            stage_total = stage_total + docp.stage_cost(&z_local, v);
            let (x, u) = reduced.lift_point(&z_local, v);
            trace.x_fine.push(x);
            trace.u_fine.push(u);
            trace.v_fine.push(v.clone());
            z_local = crate::numlin::vec_add(&docp.ad.matvec(&z_local), &docp.bd.matvec(v));
            trace.z1_fine.push(z_local.clone());
            trace
                .times_fine
                .push(real::<T>(k as f64) * cfg.delta + real::<T>((j + 1) as f64) * h);
        }
        debug_assert!(norm2(&crate::numlin::vec_sub(&z_local, &step.next_z1)) <= real(1e-12));

        z1 = step.next_z1.clone();
        warm = Some(step.warm_next.clone());
        trace.stage_costs.push(stage_total);
        trace.ocp_statuses.push(step.diagnostics.status);
        trace.ocp_costs.push(step.diagnostics.cost);
        trace.vf_values.push(vf_eval(ing, &z1)?);
        trace
            .in_region
            .push(in_terminal_region(ing, &z1, cfg.region_slack));
        trace.steps_completed = k + 1;
    }

    // Lift the final sample with the last applied input (or zero input when
    // the loop never ran).
    let last_v = trace
        .v_fine
        .last()
        .cloned()
        .unwrap_or_else(|| vec![T::zero(); reduced.m_red]);
    let (x_last, _) = reduced.lift_point(trace.z1_fine.last().expect("sample"), &last_v);
    trace.x_fine.push(x_last);

    Ok(trace)
}

// ── certificates ────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct DecreaseReport<T> {
    /// Steps with both endpoints inside the terminal region.
    pub checked_steps: usize,
    /// `V_f(z_{k+1}) - V_f(z_k) + stage_k` for every step (diagnostic for
    /// steps outside the region, asserted inside).
    pub per_step: Vec<T>,
    pub max_violation: T,
    pub ok: bool,
}

/// Decrease condition along the trace:
/// `V_f(z((k+1)d)) - V_f(z(kd)) + stage_k <= tol` for every shift interval
/// whose endpoints both lie in the terminal region.
pub fn verify_decrease<T: Scalar>(trace: &ClosedLoopTrace<T>) -> DecreaseReport<T> {
    let mut per_step = Vec::with_capacity(trace.steps_completed);
    let mut checked = 0;
    let mut max_violation = T::zero();
    let mut ok = true;
    for k in 0..trace.steps_completed {
        let decrease = trace.vf_values[k + 1] - trace.vf_values[k] + trace.stage_costs[k];
        per_step.push(decrease);
        if trace.in_region[k] && trace.in_region[k + 1] {
            checked += 1;
            let tol = real::<T>(1e-7) * (T::one() + trace.vf_values[k]);
            if decrease > tol {
                ok = false;
                max_violation = max_violation.max(decrease);
            }
        }
    }
    DecreaseReport {
        checked_steps: checked,
        per_step,
        max_violation,
        ok,
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// First shift index strictly inside the terminal region.
    pub entry_step: Option<usize>,
    /// First fine sample after entry that left the region, if any.
    pub violation_at: Option<usize>,
    pub ok: bool,
}

/// Once the trace is strictly inside the terminal region it must never
/// leave it again; checked on the fine grid.
pub fn verify_invariance<T: Scalar>(
    trace: &ClosedLoopTrace<T>,
    ing: &TerminalIngredients<T>,
) -> InvarianceReport {
    let strict = real::<T>(1e-6);
    let slack = real::<T>(1e-8);
    let mut entry_fine = None;
    for (i, z) in trace.z1_fine.iter().enumerate() {
        let quad = dot(z, &ing.p_hat.matvec(z));
        if quad < ing.rho * (T::one() - strict) {
            entry_fine = Some(i);
            break;
        }
    }
    let Some(entry) = entry_fine else {
        return InvarianceReport {
            entry_step: None,
            violation_at: None,
            ok: true,
        };
    };
    for (i, z) in trace.z1_fine.iter().enumerate().skip(entry) {
        if !in_terminal_region(ing, z, slack) {
            return InvarianceReport {
                entry_step: Some(entry / trace.substeps),
                violation_at: Some(i),
                ok: false,
            };
        }
    }
    InvarianceReport {
        entry_step: Some(entry / trace.substeps),
        violation_at: None,
        ok: true,
    }
}

/// Time of the first fine-grid sample strictly inside the terminal region.
pub fn entry_time<T: Scalar>(
    trace: &ClosedLoopTrace<T>,
    ing: &TerminalIngredients<T>,
) -> Option<T> {
    let strict = real::<T>(1e-6);
    trace
        .z1_fine
        .iter()
        .position(|z| dot(z, &ing.p_hat.matvec(z)) < ing.rho * (T::one() - strict))
        .map(|i| trace.times_fine[i])
}

/// Worst constraint value `max_i ([F G](x; u))_i` over the fine grid
/// (feasible traces stay at or below 1).
pub fn max_constraint_value<T: Scalar>(trace: &ClosedLoopTrace<T>, reduced: &ReducedOde<T>) -> T {
    let mut worst = T::neg_infinity();
    if reduced.constraint_rows.rows() == 0 {
        return T::zero();
    }
    for (i, v) in trace.v_fine.iter().enumerate() {
        let mut zv = trace.z1_fine[i].clone();
        zv.extend_from_slice(v);
        let vals = reduced.constraint_rows.matvec(&zv);
        for val in vals {
            worst = worst.max(val);
        }
    }
    worst
}

/// Densely sampled constraint monitor: evaluates the constraint rows at
/// `factor` interior points of every fine interval via exact sub-interval
/// propagation and reports the worst value found.
pub fn intersample_constraint_value<T: Scalar>(
    trace: &ClosedLoopTrace<T>,
    reduced: &ReducedOde<T>,
    h: T,
    factor: usize,
) -> Result<T> {
    if reduced.constraint_rows.rows() == 0 || factor < 2 {
        return Ok(max_constraint_value(trace, reduced));
    }
    let n = reduced.n_hat;
    let m = reduced.m_red;
    let d = n + m;
    let mut aug = Matrix::zeros(d, d);
    aug.set_block(0, 0, &reduced.a_hat);
    aug.set_block(0, n, &reduced.b_hat);
    // Propagators at the interior offsets tau_j = h j / factor.
    let mut props = Vec::with_capacity(factor - 1);
    for j in 1..factor {
        let tau = h * real::<T>(j as f64) / real::<T>(factor as f64);
        let e = expm(&aug.scale(tau))?;
        props.push((e.submatrix(0, 0, n, n), e.submatrix(0, n, n, m)));
    }
    let mut worst = max_constraint_value(trace, reduced);
    for (i, v) in trace.v_fine.iter().enumerate() {
        let z = &trace.z1_fine[i];
        for (adj, bdj) in &props {
            let zt = crate::numlin::vec_add(&adj.matvec(z), &bdj.matvec(v));
            let mut zv = zt;
            zv.extend_from_slice(v);
            let vals = reduced.constraint_rows.matvec(&zv);
            for val in vals {
                worst = worst.max(val);
            }
        }
    }
    Ok(worst)
}
