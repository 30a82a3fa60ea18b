//! Machine-readable reports. Every numeric the summaries print lives here
//! too, field for field; the summary text is generated from these structs.

use serde::Serialize;

use daempc::numlin::matrix::Matrix;

pub fn matrix_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i)).collect()
}

#[derive(Debug, Serialize)]
pub struct PencilReport {
    pub equations: usize,
    pub states: usize,
    pub inputs: usize,
    pub regular: bool,
    pub index: usize,
    pub underdetermined_col_sizes: Vec<usize>,
    pub n_finite: usize,
    pub n_nilpotent: usize,
    pub overdetermined_row_sizes: Vec<usize>,
    pub extended_underdetermined_col_sizes: Vec<usize>,
    pub extended_n_finite: usize,
    pub extended_n_nilpotent: usize,
    pub extended_overdetermined_row_sizes: Vec<usize>,
    pub impulse_controllable: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct AssumptionsReport {
    pub cost_psd: bool,
    pub stabilizable: bool,
    pub input_weight_pd: bool,
    pub observable: bool,
    pub rank_match: bool,
    pub pass: bool,
    pub details: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ReductionReport {
    pub route: String,
    pub n_reduced: usize,
    pub m_reduced: usize,
    pub feedback_gain: Option<Vec<Vec<f64>>>,
    pub zero_rows: Option<usize>,
    pub solve_condition: Option<f64>,
    pub a_reduced: Vec<Vec<f64>>,
    pub b_reduced: Vec<Vec<f64>>,
    /// Transformed cost by the congruence `X^T S X` (the form in use).
    pub cost_congruence: Vec<Vec<f64>>,
    /// Alternative left-inverse form `X^+ S X` (informational; differs for
    /// rectangular lifts).
    pub cost_left_inverse_form: Vec<Vec<f64>>,
    pub assumptions: AssumptionsReport,
}

#[derive(Debug, Serialize)]
pub struct RiccatiReport {
    pub p_hat: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub gain: Vec<Vec<f64>>,
    pub residual: f64,
    pub lambda_min: f64,
    pub closed_loop_certified: bool,
}

#[derive(Debug, Serialize)]
pub struct TerminalReport {
    pub rho: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub capped: bool,
}

#[derive(Debug, Serialize)]
pub struct OcpReport {
    pub horizon: f64,
    pub grid_steps: usize,
    pub with_terminal: bool,
    pub status: String,
    pub cost: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub first_input: Vec<f64>,
    /// `max(0, z_N' P z_N / rho - 1)`; zero when the endpoint is inside.
    pub terminal_membership_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct MpcReport {
    pub delta: f64,
    pub horizon: f64,
    pub substeps: usize,
    pub steps_completed: usize,
    pub stopped_early: bool,
    pub entry_time: Option<f64>,
    pub final_vf: f64,
    pub max_constraint_value: f64,
    pub intersample_constraint_value: f64,
    pub decrease_ok: bool,
    pub invariance_ok: bool,
    pub statuses_optimal: bool,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub file: String,
    pub seed: u64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pencil: Option<PencilReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati: Option<RiccatiReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<TerminalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocp: Option<OcpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcReport>,
}

impl Report {
    pub fn new(file: &str, seed: u64) -> Self {
        Report {
            file: file.to_string(),
            seed,
            warnings: Vec::new(),
            pencil: None,
            reduction: None,
            riccati: None,
            terminal: None,
            ocp: None,
            mpc: None,
        }
    }

    pub fn write(&self, path: &str) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        std::fs::write(path, text + "\n").map_err(|e| format!("cannot write '{path}': {e}"))
    }
}
