//! JSON problem files: named dense matrices plus optional initial value
//! and loop parameters. One file fully specifies a problem.

use serde::{Deserialize, Serialize};

use daempc::numlin::matrix::Matrix;
use daempc::pencil::{ConstraintSet, DaeSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixFile {
    pub fn to_matrix(&self, name: &str) -> Result<Matrix<f64>, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "matrix '{name}': {} entries, expected {} ({} x {})",
                self.data.len(),
                self.rows * self.cols,
                self.rows,
                self.cols
            ));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(format!("matrix '{name}': non-finite entry"));
        }
        Ok(Matrix::from_vec(self.rows, self.cols, self.data.clone()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcBlock {
    pub delta: f64,
    pub horizon_multiple: usize,
    pub substeps: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub e: MatrixFile,
    pub a: MatrixFile,
    pub b: MatrixFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<MatrixFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MatrixFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcBlock>,
}

/// A fully validated problem.
pub struct Problem {
    pub sys: DaeSystem<f64>,
    pub constraints: ConstraintSet<f64>,
    pub cost: Matrix<f64>,
    pub x0: Option<Vec<f64>>,
    pub mpc: Option<MpcBlock>,
    pub warnings: Vec<String>,
}

pub fn load(path: &str) -> Result<Problem, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read '{path}': {e}"))?;
    let file: SystemFile =
        serde_json::from_str(&text).map_err(|e| format!("cannot parse '{path}': {e}"))?;
    validate(file)
}

pub fn validate(file: SystemFile) -> Result<Problem, String> {
    let mut warnings = Vec::new();
    let e = file.e.to_matrix("e")?;
    let a = file.a.to_matrix("a")?;
    let b = file.b.to_matrix("b")?;
    let sys = DaeSystem::new(e, a, b).map_err(|err| format!("system: {err}"))?;
    let n = sys.n_states();
    let m = sys.n_inputs();

    let constraints = match (&file.f, &file.g) {
        (None, None) => ConstraintSet::empty(n, m),
        (Some(ff), Some(gg)) => {
            let f = ff.to_matrix("f")?;
            let g = gg.to_matrix("g")?;
            if f.cols() != n {
                return Err(format!("matrix 'f' must have {n} columns"));
            }
            if g.cols() != m {
                return Err(format!("matrix 'g' must have {m} columns"));
            }
            ConstraintSet::new(f, g).map_err(|err| format!("constraints: {err}"))?
        }
        _ => return Err("matrices 'f' and 'g' must be given together".into()),
    };

    let cost = match &file.s {
        None => Matrix::identity(n + m),
        Some(sf) => {
            let s = sf.to_matrix("s")?;
            if s.rows() != n + m || s.cols() != n + m {
                return Err(format!("matrix 's' must be {0} x {0}", n + m));
            }
            let skew = s.sub(&s.transpose()).max_abs();
            let scale = 1.0 + s.max_abs();
            if skew > 1e-12 * scale {
                return Err(format!("matrix 's' is not symmetric (skew part {skew:e})"));
            }
            if skew > 0.0 {
                warnings.push(format!("cost matrix symmetrized (skew part {skew:e})"));
            }
            s.symmetrize()
        }
    };

    if let Some(x0) = &file.x0 {
        if x0.len() != n {
            return Err(format!("x0 has {} entries, expected {n}", x0.len()));
        }
        if x0.iter().any(|x| !x.is_finite()) {
            return Err("x0 has a non-finite entry".into());
        }
    }
    if let Some(mpc) = &file.mpc {
        if mpc.delta <= 0.0 || mpc.horizon_multiple < 2 || mpc.substeps == 0 || mpc.steps == 0 {
            return Err(
                "mpc block requires delta > 0, horizon_multiple >= 2, substeps >= 1, steps >= 1"
                    .into(),
            );
        }
    }

    Ok(Problem {
        sys,
        constraints,
        cost,
        x0: file.x0,
        mpc: file.mpc,
        warnings,
    })
}
