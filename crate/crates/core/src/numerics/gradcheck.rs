use serde::Serialize;

use super::Matrix;
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is essentially zero are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub epsilon: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.passed)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` gradients against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε`, entry by entry over every parameter block.
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &[Matrix],
    names: &[String],
    analytic: &[Matrix],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if params.len() != analytic.len() || params.len() != names.len() {
        return Err(Error::Input(format!(
            "{} parameter blocks, {} gradients, {} names",
            params.len(),
            analytic.len(),
            names.len()
        )));
    }
    let mut work = params.to_vec();
    let mut blocks = Vec::with_capacity(params.len());
    for (b, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[b].shape() {
            return Err(Error::Shape {
                op: "grad_check",
                left: params[b].shape_str(),
                right: grad.shape_str(),
            });
        }
        let mut report = BlockReport {
            name: names[b].clone(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            passed: true,
        };
        for i in 0..grad.data().len() {
            let orig = work[b].data()[i];
            work[b].data_mut()[i] = orig + epsilon;
            let plus = eval(&mut loss_fn, &work)?;
            work[b].data_mut()[i] = orig - epsilon;
            let minus = eval(&mut loss_fn, &work)?;
            work[b].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = grad.data()[i];
            let err = relative_error(a, numeric);
            if err > report.max_rel_error || i == 0 {
                report.max_rel_error = err;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
        report.passed = report.max_rel_error < tolerance;
        blocks.push(report);
    }
    Ok(GradCheckReport {
        tolerance,
        epsilon,
        blocks,
    })
}

fn eval<F>(loss_fn: &mut F, params: &[Matrix]) -> Result<f64>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    let v = loss_fn(params)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("loss during gradient check".into()));
    }
    Ok(v)
}
