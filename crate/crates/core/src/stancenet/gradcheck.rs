use super::MatchLstmModel;
use crate::corpus::StanceLabel;
use crate::error::Result;

/// Step of the five-point stencil. Its O(h^4) truncation error lets the
/// step stay large enough that roundoff in the loss difference does not
/// swamp gradient components near 1e-9.
pub const FD_STEP: f64 = 2e-3;

/// Denominator floor of the relative error, so that components which are
/// zero both ways compare equal instead of dividing by zero.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub max_abs_grad: f64,
    /// Worst relative error per named block.
    pub blocks: Vec<(String, f64)>,
    pub checked: usize,
}

/// Compares the analytic gradient of the loss on one example against
/// five-point finite differences for every parameter.
pub fn gradient_check(
    model: &MatchLstmModel,
    xq: &[f64],
    m: usize,
    xd: &[f64],
    n: usize,
    label: StanceLabel,
) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_and_grad(xq, m, xd, n, label, Some(&mut analytic))?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        max_abs_grad: 0.0,
        blocks: Vec::new(),
        checked: 0,
    };
    for block in model.layout().blocks() {
        let mut worst = 0.0f64;
        for i in block.range.clone() {
            let orig = model.params()[i];
            let mut at = |offset: f64| {
                probe.params_mut()[i] = orig + offset * FD_STEP;
                probe.loss_and_grad(xq, m, xd, n, label, None)
            };
            let (up, down) = (at(1.0)?, at(-1.0)?);
            let (up2, down2) = (at(2.0)?, at(-2.0)?);
            probe.params_mut()[i] = orig;
            let numeric = (8.0 * (up - down) - (up2 - down2)) / (12.0 * FD_STEP);
            let a = analytic[i];
            let abs = (a - numeric).abs();
            let rel = abs / (a.abs() + numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_abs_grad = report.max_abs_grad.max(a.abs());
            report.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.blocks.push((block.name, worst));
    }
    Ok(report)
}
