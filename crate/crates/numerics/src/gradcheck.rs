//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor2;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, row, col)` of the worst coordinate.
    pub worst: Option<(usize, usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares the tape gradient of scalar `f` at `points` with central
/// differences of half-width `step`, coordinate by coordinate.
pub fn grad_check<F>(f: F, points: &[Tensor2], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = points.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&tape, &vars)?;
        let g = tape.backward(loss)?;
        vars.iter().map(|v| g.wrt(v)).collect::<Vec<_>>()
    };

    let eval = |pts: &[Tensor2]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = pts.iter().map(|p| tape.constant(p.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = out.value();
        v.scalar().ok_or(crate::NumericsError::NonScalarLoss(v.shape()))
    };

    let mut pts = points.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    for k in 0..pts.len() {
        let (rows, cols) = pts[k].shape();
        for r in 0..rows {
            for c in 0..cols {
                let orig = pts[k].get(r, c);
                pts[k].set(r, c, orig + step);
                let up = eval(&pts)?;
                pts[k].set(r, c, orig - step);
                let down = eval(&pts)?;
                pts[k].set(r, c, orig);
                let numeric = (up - down) / (2.0 * step);
                let err = relative_error(analytic[k].get(r, c), numeric);
                if err > max_rel_error || err.is_nan() {
                    max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                    worst = Some((k, r, c));
                }
            }
        }
    }
    Ok(GradCheckReport { max_rel_error, worst, tolerance: tol, passed: max_rel_error <= tol })
}
