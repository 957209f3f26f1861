//! Evaluation grids, solution surfaces, error metrics, CSV export.
//!
//! All numeric CSV output uses 17 significant digits so that every 64-bit
//! value round-trips exactly.

use crate::autodiff::ParamVector;
use crate::hjb::{residual_scalar, HJBProblem};
use crate::networks::ValueNet;
use crate::oracle::AnalyticSolution;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// 17-significant-digit decimal; parses back to the identical bits.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Cartesian grid over a box, row-major (last axis fastest).
pub fn grid_points(box_: &[(f64, f64)], counts: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(box_.len(), counts.len());
    let axes: Vec<Vec<f64>> = box_
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &n)| linspace(lo, hi, n))
        .collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect());
        for d in (0..counts.len()).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct SurfaceRecord {
    pub input: Vec<f64>,
    pub v_nn: f64,
    pub v_true: Option<f64>,
    pub residual: f64,
}

/// Error summary of an evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub max_abs_err: Option<f64>,
    pub rel_linf_err: Option<f64>,
    pub max_abs_residual: f64,
    pub convexity_violations: Option<usize>,
}

/// Evaluate the network over a grid on `eval_box` (usually the problem's
/// input box, possibly a sub-box), with residuals and (when an oracle is
/// available) pointwise truth values and L-infinity errors.
pub fn evaluate_surface<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    eval_box: &[(f64, f64)],
    counts: &[usize],
    truth: Option<&AnalyticSolution>,
) -> Result<(Vec<SurfaceRecord>, Metrics)> {
    if eval_box.len() != problem.input_dim() || counts.len() != problem.input_dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: problem.input_dim(),
            got: if eval_box.len() != problem.input_dim() {
                eval_box.len()
            } else {
                counts.len()
            },
        });
    }
    let points = grid_points(eval_box, counts);
    let mut records = Vec::with_capacity(points.len());
    let mut max_abs_err: Option<f64> = None;
    let mut max_truth = 0.0f64;
    let mut max_res = 0.0f64;
    for pt in points {
        let (v, grad) = crate::autodiff::eval_grad(net, params, &pt)?;
        let res = residual_scalar(problem, &pt, &grad);
        max_res = max_res.max(res.abs());
        let v_true = truth.map(|s| s.eval(&pt));
        if let Some(vt) = v_true {
            let err = (v - vt).abs();
            max_abs_err = Some(max_abs_err.map_or(err, |m: f64| m.max(err)));
            max_truth = max_truth.max(vt.abs());
        }
        records.push(SurfaceRecord {
            input: pt,
            v_nn: v,
            v_true,
            residual: res,
        });
    }
    let rel = max_abs_err.map(|e| if max_truth > 0.0 { e / max_truth } else { e });
    Ok((
        records,
        Metrics {
            max_abs_err,
            rel_linf_err: rel,
            max_abs_residual: max_res,
            convexity_violations: None,
        },
    ))
}

/// Surface CSV: input coordinates, prediction, truth (column present only
/// when an oracle exists), residual.
pub fn write_surface_csv(
    path: &Path,
    problem: &HJBProblem,
    records: &[SurfaceRecord],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<String> = Vec::new();
    if problem.horizon().is_finite() {
        header.push("t".into());
    }
    for i in 1..=problem.state_dim() {
        header.push(format!("x{i}"));
    }
    header.push("v_nn".into());
    let with_truth = records.first().is_some_and(|r| r.v_true.is_some());
    if with_truth {
        header.push("v_true".into());
    }
    header.push("residual".into());
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        let mut cols: Vec<String> = r.input.iter().map(|&v| fmt_g17(v)).collect();
        cols.push(fmt_g17(r.v_nn));
        if with_truth {
            cols.push(fmt_g17(r.v_true.unwrap_or(f64::NAN)));
        }
        cols.push(fmt_g17(r.residual));
        writeln!(w, "{}", cols.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV of a closed-form solution sampled on a grid.
pub fn write_analytic_csv(
    path: &Path,
    problem: &HJBProblem,
    solution: &AnalyticSolution,
    counts: &[usize],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<String> = Vec::new();
    if problem.horizon().is_finite() {
        header.push("t".into());
    }
    for i in 1..=problem.state_dim() {
        header.push(format!("x{i}"));
    }
    header.push("v_true".into());
    writeln!(w, "{}", header.join(","))?;
    for pt in grid_points(&problem.input_box(), counts) {
        let mut cols: Vec<String> = pt.iter().map(|&v| fmt_g17(v)).collect();
        cols.push(fmt_g17(solution.eval(&pt)));
        writeln!(w, "{}", cols.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV of a finite-difference grid solution: `t,x,v_eps`.
pub fn write_grid_csv(path: &Path, grid: &crate::oracle::GridSolution) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "t,x,v_eps")?;
    for (ti, &t) in grid.t.iter().enumerate() {
        for (xi, &x) in grid.x.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                fmt_g17(t),
                fmt_g17(x),
                fmt_g17(grid.values[ti][xi])
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
