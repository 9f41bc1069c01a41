//! Plot data: the period-one objective, its two branches and its concave
//! envelope along one-dimensional slices of the simplex.

use std::path::{Path, PathBuf};

use serde::Serialize;

use limcom::concavify::{cav, CandidateSet};
use limcom::durable_good::{adjusted_revenue, period_one_pointwise, sell_now_value, solve_durable_good};
use limcom::model::{Belief, ScreeningModel};
use limcom::screening::{default_candidates, pointwise_virtual_value};

use crate::commands::{durable_err, solve_program, Mode};
use crate::error::CliError;
use crate::output::format_f64;
use crate::problem::{Problem, ProblemFile};

const SAME_POINT: f64 = 1e-12;
const SLICES: usize = 10;

pub const HEADER: [&str; 6] = ["mu", "sell_now_value", "adjusted_r2", "pointwise_max", "concavified_value", "is_support_atom"];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub mu: f64,
    pub sell_now: f64,
    pub adjusted: f64,
    pub pointwise: f64,
    pub concavified: f64,
    pub atom: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlotFile {
    pub path: PathBuf,
    /// Fixed probability of the third type, for three-type slices.
    pub third: Option<f64>,
    pub rows: usize,
}

/// Grid of `n` points on `[0, hi]` merged with `extra`, sorted and deduplicated.
fn sample(n: usize, hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|k| hi * k as f64 / (n - 1) as f64).collect();
    xs.extend(extra.iter().copied().filter(|x| (0.0..=hi + SAME_POINT).contains(x)));
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup_by(|a, b| (*a - *b).abs() <= SAME_POINT);
    xs
}

fn envelope(set: &CandidateSet<f64>, target: &[f64]) -> Result<f64, CliError> {
    cav(set, target)
        .map(|c| c.value)
        .map_err(|e| CliError::infeasible(e.to_string(), serde_json::json!({ "target": target })))
}

fn durable_rows(pf: &ProblemFile) -> Result<Vec<Vec<Row>>, CliError> {
    let Problem::DurableGood(g) = &pf.problem else { unreachable!() };
    let sol = solve_durable_good(g).map_err(durable_err)?;
    let atoms: Vec<f64> = sol.atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.posterior).collect();
    let mut extra = atoms.clone();
    extra.extend([sol.mu_bar, g.prior_high]);
    let mus = sample(pf.grid_density, 1.0, &extra);
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in &mus {
        rows.push(Row {
            mu,
            sell_now: sell_now_value(g, &mu).map_err(durable_err)?,
            adjusted: adjusted_revenue(g, &mu).map_err(durable_err)?,
            pointwise: period_one_pointwise(g, &mu).map_err(durable_err)?,
            concavified: 0.0,
            atom: atoms.iter().any(|a| (a - mu).abs() <= SAME_POINT),
        });
    }
    let set = CandidateSet::new(
        mus.iter().map(|&m| Belief::from_vec_unchecked(vec![1.0 - m, m])).collect(),
        rows.iter().map(|r| r.pointwise).collect(),
    );
    for r in &mut rows {
        r.concavified = envelope(&set, &[1.0 - r.mu, r.mu])?;
    }
    Ok(vec![rows])
}

fn screening_point(m: &ScreeningModel<f64>, b: &Belief<f64>) -> (f64, f64, f64) {
    let pv = pointwise_virtual_value(m, b);
    let wait = m.outside.q;
    let adjusted = pv.by_allocation[wait];
    let sell_now = pv
        .by_allocation
        .iter()
        .enumerate()
        .filter(|(q, _)| *q != wait)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let sell_now = if sell_now.is_finite() { sell_now } else { pv.value };
    (sell_now, adjusted, pv.value)
}

/// One slice per fixed value of the last coordinate (a single slice for two
/// types). `mu` is the probability of the second type.
fn screening_rows(pf: &ProblemFile) -> Result<(Vec<Vec<Row>>, Vec<Option<f64>>), CliError> {
    let Problem::Screening(p) = &pf.problem else { unreachable!() };
    let m = &p.model;
    let n = m.num_types();
    if !(2..=3).contains(&n) {
        return Err(CliError::validation("plot data needs two or three types", Some("/model/types".into())));
    }
    let sol = solve_program(p, Mode::Relaxed, pf.grid_density, pf.tol)?;
    let atoms: Vec<Belief<f64>> = sol.atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.belief.clone()).collect();
    let cands = default_candidates(m, pf.grid_density.min(20));
    let belief = |mu: f64, third: f64| {
        let mut p = vec![(1.0 - mu - third).max(0.0), mu];
        if n == 3 {
            p.push(third);
        }
        Belief::from_vec_unchecked(p)
    };
    let thirds: Vec<f64> = if n == 2 {
        vec![0.0]
    } else {
        let extra: Vec<f64> = atoms.iter().map(|a| *a.get(2)).collect();
        sample(SLICES + 1, 1.0, &extra).into_iter().filter(|t| *t < 1.0 - SAME_POINT).collect()
    };
    let mut slices = Vec::new();
    for &third in &thirds {
        let on_slice = |b: &Belief<f64>| n == 2 || (b.get(2) - third).abs() <= SAME_POINT;
        let extra: Vec<f64> = atoms.iter().chain(&cands).filter(|b| on_slice(b)).map(|b| *b.get(1)).collect();
        let rows: Vec<Row> = sample(pf.grid_density, 1.0 - third, &extra)
            .into_iter()
            .map(|mu| {
                let b = belief(mu, third);
                let (sell_now, adjusted, pointwise) = screening_point(m, &b);
                let atom = atoms.iter().any(|a| a.approx_eq(&b, SAME_POINT));
                Row { mu, sell_now, adjusted, pointwise, concavified: 0.0, atom }
            })
            .collect();
        slices.push(rows);
    }
    let mut beliefs = cands;
    for (rows, &third) in slices.iter().zip(&thirds) {
        beliefs.extend(rows.iter().map(|r| belief(r.mu, third)));
    }
    let set = CandidateSet::from_fn(beliefs, |b| pointwise_virtual_value(m, b).value);
    for (rows, &third) in slices.iter_mut().zip(&thirds) {
        for r in rows.iter_mut() {
            r.concavified = envelope(&set, belief(r.mu, third).probs())?;
        }
    }
    let labels = if n == 2 { vec![None] } else { thirds.into_iter().map(Some).collect() };
    Ok((slices, labels))
}

pub fn rows(pf: &ProblemFile) -> Result<(Vec<Vec<Row>>, Vec<Option<f64>>), CliError> {
    match &pf.problem {
        Problem::DurableGood(_) => Ok((durable_rows(pf)?, vec![None])),
        Problem::Screening(_) => screening_rows(pf),
        _ => Err(CliError::validation(
            format!("plot data needs a durable_good or screening problem, found {}", pf.problem.kind()),
            Some("/kind".into()),
        )),
    }
}

fn slice_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_slice{k}.{ext}"))
}

fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::validation(format!("cannot write {}: {e}", path.display()), None);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            format_f64(r.mu),
            format_f64(r.sell_now),
            format_f64(r.adjusted),
            format_f64(r.pointwise),
            format_f64(r.concavified),
            r.atom.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display()), None))
}

pub fn plot_data(pf: &ProblemFile, out: &Path) -> Result<Vec<PlotFile>, CliError> {
    let (slices, labels) = rows(pf)?;
    let mut files = Vec::new();
    for (k, (rows, third)) in slices.iter().zip(labels).enumerate() {
        let path = if third.is_some() { slice_path(out, k) } else { out.to_path_buf() };
        write_csv(&path, rows)?;
        files.push(PlotFile { path, third, rows: rows.len() });
    }
    Ok(files)
}
