use serde::Serialize;
use serde_json::{json, Value};

use limcom::canonical::{
    canonicalize_mechanism, fold_participation, merge_equivalent_outputs, replicate_bester_strausz, summarize_canonical,
    summarize_general, summary_mismatch, CanonicalError, GeneralMechanism,
};
use limcom::concavify::ConcavifyError;
use limcom::contracts::{analyze_menu, check_dic_t, dic_p_violations, ContractError, MenuInstance, CONTRACT_TOL};
use limcom::durable_good::{solve_durable_good, DurableError};
use limcom::model::ScreeningModel;
use limcom::screening::{
    check_monotonicity, default_candidates, recover_transfers, solve_full_adjacent, solve_relaxed,
    solve_with_monotonicity, verify_full, FullOptions, ScreeningError, ScreeningSolution, TransferRecovery,
};

use crate::error::CliError;
use crate::problem::{self, MenuPayload, Problem, ProblemFile, ScreeningPayload};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Relaxed,
    Monotone,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    ThreeType,
    BesterStrausz,
}

pub const THREE_TYPE: &str = include_str!("../presets/three_type.json");

pub fn to_json<S: Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("serializable result")
}

fn wrong_kind(expected: &str, pf: &ProblemFile) -> CliError {
    CliError::validation(
        format!("expected a {expected} problem, found {}", pf.problem.kind()),
        Some("/kind".into()),
    )
}

fn model_error(msg: String) -> CliError {
    CliError::validation(msg, Some("/model".into()))
}

pub fn durable_err(e: DurableError) -> CliError {
    model_error(e.to_string())
}

pub fn screening_err(e: ScreeningError, program: &str) -> CliError {
    match e {
        ScreeningError::Invalid(errors) => CliError::Validation {
            message: format!("invalid model: {}", errors.join("; ")),
            pointer: Some("/model".into()),
        },
        ScreeningError::NoTransfers | ScreeningError::MissingTransfers | ScreeningError::Model(_) => {
            model_error(e.to_string())
        }
        ScreeningError::Concavify(ConcavifyError::Empty | ConcavifyError::Dimension { .. }) => {
            CliError::validation(e.to_string(), Some("/grid_density".into()))
        }
        other => CliError::infeasible(other.to_string(), json!({ "program": program })),
    }
}

fn contract_err(e: ContractError) -> CliError {
    let pointer = match &e {
        ContractError::Dimension { .. } | ContractError::DuplicateBelief(..) | ContractError::OffPath(_) => "/device",
        ContractError::UnknownOutcome(_) | ContractError::RandomizedOutcome(_) => "/outcomes",
        ContractError::MissingTransfers => "/transfers",
        _ => "/model",
    };
    CliError::validation(e.to_string(), Some(pointer.into()))
}

fn canonical_err(e: CanonicalError) -> CliError {
    model_error(e.to_string())
}

fn check_model(m: &ScreeningModel<f64>, tol: f64) -> Result<(), CliError> {
    let r = m.validate(tol);
    if r.is_valid() {
        Ok(())
    } else {
        Err(model_error(format!("invalid model: {}", r.errors.join("; "))))
    }
}

pub fn solve_durable(pf: &ProblemFile) -> Result<Value, CliError> {
    let Problem::DurableGood(g) = &pf.problem else {
        return Err(wrong_kind("durable_good", pf));
    };
    let sol = solve_durable_good(g).map_err(durable_err)?;
    let mut v = to_json(&sol);
    v["value"] = json!(sol.revenue);
    Ok(v)
}

fn program_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Relaxed => "relaxed",
        Mode::Monotone => "monotone",
        Mode::Full => "full_adjacent",
    }
}

pub fn solve_program(
    p: &ScreeningPayload,
    mode: Mode,
    density: usize,
    tol: f64,
) -> Result<ScreeningSolution<f64>, CliError> {
    let m = &p.model;
    let cands = match &p.candidates {
        Some(c) => c.clone(),
        None => default_candidates(m, density),
    };
    let sol = match mode {
        Mode::Relaxed => solve_relaxed(m, &cands, tol),
        Mode::Monotone => solve_with_monotonicity(m, &cands, tol),
        Mode::Full => solve_full_adjacent(m, &cands, &FullOptions::default(), tol),
    };
    sol.map_err(|e| match screening_err(e, program_name(mode)) {
        CliError::Infeasible { message, mut diagnostic } => {
            diagnostic["prior"] = json!(m.prior);
            diagnostic["candidates"] = json!(cands.len());
            CliError::Infeasible { message, diagnostic }
        }
        other => other,
    })
}

/// Solution with transfers attached when they exist, the recovery report
/// for programs that do not produce transfers, and the constraint margins.
pub fn screening_result(
    m: &ScreeningModel<f64>,
    sol: ScreeningSolution<f64>,
    tol: f64,
) -> Result<Value, CliError> {
    let (sol, recovery) = match sol.transfers() {
        Some(_) => (sol, None),
        None => {
            let r = recover_transfers(m, &sol).map_err(|e| screening_err(e, "transfers"))?;
            let sol = match &r {
                TransferRecovery::Recovered { transfers, .. } => sol.clone().with_transfers(transfers),
                TransferRecovery::Infeasible { .. } => sol,
            };
            (sol, Some(r))
        }
    };
    let margins = match sol.transfers() {
        Some(_) => Some(verify_full(m, &sol, tol).map_err(|e| screening_err(e, "verify"))?),
        None => None,
    };
    Ok(json!({
        "program": sol.program,
        "value": sol.value,
        "support_size": sol.atoms.len(),
        "transfers_feasible": sol.transfers().is_some(),
        "monotonicity_violations": check_monotonicity(m, &sol, tol),
        "solution": sol,
        "transfers": recovery,
        "margins": margins,
    }))
}

pub fn solve_screening(pf: &ProblemFile, mode: Mode) -> Result<Value, CliError> {
    let Problem::Screening(p) = &pf.problem else {
        return Err(wrong_kind("screening", pf));
    };
    let sol = solve_program(p, mode, pf.grid_density, pf.tol)?;
    screening_result(&p.model, sol, pf.tol)
}

fn menu_instance(p: &MenuPayload, tol: f64) -> Result<MenuInstance<f64>, CliError> {
    check_model(&p.model, tol)?;
    MenuInstance::new(p.model.clone(), p.device.clone(), p.outcomes.clone(), p.transfers.clone()).map_err(contract_err)
}

pub fn check_contracts(pf: &ProblemFile) -> Result<Value, CliError> {
    let Problem::Menu(p) = &pf.problem else {
        return Err(wrong_kind("menu", pf));
    };
    let inst = menu_instance(p, pf.tol)?;
    let report = analyze_menu(&inst).map_err(contract_err)?;
    let table: Option<Vec<Value>> = report.transfers.as_ref().map(|t| {
        (0..inst.len())
            .map(|h| json!({ "belief": inst.beliefs[h], "outcome": inst.outcomes[h], "transfer": t[h] }))
            .collect()
    });
    let mut v = to_json(&report);
    v["implementable"] = json!(table.is_some());
    v["table"] = json!(table);
    v["dropped"] = json!(inst.dropped);
    Ok(v)
}

pub fn canonicalize(pf: &ProblemFile) -> Result<Value, CliError> {
    let Problem::Mechanism(mech) = &pf.problem else {
        return Err(wrong_kind("mechanism", pf));
    };
    canonical_pipeline(mech, pf.tol)
}

pub fn canonical_pipeline(mech: &GeneralMechanism<f64>, tol: f64) -> Result<Value, CliError> {
    mech.validate(tol).map_err(canonical_err)?;
    let folded = fold_participation(mech);
    let merged = merge_equivalent_outputs(&folded, tol).map_err(canonical_err)?;
    let canon = canonicalize_mechanism(&merged, tol).map_err(canonical_err)?;
    let before = summarize_general(mech, tol);
    let after = summarize_canonical(&canon, tol);
    let mismatch = summary_mismatch(&before, &after, &mech.prior, tol.max(1e-9));
    let max_gain = canon.deviation_gains().iter().flatten().fold(0.0f64, |a, x| a.max(*x));
    Ok(json!({
        "input_deviation_gain": mech.max_deviation_gain(),
        "outputs": { "input": mech.num_outputs(), "folded": folded.num_outputs(), "merged": merged.num_outputs() },
        "canonical": canon,
        "truthful": canon.is_truthful(tol.max(1e-9)),
        "max_deviation_gain": max_gain,
        "consistency_residual": canon.consistency_residual(),
        "principal_payoff": after.principal,
        "type_payoffs": after.types,
        "summary": after,
        "preserved": mismatch.is_none(),
        "mismatch": mismatch,
    }))
}

pub fn replicate(example: Example) -> Result<Value, CliError> {
    match example {
        Example::ThreeType => {
            let pf = problem::parse(THREE_TYPE)?;
            let Problem::Screening(p) = &pf.problem else {
                return Err(wrong_kind("screening", &pf));
            };
            let sol = solve_program(p, Mode::Relaxed, pf.grid_density, pf.tol)?;
            // atoms are labeled by the two types in their support
            let pick = |lo: usize, hi: usize| {
                sol.atoms.iter().find(|a| {
                    let s = a.belief.support(1e-9);
                    s.first() == Some(&lo) && s.last() == Some(&hi)
                })
            };
            let high_given_hm = pick(1, 2).map(|a| *a.belief.get(2));
            let mid_given_ml = pick(0, 1).map(|a| *a.belief.get(1));
            let mut v = screening_result(&p.model, sol, pf.tol)?;
            v["example"] = json!("three-type");
            v["high_given_hm"] = json!(high_given_hm);
            v["mid_given_ml"] = json!(mid_given_ml);
            v["transfers_infeasible"] = json!(!v["transfers_feasible"].as_bool().unwrap_or(false));
            Ok(v)
        }
        Example::BesterStrausz => {
            let report = replicate_bester_strausz::<f64>().map_err(canonical_err)?;
            let mut v = to_json(&report);
            v["example"] = json!("bester-strausz");
            Ok(v)
        }
    }
}

#[derive(Default)]
struct Comparison {
    checked: usize,
    max_difference: f64,
}

fn compare(reported: &Value, recomputed: &Value, tol: f64, path: &str, c: &mut Comparison) -> Result<(), CliError> {
    let mismatch = |msg: String| CliError::validation(msg, Some(path.to_string()));
    match (reported, recomputed) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            let d = (a - b).abs();
            c.checked += 1;
            c.max_difference = c.max_difference.max(d);
            if d.is_nan() || d > tol {
                return Err(mismatch(format!("reported {a} but recomputed {b}")));
            }
            Ok(())
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Err(mismatch(format!("reported {} entries but recomputed {}", a.len(), b.len())));
            }
            for (k, (x, y)) in a.iter().zip(b).enumerate() {
                compare(x, y, tol, &format!("{path}/{k}"), c)?;
            }
            Ok(())
        }
        (Value::Object(a), Value::Object(b)) => {
            for (k, y) in b {
                let x = a.get(k).ok_or_else(|| mismatch(format!("missing field {k}")))?;
                compare(x, y, tol, &format!("{path}/{k}"), c)?;
            }
            Ok(())
        }
        (a, b) if a == b => Ok(()),
        (a, b) => Err(mismatch(format!("reported {a} but recomputed {b}"))),
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, CliError> {
    v.get(key)
        .ok_or_else(|| CliError::validation(format!("result has no {key} field"), Some(format!("/result/{key}"))))
}

/// Re-checks the constraint margins in a result against the problem it
/// came from, using only the mechanism stored in the result.
pub fn verify(pf: &ProblemFile, result_text: &str) -> Result<Value, CliError> {
    let doc: Value = serde_json::from_str(result_text)
        .map_err(|e| CliError::validation(format!("malformed result JSON: {e}"), Some(String::new())))?;
    let res = doc.get("result").unwrap_or(&doc);
    let mut c = Comparison::default();
    let tol = pf.verify_tol;
    match &pf.problem {
        Problem::Screening(p) => {
            let m = &p.model;
            let sol: ScreeningSolution<f64> = problem::from_value(field(res, "solution")?.clone(), "/result/solution")?;
            let margins = field(res, "margins")?;
            if !margins.is_null() {
                let fresh = verify_full(m, &sol, pf.tol).map_err(|e| screening_err(e, "verify"))?;
                compare(margins, &to_json(&fresh), tol, "/result/margins", &mut c)?;
            }
            let recovery = field(res, "transfers")?;
            if !recovery.is_null() {
                let fresh = recover_transfers(m, &sol).map_err(|e| screening_err(e, "transfers"))?;
                compare(recovery, &to_json(&fresh), tol, "/result/transfers", &mut c)?;
            }
            let mono = to_json(&check_monotonicity(m, &sol, pf.tol));
            compare(field(res, "monotonicity_violations")?, &mono, tol, "/result/monotonicity_violations", &mut c)?;
        }
        Problem::Menu(p) => {
            let inst = menu_instance(p, pf.tol)?;
            let t = field(res, "transfers")?;
            if !t.is_null() {
                let t: Vec<f64> = problem::from_value(t.clone(), "/result/transfers")?;
                if t.len() != inst.len() {
                    return Err(CliError::validation("transfer count differs from the menu", Some("/result/transfers".into())));
                }
                let dev = to_json(&dic_p_violations(&inst, &t, CONTRACT_TOL));
                compare(field(res, "dic_p_violations")?, &dev, tol, "/result/dic_p_violations", &mut c)?;
                if inst.transfers.is_some() {
                    let dic_t = to_json(&check_dic_t(&inst, &t).map_err(contract_err)?);
                    compare(field(res, "dic_t")?, &dic_t, tol, "/result/dic_t", &mut c)?;
                }
            }
        }
        Problem::Mechanism(_) | Problem::DurableGood(_) => {
            let fresh = match &pf.problem {
                Problem::Mechanism(_) => canonicalize(pf)?,
                _ => solve_durable(pf)?,
            };
            compare(res, &fresh, tol, "/result", &mut c)?;
        }
    }
    Ok(json!({ "verified": true, "checked": c.checked, "max_difference": c.max_difference }))
}
