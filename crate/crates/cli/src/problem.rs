//! Problem files: a `kind` tag, a payload per kind, grid density and tolerances.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use limcom::canonical::GeneralMechanism;
use limcom::durable_good::DurableGood;
use limcom::model::{Belief, Outcome, ScreeningModel};

use crate::error::CliError;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_DENSITY: usize = 50;
pub const TOL_ENV: &str = "LIMCOM_TOL";

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Feasibility and tie tolerance handed to the solvers.
    pub solver: Option<f64>,
    /// Agreement required when re-checking reported margins.
    pub verify: Option<f64>,
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    grid_density: Option<usize>,
    #[serde(default)]
    tolerances: Tolerances,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelOnly<M> {
    model: M,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningPayload {
    pub model: ScreeningModel<f64>,
    /// Beliefs to concavify over; the default grid and arrangement vertices
    /// are used when absent.
    #[serde(default)]
    pub candidates: Option<Vec<Belief<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuPayload {
    pub model: ScreeningModel<f64>,
    /// `device[i][h]`: probability that type `i` reaches posterior `h`.
    pub device: Vec<Vec<f64>>,
    pub outcomes: Vec<Outcome>,
    #[serde(default)]
    pub transfers: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub enum Problem {
    DurableGood(DurableGood<f64>),
    Screening(ScreeningPayload),
    Mechanism(GeneralMechanism<f64>),
    Menu(MenuPayload),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::DurableGood(_) => "durable_good",
            Problem::Screening(_) => "screening",
            Problem::Mechanism(_) => "mechanism",
            Problem::Menu(_) => "menu",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemFile {
    pub problem: Problem,
    pub grid_density: usize,
    pub tol: f64,
    pub verify_tol: f64,
}

/// Tolerance from the environment, falling back to the built-in default.
pub fn env_tol() -> Result<f64, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
            _ => Err(CliError::validation(format!("{TOL_ENV}={s:?} is not a positive number"), None)),
        },
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn pointer(path: &serde_path_to_error::Path, prefix: &str, msg: &str) -> String {
    use serde_path_to_error::Segment;
    let mut p = prefix.to_string();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => p.push_str(&format!("/{index}")),
            Segment::Map { key } => p.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => p.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    // serde stops at the parent object for a missing field
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            p.push('/');
            p.push_str(field);
        }
    }
    p
}

pub fn from_value<D: DeserializeOwned>(v: Value, prefix: &str) -> Result<D, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let msg = e.inner().to_string();
        let ptr = pointer(e.path(), prefix, &msg);
        CliError::validation(msg, Some(ptr))
    })
}

fn payload<M: DeserializeOwned>(obj: Map<String, Value>) -> Result<M, CliError> {
    let m: ModelOnly<M> = from_value(Value::Object(obj), "")?;
    Ok(m.model)
}

pub fn parse(text: &str) -> Result<ProblemFile, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        CliError::validation(format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()), Some(String::new()))
    })?;
    let Value::Object(mut obj) = root else {
        return Err(CliError::validation("problem file must be a JSON object", Some(String::new())));
    };
    let header: Header = from_value(Value::Object(obj.clone()), "")?;
    for key in ["kind", "grid_density", "tolerances"] {
        obj.remove(key);
    }
    let problem = match header.kind.as_str() {
        "durable_good" => Problem::DurableGood(payload(obj)?),
        "screening" => Problem::Screening(from_value(Value::Object(obj), "")?),
        "mechanism" => Problem::Mechanism(payload(obj)?),
        "menu" => Problem::Menu(from_value(Value::Object(obj), "")?),
        other => {
            return Err(CliError::validation(
                format!("unknown kind {other:?}; expected durable_good, screening, mechanism or menu"),
                Some("/kind".into()),
            ))
        }
    };
    let density = header.grid_density.unwrap_or(DEFAULT_DENSITY);
    if density < 2 {
        return Err(CliError::validation("grid_density must be at least 2", Some("/grid_density".into())));
    }
    let tol = match header.tolerances.solver {
        Some(t) => t,
        None => env_tol()?,
    };
    if let Problem::Screening(s) = &problem {
        check_candidates(s, tol)?;
    }
    let verify_tol = header.tolerances.verify.unwrap_or(1e-9);
    for (name, t) in [("solver", tol), ("verify", verify_tol)] {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::validation("tolerance must be positive", Some(format!("/tolerances/{name}"))));
        }
    }
    Ok(ProblemFile { problem, grid_density: density, tol, verify_tol })
}

fn check_candidates(s: &ScreeningPayload, tol: f64) -> Result<(), CliError> {
    let n = s.model.num_types();
    for (k, b) in s.candidates.iter().flatten().enumerate() {
        let ptr = Some(format!("/candidates/{k}"));
        if b.dim() != n {
            return Err(CliError::validation(format!("candidate has {} entries, expected {n}", b.dim()), ptr));
        }
        Belief::new(b.probs().to_vec(), tol).map_err(|e| CliError::validation(e.to_string(), ptr))?;
    }
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display()), None))?;
    parse(&text)
}
