use thiserror::Error;

use super::{validate_case, Finding, NetworkCase};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("integrity error: {}", .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Integrity(Vec<Finding>),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Parses a case document in the native schema and checks referential
/// integrity. Parameter-level findings (zero reactance and the like) are
/// left to [`validate_case`].
pub fn parse_case_json(text: &str) -> Result<NetworkCase, CaseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut case: NetworkCase =
        serde_path_to_error::deserialize(de).map_err(|e| CaseError::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
    check_integrity(&case)?;
    case.normalize_substation_members();
    Ok(case)
}

pub(crate) fn check_integrity(case: &NetworkCase) -> Result<(), CaseError> {
    let broken: Vec<Finding> = validate_case(case).into_iter().filter(|f| f.kind.is_integrity()).collect();
    if broken.is_empty() {
        Ok(())
    } else {
        Err(CaseError::Integrity(broken))
    }
}

pub fn serialize_case_json(case: &NetworkCase) -> String {
    serde_json::to_string_pretty(case).expect("case serialization is infallible")
}
