use std::collections::{BTreeMap, BTreeSet};

use gridops_core::powerflow::CommandKind;
use serde::{Deserialize, Serialize};

use crate::bus::{Filter, TopicError};

/// What a role may do. Anything not granted is denied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Role {
    pub name: String,
    #[serde(default)]
    pub commands: BTreeSet<CommandKind>,
    /// Topic filters the role may receive.
    #[serde(default)]
    pub data: Vec<String>,
    /// May stop the session.
    #[serde(default)]
    pub session_control: bool,
}

impl Role {
    pub fn grants(&self, kind: CommandKind) -> bool {
        self.commands.contains(&kind)
    }

    pub fn data_filters(&self) -> Result<Vec<Filter>, TopicError> {
        self.data.iter().map(|f| Filter::parse(f)).collect()
    }
}

fn operator_data() -> Vec<String> {
    vec!["data/#".into(), "notif/#".into()]
}

pub fn builtin_roles() -> Vec<Role> {
    use CommandKind::*;
    vec![
        Role { name: "overview".into(), commands: [SetAreaInterchangeSchedule, ToggleAreaAGC].into(), data: operator_data(), session_control: false },
        Role {
            name: "generation".into(),
            commands: [
                SetGenMW,
                SetGenVoltageSetpoint,
                SetGenMvar,
                CommitGen,
                DecommitGen,
                OpenGenBreaker,
                CloseGenBreaker,
                OpenBranch,
                CloseBranch,
                OpenBranchTimed,
            ]
            .into(),
            data: operator_data(),
            session_control: false,
        },
        Role {
            name: "voltage_support".into(),
            commands: [SwitchShuntOn, SwitchShuntOff, SetShuntMvar, SetTransformerTap, SetTransformerTapAuto, OpenLoadBreaker, CloseLoadBreaker].into(),
            data: operator_data(),
            session_control: false,
        },
        Role { name: "instructor".into(), commands: CommandKind::ALL.into(), data: vec!["#".into()], session_control: true },
    ]
}

/// Role definitions in effect for one scenario: the built-ins, with any
/// scenario role of the same name replacing its built-in.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleTable {
    roles: BTreeMap<String, Role>,
}

impl RoleTable {
    pub fn new(overrides: &[Role]) -> Result<RoleTable, TopicError> {
        let mut roles: BTreeMap<String, Role> = builtin_roles().into_iter().map(|r| (r.name.clone(), r)).collect();
        for r in overrides {
            r.data_filters()?;
            roles.insert(r.name.clone(), r.clone());
        }
        Ok(RoleTable { roles })
    }

    pub fn get(&self, name: &str) -> Option<&Role> {
        self.roles.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.roles.keys().map(String::as_str)
    }
}
