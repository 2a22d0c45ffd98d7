//! Operator control actions and the overlay mutation each one performs.

use serde::{Deserialize, Serialize};

use super::state::SimulationState;
use crate::grid::{CaseIndex, ElementRef, NetworkCase};

/// The interactive control actions an operator can issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommandKind {
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
    SetTransformerTap,
    SetTransformerTapAuto,
    SwitchShuntOn,
    SwitchShuntOff,
    SetShuntMvar,
    ShedLoadPercent,
    RestoreLoadPercent,
    OpenLoadBreaker,
    CloseLoadBreaker,
    SetAreaInterchangeSchedule,
    ToggleAreaAGC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetClass {
    Generator,
    Branch,
    Transformer,
    Shunt,
    Load,
    Area,
}

/// Generator voltage setpoints accepted from operators, pu.
pub const VOLTAGE_SETPOINT_RANGE: [f64; 2] = [0.9, 1.1];

impl CommandKind {
    pub const ALL: [CommandKind; 21] = [
        CommandKind::SetGenMW,
        CommandKind::SetGenVoltageSetpoint,
        CommandKind::SetGenMvar,
        CommandKind::CommitGen,
        CommandKind::DecommitGen,
        CommandKind::OpenGenBreaker,
        CommandKind::CloseGenBreaker,
        CommandKind::OpenBranch,
        CommandKind::CloseBranch,
        CommandKind::OpenBranchTimed,
        CommandKind::SetTransformerTap,
        CommandKind::SetTransformerTapAuto,
        CommandKind::SwitchShuntOn,
        CommandKind::SwitchShuntOff,
        CommandKind::SetShuntMvar,
        CommandKind::ShedLoadPercent,
        CommandKind::RestoreLoadPercent,
        CommandKind::OpenLoadBreaker,
        CommandKind::CloseLoadBreaker,
        CommandKind::SetAreaInterchangeSchedule,
        CommandKind::ToggleAreaAGC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::SetGenMW => "SetGenMW",
            CommandKind::SetGenVoltageSetpoint => "SetGenVoltageSetpoint",
            CommandKind::SetGenMvar => "SetGenMvar",
            CommandKind::CommitGen => "CommitGen",
            CommandKind::DecommitGen => "DecommitGen",
            CommandKind::OpenGenBreaker => "OpenGenBreaker",
            CommandKind::CloseGenBreaker => "CloseGenBreaker",
            CommandKind::OpenBranch => "OpenBranch",
            CommandKind::CloseBranch => "CloseBranch",
            CommandKind::OpenBranchTimed => "OpenBranchTimed",
            CommandKind::SetTransformerTap => "SetTransformerTap",
            CommandKind::SetTransformerTapAuto => "SetTransformerTapAuto",
            CommandKind::SwitchShuntOn => "SwitchShuntOn",
            CommandKind::SwitchShuntOff => "SwitchShuntOff",
            CommandKind::SetShuntMvar => "SetShuntMvar",
            CommandKind::ShedLoadPercent => "ShedLoadPercent",
            CommandKind::RestoreLoadPercent => "RestoreLoadPercent",
            CommandKind::OpenLoadBreaker => "OpenLoadBreaker",
            CommandKind::CloseLoadBreaker => "CloseLoadBreaker",
            CommandKind::SetAreaInterchangeSchedule => "SetAreaInterchangeSchedule",
            CommandKind::ToggleAreaAGC => "ToggleAreaAGC",
        }
    }

    pub fn from_name(name: &str) -> Option<CommandKind> {
        CommandKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn target_class(self) -> TargetClass {
        use CommandKind::*;
        match self {
            SetGenMW | SetGenVoltageSetpoint | SetGenMvar | CommitGen | DecommitGen | OpenGenBreaker | CloseGenBreaker => TargetClass::Generator,
            OpenBranch | CloseBranch | OpenBranchTimed => TargetClass::Branch,
            SetTransformerTap | SetTransformerTapAuto => TargetClass::Transformer,
            SwitchShuntOn | SwitchShuntOff | SetShuntMvar => TargetClass::Shunt,
            ShedLoadPercent | RestoreLoadPercent | OpenLoadBreaker | CloseLoadBreaker => TargetClass::Load,
            SetAreaInterchangeSchedule | ToggleAreaAGC => TargetClass::Area,
        }
    }

    pub fn target_ref(self, id: u32) -> ElementRef {
        match self.target_class() {
            TargetClass::Generator => ElementRef::Generator(id),
            TargetClass::Branch | TargetClass::Transformer => ElementRef::Branch(id),
            TargetClass::Shunt => ElementRef::Shunt(id),
            TargetClass::Load => ElementRef::Load(id),
            TargetClass::Area => ElementRef::Area(id),
        }
    }

    /// Whether the kind carries a numeric or flag value.
    pub fn takes_value(self) -> bool {
        use CommandKind::*;
        matches!(
            self,
            SetGenMW
                | SetGenVoltageSetpoint
                | SetGenMvar
                | SetTransformerTap
                | SetTransformerTapAuto
                | SetShuntMvar
                | ShedLoadPercent
                | RestoreLoadPercent
                | SetAreaInterchangeSchedule
                | ToggleAreaAGC
        )
    }

    /// The action that undoes this one when it is issued with a duration.
    /// Only switching actions are reversible this way.
    pub fn inverse(self) -> Option<CommandKind> {
        use CommandKind::*;
        Some(match self {
            OpenBranch | OpenBranchTimed => CloseBranch,
            CloseBranch => OpenBranch,
            OpenGenBreaker => CloseGenBreaker,
            CloseGenBreaker => OpenGenBreaker,
            CommitGen => DecommitGen,
            DecommitGen => CommitGen,
            SwitchShuntOn => SwitchShuntOff,
            SwitchShuntOff => SwitchShuntOn,
            OpenLoadBreaker => CloseLoadBreaker,
            CloseLoadBreaker => OpenLoadBreaker,
            _ => return None,
        })
    }

    /// Kinds that are meaningless without a duration.
    pub fn requires_duration(self) -> bool {
        self == CommandKind::OpenBranchTimed
    }
}

impl std::fmt::Display for CommandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One engine-level action: what to change and when. `seq` breaks ties
/// between actions due at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub seq: u64,
    pub activate_at: f64,
    pub kind: CommandKind,
    pub target: u32,
    #[serde(default)]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("{0} does not exist")]
    UnknownTarget(ElementRef),
    #[error("branch {0} is not a transformer")]
    NotTransformer(u32),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("value must be finite")]
    NotFinite,
    #[error("{0} requires a duration")]
    MissingDuration(CommandKind),
    #[error("{0} cannot be issued with a duration")]
    DurationUnsupported(CommandKind),
    #[error("duration must be positive")]
    BadDuration,
}

fn within(value: f64, lo: f64, hi: f64) -> Result<(), BoundsError> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(BoundsError::OutOfRange { value, lo, hi })
    }
}

/// Checks that the target exists and the value is inside kind-specific
/// bounds taken from the case.
pub fn check_bounds(case: &NetworkCase, index: &CaseIndex, kind: CommandKind, target: u32, value: f64, duration: Option<f64>) -> Result<(), BoundsError> {
    let element = kind.target_ref(target);
    if !index.contains(element) {
        return Err(BoundsError::UnknownTarget(element));
    }
    if !value.is_finite() {
        return Err(BoundsError::NotFinite);
    }
    match duration {
        None if kind.requires_duration() => return Err(BoundsError::MissingDuration(kind)),
        Some(d) if !(d > 0.0 && d.is_finite()) => return Err(BoundsError::BadDuration),
        Some(_) if kind.inverse().is_none() => return Err(BoundsError::DurationUnsupported(kind)),
        _ => {}
    }
    use CommandKind::*;
    match kind {
        SetGenMW => {
            let g = &case.generators[index.generator[&target]];
            within(value, g.p_min(), g.p_max())
        }
        SetGenVoltageSetpoint => within(value, VOLTAGE_SETPOINT_RANGE[0], VOLTAGE_SETPOINT_RANGE[1]),
        SetGenMvar => {
            let g = &case.generators[index.generator[&target]];
            within(value, g.q_min(), g.q_max())
        }
        SetTransformerTap | SetTransformerTapAuto => {
            let br = &case.branches[index.branch[&target]];
            if !br.is_transformer {
                return Err(BoundsError::NotTransformer(target));
            }
            if kind == SetTransformerTap {
                within(value, br.tap_limits[0], br.tap_limits[1])
            } else {
                within(value, 0.0, 1.0)
            }
        }
        SetShuntMvar => {
            let q = case.shunts[index.shunt[&target]].q_nominal;
            within(value, q.min(0.0), q.max(0.0))
        }
        ShedLoadPercent | RestoreLoadPercent => within(value, 0.0, 100.0),
        ToggleAreaAGC => within(value, 0.0, 1.0),
        _ => Ok(()),
    }
}

/// Applies one action to the overlays. Bounds are assumed checked; unknown
/// targets are ignored.
pub fn apply_action(case: &NetworkCase, index: &CaseIndex, state: &mut SimulationState, action: &ControlAction) {
    use CommandKind::*;
    let v = action.value;
    let id = action.target;
    match action.kind.target_class() {
        TargetClass::Generator => {
            let Some(&g) = index.generator.get(&id) else { return };
            let spec = &case.generators[g];
            let ov = &mut state.gens[g];
            match action.kind {
                SetGenMW => ov.p_target = v.clamp(spec.p_min(), spec.p_max()),
                SetGenVoltageSetpoint => {
                    ov.v_setpoint = v;
                    ov.q_fixed = None;
                }
                SetGenMvar => ov.q_fixed = Some(v.clamp(spec.q_min(), spec.q_max())),
                CommitGen => {
                    if !ov.online {
                        ov.online = true;
                        ov.p_set = spec.p_min();
                        ov.p_target = spec.p_min();
                    }
                }
                DecommitGen => {
                    ov.online = false;
                    ov.p_set = 0.0;
                    ov.p_target = 0.0;
                }
                OpenGenBreaker => ov.online = false,
                CloseGenBreaker => {
                    ov.online = true;
                    ov.p_set = ov.p_set.clamp(spec.p_min(), spec.p_max());
                    ov.p_target = ov.p_target.clamp(spec.p_min(), spec.p_max());
                }
                _ => unreachable!(),
            }
        }
        TargetClass::Branch | TargetClass::Transformer => {
            let Some(&b) = index.branch.get(&id) else { return };
            let spec = &case.branches[b];
            let ov = &mut state.branches[b];
            match action.kind {
                OpenBranch | OpenBranchTimed => ov.closed = false,
                CloseBranch => ov.closed = true,
                SetTransformerTap => {
                    ov.tap = v.clamp(spec.tap_limits[0], spec.tap_limits[1]);
                    ov.tap_auto = false;
                }
                SetTransformerTapAuto => ov.tap_auto = v != 0.0,
                _ => unreachable!(),
            }
        }
        TargetClass::Shunt => {
            let Some(&s) = index.shunt.get(&id) else { return };
            let ov = &mut state.shunts[s];
            match action.kind {
                SwitchShuntOn => ov.on = true,
                SwitchShuntOff => ov.on = false,
                SetShuntMvar => ov.q_mvar = v,
                _ => unreachable!(),
            }
        }
        TargetClass::Load => {
            let Some(&l) = index.load.get(&id) else { return };
            let ov = &mut state.loads[l];
            match action.kind {
                ShedLoadPercent => ov.served_fraction = (ov.served_fraction - v / 100.0).max(0.0),
                RestoreLoadPercent => ov.served_fraction = (ov.served_fraction + v / 100.0).min(1.0),
                OpenLoadBreaker => ov.closed = false,
                CloseLoadBreaker => ov.closed = true,
                _ => unreachable!(),
            }
        }
        TargetClass::Area => {
            let Some(&a) = index.area.get(&id) else { return };
            let ov = &mut state.areas[a];
            match action.kind {
                SetAreaInterchangeSchedule => ov.scheduled_export = v,
                ToggleAreaAGC => ov.agc_on = v != 0.0,
                _ => unreachable!(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::synthetic::two_bus_case;

    #[test]
    fn there_are_twenty_one_distinct_kinds() {
        let mut names: Vec<_> = CommandKind::ALL.iter().map(|k| k.name()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 21);
        for k in CommandKind::ALL {
            assert_eq!(CommandKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn bounds_follow_case_limits() {
        let case = two_bus_case();
        let idx = case.index();
        assert!(check_bounds(&case, &idx, CommandKind::SetGenMW, 1, 150.0, None).is_ok());
        assert!(matches!(check_bounds(&case, &idx, CommandKind::SetGenMW, 1, 250.0, None), Err(BoundsError::OutOfRange { .. })));
        assert_eq!(check_bounds(&case, &idx, CommandKind::SetGenMW, 9, 1.0, None), Err(BoundsError::UnknownTarget(ElementRef::Generator(9))));
        assert_eq!(check_bounds(&case, &idx, CommandKind::SetTransformerTap, 1, 1.0, None), Err(BoundsError::NotTransformer(1)));
        assert_eq!(check_bounds(&case, &idx, CommandKind::OpenBranchTimed, 1, 0.0, None), Err(BoundsError::MissingDuration(CommandKind::OpenBranchTimed)));
        assert_eq!(check_bounds(&case, &idx, CommandKind::SetGenMW, 1, 10.0, Some(5.0)), Err(BoundsError::DurationUnsupported(CommandKind::SetGenMW)));
        assert!(check_bounds(&case, &idx, CommandKind::ShedLoadPercent, 1, 25.0, None).is_ok());
        assert!(check_bounds(&case, &idx, CommandKind::ShedLoadPercent, 1, 125.0, None).is_err());
    }

    #[test]
    fn shed_and_restore_stay_in_unit_interval() {
        let case = two_bus_case();
        let idx = case.index();
        let mut st = SimulationState::from_case(&case, 0.0);
        let act = |kind, value| ControlAction { seq: 0, activate_at: 0.0, kind, target: 1, value };
        apply_action(&case, &idx, &mut st, &act(CommandKind::ShedLoadPercent, 70.0));
        apply_action(&case, &idx, &mut st, &act(CommandKind::ShedLoadPercent, 70.0));
        assert_eq!(st.loads[0].served_fraction, 0.0);
        apply_action(&case, &idx, &mut st, &act(CommandKind::RestoreLoadPercent, 40.0));
        apply_action(&case, &idx, &mut st, &act(CommandKind::RestoreLoadPercent, 80.0));
        assert_eq!(st.loads[0].served_fraction, 1.0);
    }
}
