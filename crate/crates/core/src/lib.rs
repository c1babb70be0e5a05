//! Pure data model for the webnav agent: the Controller command grammar,
//! the Assistant's strict JSON action object, and the numbered label map
//! that grounds both in the page.
//!
//! Everything here is `no_std` + `alloc` and free of IO, so the same code
//! can back the agent runtime, test doubles, and tooling.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod action;
pub mod command;
pub mod contract;
pub mod label_map;

mod fence;

pub use action::{
    canonical_json, parse_action_json, to_action, validate_action, ActionRequest, SchemaError,
    SchemaReason, ValidatedAction, ValidationError,
};
pub use command::{
    extract_command, parse_command, render_command, ControllerCommand, Direction, Expected,
    ExtractError, ParseError,
};
pub use contract::{enumerate_contract, EnumerationContract};
pub use label_map::{
    diff_maps, lookup, parse_label_map, LabelMap, LabelNumber, LabeledElement, MapDiff, MapError,
    Rect,
};
