//! Netlist handling and DC simulation for generated analog decks.
//!
//! The pipeline is [`parse_netlist`] → [`flatten`] → [`run_erc`] →
//! [`solve_op`] / [`dc_sweep`] → [`evaluate_spec`].

pub mod dcsim;
pub mod erc;
pub mod error;
pub mod flatten;
pub mod linalg;
pub mod mosfet;
pub mod netlist;
pub mod speccheck;
pub mod value;

pub use dcsim::{dc_sweep, solve_op, DCSolution, SolverOptions, Strategy, SweepPoint, SweepResult};
pub use erc::{run_erc, ErcConfig, ErcReport, RuleId, RuleViolation};
pub use error::{FlattenError, NetlistError, SimError, SpecError, ValueError};
pub use flatten::{flatten, FlatCircuit, FlatDevice, NodeId};
pub use mosfet::{mosfet_eval, DeviceEval, Region};
pub use netlist::{
    canonicalize, emit, parse_netlist, Diagnostic, Element, ElementKind, ModelCard, Netlist,
    Polarity, Severity, Span, SubcktDef,
};
pub use speccheck::{evaluate_spec, Check, CheckOutcome, Direction, SpecRequirement};
pub use value::{parse_value, Value};
