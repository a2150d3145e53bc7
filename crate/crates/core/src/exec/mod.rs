//! Operator plans, their lowering from IR, and execution.

mod dot;
mod executor;
mod interp;
mod lower;
mod program;
mod trace;

pub use dot::to_dot;
pub use executor::{build_executor, Executor, Tables};
pub use interp::reference_interpreter;
pub use lower::plan_operators;
pub use program::{Assign, Instr, OperatorPlan, OutputColumn, ProgramBuilder, SlotId, Step};
pub use trace::{KernelEvent, OperatorEvent, ProfileTrace};

#[cfg(test)]
mod tests;
