//! Source-to-source loop transformations for a mini-C subset.
//!
//! Loop pragmas (`#pragma clang loop ...`) are parsed into a transformation
//! plan, applied to a schedule tree with instance-level legality checking,
//! and the result is emitted as C, optionally guarded by a runtime overlap
//! check with the original code as fallback.

pub mod affine;
pub mod cli;
pub mod directives;
pub mod frontend;
pub mod interp;
pub mod legality;
pub mod pipeline;
pub mod codegen;
pub mod sched;
pub mod transforms;
