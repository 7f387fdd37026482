//! Degree-of-freedom bookkeeping and patch-local assembly.

mod dofs;
mod interp;
mod local;

pub use dofs::{classify_dofs, corner_dof, side_dof, DofClass, DofTable, LayerKind, Multiplier, PatchDofs};
pub use interp::{interpolate, interpolate_boundary_free, patch_error, ErrorNorms, Exact};
pub use local::{assemble_local, assemble_tensor, AssemblyOptions, LocalSystem, Source};
