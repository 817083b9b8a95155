//! Parisi-type functionals for the vector-spin Lagrangian: terminal
//! conditions, the nested log-expectation recursion, the functionals at zero
//! and positive temperature, and their numerical minimization.

mod compare;
mod control;
mod functional;
mod minimize;
mod pde;
mod recursion;
mod terminal;
mod types;

pub use compare::{compare_terminals, cube_curvature_constant, jensen_lower_bound_scalar, log_radial_integral, TerminalComparison};
pub use control::{ac_simulate, log_log_slope, moment_diagnostic, root_value_scalar, AcReport, Control, MomentDiagnostic, ScalarTerminal, Temperature};
pub use functional::{integral_term, parisi_beta, parisi_inf, ParisiValue};
pub use minimize::{minimize_parisi, MinimizeOptions, MinimizeResult, Mode, TraceEntry};
pub use pde::{pde_residual, pde_residual_with, Mesh, PdeReport};
pub use recursion::{recursion, FnTerminal, PositiveTemperature, RecursionValue, Terminal, ZeroTemperature};
pub use terminal::{argmax_radius, terminal_beta, terminal_beta_detail, terminal_beta_scalar, terminal_inf, BetaTerminal};
pub use types::{DiscreteMeasure, Flavor, LagrangeMultiplier, ParisiDocument, Path, QuadMode, QuadratureSpec};
