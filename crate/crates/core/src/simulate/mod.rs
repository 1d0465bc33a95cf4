//! Path simulation: exact SSA for networks, Euler–Maruyama for diffusions,
//! coupled pairs for finite differences, and path functionals.

pub mod grid;
pub mod jump;
pub mod observable;

pub use grid::{coupled_pair_euler, euler_path, GridObserver, GridTrajectory};
pub use jump::{channel_stream_path, coupled_pair_ssa, ssa_path, JumpObserver, JumpTrajectory};
pub use observable::{grid_ergodic, grid_terminal, jump_ergodic, jump_terminal, Observables};
