pub mod expr;
pub mod game;
pub mod grid;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod simulate;
pub mod singular;

pub use game::{Region, SolverParams};
pub use grid::Grid;
pub use model::{ProblemSpec, TerminalMode};

pub type ValueSurface = game::ValueSurface<f64>;
