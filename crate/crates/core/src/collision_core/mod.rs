//! Hard-sphere linearized collision operator and related machinery.

pub mod basis;
pub mod gamma;
pub mod grid;
pub mod initial_layer;
pub mod kernel;
pub mod operator;
pub mod params;
pub mod spectrum;
pub mod weighted;

pub use basis::{basis_values, project_null, MacroState, NullBasis};
pub use gamma::{gamma, GammaOperator};
pub use grid::VelocityGrid;
pub use initial_layer::{initial_layer_solve, InitialLayerResult, Propagator};
pub use kernel::{collision_frequency, kernel_value};
pub use operator::{assemble_collision, null_residuals_matrix_free, KernelOperator};
pub use params::{CollisionParams, Normalization};
pub use spectrum::{coercivity_lanczos, CoercivityReport};
pub use weighted::{weighted_kernel_integral, WeightedIntegral};
