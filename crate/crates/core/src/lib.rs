//! Adaptive multi-objective consensus-based optimization.
//!
//! `N` particles each carry a position `X^i` in the search space and a weight
//! vector `W^i` on the probability simplex. Positions follow a consensus
//! drift-diffusion towards the softmax minimizer of their own Chebyshev
//! sub-problem; weights repel each other through a two-body potential on the
//! objective images so the particles spread over the Pareto front.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod objectives;
pub mod points;
pub mod potentials;
pub mod reference;
pub mod scalar;
pub mod scalarization;
pub mod simplex;

pub use dynamics::{
    diffusion_matrix, iterate, partition_batches, sample_batch, step_positions, step_weights_2d,
    step_weights_general, Diffusion, Solver, SolverConfig, Swarm, SwarmView, WeightRule,
};
pub use error::{Error, Result};
pub use metrics::{
    gd, hypervolume_2d, igd, mean_field_error, MetricsEvaluator, MetricsRecord, ReferenceFront,
};
pub use objectives::{
    dist_to_box, do2dk_eval, front_chart, lame_eval, EdgeMinimizer, FrontChart, Objective, Problem,
};
pub use points::Points;
pub use potentials::{energy, PotentialKind, PotentialSpec};
pub use reference::{
    chart_jacobian, flow_in_simplex, flow_on_front, generate_reference, FlowResult,
    FrontFlowConfig, StepControl,
};
pub use scalar::Scalar;
pub use scalarization::{chebyshev, consensus_point};
pub use simplex::{project_simplex, uniform_weights, WeightVector};

pub type Points64 = Points<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type Problem64 = Problem<f64>;
pub type PotentialSpec64 = PotentialSpec<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type Swarm64 = Swarm<f64>;
pub type ReferenceFront64 = ReferenceFront<f64>;
pub type MetricsRecord64 = MetricsRecord<f64>;
pub type MetricsEvaluator64 = MetricsEvaluator<f64>;
pub type FrontChart64 = FrontChart<f64>;

pub type Points32 = Points<f32>;
pub type Problem32 = Problem<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type Swarm32 = Swarm<f32>;
