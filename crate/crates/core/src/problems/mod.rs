//! Concrete compositional problems.

mod identity;
mod portfolio;
mod quad;

pub use identity::{IdentityProblem, NoisyQuadratic, OuterOracle};
pub use portfolio::{
    portfolio_objective_compositional, PortfolioData, PortfolioJacobian, PortfolioProblem,
    ReturnsRegime, SyntheticReturns,
};
pub use quad::{NoiseScales, QuadCompose};
