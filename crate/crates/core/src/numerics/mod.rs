//! Generic numerical building blocks: quadrature, ODE integration, root
//! bracketing and simplex minimisation.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod simplex;
