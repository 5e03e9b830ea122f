//! Small numerical kernels shared by the model modules: Gamma function,
//! adaptive quadrature, an explicit Runge–Kutta integrator and bracketing
//! root finders.

mod gamma;
mod ode;
mod quadrature;
mod roots;

pub use gamma::gamma;
pub use ode::Dopri5;
pub use quadrature::{integrate, Quadrature};
pub use roots::{brent, expand_bracket_up};
