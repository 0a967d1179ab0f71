//! Order theory and construction of operator-splitting schemes.
//!
//! A splitting scheme `e^{α_1 T f_0} e^{β_1 T^{|c_1|} f_{c_1}} ⋯` is treated as the
//! formal flow of a control system driven by Dirac masses. Its order is read off
//! from the first-kind coordinates of that flow in a Hall basis of the free Lie
//! algebra over `X0, X1`; coercive coordinates give order barriers, and a
//! least-squares search over the same coordinates constructs new schemes.
//!
//! - [`freealg`]: truncated noncommutative series, `exp`, `log`, BCH.
//! - [`hall`]: Hall sets, the `B*` basis, Lie coordinates.
//! - [`scheme`]: schemes, Dirac controls, exact order checking.
//! - [`xi`]: second-kind coordinates along a control.
//! - [`obstruction`]: coercivity identities and order bounds.
//! - [`search`]: multi-start Levenberg–Marquardt scheme construction.
//! - [`numverify`]: empirical convergence orders on test systems.
//! - [`cli`]: the `splitctl` command line.

pub mod cli;
pub mod dense;
pub mod error;
pub mod freealg;
pub mod hall;
pub mod linalg;
pub mod numverify;
pub mod obstruction;
pub mod scalar;
pub mod scheme;
pub mod search;
pub mod systems;
pub mod upoly;
pub mod xi;

pub use error::{Error, Result};
