//! Estimation and inference for the optimal value of a linear program
//!
//! ```text
//! B(θ) = min_x p'x  subject to  Mx >= c,   θ = (p, M, c)
//! ```
//!
//! when θ is only known through a noisy estimate θ̂. The plug-in value
//! B(θ̂) is discontinuous where the feasible set loses its interior, so the
//! crate provides alternatives that stay consistent there:
//!
//! * [`estimators`]: plug-in, exact-penalty, debiased penalty and
//!   set-expansion estimators, with data-driven penalty selection;
//! * [`inference`]: a sample-splitting confidence interval with an
//!   asymptotically normal pivot, plus a bootstrap fallback;
//! * [`geometry`]: δ-condition values, polytope condition numbers and
//!   L1-minorization checks;
//! * [`aicm`]: compiles treatment-effect assumptions (bounds, MTR, MIV and
//!   conditional variants) into LP parameters;
//! * [`montecarlo`]: seeded, parallel simulation studies.
//!
//! ```
//! use noisylp::{solve_lp, BoxBounds, LpParams, Matrix};
//!
//! // min x1  s.t.  x2 >= x1,  x2 <= x1,  x1 in [-1, 1]
//! let m = Matrix::from_rows(&[
//!     vec![-1.0, 1.0],
//!     vec![1.0, -1.0],
//!     vec![1.0, 0.0],
//!     vec![-1.0, 0.0],
//! ])?;
//! let lp = LpParams::new(vec![1.0, 0.0], m, vec![0.0, 0.0, -1.0, -1.0], BoxBounds::uniform(2, -2.0, 2.0))?;
//! let sol = solve_lp(&lp, true)?;
//! assert!((sol.value.unwrap() + 1.0).abs() < 1e-12);
//! # Ok::<(), noisylp::Error>(())
//! ```

pub mod aicm;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod inference;
pub mod linalg;
pub mod lp;
pub mod montecarlo;
pub mod rng;
mod simplex;

pub use error::{Error, Result};
pub use linalg::{inverse_vectorize, smallest_singular_value, Matrix};
pub use lp::{enumerate_vertices, solve_lp, BoxBounds, LpDocument, LpParams, LpSolution, Status, Vertex};
