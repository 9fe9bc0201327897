//! Chebyshev node grids, cached Lagrange evaluation and derivatives, tail
//! slopes and the piecewise activation built from them.

mod bound;
mod grid;
mod piecewise;
mod wcp;

pub use bound::cheby_error_bound;
pub use grid::{lagrange_eval, lagrange_grad, make_grid, ChebyshevGrid, GradCache};
pub use piecewise::{
    cl_backward, cl_piecewise, tail_slopes, ClPiecewise, SlopeWeights, TailMode, TailSlopes,
};
pub use wcp::{chebyshev_terms, wcp_backward, wcp_eval};
