//! Applications: random projections, ℓ1 descent cones, small-ball lower
//! bounds and basis pursuit denoising.

pub mod cone;
pub mod jl;
pub mod recovery;
pub mod small_ball;
