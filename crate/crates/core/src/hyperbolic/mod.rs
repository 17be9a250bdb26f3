//! Poincaré-ball geometry and the learnable hyperbolic projection used by
//! the hyperbolic prototype classifier.
//!
//! The projection is `x = exp_0(A z)`: a linear map into the tangent space
//! at the origin followed by the exponential map. It is trained with a
//! distance-softmax loss against tangent-mean class prototypes.

mod ball;
mod projection;
mod train;

pub use ball::{exp_map0, log_map0, mobius_add, poincare_distance, BallPoint, ATANH_CLAMP, BALL_EPS};
pub use projection::{hyp_project, hyp_prototype, HypProjParams};
pub(crate) use ball::distance_unchecked;
pub use train::{
    class_prototypes, prototype_loss, prototype_loss_and_grad, train_hyp_projection, HypHistory, HypTrainConfig,
};


