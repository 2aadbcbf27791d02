//! Higher-order likelihood inference with numerically solved matching priors
//! for a scalar interest parameter and a scalar nuisance parameter.

pub mod approx;
pub mod error;
pub mod inference;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod prior;

pub use error::{Error, Result};
pub use model::{exp_ratio_model, logistic_model, Dataset, ExpRatioModel, LogisticModel, Model, ParamPoint};
