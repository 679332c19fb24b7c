pub mod ddiff;
pub mod error;
pub mod experiment;
pub mod funcmodel;
pub mod linalg;
pub mod moi;
pub mod perturb;
pub mod residual;
pub mod rng;

pub use error::{Error, Result};
pub use funcmodel::FunctionModel;
pub use linalg::{ComplexMatrix, EigenDecomposition, HermitianMatrix, SchattenIndex, C64};
